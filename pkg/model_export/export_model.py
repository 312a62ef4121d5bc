#!/usr/bin/env python3
"""One-shot export of a truncated ResNet-50 patch feature extractor.

Produces three artifacts for the similarity engine:

  * a portable model graph (ONNX when the exporter toolchain is available,
    otherwise a traced TorchScript file next to the requested path),
  * ``preprocess.json`` documenting the exact input contract the graph
    expects (scale, per-channel normalization, layout) plus the weight and
    format provenance,
  * ``oracles.jsonl`` with one golden record per fixture patch: fixture
    name, sha256 of the file bytes, and the 2048-float feature vector from
    an in-framework forward pass.

The network is cut after global average pooling, so outputs are
non-negative 2048-vectors. Weights: ``--weights pretrained`` downloads the
standard classification checkpoint and fails hard if it cannot;
``--weights random`` seeds the default initialization instead; ``auto``
tries pretrained and falls back to random, recording which one was used.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image

IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]
SCALE = 1.0 / 255.0
INPUT_SIDE = 224
OUTPUT_DIM = 2048
VERIFY_TOLERANCE = 1e-5


class PatchFeatures(nn.Module):
    """ResNet-50 trunk ending at the global average pool, flattened."""

    def __init__(self, backbone: nn.Module):
        super().__init__()
        self.body = nn.Sequential(*list(backbone.children())[:-1])
        self.flatten = nn.Flatten(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.flatten(self.body(x))


def build_feature_extractor(weights_mode: str, seed: int) -> tuple[nn.Module, str]:
    from torchvision.models import resnet50

    provenance = None
    backbone = None
    if weights_mode in ("auto", "pretrained"):
        try:
            from torchvision.models import ResNet50_Weights

            backbone = resnet50(weights=ResNet50_Weights.IMAGENET1K_V2)
            provenance = "torchvision ResNet50_Weights.IMAGENET1K_V2"
        except Exception as exc:
            if weights_mode == "pretrained":
                raise SystemExit(f"error: cannot obtain pretrained weights: {exc}")
            print(f"note: pretrained weights unavailable ({exc}); "
                  f"falling back to seeded random init", file=sys.stderr)
    if backbone is None:
        torch.manual_seed(seed)
        backbone = resnet50(weights=None)
        provenance = f"random-init(seed={seed}); pretrained weights unobtainable in build env"
    model = PatchFeatures(backbone)
    model.eval()
    return model, provenance


def preprocess_batch(pixels: np.ndarray) -> torch.Tensor:
    """uint8 NHWC pixels -> normalized float32 NCHW tensor.

    Must mirror the published contract operation for operation (multiply by
    the scale constant, then per-channel shift and divide) so an engine
    following ``preprocess.json`` feeds the graph bit-identical inputs.
    """
    x = pixels.astype(np.float32) * np.float32(SCALE)
    x = (x - np.asarray(IMAGENET_MEAN, dtype=np.float32)) / np.asarray(IMAGENET_STD, dtype=np.float32)
    return torch.from_numpy(np.ascontiguousarray(x.transpose(0, 3, 1, 2)))


def export_graph(model: nn.Module, out_path: Path) -> tuple[Path, str]:
    """Write the graph; ONNX first, TorchScript as the fallback format."""
    out_path.parent.mkdir(parents=True, exist_ok=True)
    example = torch.zeros(1, 3, INPUT_SIDE, INPUT_SIDE)
    try:
        torch.onnx.export(
            model,
            (example,),
            str(out_path),
            input_names=["pixels"],
            output_names=["features"],
            dynamic_axes={"pixels": {0: "batch"}, "features": {0: "batch"}},
            dynamo=False,
        )
        return out_path, "onnx"
    except Exception as exc:
        print(f"note: ONNX export unavailable ({exc}); writing TorchScript instead",
              file=sys.stderr)
    traced = torch.jit.trace(model, example)
    ts_path = out_path.with_suffix(".pt")
    traced.save(str(ts_path))
    return ts_path, "torchscript"


def verify_graph(model: nn.Module, graph_path: Path, fmt: str, pixels: np.ndarray) -> None:
    """Reload the exported graph and compare against the eager forward pass."""
    x = preprocess_batch(pixels)
    with torch.no_grad():
        expected = model(x).numpy()
    if expected.shape != (pixels.shape[0], OUTPUT_DIM):
        raise SystemExit(f"error: eager output shape {expected.shape}, expected (n, {OUTPUT_DIM})")
    if fmt == "onnx":
        try:
            import onnxruntime as ort
        except ImportError:
            print("note: onnxruntime not installed; skipping reload verification",
                  file=sys.stderr)
            return
        session = ort.InferenceSession(str(graph_path), providers=["CPUExecutionProvider"])
        (produced,) = session.run(None, {"pixels": x.numpy()})
    else:
        reloaded = torch.jit.load(str(graph_path), map_location="cpu")
        reloaded.eval()
        with torch.no_grad():
            produced = reloaded(x).numpy()
    rel = np.abs(produced - expected) / np.maximum(np.abs(expected), 1e-3)
    if rel.max() > VERIFY_TOLERANCE:
        raise SystemExit(
            f"error: export verification mismatch: max relative error {rel.max():.3e} "
            f"exceeds {VERIFY_TOLERANCE}"
        )


def write_preprocess(path: Path, fmt: str, graph_path: Path, provenance: str) -> None:
    import torchvision

    meta = {
        "scale": SCALE,
        "mean": IMAGENET_MEAN,
        "std": IMAGENET_STD,
        "layout": "NCHW",
        "input_side": INPUT_SIDE,
        "output_dim": OUTPUT_DIM,
        "graph_format": fmt,
        "graph_file": graph_path.name,
        "architecture": "resnet50 truncated after global average pooling",
        "weights": provenance,
        "torch_version": torch.__version__,
        "torchvision_version": torchvision.__version__,
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def emit_oracles(model: nn.Module, fixtures_dir: Path, out_path: Path) -> int:
    fixtures = sorted(fixtures_dir.glob("*.png"))
    if not fixtures:
        raise SystemExit(f"error: no fixture patches found under {fixtures_dir}")
    lines = []
    for fixture in fixtures:
        blob = fixture.read_bytes()
        try:
            pixels = np.asarray(Image.open(fixture).convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise SystemExit(f"error: cannot decode fixture {fixture}: {exc}")
        if pixels.shape != (INPUT_SIDE, INPUT_SIDE, 3):
            raise SystemExit(f"error: fixture {fixture.name} has shape {pixels.shape}")
        with torch.no_grad():
            vector = model(preprocess_batch(pixels[np.newaxis]))[0].numpy()
        if not np.isfinite(vector).all() or vector.min() < 0.0:
            raise SystemExit(f"error: fixture {fixture.name} produced an invalid vector")
        record = {
            "fixture_name": fixture.name,
            "input_checksum": hashlib.sha256(blob).hexdigest(),
            "vector": [float(v) for v in vector],
        }
        lines.append(json.dumps(record, sort_keys=True))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="model graph output path (.onnx)")
    parser.add_argument("--fixtures", required=True, help="directory of fixture patches")
    parser.add_argument("--oracles", required=True, help="oracle records output (.jsonl)")
    parser.add_argument("--preprocess-out", help="metadata path; defaults next to the graph")
    parser.add_argument("--weights", choices=["auto", "pretrained", "random"], default="auto")
    parser.add_argument("--seed", type=int, default=0, help="seed for random-init weights")
    args = parser.parse_args(argv)

    model, provenance = build_feature_extractor(args.weights, args.seed)
    graph_path, fmt = export_graph(model, Path(args.out))
    print(f"graph: {graph_path} ({fmt})")

    fixtures_dir = Path(args.fixtures)
    probe = sorted(fixtures_dir.glob("*.png"))
    if probe:
        pixels = np.asarray(Image.open(probe[0]).convert("RGB"), dtype=np.uint8)[np.newaxis]
    else:
        pixels = np.zeros((1, INPUT_SIDE, INPUT_SIDE, 3), dtype=np.uint8)
    verify_graph(model, graph_path, fmt, pixels)

    preprocess_path = (
        Path(args.preprocess_out) if args.preprocess_out else graph_path.parent / "preprocess.json"
    )
    write_preprocess(preprocess_path, fmt, graph_path, provenance)
    print(f"preprocess: {preprocess_path}")

    count = emit_oracles(model, fixtures_dir, Path(args.oracles))
    print(f"oracles: {args.oracles} ({count} records)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
