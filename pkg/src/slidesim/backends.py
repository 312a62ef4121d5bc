"""Pluggable patch-embedding backends.

A backend is any deterministic function from a uint8 RGB patch batch of
shape (n, s, s, 3) to float32 feature vectors of shape (n, dim): identical
input bytes must yield identical output vectors. The numerical pipeline
never depends on which backend produced a store, so the whole repo is
testable with the cheap stub backend when no model graph is available.

Model-graph backends (ONNX, TorchScript) read their input preprocessing
from a ``preprocess.json`` next to the graph file:

    {"scale": 0.00392156862745098,
     "mean": [0.485, 0.456, 0.406],
     "std": [0.229, 0.224, 0.225],
     "layout": "NCHW"}

Pixels are scaled, normalized per channel, and transposed to the declared
layout before inference.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import BackendError

DEFAULT_OUTPUT_DIM = 2048
PREPROCESS_FILENAME = "preprocess.json"


class InferenceBackend:
    """Base contract: deterministic patch batches in, feature vectors out."""

    name = "base"

    @property
    def output_dim(self) -> int:
        raise NotImplementedError

    def embed_batch(self, pixels: np.ndarray) -> np.ndarray:
        """Map (n, s, s, 3) uint8 pixels to (n, output_dim) float32 vectors."""
        raise NotImplementedError

    def _check_batch(self, pixels: np.ndarray) -> None:
        if pixels.ndim != 4 or pixels.shape[3] != 3 or pixels.shape[1] != pixels.shape[2]:
            raise BackendError(f"expected (n, s, s, 3) pixel batch, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            raise BackendError(f"expected uint8 pixels, got {pixels.dtype}")


class StubBackend(InferenceBackend):
    """Seeded random projection of block-averaged pixels.

    Patches are mean-pooled to a ``grid x grid x 3`` summary and projected
    through a fixed Gaussian matrix drawn once from the seed, so the output
    correlates with patch color and texture while remaining fast enough for
    test corpora. Output components are signed.
    """

    name = "stub"

    def __init__(self, seed: int = 0, output_dim: int = DEFAULT_OUTPUT_DIM, grid: int = 8):
        if output_dim < 1:
            raise BackendError(f"output_dim must be positive, got {output_dim}")
        self.seed = seed
        self.grid = grid
        self._dim = output_dim
        in_dim = grid * grid * 3
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((in_dim, output_dim)) / np.sqrt(in_dim)

    @property
    def output_dim(self) -> int:
        return self._dim

    def embed_batch(self, pixels: np.ndarray) -> np.ndarray:
        self._check_batch(pixels)
        n, side = pixels.shape[0], pixels.shape[1]
        if side % self.grid != 0:
            raise BackendError(
                f"patch side {side} is not divisible by pooling grid {self.grid}"
            )
        block = side // self.grid
        pooled = (
            pixels.astype(np.float64)
            .reshape(n, self.grid, block, self.grid, block, 3)
            .mean(axis=(2, 4))
            .reshape(n, -1)
        )
        return (pooled @ self._projection).astype(np.float32)


def load_preprocess(path: Path) -> dict:
    """Read and sanity-check a model graph's preprocessing contract."""
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BackendError(f"cannot read preprocessing metadata {path}: {exc}") from exc
    for key in ("scale", "mean", "std", "layout"):
        if key not in meta:
            raise BackendError(f"{path}: missing preprocessing key {key!r}")
    if meta["layout"] not in ("NCHW", "NHWC"):
        raise BackendError(f"{path}: unsupported layout {meta['layout']!r}")
    if len(meta["mean"]) != 3 or len(meta["std"]) != 3:
        raise BackendError(f"{path}: mean/std must have 3 channels")
    return meta


def _preprocess(pixels: np.ndarray, meta: dict) -> np.ndarray:
    x = pixels.astype(np.float32) * np.float32(meta["scale"])
    x = (x - np.asarray(meta["mean"], dtype=np.float32)) / np.asarray(meta["std"], dtype=np.float32)
    if meta["layout"] == "NCHW":
        x = np.ascontiguousarray(x.transpose(0, 3, 1, 2))
    return x


def _preprocess_path_for(model_path: Path, preprocess_path: str | Path | None) -> Path:
    if preprocess_path is not None:
        return Path(preprocess_path)
    return model_path.parent / PREPROCESS_FILENAME


class OnnxBackend(InferenceBackend):
    """Runs an exported ONNX graph through onnxruntime."""

    name = "onnx"

    def __init__(self, model_path: str | Path, preprocess_path: str | Path | None = None):
        try:
            import onnxruntime as ort
        except ImportError as exc:
            raise BackendError(
                "onnxruntime is not installed; install the 'onnx' extra or use "
                "--backend stub"
            ) from exc
        model_path = Path(model_path)
        if not model_path.is_file():
            raise BackendError(f"model graph not found: {model_path}")
        self._meta = load_preprocess(_preprocess_path_for(model_path, preprocess_path))
        opts = ort.SessionOptions()
        opts.execution_mode = ort.ExecutionMode.ORT_SEQUENTIAL
        try:
            self._session = ort.InferenceSession(
                str(model_path), sess_options=opts, providers=["CPUExecutionProvider"]
            )
        except Exception as exc:  # onnxruntime raises its own hierarchy
            raise BackendError(f"cannot load ONNX graph {model_path}: {exc}") from exc
        inputs = self._session.get_inputs()
        outputs = self._session.get_outputs()
        if len(inputs) != 1 or len(outputs) != 1:
            raise BackendError("expected a single-input single-output graph")
        self._input_name = inputs[0].name
        self._output_name = outputs[0].name
        probe = np.zeros((1, 224, 224, 3), dtype=np.uint8)
        self._dim = int(self._run(_preprocess(probe, self._meta)).reshape(1, -1).shape[1])

    def _run(self, x: np.ndarray) -> np.ndarray:
        (out,) = self._session.run([self._output_name], {self._input_name: x})
        return np.asarray(out)

    @property
    def output_dim(self) -> int:
        return self._dim

    def embed_batch(self, pixels: np.ndarray) -> np.ndarray:
        self._check_batch(pixels)
        x = _preprocess(pixels, self._meta)
        return _flatten_features(self._run(x), pixels.shape[0])


class TorchscriptBackend(InferenceBackend):
    """Runs a traced TorchScript graph; fallback when no ONNX runtime exists."""

    name = "torchscript"

    def __init__(self, model_path: str | Path, preprocess_path: str | Path | None = None):
        try:
            import torch
        except ImportError as exc:
            raise BackendError("torch is not installed; use --backend stub") from exc
        model_path = Path(model_path)
        if not model_path.is_file():
            raise BackendError(f"model graph not found: {model_path}")
        self._meta = load_preprocess(_preprocess_path_for(model_path, preprocess_path))
        self._torch = torch
        try:
            self._module = torch.jit.load(str(model_path), map_location="cpu")
        except Exception as exc:
            raise BackendError(f"cannot load TorchScript graph {model_path}: {exc}") from exc
        self._module.eval()
        with torch.no_grad():
            probe_side = 224
            probe = torch.zeros(1, 3, probe_side, probe_side)
            out = self._module(probe)
        self._dim = int(out.reshape(1, -1).shape[1])

    @property
    def output_dim(self) -> int:
        return self._dim

    def embed_batch(self, pixels: np.ndarray) -> np.ndarray:
        self._check_batch(pixels)
        x = _preprocess(pixels, self._meta)
        torch = self._torch
        with torch.no_grad():
            out = self._module(torch.from_numpy(x)).numpy()
        return _flatten_features(np.asarray(out), pixels.shape[0])


def _flatten_features(out: np.ndarray, n: int) -> np.ndarray:
    """Squeeze trailing singleton spatial axes from (n, dim[, 1, 1]) outputs."""
    if out.shape[0] != n:
        raise BackendError(f"backend returned batch {out.shape[0]}, expected {n}")
    flat = out.reshape(n, -1).astype(np.float32)
    return flat


def create_backend(
    kind: str,
    seed: int = 0,
    model: str | Path | None = None,
    preprocess: str | Path | None = None,
    output_dim: int = DEFAULT_OUTPUT_DIM,
) -> InferenceBackend:
    """Instantiate a backend by kind: stub, onnx, or torchscript."""
    if kind == "stub":
        return StubBackend(seed=seed, output_dim=output_dim)
    if kind == "onnx":
        if model is None:
            raise BackendError("--backend onnx requires --model")
        return OnnxBackend(model, preprocess)
    if kind == "torchscript":
        if model is None:
            raise BackendError("--backend torchscript requires --model")
        return TorchscriptBackend(model, preprocess)
    raise BackendError(f"unknown backend kind {kind!r}")
