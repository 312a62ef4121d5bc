"""Seeded synthetic slide corpora with class-separable tissue textures.

Each class gets a distinct base color plus a stripe orientation and
frequency; each slide adds seeded per-slide variation (color jitter, stripe
phase, blob layout, smooth sinusoidal fields) on top of its class
signature. Tissue blobs sit on a pure white background so the standard
bright-fraction tissue filter separates them cleanly.

A slide's scene is a single analytic function of normalized coordinates,
rendered at every pyramid level's resolution, so levels are mutually
coherent and generation is byte-reproducible for a given seed.
"""

from __future__ import annotations

import colorsys
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CorpusSpecError
from .pyramid import DEFAULT_REGISTRY, LEVELS_FILENAME, MagnificationRegistry

BACKGROUND_VALUE = 255


@dataclass(frozen=True)
class CorpusSpec:
    """Shape of a synthetic corpus: classes, slides per class, level sizes.

    ``levels`` maps magnification labels to (width, height) pixel sizes.
    """

    classes: tuple[str, ...]
    slides_per_class: int
    levels: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.classes) < 2:
            raise CorpusSpecError(f"need at least 2 classes, got {len(self.classes)}")
        if len(set(self.classes)) != len(self.classes):
            raise CorpusSpecError(f"class names must be unique: {self.classes}")
        if self.slides_per_class < 2:
            raise CorpusSpecError(
                f"need at least 2 slides per class, got {self.slides_per_class}"
            )
        if not self.levels:
            raise CorpusSpecError("need at least one pyramid level")
        for label, (width, height) in self.levels.items():
            if width <= 0 or height <= 0:
                raise CorpusSpecError(f"level {label!r} has degenerate size {width}x{height}")

    @classmethod
    def from_json(cls, path: str | Path) -> "CorpusSpec":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CorpusSpecError(f"cannot read corpus spec {path}: {exc}") from exc
        try:
            return cls(
                classes=tuple(raw["classes"]),
                slides_per_class=int(raw["slides_per_class"]),
                levels={str(k): (int(v[0]), int(v[1])) for k, v in raw["levels"].items()},
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise CorpusSpecError(f"malformed corpus spec {path}: {exc}") from exc


@dataclass(frozen=True)
class _SlideScene:
    """Seeded parameters describing one slide's analytic scene."""

    base_color: np.ndarray  # (3,) float64 in [0, 255]
    stripe_angle: float
    stripe_freq: float
    stripe_phase: float
    stripe_amp: float
    ellipses: tuple[tuple[float, float, float, float], ...]  # (cx, cy, rx, ry)
    field_params: tuple[tuple[float, float, float, float, float], ...]  # (fu, fv, phase, amp, chan_mix)


def _class_palette(n_classes: int) -> list[np.ndarray]:
    """Evenly spaced saturated mid-value colors, one per class."""
    colors = []
    for i in range(n_classes):
        rgb = colorsys.hsv_to_rgb(i / n_classes, 0.70, 0.55)
        colors.append(np.array(rgb, dtype=np.float64) * 255.0)
    return colors


def _make_scene(class_idx: int, n_classes: int, rng: np.random.Generator) -> _SlideScene:
    base = _class_palette(n_classes)[class_idx] + rng.normal(0.0, 5.0, size=3)
    angle = np.pi * class_idx / n_classes + rng.normal(0.0, 0.04)
    freq = 6.0 + 3.0 * class_idx
    # One dominant blob keeps the whole-slide view mostly tissue, so even a
    # single-patch level survives the background filter.
    main = (
        rng.uniform(0.45, 0.55),
        rng.uniform(0.45, 0.55),
        rng.uniform(0.38, 0.46),
        rng.uniform(0.38, 0.46),
    )
    satellites = tuple(
        (
            rng.uniform(0.15, 0.85),
            rng.uniform(0.15, 0.85),
            rng.uniform(0.10, 0.18),
            rng.uniform(0.10, 0.18),
        )
        for _ in range(2)
    )
    fields = tuple(
        (
            rng.uniform(2.0, 5.0),
            rng.uniform(2.0, 5.0),
            rng.uniform(0.0, 2.0 * np.pi),
            rng.uniform(4.0, 9.0),
            rng.uniform(-1.0, 1.0),
        )
        for _ in range(3)
    )
    return _SlideScene(
        base_color=base,
        stripe_angle=float(angle),
        stripe_freq=freq,
        stripe_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        stripe_amp=float(rng.uniform(20.0, 26.0)),
        ellipses=(main,) + satellites,
        field_params=fields,
    )


def _render_level(scene: _SlideScene, width: int, height: int) -> np.ndarray:
    """Evaluate the scene on this level's pixel grid. Returns uint8 RGB.

    Works in float32 on broadcast row/column vectors; gigapixel levels are
    out of scope, so a few full-size sin fields per level are affordable.
    """
    u = ((np.arange(width, dtype=np.float32) + 0.5) / width)[np.newaxis, :]
    v = ((np.arange(height, dtype=np.float32) + 0.5) / height)[:, np.newaxis]

    mask = np.zeros((height, width), dtype=bool)
    for cx, cy, rx, ry in scene.ellipses:
        mask |= ((u - cx) / rx) ** 2 + ((v - cy) / ry) ** 2 <= 1.0

    tau = np.float32(2.0 * np.pi)
    stripes = np.float32(scene.stripe_amp) * np.sin(
        tau * np.float32(scene.stripe_freq)
        * (u * np.float32(np.cos(scene.stripe_angle)) + v * np.float32(np.sin(scene.stripe_angle)))
        + np.float32(scene.stripe_phase)
    )
    texture = stripes
    chan_shift = np.zeros((height, width), dtype=np.float32)
    for fu, fv, phase, amp, chan_mix in scene.field_params:
        wave = np.float32(amp) * np.sin(tau * (np.float32(fu) * u + np.float32(fv) * v) + np.float32(phase))
        texture = texture + wave
        chan_shift = chan_shift + np.float32(chan_mix) * wave

    img = np.empty((height, width, 3), dtype=np.float32)
    mix = (0.6, -0.2, -0.4)  # spread the shift across channels
    for ch in range(3):
        img[:, :, ch] = np.float32(scene.base_color[ch]) + texture + np.float32(mix[ch]) * chan_shift
    # Tissue pixels stay well below the bright luminance band.
    np.clip(img, 25.0, 185.0, out=img)
    img[~mask] = BACKGROUND_VALUE
    return np.rint(img).astype(np.uint8)


def generate_synthetic_corpus(
    spec: CorpusSpec,
    out_dir: str | Path,
    seed: int = 0,
    registry: MagnificationRegistry = DEFAULT_REGISTRY,
) -> Path:
    """Write a synthetic corpus under ``out_dir`` and return the manifest path.

    Layout: one pyramid directory per slide (``<class>_<index>/``) holding a
    PNG per level and a ``levels.json``, plus ``manifest.csv`` at the root.
    Identical (spec, seed) pairs produce byte-identical output.
    """
    for label in spec.levels:
        registry.get(label)  # fail early on unknown magnification labels
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.csv"
    rows: list[tuple[str, str, str]] = []
    for class_idx, class_name in enumerate(spec.classes):
        for slide_idx in range(spec.slides_per_class):
            rng = np.random.default_rng([seed, class_idx, slide_idx])
            scene = _make_scene(class_idx, len(spec.classes), rng)
            slide_id = f"{class_name}_{slide_idx:02d}"
            pyramid_dir = out_dir / slide_id
            pyramid_dir.mkdir(exist_ok=True)
            entries = []
            for label, (width, height) in spec.levels.items():
                img = _render_level(scene, width, height)
                filename = f"level_{label}.png"
                # low compression effort: these are scratch corpora, and the
                # chosen level must stay fixed for byte-reproducibility
                Image.fromarray(img).save(pyramid_dir / filename, format="PNG", compress_level=1)
                entries.append(
                    {"magnification": label, "width": width, "height": height, "file": filename}
                )
            (pyramid_dir / LEVELS_FILENAME).write_text(
                json.dumps(entries, indent=2) + "\n", encoding="utf-8"
            )
            rows.append((slide_id, class_name, slide_id))
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slide_id", "label", "pyramid_dir"])
        writer.writerows(rows)
    return manifest_path
