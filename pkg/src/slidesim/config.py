"""Pipeline configuration with canonical defaults.

Defaults reproduce the reference operating point: 224-pixel patches, the
four canonical magnifications, 2048-dimensional embeddings reduced to 128
components, and top-3/top-5 search evaluation. A JSON config file may
override any subset of fields; CLI flags override the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import SlidesimError
from .pyramid import Magnification, MagnificationRegistry
from .tissue import FilterConfig

BACKEND_KINDS = ("stub", "onnx", "torchscript", "precomputed")


@dataclass(frozen=True)
class BackendConfig:
    """Which embedding backend to run and where its inputs live."""

    kind: str = "stub"
    output_dim: int = 2048
    model: str | None = None
    preprocess: str | None = None
    source: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise SlidesimError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.output_dim < 1:
            raise SlidesimError(f"backend output_dim must be positive, got {self.output_dim}")
        if self.kind in ("onnx", "torchscript") and not self.model:
            raise SlidesimError(f"backend {self.kind!r} requires a model path")
        if self.kind == "precomputed" and not self.source:
            raise SlidesimError("backend 'precomputed' requires a source store path")


@dataclass(frozen=True)
class PipelineConfig:
    patch_size: int = 224
    magnifications: tuple[str, ...] = ("1x", "2.5x", "5x", "10x")
    filter: FilterConfig = field(default_factory=FilterConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    n_f: int = 128
    top_k: tuple[int, ...] = (3, 5)
    workers: int = 1
    seed: int = 0
    extra_magnifications: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise SlidesimError(f"patch_size must be positive, got {self.patch_size}")
        if not self.magnifications:
            raise SlidesimError("magnifications list must not be empty")
        if self.n_f < 1:
            raise SlidesimError(f"n_f must be positive, got {self.n_f}")
        if not self.top_k or any(k < 1 for k in self.top_k):
            raise SlidesimError(f"top_k must hold positive ints, got {self.top_k}")
        if self.workers < 1:
            raise SlidesimError(f"workers must be >= 1, got {self.workers}")

    def registry(self) -> MagnificationRegistry:
        extra = tuple(Magnification(label, scale) for label, scale in self.extra_magnifications)
        return MagnificationRegistry(extra)

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Apply non-None overrides, descending into filter/backend fields."""
        filter_updates = {
            key: overrides.pop(key)
            for key in ("a", "b", "bright_fraction_threshold", "mode", "literal_ratio_constant")
            if overrides.get(key) is not None
        }
        backend_updates = {
            key[len("backend_") :]: overrides.pop(key)
            for key in ("backend_kind", "backend_model", "backend_preprocess", "backend_source", "backend_output_dim")
            if overrides.get(key) is not None
        }
        clean = {k: v for k, v in overrides.items() if v is not None}
        cfg = self
        if filter_updates:
            cfg = replace(cfg, filter=replace(cfg.filter, **filter_updates))
        if backend_updates:
            cfg = replace(cfg, backend=replace(cfg.backend, **backend_updates))
        if clean:
            cfg = replace(cfg, **clean)
        return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    """Build a config from a JSON file; None loads pure defaults."""
    if path is None:
        return PipelineConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SlidesimError(f"cannot read config {path}: {exc}") from exc
    try:
        kwargs: dict[str, Any] = {}
        if "patch_size" in raw:
            kwargs["patch_size"] = int(raw["patch_size"])
        if "magnifications" in raw:
            kwargs["magnifications"] = tuple(str(m) for m in raw["magnifications"])
        if "filter" in raw:
            kwargs["filter"] = FilterConfig(**raw["filter"])
        if "backend" in raw:
            kwargs["backend"] = BackendConfig(**raw["backend"])
        if "n_f" in raw:
            kwargs["n_f"] = int(raw["n_f"])
        if "top_k" in raw:
            kwargs["top_k"] = tuple(int(k) for k in raw["top_k"])
        if "workers" in raw:
            kwargs["workers"] = int(raw["workers"])
        if "seed" in raw:
            kwargs["seed"] = int(raw["seed"])
        if "extra_magnifications" in raw:
            kwargs["extra_magnifications"] = tuple(
                (str(m["label"]), float(m["scale"])) for m in raw["extra_magnifications"]
            )
        return PipelineConfig(**kwargs)
    except (KeyError, TypeError, ValueError) as exc:
        raise SlidesimError(f"malformed config {path}: {exc}") from exc
