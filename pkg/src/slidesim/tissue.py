"""Background patch detection from a three-bin luminance histogram.

Luminance values are split into dark ``[0, a]``, mid ``(a, b]``, and bright
``(b, 255]`` bins. The default decision rule flags a patch as background
when its bright-pixel fraction exceeds a threshold, which matches the white
background of scanned slides. An alternative ``literal-ratio`` mode flags a
patch when ``bright / max(dark, 1)`` falls below a constant; it removes
dark-heavy patches instead and is kept behind the mode switch for
comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pyramid import (
    DEFAULT_PATCH_SIZE,
    Magnification,
    PatchPixels,
    PatchRef,
    SlideRecord,
    enumerate_patches,
    read_patch,
)

MODE_BRIGHT_FRACTION = "bright-fraction"
MODE_LITERAL_RATIO = "literal-ratio"

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass(frozen=True)
class FilterConfig:
    """Histogram bin edges and the background decision rule."""

    a: int = 85
    b: int = 170
    bright_fraction_threshold: float = 0.8
    mode: str = MODE_BRIGHT_FRACTION
    literal_ratio_constant: float = 1.0

    def __post_init__(self) -> None:
        if not (0 < self.a < self.b < 255):
            raise ValueError(f"need 0 < a < b < 255, got a={self.a}, b={self.b}")
        if not (0.0 <= self.bright_fraction_threshold <= 1.0):
            raise ValueError(
                f"bright_fraction_threshold must be in [0,1], got {self.bright_fraction_threshold}"
            )
        if self.mode not in (MODE_BRIGHT_FRACTION, MODE_LITERAL_RATIO):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if self.literal_ratio_constant <= 0:
            raise ValueError(
                f"literal_ratio_constant must be positive, got {self.literal_ratio_constant}"
            )


@dataclass(frozen=True)
class HistogramTriple:
    """Pixel counts in the dark, mid, and bright luminance bins."""

    dark: int
    mid: int
    bright: int

    @property
    def total(self) -> int:
        return self.dark + self.mid + self.bright


def luminance(patch: PatchPixels | np.ndarray) -> np.ndarray:
    """Per-pixel integer luminance, rounded and clamped to [0, 255].

    Uses the standard RGB weighting 0.299/0.587/0.114 on a uint8 RGB block.
    """
    data = patch.data if isinstance(patch, PatchPixels) else patch
    lum = data.astype(np.float64) @ _LUMA_WEIGHTS
    return np.clip(np.rint(lum), 0, 255).astype(np.uint8)


def histogram3(patch: PatchPixels | np.ndarray, cfg: FilterConfig) -> HistogramTriple:
    """Count luminance pixels per bin; the three counts partition the patch."""
    lum = luminance(patch)
    dark = int(np.count_nonzero(lum <= cfg.a))
    bright = int(np.count_nonzero(lum > cfg.b))
    mid = lum.size - dark - bright
    return HistogramTriple(dark=dark, mid=mid, bright=bright)


def is_background(patch: PatchPixels | np.ndarray, cfg: FilterConfig) -> bool:
    """Decide whether a patch is background under the configured rule."""
    hist = histogram3(patch, cfg)
    if cfg.mode == MODE_BRIGHT_FRACTION:
        return hist.bright / hist.total > cfg.bright_fraction_threshold
    # literal-ratio: bright-to-dark ratio below a constant, dark count
    # guarded against a zero denominator.
    return hist.bright / max(hist.dark, 1) < cfg.literal_ratio_constant


def filter_patches(
    slide: SlideRecord,
    magnification: Magnification | str,
    cfg: FilterConfig,
    patch_size: int = DEFAULT_PATCH_SIZE,
) -> tuple[list[PatchRef], int]:
    """Split a slide level's patch grid into kept tissue refs and a dropped count.

    Enumeration order is preserved in the kept list, and
    ``len(kept) + dropped`` always equals the full grid size.
    """
    refs = enumerate_patches(slide, magnification, patch_size)
    kept: list[PatchRef] = []
    dropped = 0
    for ref in refs:
        pixels = read_patch(slide, ref, patch_size)
        if is_background(pixels, cfg):
            dropped += 1
        else:
            kept.append(ref)
    return kept, dropped
