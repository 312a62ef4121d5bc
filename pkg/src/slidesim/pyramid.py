"""Slide pyramid access: manifests, patch grids, and patch pixel reads.

A corpus is described by a UTF-8 CSV manifest with header
``slide_id,label,pyramid_dir``. Each pyramid directory holds one lossless
raster image (PNG) per magnification level plus a ``levels.json`` file
listing ``{magnification, width, height, file}`` entries. Relative paths in
the manifest resolve against the manifest's directory; relative ``file``
entries resolve against the pyramid directory.

Patches are non-overlapping, axis-aligned squares enumerated in row-major
order. Edge remainders smaller than the patch size are discarded, so a
level of height ``h`` and width ``w`` yields exactly
``floor(h / patch_size) * floor(w / patch_size)`` patches.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

from .errors import ManifestError, PyramidError

DEFAULT_PATCH_SIZE = 224

MANIFEST_HEADER = ("slide_id", "label", "pyramid_dir")
LEVELS_FILENAME = "levels.json"


@dataclass(frozen=True, slots=True)
class Magnification:
    """A pyramid resolution tier, e.g. label ``"5x"`` at scale 5.0."""

    label: str
    scale: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError(f"magnification scale must be positive, got {self.scale}")


#: The four canonical magnifications, ordered by increasing scale.
MAGNIFICATIONS = (
    Magnification("1x", 1.0),
    Magnification("2.5x", 2.5),
    Magnification("5x", 5.0),
    Magnification("10x", 10.0),
)


class MagnificationRegistry:
    """Maps magnification labels to objects and stable one-byte codes.

    Codes 0..3 are fixed to the canonical magnifications; extensions
    registered through a config receive consecutive codes from 4 upward in
    declaration order. The same registry must be used when writing and
    reading binary stores that carry the code.
    """

    def __init__(self, extra: tuple[Magnification, ...] = ()) -> None:
        mags = MAGNIFICATIONS + tuple(extra)
        labels = [m.label for m in mags]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate magnification labels: {labels}")
        scales = [m.scale for m in mags]
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("magnification scales must strictly increase")
        self._by_label = {m.label: m for m in mags}
        self._by_code = dict(enumerate(mags))
        self._codes = {m.label: code for code, m in enumerate(mags)}

    def get(self, label: str) -> Magnification:
        try:
            return self._by_label[label]
        except KeyError:
            known = ", ".join(self._by_label)
            raise ValueError(f"unknown magnification {label!r} (known: {known})") from None

    def code(self, label: str) -> int:
        self.get(label)
        return self._codes[label]

    def from_code(self, code: int) -> Magnification:
        try:
            return self._by_code[code]
        except KeyError:
            raise ValueError(f"unknown magnification code {code}") from None

    def labels(self) -> tuple[str, ...]:
        return tuple(self._by_label)


DEFAULT_REGISTRY = MagnificationRegistry()


@dataclass(frozen=True, slots=True)
class Level:
    """One pyramid level: its magnification, pixel size, and image path."""

    magnification: Magnification
    width: int
    height: int
    image_path: Path

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"level dimensions must be positive, got {self.width}x{self.height}"
            )


@dataclass(frozen=True, slots=True)
class SlideRecord:
    """Identity, diagnosis label, and pyramid levels for one slide."""

    slide_id: str
    label: str
    levels: tuple[Level, ...]

    def level_at(self, magnification: Magnification | str) -> Level:
        label = magnification if isinstance(magnification, str) else magnification.label
        for level in self.levels:
            if level.magnification.label == label:
                return level
        raise PyramidError(f"slide {self.slide_id!r} has no level at {label!r}")

    def has_level(self, magnification: Magnification | str) -> bool:
        label = magnification if isinstance(magnification, str) else magnification.label
        return any(level.magnification.label == label for level in self.levels)


class PatchRef(NamedTuple):
    """Grid position of one patch within a slide level.

    ``pixel_origin`` is the (x, y) of the patch's top-left corner, equal to
    ``(col * patch_size, row * patch_size)``. It is None for refs rebuilt
    from an embedding store, whose wire format carries only the grid
    position; ``read_patch`` recomputes it from the patch size.
    """

    slide_id: str
    magnification: Magnification
    row: int
    col: int
    pixel_origin: tuple[int, int] | None = None

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.slide_id, self.row, self.col)


@dataclass(frozen=True)
class PatchPixels:
    """One patch's 8-bit RGB pixel block, square with 3 channels."""

    ref: PatchRef
    data: np.ndarray

    def __post_init__(self) -> None:
        data = self.data
        if data.ndim != 3 or data.shape[0] != data.shape[1] or data.shape[2] != 3:
            raise ValueError(f"patch data must be square RGB, got shape {data.shape}")
        if data.dtype != np.uint8:
            raise ValueError(f"patch data must be uint8, got {data.dtype}")

    @property
    def patch_size(self) -> int:
        return self.data.shape[0]


def load_manifest(
    path: str | Path, registry: MagnificationRegistry = DEFAULT_REGISTRY
) -> list[SlideRecord]:
    """Read a corpus manifest into SlideRecords.

    Labels are preserved verbatim. Raises ManifestError on a missing file,
    malformed row, duplicate slide_id, unreadable pyramid metadata, or a
    level image missing on disk. An empty file yields an empty list.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    records: list[SlideRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        return []
    header = tuple(cell.strip() for cell in rows[0])
    if header != MANIFEST_HEADER:
        raise ManifestError(
            f"manifest header must be {','.join(MANIFEST_HEADER)!r}, got {rows[0]!r}"
        )
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        slide_id, label, pyramid_dir = (cell.strip() for cell in row)
        if not slide_id:
            raise ManifestError(f"{path}:{lineno}: empty slide_id")
        if slide_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate slide_id {slide_id!r}")
        seen.add(slide_id)
        levels = _load_levels(base / pyramid_dir, slide_id, registry)
        records.append(SlideRecord(slide_id=slide_id, label=label, levels=levels))
    return records


def _load_levels(
    pyramid_dir: Path, slide_id: str, registry: MagnificationRegistry
) -> tuple[Level, ...]:
    meta_path = pyramid_dir / LEVELS_FILENAME
    if not meta_path.is_file():
        raise ManifestError(f"slide {slide_id!r}: missing {meta_path}")
    try:
        entries = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"slide {slide_id!r}: invalid JSON in {meta_path}: {exc}") from exc
    if not isinstance(entries, list):
        raise ManifestError(f"slide {slide_id!r}: {meta_path} must hold a JSON array")
    levels = []
    for entry in entries:
        try:
            mag = registry.get(entry["magnification"])
            width = int(entry["width"])
            height = int(entry["height"])
            image_path = (pyramid_dir / entry["file"]).resolve()
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"slide {slide_id!r}: bad level entry {entry!r}: {exc}") from exc
        if not image_path.is_file():
            raise ManifestError(f"slide {slide_id!r}: level image missing: {image_path}")
        levels.append(Level(mag, width, height, image_path))
    levels.sort(key=lambda lv: lv.magnification.scale)
    return tuple(levels)


def enumerate_patches(
    slide: SlideRecord,
    magnification: Magnification | str,
    patch_size: int = DEFAULT_PATCH_SIZE,
) -> list[PatchRef]:
    """Enumerate the non-overlapping patch grid of one level, row-major.

    Returns exactly ``floor(h / patch_size) * floor(w / patch_size)`` refs;
    edge remainders are discarded. Raises PyramidError if the slide has no
    level at the requested magnification.
    """
    if patch_size < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    level = slide.level_at(magnification)
    mag = level.magnification
    rows = level.height // patch_size
    cols = level.width // patch_size
    return [
        PatchRef(slide.slide_id, mag, r, c, (c * patch_size, r * patch_size))
        for r in range(rows)
        for c in range(cols)
    ]


@lru_cache(maxsize=4)
def _load_level_rgb(image_path: str) -> np.ndarray:
    """Decode a level image to a read-only uint8 RGB array, cached."""
    try:
        with Image.open(image_path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise PyramidError(f"cannot decode level image {image_path}: {exc}") from exc
    arr.setflags(write=False)
    return arr


def read_patch(
    slide: SlideRecord, ref: PatchRef, patch_size: int = DEFAULT_PATCH_SIZE
) -> PatchPixels:
    """Extract the pixel block for one patch ref.

    The decoded level is cached, so sequential reads of one level decode the
    image once. Raises PyramidError when the ref lies outside the level or
    the image does not match the metadata dimensions.
    """
    level = slide.level_at(ref.magnification)
    arr = _load_level_rgb(str(level.image_path))
    if arr.shape[0] != level.height or arr.shape[1] != level.width:
        raise PyramidError(
            f"slide {slide.slide_id!r}: image {level.image_path} is "
            f"{arr.shape[1]}x{arr.shape[0]}, metadata says {level.width}x{level.height}"
        )
    x, y = ref.col * patch_size, ref.row * patch_size
    if ref.pixel_origin is not None and ref.pixel_origin != (x, y):
        raise PyramidError(
            f"ref {ref.key} pixel_origin {ref.pixel_origin} does not match "
            f"its grid position at patch size {patch_size}"
        )
    if y + patch_size > level.height or x + patch_size > level.width:
        raise PyramidError(
            f"ref {ref.key} out of bounds for level {level.width}x{level.height}"
        )
    block = np.ascontiguousarray(arr[y : y + patch_size, x : x + patch_size])
    return PatchPixels(ref=ref, data=block)
