"""Bit-exact binary persistence for patch embeddings.

File layout (all integers little-endian, no padding):

    magic   4 bytes  b"SLEM"
    version u16      currently 1
    dim     u32      vector length shared by every record
    mag     u8       magnification code from the registry
    count   u64      number of records

    per record:
      id_len u16, slide_id UTF-8 bytes, row u32, col u32, dim x f32

Vectors are 32-bit floats and round-trip bitwise. Ingestion validates the
header, key uniqueness, and the vector invariants (finite, nonzero norm).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import EmbeddingError, StoreFormatError
from .pyramid import DEFAULT_REGISTRY, Magnification, MagnificationRegistry, PatchRef

MAGIC = b"SLEM"
STORE_VERSION = 1

_HEADER = struct.Struct("<4sHIBQ")
_ID_LEN = struct.Struct("<H")
_ROW_COL = struct.Struct("<II")


@dataclass(frozen=True)
class PatchEmbedding:
    """One patch's feature vector plus the grid position it came from.

    Vectors are float32, finite, and have strictly positive L2 norm; a
    violating vector is rejected at construction because the cosine kernel
    is undefined for it.
    """

    ref: PatchRef
    vector: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector)
        if vec.ndim != 1:
            raise EmbeddingError(f"{self.ref.key}: vector must be 1-D, got shape {vec.shape}")
        if vec.dtype != np.float32:
            vec = vec.astype(np.float32)
        if not np.isfinite(vec).all():
            raise EmbeddingError(f"{self.ref.key}: vector has NaN or Inf components")
        if not np.any(vec):
            raise EmbeddingError(f"{self.ref.key}: vector has zero norm")
        vec = np.ascontiguousarray(vec)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def key(self) -> tuple[str, int, int]:
        return self.ref.key

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


@dataclass
class EmbeddingStore:
    """In-memory collection of embeddings for one magnification.

    Records are keyed by (slide_id, row, col); all vectors share one
    length. Iteration preserves insertion order, which the binary codec
    also preserves, so write -> ingest reproduces a store exactly.
    """

    dim: int
    magnification: Magnification
    version: int = STORE_VERSION
    _records: list[PatchEmbedding] = field(default_factory=list, repr=False)
    _index: dict[tuple[str, int, int], int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise StoreFormatError(f"store dim must be positive, got {self.dim}")

    def add(self, embedding: PatchEmbedding) -> None:
        if embedding.dim != self.dim:
            raise StoreFormatError(
                f"{embedding.key}: vector length {embedding.dim} != store dim {self.dim}"
            )
        if embedding.key in self._index:
            raise StoreFormatError(f"duplicate record key {embedding.key}")
        self._index[embedding.key] = len(self._records)
        self._records.append(embedding)

    def extend(self, embeddings: Iterable[PatchEmbedding]) -> None:
        for emb in embeddings:
            self.add(emb)

    def get(self, key: tuple[str, int, int]) -> PatchEmbedding:
        try:
            return self._records[self._index[key]]
        except KeyError:
            raise KeyError(f"no record for key {key}") from None

    def __contains__(self, key: tuple[str, int, int]) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[PatchEmbedding]:
        return iter(self._records)

    @property
    def records(self) -> tuple[PatchEmbedding, ...]:
        return tuple(self._records)

    def slide_ids(self) -> list[str]:
        """Distinct slide ids in first-seen order."""
        seen: dict[str, None] = {}
        for rec in self._records:
            seen.setdefault(rec.ref.slide_id, None)
        return list(seen)

    def for_slide(self, slide_id: str) -> list[PatchEmbedding]:
        return [rec for rec in self._records if rec.ref.slide_id == slide_id]

    def matrix_for_slide(self, slide_id: str) -> tuple[list[PatchRef], np.ndarray]:
        """All of one slide's vectors stacked into an (n, dim) float32 matrix."""
        recs = self.for_slide(slide_id)
        refs = [rec.ref for rec in recs]
        if not recs:
            return refs, np.empty((0, self.dim), dtype=np.float32)
        return refs, np.stack([rec.vector for rec in recs])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if (
            self.dim != other.dim
            or self.version != other.version
            or self.magnification != other.magnification
            or len(self) != len(other)
        ):
            return False
        for a, b in zip(self._records, other._records):
            if a.key != b.key or a.vector.tobytes() != b.vector.tobytes():
                return False
        return True


def write_store(
    store: EmbeddingStore,
    path: str | Path,
    registry: MagnificationRegistry = DEFAULT_REGISTRY,
) -> None:
    """Serialize a store; the output re-ingests bit-exactly."""
    mag_code = registry.code(store.magnification.label)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, store.version, store.dim, mag_code, len(store)))
        for rec in store:
            slide_id, row, col = rec.key
            id_bytes = slide_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise StoreFormatError(f"slide_id too long to serialize: {slide_id[:32]}...")
            fh.write(_ID_LEN.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(_ROW_COL.pack(row, col))
            fh.write(rec.vector.astype("<f4", copy=False).tobytes())


def ingest_embeddings(
    path: str | Path,
    registry: MagnificationRegistry = DEFAULT_REGISTRY,
) -> EmbeddingStore:
    """Load and validate a store file.

    Raises StoreFormatError on a bad magic or version, truncated payload,
    dimension mismatch, duplicate key, or a vector that violates the
    embedding invariants; the offending record key is named where one
    exists.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise StoreFormatError(f"{path}: too short to hold a store header")
    magic, version, dim, mag_code, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {magic!r}")
    if version != STORE_VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise StoreFormatError(f"{path}: header dim is zero")
    magnification = registry.from_code(mag_code)
    store = EmbeddingStore(dim=dim, magnification=magnification, version=version)
    offset = _HEADER.size
    vec_bytes = 4 * dim
    for i in range(count):
        try:
            (id_len,) = _ID_LEN.unpack_from(data, offset)
            offset += _ID_LEN.size
            slide_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            row, col = _ROW_COL.unpack_from(data, offset)
            offset += _ROW_COL.size
        except (struct.error, UnicodeDecodeError) as exc:
            raise StoreFormatError(f"{path}: truncated or corrupt record {i}: {exc}") from exc
        if offset + vec_bytes > len(data):
            raise StoreFormatError(f"{path}: truncated vector for record {i} ({slide_id!r})")
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        key = (slide_id, row, col)
        ref = PatchRef(slide_id, magnification, row, col)
        if not np.isfinite(vector).all():
            raise StoreFormatError(f"{path}: record {key} has NaN or Inf components")
        if not np.any(vector):
            raise StoreFormatError(f"{path}: record {key} has zero norm")
        try:
            store.add(PatchEmbedding(ref=ref, vector=vector))
        except (StoreFormatError, EmbeddingError) as exc:
            raise StoreFormatError(f"{path}: {exc}") from None
    if offset != len(data):
        raise StoreFormatError(f"{path}: {len(data) - offset} trailing bytes after {count} records")
    return store
