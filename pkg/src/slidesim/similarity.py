"""Patch-pair cosine similarity matrices and their slide-level aggregation.

The pairwise kernel unit-normalizes each slide's stacked vectors once and
takes a dense float64 matrix product, then clamps to [-1, 1] to absorb
rounding past the ends of the range. Cells whose two vectors are equal are
set to exactly 1.0 (their true cosine), detected by grouping identical
float32 rows; this keeps the self-comparison identity exact instead of one
ulp shy of it.

The slide-level score averages the per-column maxima and the per-row
maxima of the matrix and halves the sum, a symmetric max-mean aggregation:
transposing the matrix swaps the two terms, so comparing slides in either
order gives the same value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptySlideError
from .store import PatchEmbedding

_MATRIX_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense n_q x n_r matrix of patch-pair cosine similarities."""

    query_id: str
    reference_id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"similarity matrix must be 2-D and non-empty, got {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("similarity matrix has non-finite entries")
        if values.min() < -1.0 or values.max() > 1.0:
            raise ValueError("similarity matrix entries must lie in [-1, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_q(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_r(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class SlideSimilarity:
    """Symmetric slide-level similarity score for one (query, reference) pair."""

    query_id: str
    reference_id: str
    value: float


def cosine(u: np.ndarray | Sequence[float], v: np.ndarray | Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    Equal vectors return exactly 1.0. Raises ValueError on a length
    mismatch; zero-norm inputs are unreachable through embedding records
    but are rejected here for direct calls.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"vector shapes differ: {u.shape} vs {v.shape}")
    if np.array_equal(u, v):
        if not np.any(u):
            raise ValueError("cosine undefined for zero-norm vectors")
        return 1.0
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero-norm vectors")
    return float(min(1.0, max(-1.0, float(u @ v) / (nu * nv))))


class PreparedPatches:
    """One slide's vectors, unit-normalized once for repeated pair kernels."""

    __slots__ = ("slide_id", "count", "dim", "unit", "_row_groups")

    def __init__(self, slide_id: str, matrix: np.ndarray):
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise EmptySlideError(f"slide {slide_id!r} has no patch embeddings")
        raw32 = np.ascontiguousarray(matrix, dtype=np.float32)
        self.slide_id = slide_id
        self.count = int(raw32.shape[0])
        self.dim = int(raw32.shape[1])
        work = raw32.astype(np.float64)
        norms = np.linalg.norm(work, axis=1, keepdims=True)
        if not np.all(norms > 0.0):
            raise ValueError(f"slide {slide_id!r} has a zero-norm embedding")
        self.unit = work / norms
        groups: dict[bytes, list[int]] = {}
        for i in range(self.count):
            groups.setdefault(raw32[i].tobytes(), []).append(i)
        self._row_groups = groups

    @classmethod
    def from_embeddings(cls, embeddings: Sequence[PatchEmbedding], slide_id: str | None = None) -> "PreparedPatches":
        if len(embeddings) == 0:
            raise EmptySlideError(f"slide {slide_id or '?'} has no patch embeddings")
        ids = {rec.ref.slide_id for rec in embeddings}
        inferred = ids.pop() if len(ids) == 1 else "patches"
        matrix = np.stack([rec.vector for rec in embeddings])
        return cls(slide_id if slide_id is not None else inferred, matrix)


def pair_values(q: PreparedPatches, r: PreparedPatches) -> np.ndarray:
    """Raw cosine matrix between two prepared slides."""
    if q.dim != r.dim:
        raise ValueError(f"embedding dimensions differ: {q.dim} vs {r.dim}")
    values = q.unit @ r.unit.T
    np.clip(values, -1.0, 1.0, out=values)
    # Identical float32 vectors have cosine exactly 1; overwrite those cells.
    for key, j_rows in r._row_groups.items():
        q_rows = q._row_groups.get(key)
        if q_rows:
            values[np.ix_(q_rows, j_rows)] = 1.0
    return values


def similarity_matrix(
    q: Sequence[PatchEmbedding],
    r: Sequence[PatchEmbedding],
    query_id: str | None = None,
    reference_id: str | None = None,
) -> SimilarityMatrix:
    """All-pairs cosine matrix between two slides' patch embeddings.

    Raises EmptySlideError when either side has no patches (a slide whose
    patches were all background) and ValueError on a dimension mismatch.
    """
    prepared_q = PreparedPatches.from_embeddings(q, query_id)
    prepared_r = PreparedPatches.from_embeddings(r, reference_id)
    return SimilarityMatrix(
        query_id=prepared_q.slide_id,
        reference_id=prepared_r.slide_id,
        values=pair_values(prepared_q, prepared_r),
    )


def slide_similarity(matrix: SimilarityMatrix) -> SlideSimilarity:
    """Aggregate a similarity matrix into the symmetric slide-level score.

    The score is half the sum of two means: per-column maxima (best query
    patch for each reference patch) and per-row maxima (best reference
    patch for each query patch).
    """
    return SlideSimilarity(
        query_id=matrix.query_id,
        reference_id=matrix.reference_id,
        value=aggregate_values(matrix.values),
    )


def aggregate_values(values: np.ndarray) -> float:
    # The two terms are functions of the multisets of per-column and
    # per-row maxima; sorting before the mean fixes the summation order so
    # shuffling patches cannot move the result by an ulp.
    column_term = float(np.sort(values.max(axis=0)).mean())
    row_term = float(np.sort(values.max(axis=1)).mean())
    return 0.5 * (column_term + row_term)


def compare_slides(
    q: Sequence[PatchEmbedding] | PreparedPatches,
    r: Sequence[PatchEmbedding] | PreparedPatches,
    query_id: str | None = None,
    reference_id: str | None = None,
) -> SlideSimilarity:
    """Slide-level similarity of two patch embedding sets.

    The result does not depend on patch order within either slide, and
    comparing identical sets yields exactly 1.0.
    """
    prepared_q = q if isinstance(q, PreparedPatches) else PreparedPatches.from_embeddings(q, query_id)
    prepared_r = r if isinstance(r, PreparedPatches) else PreparedPatches.from_embeddings(r, reference_id)
    return SlideSimilarity(
        query_id=prepared_q.slide_id,
        reference_id=prepared_r.slide_id,
        value=aggregate_values(pair_values(prepared_q, prepared_r)),
    )


def write_matrix(matrix: SimilarityMatrix, path: str | Path) -> None:
    """Dump a matrix as little-endian f32, row-major, behind an (n_q, n_r) header."""
    with open(path, "wb") as fh:
        fh.write(_MATRIX_HEADER.pack(matrix.n_q, matrix.n_r))
        fh.write(matrix.values.astype("<f4").tobytes())
