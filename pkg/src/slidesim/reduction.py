"""Feature selection by coefficient of variation.

Per-component statistics are computed across a corpus's patch embeddings
at one magnification: componentwise mean, population standard deviation,
and their ratio (the coefficient of variation). The components with the
largest coefficients are kept and every vector is projected onto those
coordinates, so one shared selection applies to queries and references
alike.

A component whose mean is numerically zero carries no ratio information;
its coefficient is set to -inf so it is never preferred over any component
with a finite coefficient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ReductionError
from .store import EmbeddingStore, PatchEmbedding

MEAN_GUARD = 1e-12


@dataclass(frozen=True)
class ReductionStats:
    """Componentwise corpus statistics and the retained coordinate set.

    ``selected_indices`` is sorted ascending; projection preserves that
    coordinate order.
    """

    mean: np.ndarray
    std: np.ndarray
    cv: np.ndarray
    selected_indices: np.ndarray
    n: int
    s_f: int
    n_f: int
    magnification: str

    def __post_init__(self) -> None:
        sel = np.asarray(self.selected_indices, dtype=np.int64)
        if sel.shape != (self.n_f,) or len(np.unique(sel)) != self.n_f:
            raise ReductionError(f"selection must hold {self.n_f} distinct indices")
        if self.n_f > self.s_f:
            raise ReductionError(f"cannot select {self.n_f} of {self.s_f} components")
        if sel.size and (sel.min() < 0 or sel.max() >= self.s_f):
            raise ReductionError("selected index out of range")
        if not np.array_equal(sel, np.sort(sel)):
            raise ReductionError("selected_indices must be sorted ascending")


def compute_stats(
    embeddings: Sequence[PatchEmbedding] | EmbeddingStore, n_f: int
) -> ReductionStats:
    """Rank components by coefficient of variation and pick the top ``n_f``.

    Ties are broken toward the lower index, making the selection
    deterministic. Requires at least two embeddings of equal length.
    """
    if isinstance(embeddings, EmbeddingStore):
        records = embeddings.records
        magnification = embeddings.magnification.label
    else:
        records = tuple(embeddings)
        magnification = records[0].ref.magnification.label if records else ""
    if len(records) < 2:
        raise ReductionError(f"need at least 2 embeddings for statistics, got {len(records)}")
    dims = {rec.dim for rec in records}
    if len(dims) != 1:
        raise ReductionError(f"mixed vector lengths in statistics input: {sorted(dims)}")
    (s_f,) = dims
    if not (0 < n_f <= s_f):
        raise ReductionError(f"n_f must be in [1, {s_f}], got {n_f}")

    matrix = np.stack([rec.vector for rec in records]).astype(np.float64)
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)  # population: divides by n
    cv = np.full(s_f, -np.inf)
    defined = np.abs(mean) >= MEAN_GUARD
    cv[defined] = std[defined] / mean[defined]

    # Stable argsort on the negated coefficients: equal values keep index
    # order, so ties resolve toward the lower index.
    order = np.argsort(-cv, kind="stable")
    selected = np.sort(order[:n_f]).astype(np.int64)
    return ReductionStats(
        mean=mean,
        std=std,
        cv=cv,
        selected_indices=selected,
        n=len(records),
        s_f=s_f,
        n_f=n_f,
        magnification=magnification,
    )


def reduce_embeddings(
    embeddings: Sequence[PatchEmbedding], stats: ReductionStats
) -> list[PatchEmbedding]:
    """Project vectors onto the selected coordinates, keeping refs and order.

    A projection that produces a zero-norm vector is rejected, mirroring
    the ingestion rule.
    """
    out = []
    for rec in embeddings:
        if rec.dim != stats.s_f:
            raise ReductionError(
                f"{rec.key}: vector length {rec.dim} does not match statistics over {stats.s_f}"
            )
        vector = rec.vector[stats.selected_indices]
        if not np.any(vector):
            raise ReductionError(f"{rec.key}: reduced vector has zero norm")
        out.append(PatchEmbedding(ref=rec.ref, vector=vector))
    return out


def reduce_store(store: EmbeddingStore, stats: ReductionStats) -> EmbeddingStore:
    """Apply one selection to a whole store, producing an ``n_f``-dim store."""
    reduced = EmbeddingStore(dim=stats.n_f, magnification=store.magnification)
    reduced.extend(reduce_embeddings(store.records, stats))
    return reduced


def save_stats(stats: ReductionStats, path: str | Path) -> None:
    """Write statistics as strict JSON; -inf coefficients serialize as null."""
    payload = {
        "n": stats.n,
        "s_f": stats.s_f,
        "n_f": stats.n_f,
        "magnification": stats.magnification,
        "mean": stats.mean.tolist(),
        "std": stats.std.tolist(),
        "cv": [v if math.isfinite(v) else None for v in stats.cv.tolist()],
        "selected_indices": stats.selected_indices.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_stats(path: str | Path) -> ReductionStats:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cv = np.array(
            [-np.inf if v is None else float(v) for v in raw["cv"]], dtype=np.float64
        )
        return ReductionStats(
            mean=np.asarray(raw["mean"], dtype=np.float64),
            std=np.asarray(raw["std"], dtype=np.float64),
            cv=cv,
            selected_indices=np.asarray(raw["selected_indices"], dtype=np.int64),
            n=int(raw["n"]),
            s_f=int(raw["s_f"]),
            n_f=int(raw["n_f"]),
            magnification=str(raw["magnification"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ReductionError(f"cannot load statistics from {path}: {exc}") from exc
