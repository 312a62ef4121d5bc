"""Embedding of tissue patches into a persistent store.

The corpus pipeline runs per slide: enumerate the patch grid, drop
background patches, read the surviving pixel blocks, and push them through
a backend in one batch. Slides are independent, so they are fanned out
across a thread pool; decoding and the matrix-heavy backends release the
GIL for most of their work.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .backends import InferenceBackend
from .errors import EmbeddingError
from .pyramid import (
    DEFAULT_PATCH_SIZE,
    Magnification,
    PatchPixels,
    PatchRef,
    SlideRecord,
    read_patch,
)
from .store import EmbeddingStore, PatchEmbedding
from .tissue import FilterConfig, filter_patches


def embed_patch(backend: InferenceBackend, patch: PatchPixels) -> PatchEmbedding:
    """Embed a single patch; the vector invariants are checked on the result."""
    out = backend.embed_batch(patch.data[np.newaxis])
    vector = np.asarray(out[0], dtype=np.float32)
    if vector.shape != (backend.output_dim,):
        raise EmbeddingError(
            f"backend {backend.name!r} returned shape {vector.shape}, "
            f"expected ({backend.output_dim},)"
        )
    return PatchEmbedding(ref=patch.ref, vector=vector)


def embed_refs(
    backend: InferenceBackend,
    slide: SlideRecord,
    refs: Sequence[PatchRef],
    patch_size: int = DEFAULT_PATCH_SIZE,
) -> list[PatchEmbedding]:
    """Read and embed the given refs of one slide as a single batch."""
    if not refs:
        return []
    batch = np.stack([read_patch(slide, ref, patch_size).data for ref in refs])
    vectors = backend.embed_batch(batch)
    if vectors.shape != (len(refs), backend.output_dim):
        raise EmbeddingError(
            f"backend {backend.name!r} returned shape {vectors.shape}, "
            f"expected ({len(refs)}, {backend.output_dim})"
        )
    return [
        PatchEmbedding(ref=ref, vector=np.asarray(vec, dtype=np.float32))
        for ref, vec in zip(refs, vectors)
    ]


def embed_corpus(
    slides: Sequence[SlideRecord],
    magnification: Magnification | str,
    filter_cfg: FilterConfig,
    backend: InferenceBackend | None,
    patch_size: int = DEFAULT_PATCH_SIZE,
    workers: int = 1,
    source: EmbeddingStore | None = None,
) -> EmbeddingStore:
    """Embed every slide's tissue patches at one magnification.

    With ``source`` set, vectors are joined from the precomputed store by
    (slide_id, row, col) instead of running the backend; a kept patch with
    no source record is an error. Slides whose patches are all background
    contribute zero records.
    """
    if not slides:
        raise EmbeddingError("cannot embed an empty corpus")
    if (backend is None) == (source is None):
        raise EmbeddingError("exactly one of backend or source must be given")
    mag_label = magnification if isinstance(magnification, str) else magnification.label
    mag = slides[0].level_at(mag_label).magnification

    def one_slide(slide: SlideRecord) -> list[PatchEmbedding]:
        kept, _ = filter_patches(slide, mag_label, filter_cfg, patch_size)
        if source is not None:
            return _from_source(source, kept)
        return embed_refs(backend, slide, kept, patch_size)

    if workers > 1 and len(slides) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_slide = list(pool.map(one_slide, slides))
    else:
        per_slide = [one_slide(slide) for slide in slides]

    dim = source.dim if source is not None else backend.output_dim
    out = EmbeddingStore(dim=dim, magnification=mag)
    for embeddings in per_slide:
        out.extend(embeddings)
    return out


def _from_source(source: EmbeddingStore, refs: Sequence[PatchRef]) -> list[PatchEmbedding]:
    out = []
    for ref in refs:
        if ref.key not in source:
            raise EmbeddingError(f"precomputed store has no vector for patch {ref.key}")
        out.append(PatchEmbedding(ref=ref, vector=source.get(ref.key).vector))
    return out
