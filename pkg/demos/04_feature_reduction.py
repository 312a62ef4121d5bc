#!/usr/bin/env python3
"""Rank feature components by coefficient of variation and keep the top ones.

Across a corpus's patch embeddings, each of the 2048 components gets a
mean, a population standard deviation, and their ratio. Components that
barely vary relative to their mean carry little discriminative signal, so
only the n_f highest-ratio coordinates are kept and every vector is
projected onto them. One shared selection applies to the whole corpus.
"""

import tempfile
from pathlib import Path

import numpy as np

from slidesim import (
    CorpusSpec,
    FilterConfig,
    StubBackend,
    compute_stats,
    generate_synthetic_corpus,
    load_manifest,
    load_stats,
    embed_corpus,
    reduce_store,
    save_stats,
)

scratch = Path(tempfile.mkdtemp(prefix="slidesim_demo_"))
spec = CorpusSpec(
    classes=("coral", "moss", "slate"),
    slides_per_class=2,
    levels={"2.5x": (672, 672)},
)
slides = load_manifest(generate_synthetic_corpus(spec, scratch, seed=5))
store = embed_corpus(slides, "2.5x", FilterConfig(), StubBackend(seed=0, output_dim=512))

stats = compute_stats(store, n_f=64)
print(f"statistics over n={stats.n} embeddings, {stats.s_f} -> {stats.n_f} components")
finite = np.isfinite(stats.cv)
print(f"coefficient range: [{stats.cv[finite].min():.3f}, {stats.cv[finite].max():.3f}]")
print("selected (first 10):", stats.selected_indices[:10].tolist())

# Every kept component's coefficient dominates every discarded one.
kept = set(stats.selected_indices.tolist())
discarded_max = max(stats.cv[j] for j in range(stats.s_f) if j not in kept)
kept_min = min(stats.cv[j] for j in kept)
print(f"min kept coefficient {kept_min:.3f} >= max discarded {discarded_max:.3f}:",
      kept_min >= discarded_max)

# Scaling all embeddings leaves the ranking untouched: the ratio is
# scale-free, so the selection only reflects relative variability.
doubled = compute_stats(
    [rec.__class__(ref=rec.ref, vector=rec.vector * 2.0) for rec in store.records], n_f=64
)
print("selection invariant under scaling:",
      doubled.selected_indices.tolist() == stats.selected_indices.tolist())

reduced = reduce_store(store, stats)
print(f"\nreduced store: dim {reduced.dim}, {len(reduced)} records")

# Statistics persist as strict JSON for reuse by later pipeline stages.
stats_path = scratch / "stats.json"
save_stats(stats, stats_path)
reloaded = load_stats(stats_path)
print("stats JSON round-trip:", np.array_equal(reloaded.selected_indices, stats.selected_indices))
