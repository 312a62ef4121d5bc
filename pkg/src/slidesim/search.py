"""Leave-one-out slide search and top-k accuracy evaluation.

Every slide takes a turn as the query against all other slides at the same
magnification. All pair scores are computed once per unordered pair and
mirrored (the slide score is symmetric), neighbors are ranked by
descending score with lexicographic slide-id tie-breaks, and a query
counts as a hit at k when any of its first k neighbors shares its label.

Slides that lost every patch to the background filter cannot be compared;
they are excluded from both query and reference roles and listed in the
report per magnification.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

from .errors import SearchError
from .pyramid import SlideRecord
from .similarity import PreparedPatches, aggregate_values, pair_values
from .store import EmbeddingStore, PatchEmbedding

REPORT_VERSION = 1


@dataclass(frozen=True)
class RankedResult:
    """Descending neighbor ranking for one query slide.

    ``excluded`` lists reference slides that had no embeddings (all their
    patches were background) and so could not be ranked.
    """

    query_id: str
    magnification: str
    neighbors: tuple[tuple[str, float], ...]
    excluded: tuple[str, ...] = ()

    def top(self, k: int) -> tuple[tuple[str, float], ...]:
        return self.neighbors[: max(k, 0)]


@dataclass(frozen=True)
class QueryOutcome:
    """One evaluated query: its ranking and per-k hit flags."""

    query_id: str
    label: str
    neighbors: tuple[tuple[str, float], ...]
    hits: dict[int, bool]


@dataclass
class SearchReport:
    """Aggregate leave-one-out accuracy plus per-query rankings."""

    corpus_size: int
    ks: tuple[int, ...]
    accuracy: dict[tuple[str, int], float] = field(default_factory=dict)
    per_query: dict[str, list[QueryOutcome]] = field(default_factory=dict)
    excluded: dict[str, list[str]] = field(default_factory=dict)
    participants: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        accuracy: dict[str, dict[str, float]] = {}
        for (mag, k), value in self.accuracy.items():
            accuracy.setdefault(mag, {})[f"top-{k}"] = value
        return {
            "report_version": REPORT_VERSION,
            "corpus_size": self.corpus_size,
            "ks": list(self.ks),
            "accuracy": accuracy,
            "participants": dict(self.participants),
            "excluded": {mag: list(ids) for mag, ids in self.excluded.items()},
            "per_query": {
                mag: [
                    {
                        "query_id": q.query_id,
                        "label": q.label,
                        "neighbors": [[rid, value] for rid, value in q.neighbors],
                        "hits": {f"top-{k}": hit for k, hit in q.hits.items()},
                    }
                    for q in outcomes
                ]
                for mag, outcomes in self.per_query.items()
            },
        }

    def write(self, path: str | Path) -> None:
        text = json.dumps(self.to_json(), sort_keys=True, indent=2)
        Path(path).write_text(text + "\n", encoding="utf-8")


def _group_slides(
    corpus: EmbeddingStore | Mapping[str, Sequence[PatchEmbedding]],
) -> dict[str, PreparedPatches]:
    if isinstance(corpus, EmbeddingStore):
        grouped: dict[str, PreparedPatches] = {}
        for slide_id in corpus.slide_ids():
            _, matrix = corpus.matrix_for_slide(slide_id)
            grouped[slide_id] = PreparedPatches(slide_id, matrix)
        return grouped
    return {
        slide_id: PreparedPatches.from_embeddings(records, slide_id)
        for slide_id, records in corpus.items()
        if len(records) > 0
    }


def _rank(pairs: Mapping[str, float]) -> tuple[tuple[str, float], ...]:
    return tuple(sorted(pairs.items(), key=lambda item: (-item[1], item[0])))


def rank_all(
    corpus: EmbeddingStore | Mapping[str, Sequence[PatchEmbedding]],
    query_id: str,
) -> RankedResult:
    """Rank every other slide in the corpus against one query slide."""
    grouped = _group_slides(corpus)
    excluded: tuple[str, ...] = ()
    if not isinstance(corpus, EmbeddingStore):
        excluded = tuple(sid for sid, records in corpus.items() if len(records) == 0)
    if query_id not in grouped:
        raise SearchError(f"query slide {query_id!r} not present in the corpus")
    if len(grouped) < 2:
        raise SearchError("corpus must hold at least 2 slides with embeddings")
    query = grouped[query_id]
    scores = {
        slide_id: aggregate_values(pair_values(query, prepared))
        for slide_id, prepared in grouped.items()
        if slide_id != query_id
    }
    magnification = (
        corpus.magnification.label if isinstance(corpus, EmbeddingStore) else ""
    )
    return RankedResult(
        query_id=query_id,
        magnification=magnification,
        neighbors=_rank(scores),
        excluded=excluded,
    )


def top_k_hit(result: RankedResult, labels: Mapping[str, str], k: int) -> bool:
    """True when any of the first min(k, all) neighbors shares the query label.

    Raises SearchError when a looked-up slide id has no label.
    """
    if k < 1:
        raise SearchError(f"k must be >= 1, got {k}")
    if not result.neighbors:
        raise SearchError(f"query {result.query_id!r} has an empty neighbor list")
    try:
        query_label = labels[result.query_id]
        return any(labels[rid] == query_label for rid, _ in result.top(k))
    except KeyError as exc:
        raise SearchError(f"slide id {exc.args[0]!r} missing from the label map") from None


def _pairwise_scores(
    prepared: dict[str, PreparedPatches], workers: int = 1
) -> dict[tuple[str, str], float]:
    """Score each unordered pair once; symmetry supplies the mirror."""
    pairs = list(combinations(prepared, 2))

    def score(pair: tuple[str, str]) -> float:
        return aggregate_values(pair_values(prepared[pair[0]], prepared[pair[1]]))

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(score, pairs))
    else:
        values = [score(pair) for pair in pairs]
    return dict(zip(pairs, values))


def evaluate(
    slides: Sequence[SlideRecord],
    stores: Mapping[str, EmbeddingStore],
    ks: Sequence[int] = (3, 5),
    workers: int = 1,
) -> SearchReport:
    """Run leave-one-out search per magnification and tally top-k accuracy.

    ``stores`` maps magnification labels to embedding stores covering the
    manifest slides. Accuracy at each (magnification, k) is the hit count
    over the slides that participate there (manifest minus exclusions).
    """
    if not slides:
        raise SearchError("empty corpus")
    ks = tuple(ks)
    if not ks or any(k < 1 for k in ks):
        raise SearchError(f"top-k list must hold positive ints, got {ks}")
    labels = {slide.slide_id: slide.label for slide in slides}
    report = SearchReport(corpus_size=len(slides), ks=ks)

    for mag_label, store in stores.items():
        present = set(store.slide_ids())
        participating = [s.slide_id for s in slides if s.slide_id in present]
        excluded = [s.slide_id for s in slides if s.slide_id not in present]
        report.excluded[mag_label] = excluded
        report.participants[mag_label] = len(participating)
        if len(participating) < 2:
            raise SearchError(
                f"magnification {mag_label!r}: need at least 2 slides with "
                f"embeddings, have {len(participating)}"
            )
        prepared = {
            slide_id: PreparedPatches(slide_id, store.matrix_for_slide(slide_id)[1])
            for slide_id in participating
        }
        pair_scores = _pairwise_scores(prepared, workers)

        outcomes: list[QueryOutcome] = []
        hit_counts = {k: 0 for k in ks}
        for query_id in participating:
            scores = {}
            for other in participating:
                if other == query_id:
                    continue
                key = (query_id, other) if (query_id, other) in pair_scores else (other, query_id)
                scores[other] = pair_scores[key]
            ranked = RankedResult(query_id, mag_label, _rank(scores))
            hits = {k: top_k_hit(ranked, labels, k) for k in ks}
            for k, hit in hits.items():
                hit_counts[k] += int(hit)
            outcomes.append(
                QueryOutcome(query_id, labels[query_id], ranked.neighbors, hits)
            )
        report.per_query[mag_label] = outcomes
        for k in ks:
            report.accuracy[(mag_label, k)] = hit_counts[k] / len(participating)
    return report
