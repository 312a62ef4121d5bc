"""Command-line entry point: one subcommand per pipeline stage plus `run`.

Every failure is attributed to a named stage and exits with code 2;
progress and timing are logged as line-delimited JSON on stderr so runs
can be audited or scraped. Stage artifacts (patch grids, stores,
statistics, reports) persist on disk between subcommands, so expensive
stages are resumable and re-usable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .backends import InferenceBackend, create_backend
from .config import PipelineConfig, load_config
from .embedding import embed_corpus
from .errors import SlidesimError
from .pyramid import SlideRecord, enumerate_patches, load_manifest
from .reduction import compute_stats, reduce_store, save_stats
from .search import REPORT_VERSION, SearchReport, evaluate
from .similarity import similarity_matrix, slide_similarity, write_matrix
from .store import STORE_VERSION, ingest_embeddings, write_store
from .synthetic import CorpusSpec, generate_synthetic_corpus
from .tissue import MODE_BRIGHT_FRACTION, MODE_LITERAL_RATIO, filter_patches


class StageFailure(Exception):
    """Wraps any stage error with the stage name for exit reporting."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _log(stage: str, **fields) -> None:
    record = {"stage": stage, **fields}
    print(json.dumps(record, sort_keys=True), file=sys.stderr, flush=True)


class _timed:
    """Context manager that logs the stage duration on exit."""

    def __init__(self, stage: str, **fields):
        self.stage = stage
        self.fields = fields
        self.duration = 0.0

    def __enter__(self) -> "_timed":
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.duration = time.perf_counter() - self.start
        if exc_type is None:
            _log(self.stage, duration=round(self.duration, 6), **self.fields)


def _stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (SlidesimError, OSError) as exc:
        raise StageFailure(stage, exc) from exc


def _load_slides(manifest: str, config: PipelineConfig) -> list[SlideRecord]:
    return _stage("manifest", load_manifest, manifest, config.registry())


def _make_backend(config: PipelineConfig) -> InferenceBackend | None:
    if config.backend.kind == "precomputed":
        return None
    return _stage(
        "embed",
        create_backend,
        config.backend.kind,
        seed=config.seed,
        model=config.backend.model,
        preprocess=config.backend.preprocess,
        output_dim=config.backend.output_dim,
    )


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = _stage("config", load_config, getattr(args, "config", None))
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "patch_size",
            "n_f",
            "workers",
            "seed",
            "a",
            "b",
            "bright_fraction_threshold",
            "mode",
            "literal_ratio_constant",
            "backend_kind",
            "backend_model",
            "backend_preprocess",
            "backend_source",
            "backend_output_dim",
        )
    }
    mags = getattr(args, "mag", None)
    if mags:
        overrides["magnifications"] = tuple(mags)
    top_k = getattr(args, "top_k", None)
    if top_k:
        overrides["top_k"] = tuple(top_k)
    return _stage("config", config.with_overrides, **overrides)


# ---------------------------------------------------------------- commands


def cmd_synth(args: argparse.Namespace) -> int:
    spec = _stage("synth", CorpusSpec.from_json, args.spec)
    with _timed("synth", out=str(args.out)):
        manifest = _stage("synth", generate_synthetic_corpus, spec, args.out, args.seed)
    print(manifest)
    return 0


def cmd_tile(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    slides = _load_slides(args.manifest, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload: dict = {
        "magnification": args.mag,
        "patch_size": config.patch_size,
        "slides": {},
        "total": 0,
    }
    with _timed("tile", magnification=args.mag):
        for slide in slides:
            refs = _stage("tile", enumerate_patches, slide, args.mag, config.patch_size)
            level = slide.level_at(args.mag)
            payload["slides"][slide.slide_id] = {
                "rows": level.height // config.patch_size,
                "cols": level.width // config.patch_size,
                "count": len(refs),
                "patches": [[ref.row, ref.col] for ref in refs],
            }
            payload["total"] += len(refs)
            _log("tile", slide_id=slide.slide_id, count=len(refs))
    out_path = out_dir / f"patches_{args.mag}.json"
    out_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(out_path)
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    slides = _load_slides(args.manifest, config)
    report: dict = {
        "magnification": args.mag,
        "patch_size": config.patch_size,
        "config": {
            "a": config.filter.a,
            "b": config.filter.b,
            "bright_fraction_threshold": config.filter.bright_fraction_threshold,
            "mode": config.filter.mode,
            "literal_ratio_constant": config.filter.literal_ratio_constant,
        },
        "slides": {},
        "totals": {"kept": 0, "dropped": 0},
    }
    for slide in slides:
        with _timed("filter", slide_id=slide.slide_id) as timer:
            kept, dropped = _stage(
                "filter", filter_patches, slide, args.mag, config.filter, config.patch_size
            )
        report["slides"][slide.slide_id] = {"kept": len(kept), "dropped": dropped}
        report["totals"]["kept"] += len(kept)
        report["totals"]["dropped"] += dropped
    Path(args.report).write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(args.report)
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    slides = _load_slides(args.manifest, config)
    backend = _make_backend(config)
    source = None
    if config.backend.kind == "precomputed":
        source = _stage("embed", ingest_embeddings, config.backend.source, config.registry())
    with _timed("embed", magnification=args.mag, backend=config.backend.kind):
        store = _stage(
            "embed",
            embed_corpus,
            slides,
            args.mag,
            config.filter,
            backend,
            config.patch_size,
            config.workers,
            source,
        )
    _stage("embed", write_store, store, args.out, config.registry())
    _log("embed", magnification=args.mag, records=len(store), out=str(args.out))
    print(args.out)
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    store = _stage("reduce", ingest_embeddings, args.store, config.registry())
    with _timed("reduce", k=args.k):
        stats = _stage("reduce", compute_stats, store, args.k)
        reduced = _stage("reduce", reduce_store, store, stats)
    if args.stats_out:
        _stage("reduce", save_stats, stats, args.stats_out)
    _stage("reduce", write_store, reduced, args.out, config.registry())
    _log("reduce", records=len(reduced), dim=reduced.dim, out=str(args.out))
    print(args.out)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    store = _stage("compare", ingest_embeddings, args.store, config.registry())

    def compute() -> float:
        q = store.for_slide(args.query)
        r = store.for_slide(args.reference)
        matrix = similarity_matrix(q, r, args.query, args.reference)
        if args.dump_matrix:
            write_matrix(matrix, args.dump_matrix)
        return slide_similarity(matrix).value

    with _timed("compare", query=args.query, reference=args.reference):
        value = _stage("compare", compute)
    print(f"{value:.6f}")
    return 0


def _parse_store_map(spec: str) -> dict[str, str]:
    mapping = {}
    for item in spec.split(","):
        label, _, path = item.partition("=")
        if not label or not path:
            raise SlidesimError(f"bad --stores entry {item!r}; expected MAG=PATH")
        mapping[label.strip()] = path.strip()
    return mapping


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    slides = _load_slides(args.manifest, config)
    store_paths = _stage("evaluate", _parse_store_map, args.stores)
    stores = {
        mag: _stage("evaluate", ingest_embeddings, path, config.registry())
        for mag, path in store_paths.items()
    }
    with _timed("evaluate", magnifications=list(stores)):
        report = _stage("evaluate", evaluate, slides, stores, config.top_k, config.workers)
    _stage("evaluate", report.write, args.out)
    for (mag, k), acc in sorted(report.accuracy.items()):
        print(f"{mag} top-{k}: {acc:.4f}")
    print(args.out)
    return 0


def run_pipeline(
    config: PipelineConfig, manifest: str | Path, out_dir: str | Path
) -> tuple[SearchReport, dict]:
    """Filter, embed, optionally reduce, and evaluate a whole corpus.

    Returns the search report and a per-stage timing summary; all artifacts
    land in ``out_dir``. Reduction runs only when ``n_f`` is below the
    embedding dimension.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict = {"embed": {}, "reduce": {}, "evaluate": None, "total": None}
    total_start = time.perf_counter()
    slides = _load_slides(str(manifest), config)
    backend = _make_backend(config)
    source = None
    if config.backend.kind == "precomputed":
        source = _stage("embed", ingest_embeddings, config.backend.source, config.registry())

    stores = {}
    for mag in config.magnifications:
        with _timed("embed", magnification=mag) as timer:
            store = _stage(
                "embed",
                embed_corpus,
                slides,
                mag,
                config.filter,
                backend,
                config.patch_size,
                config.workers,
                source,
            )
            _stage("embed", write_store, store, out_dir / f"store_{mag}.slem", config.registry())
        timings["embed"][mag] = timer.duration

        if config.n_f < store.dim:
            with _timed("reduce", magnification=mag, k=config.n_f) as timer:
                stats = _stage("reduce", compute_stats, store, config.n_f)
                _stage("reduce", save_stats, stats, out_dir / f"stats_{mag}.json")
                store = _stage("reduce", reduce_store, store, stats)
                _stage(
                    "reduce",
                    write_store,
                    store,
                    out_dir / f"store_{mag}_reduced.slem",
                    config.registry(),
                )
            timings["reduce"][mag] = timer.duration
        stores[mag] = store

    with _timed("evaluate", magnifications=list(config.magnifications)) as timer:
        report = _stage("evaluate", evaluate, slides, stores, config.top_k, config.workers)
    timings["evaluate"] = timer.duration
    timings["total"] = time.perf_counter() - total_start

    _stage("report", report.write, out_dir / "report.json")
    (out_dir / "timings.json").write_text(
        json.dumps(timings, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return report, timings


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report, timings = run_pipeline(config, args.manifest, args.out)
    for (mag, k), acc in sorted(report.accuracy.items()):
        print(f"{mag} top-{k}: {acc:.4f}")
    print(Path(args.out) / "report.json")
    return 0


# ----------------------------------------------------------------- parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--patch-size", dest="patch_size", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--seed", type=int)


def _add_filter_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--a", type=int, help="upper edge of the dark luminance bin")
    parser.add_argument("--b", type=int, help="upper edge of the mid luminance bin")
    parser.add_argument(
        "--threshold", dest="bright_fraction_threshold", type=float,
        help="background decision threshold on the bright-pixel fraction",
    )
    parser.add_argument("--mode", choices=[MODE_BRIGHT_FRACTION, MODE_LITERAL_RATIO])
    parser.add_argument("--literal-constant", dest="literal_ratio_constant", type=float)


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--backend", dest="backend_kind",
        choices=["stub", "onnx", "torchscript", "precomputed"],
    )
    parser.add_argument("--model", dest="backend_model", help="model graph path")
    parser.add_argument("--preprocess", dest="backend_preprocess", help="preprocess.json path")
    parser.add_argument("--source", dest="backend_source", help="precomputed store path")
    parser.add_argument("--dim", dest="backend_output_dim", type=int, help="stub output dim")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slidesim",
        description="Content-based slide similarity measurement and search toolchain",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"slidesim {__version__} "
            f"(store format v{STORE_VERSION}, report format v{REPORT_VERSION})"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--spec", required=True, help="corpus spec JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tile", help="enumerate the patch grid at one magnification")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mag", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("filter", help="report kept/dropped patch counts per slide")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mag", required=True)
    p.add_argument("--report", required=True, help="output JSON path")
    _add_common(p)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("embed", help="embed tissue patches into a store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mag", required=True)
    p.add_argument("--out", required=True, help="output store path (.slem)")
    _add_common(p)
    _add_filter_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("reduce", help="select top components by coefficient of variation")
    p.add_argument("--store", required=True)
    p.add_argument("--k", type=int, required=True, help="components to keep")
    p.add_argument("--stats-out", dest="stats_out", help="statistics JSON path")
    p.add_argument("--out", required=True, help="reduced store path")
    _add_common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("compare", help="similarity of two slides in one store")
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--dump-matrix", dest="dump_matrix", help="write the raw matrix here")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("evaluate", help="leave-one-out top-k search accuracy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stores", required=True, help="comma list of MAG=STORE pairs")
    p.add_argument("--top-k", dest="top_k", type=lambda s: [int(k) for k in s.split(",")])
    p.add_argument("--out", required=True, help="report JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline: embed, reduce, evaluate")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--mag", action="append", help="restrict to this magnification (repeatable)")
    p.add_argument("--n-f", dest="n_f", type=int, help="reduced dimension; >= dim disables reduction")
    p.add_argument("--top-k", dest="top_k", type=lambda s: [int(k) for k in s.split(",")])
    _add_common(p)
    _add_filter_flags(p)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as failure:
        _log(failure.stage, error=str(failure.cause))
        print(f"error: {failure}", file=sys.stderr)
        return 2
    except (SlidesimError, OSError) as exc:
        _log(getattr(args, "command", "cli"), error=str(exc))
        print(f"error: stage {getattr(args, 'command', 'cli')!r} failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
