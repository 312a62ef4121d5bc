"""Content-based similarity measurement and search for tiled slide images.

The pipeline tiles each slide pyramid level into fixed-size patches, drops
background patches by luminance histogram, embeds the survivors with a
pluggable backend, optionally keeps only the most variable feature
components, and scores slide pairs by aggregating the patch-pair cosine
matrix into a single symmetric value. A leave-one-out search harness turns
those scores into top-k retrieval accuracy per magnification.
"""

from .backends import (
    InferenceBackend,
    OnnxBackend,
    StubBackend,
    TorchscriptBackend,
    create_backend,
)
from .config import BackendConfig, PipelineConfig, load_config
from .embedding import embed_corpus, embed_patch, embed_refs
from .errors import (
    BackendError,
    CorpusSpecError,
    EmbeddingError,
    EmptySlideError,
    ManifestError,
    PyramidError,
    ReductionError,
    SearchError,
    SlidesimError,
    StoreFormatError,
)
from .pyramid import (
    DEFAULT_PATCH_SIZE,
    MAGNIFICATIONS,
    Level,
    Magnification,
    MagnificationRegistry,
    PatchPixels,
    PatchRef,
    SlideRecord,
    enumerate_patches,
    load_manifest,
    read_patch,
)
from .reduction import (
    ReductionStats,
    compute_stats,
    load_stats,
    reduce_embeddings,
    reduce_store,
    save_stats,
)
from .search import QueryOutcome, RankedResult, SearchReport, evaluate, rank_all, top_k_hit
from .similarity import (
    PreparedPatches,
    SimilarityMatrix,
    SlideSimilarity,
    compare_slides,
    cosine,
    similarity_matrix,
    slide_similarity,
    write_matrix,
)
from .store import EmbeddingStore, PatchEmbedding, ingest_embeddings, write_store
from .synthetic import CorpusSpec, generate_synthetic_corpus
from .tissue import FilterConfig, HistogramTriple, filter_patches, histogram3, is_background, luminance

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BackendError",
    "CorpusSpec",
    "CorpusSpecError",
    "DEFAULT_PATCH_SIZE",
    "EmbeddingError",
    "EmbeddingStore",
    "EmptySlideError",
    "FilterConfig",
    "HistogramTriple",
    "InferenceBackend",
    "Level",
    "MAGNIFICATIONS",
    "Magnification",
    "MagnificationRegistry",
    "ManifestError",
    "OnnxBackend",
    "PatchEmbedding",
    "PatchPixels",
    "PatchRef",
    "PipelineConfig",
    "PreparedPatches",
    "PyramidError",
    "QueryOutcome",
    "RankedResult",
    "ReductionError",
    "ReductionStats",
    "SearchError",
    "SearchReport",
    "SimilarityMatrix",
    "SlideRecord",
    "SlideSimilarity",
    "SlidesimError",
    "StoreFormatError",
    "StubBackend",
    "TorchscriptBackend",
    "compare_slides",
    "compute_stats",
    "cosine",
    "create_backend",
    "embed_corpus",
    "embed_patch",
    "embed_refs",
    "enumerate_patches",
    "evaluate",
    "filter_patches",
    "generate_synthetic_corpus",
    "histogram3",
    "ingest_embeddings",
    "is_background",
    "load_config",
    "load_manifest",
    "load_stats",
    "luminance",
    "rank_all",
    "read_patch",
    "reduce_embeddings",
    "reduce_store",
    "save_stats",
    "similarity_matrix",
    "slide_similarity",
    "top_k_hit",
    "write_matrix",
    "write_store",
]
