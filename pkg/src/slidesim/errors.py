"""Exception hierarchy shared across the slidesim pipeline stages."""


class SlidesimError(Exception):
    """Base class for all errors raised by slidesim."""


class ManifestError(SlidesimError):
    """Corpus manifest is missing, malformed, or internally inconsistent."""


class PyramidError(SlidesimError):
    """Pyramid metadata or level images cannot satisfy a patch request."""


class CorpusSpecError(SlidesimError):
    """Synthetic corpus specification is degenerate or unusable."""


class StoreFormatError(SlidesimError):
    """Embedding store file violates the binary format or its invariants."""


class BackendError(SlidesimError):
    """Inference backend cannot be constructed or produced invalid output."""


class EmbeddingError(SlidesimError):
    """An embedding record violates the vector invariants."""


class ReductionError(SlidesimError):
    """Feature statistics or projection cannot be computed as requested."""


class EmptySlideError(SlidesimError):
    """A similarity comparison was requested for a slide with no patches."""


class SearchError(SlidesimError):
    """Search or evaluation inputs are inconsistent with the corpus."""
