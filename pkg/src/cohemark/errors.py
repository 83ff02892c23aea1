"""Exception types shared across the toolkit."""


class CohemarkError(Exception):
    """Base class for all toolkit errors."""


class InsufficientData(CohemarkError):
    """Fewer training points than clusters."""


class NumericalFailure(CohemarkError):
    """Non-finite values encountered during numerics."""


class DimensionMismatch(CohemarkError):
    """Vector width does not match the model or embedder."""


class EmbedderMismatch(CohemarkError):
    """Embedder identity differs from the one the model was trained with."""


class RankOutOfRange(CohemarkError):
    """A configured green rank exceeds the number of clusters."""


class RemoteUnavailable(CohemarkError):
    """Remote embedding endpoint failed or returned a malformed response."""


class LmUnavailable(CohemarkError):
    """Remote language-model endpoint failed or returned a malformed response."""


class EmptyResponse(CohemarkError):
    """Remote endpoint answered with empty text."""


class IoFailure(CohemarkError):
    """File could not be read, written, or parsed."""


class SchemaVersionMismatch(CohemarkError):
    """Persisted file declares an unknown format version."""


class EmptyInput(CohemarkError):
    """An operation requiring data received none."""


class GenerationFailure(CohemarkError):
    """Watermarked generation halted before completing.

    Carries the partial record (outcome ``FAILED``) so callers that treat
    failures as data, like the CLI, can still persist what was produced.
    """

    def __init__(self, reason: str, record=None):
        super().__init__(reason)
        self.reason = reason
        self.record = record
