"""Exception hierarchy shared by all engine components."""


class AdIntentError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(AdIntentError):
    """Invalid build input or configuration (empty corpus, bad params, ...)."""


class InvalidInputError(AdIntentError):
    """Caller supplied data that violates an operation's preconditions."""


class InvalidPrefixError(AdIntentError):
    """A token prefix is not a path in the intention trie."""


class DecodeError(AdIntentError):
    """Constrained decoding failed; carries the originating context."""


class AssignmentError(AdIntentError):
    """Intention assignment failed for a specific ad."""

    def __init__(self, ad_id: str, message: str):
        super().__init__(f"assignment failed for ad {ad_id!r}: {message}")
        self.ad_id = ad_id


class IndexBuildError(AdIntentError):
    """Inverted-index construction rejected its input."""


class IdempotencyError(AdIntentError):
    """Duplicate add or missing remove on the inverted index."""


class RetrievalError(AdIntentError):
    """End-to-end retrieval failed; carries the pipeline stage that failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class UndefinedMetricError(AdIntentError):
    """A metric was requested on input for which it is undefined."""
