"""Exception hierarchy shared across the toolkit."""


class SemdriftError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SemdriftError):
    """A record or argument violates a type invariant.

    Carries an optional ``field`` naming the offending attribute so
    ingestion reports can point at the exact problem.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConfigurationError(SemdriftError):
    """A requested configuration cannot be satisfied (bad policy params,
    missing cost entries, k exceeding a trace's recorded alternatives)."""


class ProtocolError(SemdriftError):
    """A remote backend violated the wire contract (length mismatch,
    malformed response body)."""


class EndpointError(SemdriftError):
    """A remote endpoint failed. ``retriable`` marks transient failures;
    ``sample_index`` identifies which resample was in flight, if any."""

    def __init__(self, message: str, retriable: bool = True, sample_index: int | None = None):
        super().__init__(message)
        self.retriable = retriable
        self.sample_index = sample_index


class CapabilityError(SemdriftError):
    """An endpoint lacks a required capability (e.g. token logprobs)."""
