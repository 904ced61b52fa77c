"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class LeadwatchError(Exception):
    """Base class for all errors raised by leadwatch."""


class ConfigError(LeadwatchError):
    pass


class InvalidURLError(LeadwatchError, ValueError):
    pass


# feed ingestion


class FeedError(LeadwatchError):
    pass


class FeedParseError(FeedError):
    """Malformed XML. ``offset`` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class UnsupportedFeedError(FeedError):
    pass


class ResolutionError(FeedError, ValueError):
    pass


# article fetching


class FetchError(LeadwatchError):
    retryable = False

    def __init__(self, message: str, *, url: str | None = None, status: int | None = None) -> None:
        super().__init__(message)
        self.url = url
        self.status = status


class RetryableFetchError(FetchError):
    retryable = True


class PermanentFetchError(FetchError):
    pass


class UnsupportedContentError(PermanentFetchError):
    pass


# LLM extraction


class ExtractionError(LeadwatchError):
    pass


class OutputParseError(ExtractionError):
    """Model content was not JSON."""


class SchemaError(ExtractionError):
    """Model content was JSON but did not satisfy the Article schema."""


class CredentialError(ExtractionError):
    """Authentication failed. Fatal for a run."""


class TransientLLMError(ExtractionError):
    def __init__(self, message: str, *, retry_after: float | None = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class RetriesExhaustedError(ExtractionError):
    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message)
        self.attempts = attempts


class LLMRequestError(ExtractionError):
    """Non-retryable HTTP failure other than authentication."""


# storage and runs


class StoreError(LeadwatchError):
    pass


class RunInProgressError(LeadwatchError):
    pass
