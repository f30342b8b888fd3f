"""Exception hierarchy.

Everything the CLI maps to exit code 1 derives from :class:`ValidationError`;
everything that maps to exit code 2 derives from :class:`FetchError` (or is a
plain :class:`OSError`).
"""


class CohortMinerError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CohortMinerError, ValueError):
    pass


class ParseError(ValidationError):
    """Malformed git dump input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ValidationError):
    """A document does not conform to its schema; ``path`` names the offending node."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class EmptyWindowError(ValidationError):
    def __init__(self, project=None):
        self.project = project
        where = f" for project {project!r}" if project else ""
        super().__init__(f"empty-window: no active contributors in the study window{where}")


class EmptySelectionError(ValidationError):
    def __init__(self, message="empty-selection: no issues selected"):
        super().__init__(message)


class EmptySampleError(ValidationError):
    def __init__(self, message="empty-sample: no values"):
        super().__init__(message)


class FetchError(CohortMinerError):
    """Tracker API failure; ``url`` is the request that failed."""

    kind = "transport"

    def __init__(self, url, message):
        self.url = url
        super().__init__(f"{self.kind} error for {url}: {message}")


class AuthError(FetchError):
    kind = "auth"


class RateLimitError(FetchError):
    kind = "rate-limit"


class TransportError(FetchError):
    kind = "transport"


class MalformedPayloadError(FetchError):
    kind = "malformed-payload"
