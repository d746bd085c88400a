"""Exception hierarchy shared across pipeline stages."""

from __future__ import annotations


class ClaimkitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidClaim(ClaimkitError):
    """A claim violates a stage precondition (empty text, wrong response, ...)."""


class ProviderUnavailable(ClaimkitError):
    """A live provider could not be reached or refused the request."""


class ReplayMiss(ClaimkitError):
    """No recorded response exists for a request in replay-only mode."""

    def __init__(self, request_hash: str, kind: str = ""):
        self.request_hash = request_hash
        self.kind = kind
        detail = f"no recorded response for request {request_hash}"
        if kind:
            detail += f" (kind={kind})"
        super().__init__(detail)


class MalformedResponse(ClaimkitError):
    """A model completion could not be parsed into the expected shape."""


class EmptyKeys(ClaimkitError):
    """Key-fact filtering removed every candidate; the case must be dropped."""


class GenerationLeak(ClaimkitError):
    """Generated evidence still supports the banned fact after all retries."""


class MissingAnnotation(ClaimkitError):
    """A requested analysis needs annotations that the corpus does not carry."""


class ParseError(ClaimkitError):
    """A corpus line is not valid JSON."""

    def __init__(self, line_number: int, detail: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {detail}")


class SchemaError(ClaimkitError):
    """A corpus record is missing or misusing a required field."""

    def __init__(self, field: str, line_number: int | None = None, detail: str = ""):
        self.field = field
        self.line_number = line_number
        msg = f"invalid field {field!r}"
        if line_number is not None:
            msg += f" at line {line_number}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class RunLocked(ClaimkitError):
    """Another run currently owns the output directory."""
