"""Exception hierarchy shared by the library and the CLI."""


class FeedAuditError(Exception):
    """Base class for all errors raised by feedaudit."""


class DomainError(FeedAuditError, ValueError):
    """An argument falls outside the domain of a model or metric."""


class NumericalError(FeedAuditError, ArithmeticError):
    """A linear solve was singular or too ill-conditioned to trust."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConfigError(FeedAuditError, ValueError):
    """A simulation configuration violates its invariants."""


class DegenerateDatasetError(FeedAuditError, ValueError):
    """A dataset carries no information for the requested computation."""


class ValidationError(FeedAuditError, ValueError):
    """An input file or record failed validation.

    ``line`` and ``field`` locate the offending record when known.
    """

    def __init__(self, message, line=None, field=None):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.field = field
        self.reason = message


class FormatVersionError(ValidationError):
    """A file declares a format version this package cannot read."""
