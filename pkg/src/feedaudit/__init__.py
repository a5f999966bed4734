"""Measure, model, simulate and bias-audit FIFO news feeds."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegenerateDatasetError,
    DomainError,
    FeedAuditError,
    FormatVersionError,
    NumericalError,
    ValidationError,
)
from .records import PostRecord, Snapshot, SnapshotEntry, SnapshotSet  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DegenerateDatasetError",
    "DomainError",
    "FeedAuditError",
    "FormatVersionError",
    "NumericalError",
    "ValidationError",
    "PostRecord",
    "Snapshot",
    "SnapshotEntry",
    "SnapshotSet",
]
