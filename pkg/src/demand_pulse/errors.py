"""Exception hierarchy.

Everything raised on bad *data* derives from :class:`DataError` so the CLI can
map it to exit code 2. :class:`InvariantViolation` signals a bug (exit 3).
"""

from __future__ import annotations


class DemandPulseError(Exception):
    """Base class for all errors raised by this package."""


class DataError(DemandPulseError, ValueError):
    """Input data cannot be analysed as requested."""


class EmptyInput(DataError):
    pass


class EmptyWindow(DataError):
    pass


class NotContiguous(DataError):
    pass


class ZeroVariance(DataError):
    pass


class ZeroRange(DataError):
    pass


class TooShort(DataError):
    pass


class NotAligned(DataError):
    pass


class NonMonotoneCumulative(DataError):
    pass


class DuplicateDate(DataError):
    pass


class MissingDates(DataError):
    pass


class SchemaError(DataError):
    pass


class ForeignZone(DataError):
    pass


class ZeroPopulation(DataError):
    pass


class DegenerateX(DataError):
    pass


class ConfigError(DemandPulseError):
    """Configuration file is malformed or references missing inputs."""


class StageError(DemandPulseError):
    """A pipeline stage failed; wraps the underlying error with context."""

    def __init__(self, stage: str, cause: BaseException, path=None, context: str | None = None):
        self.stage = stage
        self.cause = cause
        self.path = path
        self.context = context
        msg = f"stage '{stage}' failed: {cause}"
        if path is not None:
            msg += f" [file: {path}]"
        if context:
            msg += f" [{context}]"
        super().__init__(msg)


class MissingIntermediate(DemandPulseError):
    """An intermediate file needed by a subcommand has not been produced."""

    def __init__(self, path, producer: str):
        self.path = path
        self.producer = producer
        super().__init__(f"missing intermediate {path}; run the '{producer}' subcommand first")


class InvariantViolation(DemandPulseError, AssertionError):
    """An internal consistency check failed."""
