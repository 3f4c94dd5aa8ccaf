"""Exception taxonomy shared by every module.

The CLI maps these onto distinct process exit codes, so new exception
types should subclass one of the four buckets below (validation, I/O,
provenance, numeric) rather than raising bare builtins.
"""


class ReprogaitError(Exception):
    """Base class for all package errors."""


# --- validation bucket -------------------------------------------------

class DimensionError(ReprogaitError):
    """Array shapes disagree; the message names the offending axis."""


class ConfigError(ReprogaitError):
    """A configuration field is missing, mistyped, or out of range."""


class UsageError(ReprogaitError):
    """An operation was called in a state its contract forbids."""


class MissingHeadError(ReprogaitError):
    """A prediction was requested for a task the model has no head for."""


class InsufficientDataError(ReprogaitError):
    """Not enough samples to satisfy an operation's preconditions."""


class FormatError(ReprogaitError):
    """A file violates its documented schema; cites the line number."""


# --- numeric bucket ----------------------------------------------------

class NumericError(ReprogaitError):
    """Base for runtime numeric failures."""


class DataError(NumericError):
    """A data file contains a non-finite or unparseable value."""


class ConstantChannelError(NumericError):
    """A channel has zero variance and cannot be normalized."""


class MetricError(NumericError):
    """A metric is undefined for the given inputs (e.g. constant target)."""


# --- provenance bucket -------------------------------------------------

class ProvenanceError(ReprogaitError):
    """Pipeline artifacts disagree about the model/data they were built from."""
