"""Exception and warning types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not line up for the requested operation."""


class StateError(RuntimeError):
    """An operation was called before the state it depends on exists."""


class BatchTooSmallError(ValueError):
    """Train-mode batch normalization needs at least two rows."""


class ConfigError(ValueError):
    """A configuration value violates its documented invariants."""


class DomainError(ValueError):
    """A numeric argument lies outside the domain of the function."""


class NormalizationError(ValueError):
    """Scale parameters cannot be fitted or are internally inconsistent."""


class GenerationError(RuntimeError):
    """The synthetic generator cannot produce a sample for a condition."""


class SplitError(ValueError):
    """A dataset cannot be partitioned as requested."""


class DatasetParseError(ValueError):
    """A dataset file is malformed. ``rows`` lists offending 1-based row numbers."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)


class ModelLoadError(ValueError):
    """Base class for failures while reading a serialized container."""


class VersionMismatchError(ModelLoadError):
    pass


class TruncatedStreamError(ModelLoadError):
    pass


class ChecksumError(ModelLoadError):
    pass


class PairingError(ModelLoadError):
    """A model and a norm-params file do not belong together."""


class ExtrapolationWarning(UserWarning):
    """Inputs fall outside the range seen when the scales were fitted."""
