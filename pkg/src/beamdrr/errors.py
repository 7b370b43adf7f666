"""Exception hierarchy shared by the library and the CLI.

Each class corresponds to one CLI exit code (see cli.EXIT_CODES); the
library raises these so callers can distinguish bad inputs from genuine
estimation failures.
"""


class EstimatorError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EstimatorError):
    """Invalid configuration, flags, manifest, or scene description."""


class InputDataError(EstimatorError):
    """Audio input unusable: format, channel count, length."""


class SampleRateError(InputDataError):
    """The file's sample rate differs from the configured rate."""


class VadError(EstimatorError):
    """Frame selection failed: no or too few active frames."""


class DegenerateBeamspaceError(EstimatorError):
    """The two-beamformer system carries no usable spatial information."""


class DrrUndefinedError(EstimatorError):
    """The direct/reverberant ratio is unbounded or has no usable bins."""
