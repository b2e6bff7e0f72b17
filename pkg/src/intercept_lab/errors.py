"""Exception types shared across the laboratory."""


class InterceptLabError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(InterceptLabError):
    """An input violated a documented precondition (bad geometry, non-symmetric matrix, ...)."""


class ParameterError(InterceptLabError):
    """A configuration value is outside its valid range."""


class FilterDivergenceError(InterceptLabError):
    """A Kalman update became numerically unusable (singular innovation covariance)."""


class ScenarioError(InterceptLabError):
    """A scenario cannot be run as configured (e.g. trajectory shorter than the duration)."""


class TrajectoryParseError(InterceptLabError):
    """A trajectory file is malformed; the message names the offending row."""


class GenerationError(InterceptLabError):
    """Random trajectory generation exhausted its rejection budget."""


class MetricError(InterceptLabError):
    """A metric was requested over an empty sample set."""


class TuningError(InterceptLabError):
    """Parameter tuning could not start or proceed (e.g. non-finite initial objective)."""


class ConfigError(InterceptLabError):
    """A config file is missing, unreadable, or contains unknown/invalid keys."""
