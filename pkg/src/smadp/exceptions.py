"""Exception hierarchy shared by the library and the command line front end."""


class SmadpError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SmadpError, ValueError):
    """An input lies outside the domain of a function (e.g. NaN weights)."""


class DegenerateRegressorError(SmadpError, ValueError):
    """An update was requested with an all-zero regressor."""


class DivergenceError(SmadpError, FloatingPointError):
    """An adaptive filter produced non-finite weights."""


class ConfigError(SmadpError, ValueError):
    """Invalid algorithm hyperparameters or experiment configuration."""


class ExperimentError(SmadpError, RuntimeError):
    """A Monte-Carlo experiment could not produce any usable result."""
