"""Exception types shared across the package."""


class PnslError(Exception):
    """Base class for all package errors."""


class ParameterError(PnslError, ValueError):
    """Invalid shape, exponent or configuration parameter."""


class CoverageError(PnslError, ValueError):
    """A grid does not cover the domain it is asked to host."""


class ConfigurationError(PnslError, ValueError):
    """Inconsistent solver/diagnostics configuration detected at run time."""


class DegenerateGradientError(PnslError, ValueError):
    """The classical operator was evaluated at a zero gradient."""


class DomainRangeError(PnslError, ValueError):
    """An evaluation point lies outside the range of a closed-form solution."""
