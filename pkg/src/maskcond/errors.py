"""Exception types shared across the package."""


class MaskcondError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(MaskcondError, ValueError):
    """Array arguments have inconsistent or unsupported dimensions."""


class ContractError(MaskcondError, ValueError):
    """An argument violates a documented contract other than shape."""


class NotSpdError(MaskcondError, ValueError):
    """A matrix that must be symmetric positive definite is not."""


class DegenerateConditioningError(NotSpdError):
    """A conditional covariance is singular within tolerance."""


class NumericError(MaskcondError, ArithmeticError):
    """A numeric invariant failed (non-finite values where finiteness is required)."""


class ConfigError(MaskcondError, ValueError):
    """A configuration value or file is invalid."""


class BandwidthError(MaskcondError, ValueError):
    """A kernel bandwidth heuristic degenerated (zero median distance)."""
