"""Exception hierarchy shared across the package."""


class SpikedTylerError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SpikedTylerError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class DomainError(SpikedTylerError, ValueError):
    """An input lies outside the domain of a function (e.g. not positive definite)."""


class DegeneracyError(SpikedTylerError, ArithmeticError):
    """A factorization degenerated (singular polar factor, huge retraction step, ...)."""


class HorizontalityError(SpikedTylerError, ValueError):
    """A tangent vector required to be horizontal is not."""


class AlignmentError(DomainError):
    """Two subspaces are (numerically) orthogonal along some direction."""


class StructureError(SpikedTylerError, RuntimeError):
    """An assembled object violates a structural property it must have."""


class ConfigError(SpikedTylerError, ValueError):
    """Invalid experiment or solver configuration."""
