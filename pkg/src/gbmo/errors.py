"""Exception hierarchy shared by all modules."""


class GBMOError(Exception):
    """Base class for library errors."""


class DomainError(GBMOError, ValueError):
    """A point, cell or box lies outside the region where an object is defined."""


class ParameterError(GBMOError, ValueError):
    """An argument violates a documented precondition."""


class ShapeError(GBMOError, ValueError):
    """Array or matrix dimensions are inconsistent."""


class NumericError(GBMOError, ArithmeticError):
    """Quadrature or linear algebra produced a non-finite result."""


class UnsupportedTessellationError(ParameterError):
    """The reference cell does not tile space (e.g. a ball)."""


class StructureError(GBMOError):
    """Null-space detection found an inconsistent structure."""

    def __init__(self, message, combination=None):
        super().__init__(message)
        self.combination = combination


class SolverError(GBMOError):
    """An iterative minimization failed to reach its gradient tolerance."""

    def __init__(self, message, iterate=None, grad_norm=None, cell=None):
        super().__init__(message)
        self.iterate = iterate
        self.grad_norm = grad_norm
        self.cell = cell
