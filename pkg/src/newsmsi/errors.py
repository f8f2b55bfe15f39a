"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class MsiError(Exception):
    """Base class for errors raised by ``newsmsi``."""


class DataError(MsiError, ValueError):
    """Input data is missing, malformed or violates a structural invariant."""


class NumericalError(MsiError, ArithmeticError):
    """A numerical stage cannot produce a meaningful result."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped before reaching its tolerance.

    Attributes
    ----------
    residual : float
        Largest residual norm at the last iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations
