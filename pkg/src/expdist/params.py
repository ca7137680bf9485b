"""Shared scalar problem parameters and kernel result carriers."""

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside a kernel's mathematical domain."""


class NumericalError(RuntimeError):
    """An iterative solve failed; carries the last bracket for post-mortem."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ConfigurationError(ValueError):
    """Inconsistent grid / weight / solver configuration."""


@dataclass(frozen=True)
class DistortionParams:
    """Exponent weight p > 0 and regularization level lambda in (0, 1].

    lam = 1 recovers the unregularized problem.
    """

    p: float
    lam: float = 1.0

    def __post_init__(self):
        if not (self.p > 0 and np.isfinite(self.p)):
            raise DomainError(f"p must be positive and finite, got {self.p}")
        if not (0.0 < self.lam <= 1.0):
            raise DomainError(f"lambda must lie in (0, 1], got {self.lam}")


@dataclass
class KernelEval:
    """Value, derivative (w.r.t. the primary argument) and solve residual.

    For closed-form kernels the residual is 0.  For implicit kernels it is
    the relative functional-equation residual left after the solve.
    """

    value: np.ndarray | float
    derivative: np.ndarray | float
    residual: np.ndarray | float = 0.0

    def __iter__(self):
        return iter((self.value, self.derivative, self.residual))
