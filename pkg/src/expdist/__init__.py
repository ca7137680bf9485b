"""expdist: minimisers of the p-exponential conformal distortion energy.

Subpackages
-----------
kernels      scalar closed-form and implicit kernels with bracketed inverses
grid         triangulated maps, Wirtinger calculus, conformal weights
functional   exponential / regularized / truncated energies and gradients
solver       barrier-safeguarded descent with lambda- and p-continuation
diagnostics  the quadratic-differential field and stationarity residuals
cli          batch orchestration, persistence, plots
"""

from ._backend import backend_name
from .params import (
    ConfigurationError,
    DistortionParams,
    DomainError,
    KernelEval,
    NumericalError,
)

__version__ = "0.1.0"

__all__ = [
    "DistortionParams",
    "KernelEval",
    "DomainError",
    "NumericalError",
    "ConfigurationError",
    "backend_name",
    "__version__",
]
