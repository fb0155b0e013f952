"""Spectral fractional Laplacian on tensor-product domains.

Solvers and verification tools for the concave-convex problem
``(-Lap)^(a/2) u = lam u^q + u^p`` with Dirichlet conditions: minimal
branch continuation, critical parameter bracketing, mountain-pass second
solution, and the degenerate-extension oracle that cross-validates the
spectral operator.
"""

from .errors import (
    ConfigError,
    DomainError,
    IterationFailure,
    MountainPassError,
    SchemeError,
)
from .special import (
    ExtensionProfile,
    FracParams,
    c_constants,
    gamma_fn,
    hls_constants,
    kappa_alpha,
    solve_profile,
    supercritical_nonexistence,
    trace_constant,
    weighted_energy,
)

__version__ = "0.1.0"
