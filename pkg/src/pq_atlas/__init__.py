"""1D spectral theory of the p-Laplacian and a nodal-solution atlas for
the two-parameter (p,q)-Laplace Dirichlet problem on an interval."""

from .discrete import (DiscreteFunction, FunctionalContext, FunctionalReport,
                       Mesh, count_nodal, evaluate, gradient, rayleigh)
from .gtrig import GTrigValue, beta_fn, pi_r, sin_r, sinp_moment
from .spectral1d import (EigenPair, RayleighRatio, beta_upper_star,
                         eigenfunction, eigenvalue, k_alpha, rayleigh_ratio,
                         verify_lemma_margins)

__all__ = [
    "DiscreteFunction", "FunctionalContext", "FunctionalReport", "Mesh",
    "count_nodal", "evaluate", "gradient", "rayleigh",
    "GTrigValue", "beta_fn", "pi_r", "sin_r", "sinp_moment",
    "EigenPair", "RayleighRatio", "beta_upper_star", "eigenfunction",
    "eigenvalue", "k_alpha", "rayleigh_ratio", "verify_lemma_margins",
]

__version__ = "0.1.0"
