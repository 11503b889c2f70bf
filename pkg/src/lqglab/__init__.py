"""lqglab: exact formulas and Monte Carlo verification for SLE / LQG
boundary integrability (double gamma special functions, boundary GMC,
SLE(kappa; rho) conformal-derivative moments, quantum-surface radial laws).
"""

__version__ = "0.1.0"

from .params import (  # noqa: F401
    DomainError,
    InsertionSpec,
    LqgParams,
    TriangleWeights,
    alpha_exponent,
    beta_rho_bridge,
    beta_to_weight,
    weight_to_beta,
    weights_to_rho,
)
