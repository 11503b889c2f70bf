"""Coupling constants and weight/insertion/force-point conversions.

Everything downstream is parameterized by a single coupling gamma in (0,2).
The derived constants are

    kappa = gamma^2            (SLE speed)
    Q     = 2/gamma + gamma/2  (background charge)
    lam   = pi / sqrt(kappa)   (imaginary-geometry height gap)
    chi   = 2/sqrt(kappa) - sqrt(kappa)/2

A boundary weight W > 0 corresponds to a boundary insertion

    beta = gamma + (2 - W)/gamma,

with the thick regime W >= gamma^2/2 (equivalently beta <= Q) and the thin
regime W < gamma^2/2 (beta > Q).  Force-point weights of the interface
process attached to a triple of boundary weights are

    rho_minus = W - 2,  rho_plus = W2 - 2,  rho_1 = W1 - W2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class DomainError(ValueError):
    """Raised when an input lies outside the supported parameter range."""


@dataclass(frozen=True)
class LqgParams:
    """Immutable coupling bundle; ``gamma`` is the single source of truth."""

    gamma: float
    kappa: float = field(init=False)
    Q: float = field(init=False)
    lam: float = field(init=False)
    chi: float = field(init=False)

    def __post_init__(self) -> None:
        g = self.gamma
        if not (0.0 < g < 2.0):
            raise DomainError(f"gamma must lie in (0, 2), got {g}")
        sk = g  # sqrt(kappa) = gamma for kappa = gamma^2
        object.__setattr__(self, "kappa", g * g)
        object.__setattr__(self, "Q", 2.0 / g + g / 2.0)
        object.__setattr__(self, "lam", math.pi / sk)
        object.__setattr__(self, "chi", 2.0 / sk - sk / 2.0)

    @classmethod
    def from_kappa(cls, kappa: float) -> "LqgParams":
        if not (0.0 < kappa < 4.0):
            raise DomainError(f"kappa must lie in (0, 4), got {kappa}")
        return cls(math.sqrt(kappa))

    @property
    def thick_threshold(self) -> float:
        """Weight gamma^2/2 separating thick from thin surfaces."""
        return self.gamma * self.gamma / 2.0


def weight_to_beta(W: float, p: LqgParams) -> float:
    """Insertion strength of a weight-W boundary vertex."""
    if W <= 0.0:
        raise DomainError(f"weight must be positive, got {W}")
    return p.gamma + (2.0 - W) / p.gamma


def beta_to_weight(beta: float, p: LqgParams) -> float:
    """Inverse of :func:`weight_to_beta`."""
    return 2.0 + p.gamma * (p.gamma - beta)


@dataclass(frozen=True)
class InsertionSpec:
    """A boundary weight together with its insertion and thickness flag."""

    weight: float
    beta: float
    thick: bool

    @classmethod
    def from_weight(cls, W: float, p: LqgParams) -> "InsertionSpec":
        return cls(weight=W, beta=weight_to_beta(W, p), thick=W >= p.thick_threshold)


@dataclass(frozen=True)
class TriangleWeights:
    """Weights of the three vertices with insertions and their reflections.

    ``reflected_betas`` replaces the insertion of each thin vertex
    (beta > Q) by 2Q - beta, so every reflected insertion is <= Q.
    """

    W1: float
    W2: float
    W3: float
    beta1: float
    beta2: float
    beta3: float
    beta_bar: float
    reflected_betas: tuple[float, float, float]

    @classmethod
    def from_weights(cls, W1: float, W2: float, W3: float, p: LqgParams) -> "TriangleWeights":
        betas = [weight_to_beta(W, p) for W in (W1, W2, W3)]
        refl = tuple(b if b <= p.Q else 2.0 * p.Q - b for b in betas)
        return cls(W1, W2, W3, betas[0], betas[1], betas[2], sum(betas), refl)

    @property
    def betas(self) -> tuple[float, float, float]:
        return (self.beta1, self.beta2, self.beta3)

    def thick_flags(self, p: LqgParams) -> tuple[bool, bool, bool]:
        t = p.thick_threshold
        return (self.W1 >= t, self.W2 >= t, self.W3 >= t)


def weights_to_rho(W: float, W1: float, W2: float, p: LqgParams) -> tuple[float, float, float]:
    """Force-point weights (rho_minus, rho_plus, rho_1) of the interface.

    W is the weight welded along the interface, (W1, W2) the weights of the
    triangle vertices adjacent to it.
    """
    for name, val in (("W", W), ("W1", W1), ("W2", W2)):
        if val <= 0.0:
            raise DomainError(f"{name} must be positive, got {val}")
    return (W - 2.0, W2 - 2.0, W1 - W2)


def beta_rho_bridge(
    beta_minus: float, beta1: float, beta2: float, p: LqgParams
) -> tuple[float, float, float]:
    """Translate insertion parameters to force-point weights.

    (beta_minus, beta1, beta2) -> (gamma^2 - gamma*beta_minus,
    gamma^2 - gamma*beta2, gamma*(beta2 - beta1)).  Round-trips with
    :func:`weights_to_rho` through :func:`beta_to_weight`.
    """
    g = p.gamma
    return (g * g - g * beta_minus, g * g - g * beta2, g * (beta2 - beta1))


def alpha_exponent(W1: float, W2: float, W3: float, p: LqgParams) -> float:
    """Conformal-derivative exponent attached to a weight triple.

    alpha = (W3 + W2 - W1 - 2)(W3 + W1 + 2 - W2 - kappa) / (4 kappa).
    Vanishes on the flow-line locus W3 = W1 - W2 + 2.
    """
    for name, val in (("W1", W1), ("W2", W2), ("W3", W3)):
        if val <= 0.0:
            raise DomainError(f"{name} must be positive, got {val}")
    k = p.kappa
    return (W3 + W2 - W1 - 2.0) * (W3 + W1 + 2.0 - W2 - k) / (4.0 * k)
