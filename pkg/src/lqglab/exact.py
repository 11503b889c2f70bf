"""Closed-form boundary integrability formulas and their identity residuals.

Implements, on top of the double gamma function with parameter b = gamma/2:

* the reflection coefficient ``r_bar`` and three-insertion moment ``h_bar``
  (boundary GMC moment of the unit interval with insertions at 0 and 1),
* boundary-length laws of two-pointed disks and of triangles, with their
  Laplace transforms,
* the conformal-derivative moment of the three-force-point chordal SLE
  (``radius_moment_exact``), its special closed forms at the disk weights
  2 and gamma^2/2, the shift relations connecting them, and the
  time-reversal consistency identity.

All formulas are evaluated in log space with explicit sign tracking and
exponentiated last; infinite-measure outcomes are returned as ``math.inf``
values rather than raised.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .params import DomainError, LqgParams, TriangleWeights, beta_rho_bridge
from .specfun import PoleError, get_evaluator, log_gamma

# (log|x|, sign) pairs keep products of large Gamma factors in range.
LogSigned = tuple[float, float]

_IMAG_TOL = 1e-7


def _mul(*terms: LogSigned) -> LogSigned:
    tot, sgn = 0.0, 1.0
    for lg, sg in terms:
        tot += lg
        sgn *= sg
    return tot, sgn


def _inv(term: LogSigned) -> LogSigned:
    return -term[0], term[1]


def _const(x: float) -> LogSigned:
    if x == 0.0:
        raise DomainError("zero factor in a log-space product")
    return math.log(abs(x)), math.copysign(1.0, x)


def _value(term: LogSigned) -> float:
    return term[1] * math.exp(term[0])


def _gamma_ls(z: float) -> LogSigned:
    return log_gamma(z)


def delta_beta(beta: float, p: LqgParams) -> float:
    """Scaling dimension (beta/2)(Q - beta/2) of a boundary insertion."""
    return 0.5 * beta * (p.Q - 0.5 * beta)


def _log_gamma_b_over_gamma(b: float, s: float) -> LogSigned:
    """(log|.|, sign) of Gamma_b(b*s) / Gamma(s), finite at s = 0, -1, -2, ...

    Both factors have a simple pole at non-positive integer s; the ratio is
    regular there.  For s below 1/2 the b-shift ladder expresses the ratio
    through Gamma(b^2 (s+j)) * (s+j) factors whose j = -s limit is 1/b^2.
    """
    ev = get_evaluator(b)
    if s > 0.5:
        return _mul(ev.log_abs_sign(b * s), _inv(_gamma_ls(s)))
    n_up = max(1, int(math.ceil(0.5 - s)))
    out = _mul(ev.log_abs_sign(b * (s + n_up)), _inv(_gamma_ls(s + n_up)))
    for j in range(n_up):
        sj = s + j
        out = _mul(out, _const(b ** (-b * b * sj + 0.5) / math.sqrt(2.0 * math.pi)))
        if abs(sj) < 1e-12:
            out = _mul(out, _const(1.0 / (b * b)))
        else:
            if b * b * sj <= 0.0 and abs(b * b * sj - round(b * b * sj)) < 1e-10:
                raise PoleError(f"Gamma_b/Gamma ladder pole at s = {s} (b = {b})")
            out = _mul(out, _gamma_ls(b * b * sj), _const(sj))
    return out


def _r_bar_ls(beta: float, p: LqgParams) -> LogSigned:
    g, Q = p.gamma, p.Q
    b = g / 2.0
    if abs(Q - beta) < 1e-12:
        raise DomainError("r_bar undefined at beta = Q")
    ev = get_evaluator(b)
    gap = Q - beta
    lg = (2.0 * gap / g - 0.5) * math.log(2.0 * math.pi)
    lg += (g * gap / 2.0 - 0.5) * math.log(2.0 / g)
    lg -= (2.0 * gap / g) * log_gamma(1.0 - g * g / 4.0)[0]
    return _mul(
        (lg, 1.0),
        _inv(_const(gap)),
        ev.log_abs_sign(beta - g / 2.0),
        _inv(ev.log_abs_sign(Q - beta)),
    )


def r_bar(beta: float, p: LqgParams) -> float:
    """Boundary reflection coefficient at unit length-cost, R(beta; 1, 0)."""
    return _value(_r_bar_ls(beta, p))


def seiberg_ok(beta1: float, beta2: float, beta3: float, p: LqgParams) -> bool:
    """Strict bounds under which the GMC moment behind h_bar is finite."""
    bbar = beta1 + beta2 + beta3
    return (
        beta1 < p.Q
        and beta2 < p.Q
        and abs(beta1 - beta2) < beta3
        and bbar > p.gamma
    )


@dataclass(frozen=True)
class HBarResult:
    """Value of the three-insertion moment plus its finiteness flag.

    ``finite`` reflects the Seiberg bounds for the GMC moment
    interpretation; the formula value is returned either way so the
    reflection identities can be tested across the bounds.
    """

    value: float
    finite: bool


def _h_bar_ls(beta1: float, beta2: float, beta3: float, p: LqgParams) -> LogSigned:
    g, Q = p.gamma, p.Q
    b = g / 2.0
    ev = get_evaluator(b)
    bbar = beta1 + beta2 + beta3
    mom = (2.0 * Q - bbar) / g  # moment order p
    s = -mom
    lg = (mom + 1.0) * math.log(2.0 * math.pi)
    lg += ((g / 2.0 - 2.0 / g) * (Q - bbar / 2.0) - 1.0) * math.log(2.0 / g)
    lg -= mom * log_gamma(1.0 - g * g / 4.0)[0]
    return _mul(
        (lg, 1.0),
        _log_gamma_b_over_gamma(b, s),  # Gamma_b(bbar/2 - Q) / Gamma((bbar-2Q)/gamma)
        ev.log_abs_sign((bbar - 2.0 * beta2) / 2.0),
        ev.log_abs_sign((bbar - 2.0 * beta1) / 2.0),
        ev.log_abs_sign(Q - (bbar - 2.0 * beta3) / 2.0),
        _inv(ev.log_abs_sign(Q)),
        _inv(ev.log_abs_sign(Q - beta1)),
        _inv(ev.log_abs_sign(Q - beta2)),
        _inv(ev.log_abs_sign(beta3)),
    )


def h_bar(beta1: float, beta2: float, beta3: float, p: LqgParams) -> HBarResult:
    """Moment of the unit-interval boundary GMC with insertions at 0 and 1.

    Equals E[nu_phi([0,1])^(2Q - beta_bar)/gamma] for the free boundary
    field with a beta1 (resp. beta2) log singularity at 0 (resp. 1) when
    the Seiberg bounds hold; the moment is infinite otherwise
    (``finite = False``).
    """
    val = _value(_h_bar_ls(beta1, beta2, beta3, p))
    return HBarResult(value=val, finite=seiberg_ok(beta1, beta2, beta3, p))


def gmc_moment_exact(beta1: float, beta2: float, beta3: float, p: LqgParams) -> float:
    """h_bar as a moment value: math.inf when the Seiberg bounds fail."""
    res = h_bar(beta1, beta2, beta3, p)
    return res.value if res.finite else math.inf


def h_bar_reflection_residual(
    beta1: float, beta2: float, beta3: float, p: LqgParams
) -> float:
    """Relative residual of the thin-vertex reflection identity.

    Checks h_bar at (beta1, 2Q - beta2, beta3) against
    -Gamma((2/g)(2Q - beta2 - 2/g)) Gamma((bbar - 2Q)/g) /
    Gamma((beta1 + beta3 - beta2)/g) * r_bar(2Q - beta2) * h_bar(betas).
    """
    g, Q = p.gamma, p.Q
    bbar = beta1 + beta2 + beta3
    lhs = _h_bar_ls(beta1, 2.0 * Q - beta2, beta3, p)
    rhs = _mul(
        _const(-1.0),
        _gamma_ls((2.0 / g) * (2.0 * Q - beta2 - 2.0 / g)),
        _gamma_ls((bbar - 2.0 * Q) / g),
        _inv(_gamma_ls((beta1 + beta3 - beta2) / g)),
        _r_bar_ls(2.0 * Q - beta2, p),
        _h_bar_ls(beta1, beta2, beta3, p),
    )
    return abs(_value(lhs) - _value(rhs)) / abs(_value(rhs))


@dataclass(frozen=True)
class LengthLawDensity:
    """Power-law boundary length density: prefactor * ell^exponent d(ell)."""

    prefactor: float
    exponent: float
    infinite: bool = False

    def at(self, ell: float) -> float:
        if self.infinite:
            return math.inf
        return self.prefactor * ell**self.exponent


def disk_length_density(W: float, p: LqgParams) -> LengthLawDensity:
    """Law of one boundary length of the weight-W two-pointed disk.

    density = r_bar(beta; 1, 0) * ell^(-2W/gamma^2); every length window has
    infinite mass once W >= gamma * Q.
    """
    if W <= 0.0:
        raise DomainError(f"weight must be positive, got {W}")
    g = p.gamma
    if W >= g * p.Q:
        return LengthLawDensity(math.inf, -2.0 * W / (g * g), infinite=True)
    beta = g + (2.0 - W) / g
    return LengthLawDensity(r_bar(beta, p), -2.0 * W / (g * g))


def triangle_length_density(tw: TriangleWeights, p: LqgParams) -> LengthLawDensity:
    """Law of the boundary arc length between the W1 and W2 vertices.

    Same expression in the thick and mixed regimes: the h_bar prefactor is
    taken at the unreflected insertions while the finiteness gate applies
    the Seiberg bounds to the reflected ones.
    """
    g, Q = p.gamma, p.Q
    for W in (tw.W1, tw.W2, tw.W3):
        if abs(W - p.thick_threshold) < 1e-12:
            raise DomainError(
                "weight gamma^2/2 vertices have a modified length law; unsupported"
            )
    exponent = (tw.beta_bar - 2.0 * Q) / g - 1.0
    if not seiberg_ok(*tw.reflected_betas, p):
        return LengthLawDensity(math.inf, exponent, infinite=True)
    pre = _mul(
        _const(2.0 / g),
        _h_bar_ls(tw.beta1, tw.beta2, tw.beta3, p),
        _inv(_const(Q - tw.beta1)),
        _inv(_const(Q - tw.beta2)),
        _inv(_const(Q - tw.beta3)),
    )
    return LengthLawDensity(_value(pre), exponent)


def triangle_length_laplace(tw: TriangleWeights, mu: float, p: LqgParams) -> float:
    """Laplace transform of the left-boundary-length law at mu > 0.

    2 h_bar Gamma((beta_bar-2Q)/gamma) mu^((2Q-beta_bar)/gamma) /
    (gamma prod(Q - beta_i)); math.inf when the density is not integrable.
    """
    if mu <= 0.0:
        raise DomainError(f"mu must be positive, got {mu}")
    g, Q = p.gamma, p.Q
    dens = triangle_length_density(tw, p)
    powexp = (tw.beta_bar - 2.0 * Q) / g
    if dens.infinite or powexp <= 0.0:
        return math.inf
    val = _mul(
        _const(dens.prefactor),
        _gamma_ls(powexp),
        _const(mu ** (-powexp)),
    )
    return _value(val)


# ---------------------------------------------------------------------------
# Conformal-derivative moments of SLE_kappa(rho_-; rho_+, rho_1)
# ---------------------------------------------------------------------------


def alpha_threshold(kappa: float, rho_plus: float, rho_1: float) -> float:
    """Divergence threshold: the moment is infinite for alpha >= this."""
    return (rho_plus + 2.0) * (rho_plus + rho_1 + 4.0 - kappa / 2.0) / kappa


def alpha_to_beta_roots(alpha: float, kappa: float, rho_1: float) -> tuple[complex, complex]:
    """Both solutions beta of the exponent relation, as complex numbers.

    The relation, quadratic in beta, is
        (sqrt(k)(sqrt(k) - beta) - rho_1)(4 + rho_1 - sqrt(k) beta) = 4 k alpha.
    Writing u = sqrt(k) beta the two roots satisfy u+ + u- = kappa + 4, so
    the associated F-arguments x = beta + rho_1/sqrt(k) come in pairs
    symmetric about b + 1/b (with b = sqrt(k)/2), which makes the moment
    formula root-independent.  Roots are a conjugate pair when
    (kappa - 4 - 2 rho_1)^2 + 16 kappa alpha < 0.
    """
    sk = math.sqrt(kappa)
    disc = (kappa - 4.0 - 2.0 * rho_1) ** 2 + 16.0 * kappa * alpha
    sq = cmath.sqrt(disc)
    u_lo = ((kappa + 4.0) - sq) / 2.0
    u_hi = ((kappa + 4.0) + sq) / 2.0
    return (u_lo / sk, u_hi / sk)


def beta_relation_residual(beta: complex, alpha: float, kappa: float, rho_1: float) -> float:
    """|LHS - alpha| of the exponent relation at the given beta."""
    sk = math.sqrt(kappa)
    lhs = (sk * (sk - beta) - rho_1) * (4.0 + rho_1 - sk * beta) / (4.0 * kappa)
    return abs(lhs - alpha)


def _log_f(x: complex, kappa: float, rho_m: float, rho_p: float, rho_1: float) -> complex:
    sk = math.sqrt(kappa)
    b = sk / 2.0
    ev = get_evaluator(b)
    a1 = 2.0 / sk - sk / 2.0 + rho_p / sk
    a2 = 4.0 / sk + (rho_p + rho_1) / sk
    a3 = 4.0 / sk - sk / 2.0 + (rho_p + rho_m) / sk
    a4 = 6.0 / sk + (rho_m + rho_p + rho_1) / sk
    args = (a1 + x / 2.0, a2 - x / 2.0, a3 + x / 2.0, a4 - x / 2.0)
    names = ("numerator-left", "numerator-right", "denominator-left", "denominator-right")
    logs = []
    for arg, name in zip(args, names):
        try:
            logs.append(ev.log_complex(arg))
        except PoleError as exc:
            raise PoleError(f"F-function {name} argument {arg} hit a pole") from exc
    return logs[0] + logs[1] - logs[2] - logs[3]


def f_function(x: float, kappa: float, rho_minus: float, rho_plus: float, rho_1: float) -> float:
    """The four-fold double gamma ratio entering the moment formula."""
    val = cmath.exp(_log_f(complex(x), kappa, rho_minus, rho_plus, rho_1))
    if abs(val.imag) > _IMAG_TOL * max(1.0, abs(val.real)):
        raise DomainError(f"f_function returned non-real value {val}")
    return val.real


@dataclass(frozen=True)
class RadiusMomentQuery:
    """Admissible parameter bundle for the conformal-derivative moment."""

    kappa: float
    rho_minus: float
    rho_plus: float
    rho_1: float
    alpha: float
    alpha_0: float = field(init=False)
    beta_roots: tuple[complex, complex] = field(init=False)

    def __post_init__(self) -> None:
        k = self.kappa
        if not (0.0 < k < 4.0):
            raise DomainError(f"kappa must lie in (0, 4), got {k}")
        if self.rho_minus <= -2.0:
            raise DomainError(f"rho_minus must exceed -2, got {self.rho_minus}")
        if self.rho_plus <= -2.0:
            raise DomainError(f"rho_plus must exceed -2, got {self.rho_plus}")
        if self.rho_1 <= -2.0 - self.rho_plus:
            raise DomainError(
                f"rho_1 must exceed -2 - rho_plus = {-2.0 - self.rho_plus}, got {self.rho_1}"
            )
        object.__setattr__(
            self, "alpha_0", alpha_threshold(k, self.rho_plus, self.rho_1)
        )
        object.__setattr__(
            self, "beta_roots", alpha_to_beta_roots(self.alpha, k, self.rho_1)
        )

    @property
    def roots_real(self) -> bool:
        return abs(self.beta_roots[0].imag) == 0.0


def radius_moment_exact(q: RadiusMomentQuery, root_index: int = 0) -> float:
    """E[psi'(1)^alpha] for SLE_kappa(rho_-; rho_+, rho_1), or math.inf.

    Evaluates F(beta + rho_1/sqrt(k)) / F(sqrt(k)).  Conjugate beta roots
    are handled through the complex double gamma; the two roots give the
    same (real) value, which is asserted to a relative 1e-7.
    """
    if q.alpha >= q.alpha_0:
        return math.inf
    sk = math.sqrt(q.kappa)
    x = q.beta_roots[root_index] + q.rho_1 / sk
    logratio = _log_f(x, q.kappa, q.rho_minus, q.rho_plus, q.rho_1) - _log_f(
        complex(sk), q.kappa, q.rho_minus, q.rho_plus, q.rho_1
    )
    val = cmath.exp(logratio)
    if abs(val.imag) > _IMAG_TOL * max(1.0, abs(val.real)):
        raise DomainError(
            f"moment evaluated non-real ({val}) at {q}; root pairing broken"
        )
    return val.real


def radius_moment(
    kappa: float, rho_minus: float, rho_plus: float, rho_1: float, alpha: float
) -> float:
    """Convenience wrapper building the query and evaluating the moment."""
    return radius_moment_exact(RadiusMomentQuery(kappa, rho_minus, rho_plus, rho_1, alpha))


def _m_value(beta_minus: float, beta1: float, beta2: float, alpha: float, p: LqgParams) -> float:
    rho_m, rho_p, rho_1 = beta_rho_bridge(beta_minus, beta1, beta2, p)
    return radius_moment(p.kappa, rho_m, rho_p, rho_1, alpha)


def _m_closed_form(
    beta1: float, beta2: float, alpha: float, p: LqgParams, scale: float
) -> float:
    g, Q = p.gamma, p.Q
    for name, bb in (("beta1", beta1), ("beta2", beta2)):
        if bb >= Q + g / 2.0 or abs(bb - Q) < 1e-12:
            raise DomainError(f"{name} = {bb} outside the closed-form domain")
    rho_1 = g * (beta2 - beta1)
    beta = alpha_to_beta_roots(alpha, p.kappa, rho_1)[0]
    num = sp.loggamma(scale * (Q - (beta1 + beta2 - beta) / 2.0)) + sp.loggamma(
        scale * (2.0 * Q - (beta1 + beta2 + beta) / 2.0)
    )
    den = sp.loggamma(scale * (Q + 2.0 / g - beta1)) + sp.loggamma(
        scale * (Q + g / 2.0 - beta2)
    )
    val = cmath.exp(num - den)
    if abs(val.imag) > _IMAG_TOL * max(1.0, abs(val.real)):
        raise DomainError(f"closed form evaluated non-real: {val}")
    return val.real


def m_gamma_closed_form(beta1: float, beta2: float, alpha: float, p: LqgParams) -> float:
    """Moment at interface weight 2 (beta_- = gamma): an ordinary Gamma ratio."""
    return _m_closed_form(beta1, beta2, alpha, p, 2.0 / p.gamma)


def m_Q_closed_form(beta1: float, beta2: float, alpha: float, p: LqgParams) -> float:
    """Moment at interface weight gamma^2/2 (beta_- = Q): dual Gamma ratio."""
    return _m_closed_form(beta1, beta2, alpha, p, p.gamma / 2.0)


def shift_relation_residuals(
    beta_minus: float, beta1: float, beta2: float, alpha: float, p: LqgParams
) -> tuple[float, float, float]:
    """Relative residuals of the 2/gamma shift, gamma/2 shift, and the
    multiplicative composition rule, all through radius_moment_exact."""
    g, Q = p.gamma, p.Q
    beta = alpha_to_beta_roots(alpha, p.kappa, g * (beta2 - beta1))[0]

    def gamma_ratio(scale: float) -> float:
        num = sp.loggamma(
            scale * (2.0 * Q + (g - beta1 - beta2 - 2.0 * beta_minus + beta) / 2.0)
        ) + sp.loggamma(
            scale * (3.0 * Q + (g - beta1 - beta2 - 2.0 * beta_minus - beta) / 2.0)
        )
        den = sp.loggamma(scale * (3.0 * Q - beta1 - beta_minus)) + sp.loggamma(
            scale * (2.0 * Q + g - beta2 - beta_minus)
        )
        val = cmath.exp(num - den)
        if abs(val.imag) > _IMAG_TOL * max(1.0, abs(val.real)):
            raise DomainError(f"shift-relation Gamma ratio non-real: {val}")
        return val.real

    try:
        m0 = _m_value(beta_minus, beta1, beta2, alpha, p)
    except DomainError as exc:
        raise DomainError(f"base moment m(beta_-) failed: {exc}") from exc
    try:
        m_a = _m_value(beta_minus - 2.0 / g, beta1, beta2, alpha, p)
    except DomainError as exc:
        raise DomainError(f"2/gamma-shifted moment failed: {exc}") from exc
    try:
        m_b = _m_value(beta_minus - g / 2.0, beta1, beta2, alpha, p)
    except DomainError as exc:
        raise DomainError(f"gamma/2-shifted moment failed: {exc}") from exc

    rhs_a = gamma_ratio(2.0 / g)
    rhs_b = gamma_ratio(g / 2.0)
    res_a = abs(m_a / m0 - rhs_a) / abs(rhs_a)
    res_b = abs(m_b / m0 - rhs_b) / abs(rhs_b)

    # composition: tilde_beta = beta_minus glues two interface maps
    shift = beta_minus - Q - g / 2.0
    try:
        lhs = _m_value(beta_minus + shift, beta1, beta2, alpha, p)
        mid = _m_value(beta_minus, beta1 + shift, beta2 + shift, alpha, p)
    except DomainError as exc:
        raise DomainError(f"composition moment failed: {exc}") from exc
    res_mult = abs(lhs - mid * m0) / abs(lhs)
    return (res_a, res_b, res_mult)


def reversal_consistency_residual(
    kappa: float, rho_minus: float, rho_plus: float, rho_1: float, alpha: float
) -> float:
    """Residual of the time-reversal weighting identity.

    The reversed curve's law reweights SLE_kappa(rho_-; rho_+ + rho_1,
    -rho_1) by psi'(1)^(alpha*) with alpha* = rho_1(4 - kappa)/(2 kappa),
    and psi'(1) is invariant under the reversal map, so
        m(rho_+, rho_1; alpha) * m'(alpha*) = m'(alpha + alpha*)
    with m' the moment under the reversed parameters.
    """
    alpha_star = rho_1 * (4.0 - kappa) / (2.0 * kappa)
    m1 = radius_moment(kappa, rho_minus, rho_plus, rho_1, alpha)
    m2 = radius_moment(kappa, rho_minus, rho_plus + rho_1, -rho_1, alpha_star)
    m3 = radius_moment(kappa, rho_minus, rho_plus + rho_1, -rho_1, alpha + alpha_star)
    for name, val in (("m", m1), ("m'(alpha*)", m2), ("m'(alpha+alpha*)", m3)):
        if not math.isfinite(val):
            raise DomainError(f"reversal identity needs finite moments; {name} diverged")
    return abs(m1 * m2 - m3) / abs(m3)
