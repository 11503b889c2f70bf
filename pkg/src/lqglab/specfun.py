"""Double gamma function Gamma_b and ordinary log-gamma.

Gamma_b is the meromorphic function on C with zeros nowhere and poles at
z = -m*b - n/b (m, n >= 0), normalized by Gamma_b(Q_b/2) = 1 where
Q_b = b + 1/b.  For Re z > 0 it has the integral representation

    log Gamma_b(z) = int_0^inf dt/t * [
        (exp(-z t) - exp(-Q_b t / 2)) / ((1 - exp(-b t)) (1 - exp(-t/b)))
        - (Q_b - 2 z)^2 / 8 * exp(-t)
        - (Q_b - 2 z) / (2 t) ]

and satisfies the two shift equations

    Gamma_b(z) / Gamma_b(z + b)   = Gamma(b z)  b^(-b z + 1/2) / sqrt(2 pi),
    Gamma_b(z) / Gamma_b(z + 1/b) = Gamma(z / b) b^(z/b - 1/2) / sqrt(2 pi).

The integrand is symmetric under b <-> 1/b, so Gamma_b = Gamma_{1/b}.

Evaluation strategy
-------------------
Direct quadrature of the integral is only well conditioned for z in a
central strip Re z in [0.25*Q_b, 1.25*Q_b]: there the integrand decays on
an O(1) scale and the small-t cancellation (three terms each ~ 1/t
combining to O(t)) loses at most a few digits, which panelled
Gauss-Legendre absorbs.  Outside the strip the shift equations move the
argument in, accumulating ordinary log-gamma factors (with sign tracking
for negative real arguments).  The t-integral is split at T_SPLIT: below,
fixed Gauss-Legendre panels graded toward 0; above, the expansion
1/(1-e^(-bt)) = sum_m e^(-m b t) turns the remainder into a rapidly
converging double sum of exponential integrals E1, plus the exact tail
-(Q_b - 2z)/(2*T_SPLIT) of the counterterm.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special as sp

from .params import DomainError

SQRT_TWO_PI = math.sqrt(2.0 * math.pi)

B_MIN = 0.3
B_MAX = 3.0

# Strip bounds (multiples of Q_b) for direct quadrature.
STRIP_LO = 0.25
STRIP_HI = 1.25

# Quadrature layout: panel edges graded toward the cancellation region near
# t = 0; beyond T_SPLIT the integral is summed analytically.
T_SPLIT = 10.0
T_CUT = 1e-3  # below: analytic power series; above: Gauss-Legendre panels
_PANEL_EDGES = (
    T_CUT, 1e-2, 0.03, 0.08, 0.18, 0.35, 0.6, 1.0, 1.5,
    2.2, 3.0, 4.0, 5.2, 6.6, 8.2, T_SPLIT,
)
_GL_ORDER = 48
_SERIES_TERMS = 8

POLE_TOL = 1e-8

# Sensitivity self-test knob: added to every strip-integral evaluation of
# log Gamma_b (the identity suite must detect a 1e-3 injection and fail).
PERTURB_LOG = 0.0


class PoleError(DomainError):
    """Evaluation requested at (or too close to) a pole."""


def log_gamma(z: float) -> tuple[float, float]:
    """log |Gamma(z)| and the sign of Gamma(z) for real z.

    Raises PoleError at non-positive integers.
    """
    z = float(z)
    if z <= 0.0 and abs(z - round(z)) < POLE_TOL:
        raise PoleError(f"Gamma pole at z = {z}")
    return float(sp.gammaln(z)), float(sp.gammasgn(z))


def _cexpm1(w: np.ndarray) -> np.ndarray:
    """expm1 for complex arrays without cancellation near w = 0."""
    x, y = w.real, w.imag
    ex = np.expm1(x)
    cy = np.cos(y)
    # e^x cos y - 1 = expm1(x) cos y - 2 sin^2(y/2)
    re = ex * cy - 2.0 * np.sin(y / 2.0) ** 2
    im = (ex + 1.0) * np.sin(y)
    return re + 1j * im


@lru_cache(maxsize=32)
def _panel_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = []
    weights = []
    for a, b in zip(_PANEL_EDGES[:-1], _PANEL_EDGES[1:]):
        half = 0.5 * (b - a)
        nodes.append(a + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _pole_distance(b: float, z: complex) -> float:
    """Distance from z to the pole lattice {-m b - n / b : m, n >= 0}."""
    x, y = float(np.real(z)), float(np.imag(z))
    if x > 0.5 * min(b, 1.0 / b):
        return abs(x)  # safely right of every pole
    best = math.inf
    m_max = int(math.ceil((-x) / b)) + 1
    for m in range(m_max + 1):
        r = -x - m * b
        n = max(0, round(r * b))  # nearest n to r / (1/b)
        for nn in (n - 1, n, n + 1):
            if nn < 0:
                continue
            d = math.hypot(x + m * b + nn / b, y)
            best = min(best, d)
    return best


def _head_series(b: float, z: complex) -> complex:
    """Integral of the integrand over [0, T_CUT] by its power series.

    The integrand has a finite limit at t = 0 but is a difference of
    O(1/t^2)-sized terms, so direct evaluation below T_CUT loses all
    accuracy; instead divide the power series of
    (e^{-zt} - e^{-qt/2}) by that of (1-e^{-bt})(1-e^{-t/b}) / t^2 and
    integrate term by term.  Truncation error ~ T_CUT^9.
    """
    q = b + 1.0 / b
    m = _SERIES_TERMS
    k = np.arange(1, m + 2, dtype=np.float64)
    fact = sp.factorial(k)
    ntil = ((-z) ** k - (-q / 2.0) ** k) / fact  # ntil[j] = coeff of t^{j+1} in N
    u = -((-b) ** k) / fact
    v = -((-1.0 / b) ** k) / fact
    # P[j] = coeff of t^j in D / t^2, D = (1 - e^{-bt})(1 - e^{-t/b})
    p = np.convolve(u, v)[: m + 1]
    quot = np.zeros(m + 1, dtype=complex)
    for j in range(m + 1):
        quot[j] = (ntil[j] - np.dot(p[1 : j + 1], quot[:j][::-1])) / p[0]
    # integrand g(t) = sum_k g_k t^k, with the 1/t counterterm cancelling
    # quot[0] exactly and -C e^{-t}/t contributing its own series
    cc = (q / 2.0 - z) ** 2 / 2.0
    kk = np.arange(m - 1, dtype=np.float64)
    g = quot[2 : m + 1] - cc * (-1.0) ** (kk + 1) / sp.factorial(kk + 1)
    powers = T_CUT ** (kk + 1) / (kk + 1)
    total = np.dot(g, powers)
    return total if np.iscomplexobj(np.asarray(z)) else total.real


def _strip_integral(b: float, z: np.ndarray) -> np.ndarray:
    """The integral representation, valid (and accurate) on the strip."""
    q = b + 1.0 / b
    t, w = _panel_nodes(_GL_ORDER)
    zz = np.asarray(z)[..., None]
    half_gap = q / 2.0 - zz
    if np.iscomplexobj(zz):
        num = np.exp(-q * t / 2.0) * _cexpm1(half_gap * t)
    else:
        num = np.exp(-q * t / 2.0) * np.expm1(half_gap * t)
    den = np.expm1(-b * t) * np.expm1(-t / b)
    cc = half_gap**2 / 2.0
    dd = half_gap
    integrand = (num / den - cc * np.exp(-t) - dd / t) / t
    val = integrand @ w
    val = val + np.vectorize(_head_series, otypes=[zz.dtype])(b, zz[..., 0])

    # Remainder over [T_SPLIT, inf): geometric expansion of the kernel plus
    # the exact counterterm tails.
    e1 = sp.exp1
    tail = -dd[..., 0] / T_SPLIT - cc[..., 0] * e1(T_SPLIT)
    m_terms = int(math.ceil(45.0 / (b * T_SPLIT))) + 1
    n_terms = int(math.ceil(45.0 / (T_SPLIT / b))) + 1
    m = np.arange(m_terms)[:, None]
    n = np.arange(n_terms)[None, :]
    lattice = m * b + n / b
    zgrid = zz[..., None] + lattice
    qgrid = q / 2.0 + lattice
    tail = tail + np.sum(e1(zgrid * T_SPLIT) - e1(qgrid * T_SPLIT), axis=(-2, -1))
    return val + tail


class DoubleGammaEvaluator:
    """Evaluator for log Gamma_b at fixed b in [0.3, 3].

    Immutable after construction; evaluations are pure.  Keeps a value
    cache and counts how many b / (1/b) shifts the last call used.
    """

    def __init__(self, b: float):
        b = float(b)
        if not (B_MIN <= b <= B_MAX):
            raise DomainError(f"b must lie in [{B_MIN}, {B_MAX}], got {b}")
        self.b = b
        self.q = b + 1.0 / b
        self.strip_lo = STRIP_LO * self.q
        self.strip_hi = STRIP_HI * self.q
        # shift in the larger of b, 1/b: fewer applications, and the same
        # ladder is used by the evaluator at 1/b (symmetry test support)
        self._step = max(b, 1.0 / b)
        self._step_is_b = b >= 1.0 / b
        self.shifts_up = 0
        self.shifts_down = 0
        self._cache: dict[float, tuple[float, float]] = {}

    def _shift_factor_real(self, z: float) -> tuple[float, float]:
        """log|f|, sign of f = Gamma(z/step') * step'^(...) / sqrt(2pi).

        f is the factor with Gamma_b(z) = f * Gamma_b(z + step); step' is b
        if stepping by b (factor uses Gamma(b z)) and 1/b otherwise
        (factor uses Gamma(z/b)).
        """
        b = self.b
        if self._step_is_b:
            arg, bpow = b * z, -b * z + 0.5
        else:
            arg, bpow = z / b, z / b - 0.5
        lg, sg = log_gamma(arg)
        return lg + bpow * math.log(b) - 0.5 * math.log(2.0 * math.pi), sg

    def log_abs_sign(self, z: float) -> tuple[float, float]:
        """(log |Gamma_b(z)|, sign) for real z, via shifts into the strip."""
        z = float(z)
        key = z
        hit = self._cache.get(key)
        if hit is not None:
            return (hit[0] + PERTURB_LOG, hit[1])
        if _pole_distance(self.b, z) < POLE_TOL:
            raise PoleError(f"Gamma_b pole near z = {z} (b = {self.b})")
        up = down = 0
        logf = 0.0
        sign = 1.0
        zz = z
        # Gamma_b(z) = prod(factors) * Gamma_b(z + k*step)
        while zz < self.strip_lo:
            lf, sg = self._shift_factor_real(zz)
            logf += lf
            sign *= sg
            zz += self._step
            up += 1
        while zz > self.strip_hi:
            zz -= self._step
            lf, sg = self._shift_factor_real(zz)
            logf -= lf
            sign *= sg
            down += 1
        val = logf + float(_strip_integral(self.b, np.float64(zz)))
        if self._step_is_b:
            self.shifts_up, self.shifts_down = up + down, 0
        else:
            self.shifts_up, self.shifts_down = 0, up + down
        self._cache[key] = (val, sign)
        return (val + PERTURB_LOG, sign)

    def log_complex(self, z: complex) -> complex:
        """log Gamma_b(z) for complex z (defined modulo 2 pi i)."""
        z = complex(z)
        if _pole_distance(self.b, z) < POLE_TOL:
            raise PoleError(f"Gamma_b pole near z = {z} (b = {self.b})")
        b = self.b
        logf = 0.0 + 0.0j
        zz = z
        while zz.real < self.strip_lo:
            if self._step_is_b:
                logf += sp.loggamma(b * zz) + (-b * zz + 0.5) * math.log(b)
            else:
                logf += sp.loggamma(zz / b) + (zz / b - 0.5) * math.log(b)
            logf -= 0.5 * math.log(2.0 * math.pi)
            zz += self._step
        while zz.real > self.strip_hi:
            zz -= self._step
            if self._step_is_b:
                logf -= sp.loggamma(b * zz) + (-b * zz + 0.5) * math.log(b)
            else:
                logf -= sp.loggamma(zz / b) + (zz / b - 0.5) * math.log(b)
            logf += 0.5 * math.log(2.0 * math.pi)
        return logf + complex(_strip_integral(self.b, np.complex128(zz)))


@lru_cache(maxsize=64)
def _evaluator(b: float) -> DoubleGammaEvaluator:
    return DoubleGammaEvaluator(b)


def get_evaluator(b: float) -> DoubleGammaEvaluator:
    """Shared evaluator for the given b (construction is cached)."""
    return _evaluator(round(float(b), 15))


def log_gamma_b(b: float, z: float) -> float:
    """log Gamma_b(z) for real z with Gamma_b(z) > 0.

    On z > 0 the function is positive; for arguments continued past poles
    (negative z) where the sign may be negative, use
    ``get_evaluator(b).log_abs_sign``.
    """
    val, sign = get_evaluator(b).log_abs_sign(z)
    if sign < 0:
        raise DomainError(
            f"Gamma_b({z}) < 0; log is complex -- use log_abs_sign for continued values"
        )
    return val
