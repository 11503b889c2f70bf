"""Chordal SLE_kappa(rho) driving processes and mapping-out observables.

Two layers:

* a generic (numpy, vectorized over paths) Euler-Maruyama driver for
  arbitrary force-point configurations -- used by ``simulate_driving`` and
  the distributional tests;
* a numba Monte Carlo kernel specialized to force points (0-, 0+, 1)
  (see ``_kernels``) -- used by the moment estimators, with counter-based
  dyadic-bridge noise so results are independent of thread count and
  dt-halving reruns ride the same Brownian paths.

The observable is psi'(1): psi maps the complementary component containing
1 back to the half plane, fixing 1 and sending the first (last) boundary
point hit by the curve to 0 (infinity).  At horizon T the estimate is
g_T'(1) * M'(g_T(1)) with M the Moebius normalization built from the
tracked images; convergence is certified per sample by comparing the
horizon-T and horizon-T/2 values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, exact
from .harness import MomentEstimate, accumulate
from .params import DomainError

EPS_C = _kernels.EPS_C
SWALLOW_EPS = 1e-6
DEFAULT_CONV_TOL = 1e-3
MAX_BAD_FRACTION = 0.05


class SimulationError(RuntimeError):
    """Numerical blow-up inside the driving simulation (carries step index)."""


class QualityError(RuntimeError):
    """Monte Carlo run failed its sample-quality gates."""


@dataclass(frozen=True)
class ForcePointConfig:
    """Force points (position, weight), nearest-to-origin first per side."""

    left: tuple[tuple[float, float], ...]
    right: tuple[tuple[float, float], ...]
    kappa: float

    def __post_init__(self) -> None:
        if not (0.0 < self.kappa < 4.0):
            raise DomainError(f"kappa must lie in (0, 4), got {self.kappa}")
        lpos = [x for x, _ in self.left]
        rpos = [x for x, _ in self.right]
        if any(x > 0.0 for x in lpos) or lpos != sorted(lpos, reverse=True):
            raise DomainError("left positions must be <= 0 and decreasing")
        if any(x < 0.0 for x in rpos) or rpos != sorted(rpos):
            raise DomainError("right positions must be >= 0 and increasing")

    @classmethod
    def standard(cls, kappa: float, rho_minus: float, rho_plus: float, rho_1: float
                 ) -> "ForcePointConfig":
        return cls(left=((0.0, rho_minus),), right=((0.0, rho_plus), (1.0, rho_1)),
                   kappa=kappa)


@dataclass
class DrivingPath:
    """A discretized driving function with force-point trajectories."""

    dt: float
    times: np.ndarray
    W: np.ndarray
    V_left: np.ndarray   # shape (k, n_times)
    V_right: np.ndarray  # shape (l, n_times)
    config: ForcePointConfig
    seed: int
    threshold_time: Optional[float] = None


@dataclass
class ObserverState:
    """Image and derivative of one tracked boundary point."""

    g_value: float
    g_derivative: float
    swallowed: bool
    swallow_time: Optional[float] = None


def _generic_drive(cfg: ForcePointConfig, T: float, dt: float, seed: int,
                   n_paths: int, store: bool = False):
    """Vectorized Euler driver for arbitrary force points.

    Substeps a path whenever its smallest |W - V| gap falls under
    10 sqrt(kappa h); reflects at the floor EPS_C unless the colliding
    side's cumulative weight is <= -2, which stops that path (continuation
    threshold).
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    k = cfg.kappa
    sqk = math.sqrt(k)
    nL, nR = len(cfg.left), len(cfg.right)
    rhoL = np.array([r for _, r in cfg.left])
    rhoR = np.array([r for _, r in cfg.right])
    cumL = np.cumsum(rhoL) if nL else np.empty(0)
    cumR = np.cumsum(rhoR) if nR else np.empty(0)
    steps = int(round(T / dt))
    W = np.zeros(n_paths)
    VL = np.empty((nL, n_paths))
    VR = np.empty((nR, n_paths))
    for i, (x, _) in enumerate(cfg.left):
        VL[i] = min(x, -EPS_C)
    for i, (x, _) in enumerate(cfg.right):
        VR[i] = max(x, EPS_C)
    alive = np.ones(n_paths, dtype=bool)
    floored = np.zeros(n_paths, dtype=bool)
    threshold_time = np.full(n_paths, np.nan)
    if store:
        Wst = np.zeros((steps + 1, n_paths))
        VLst = np.zeros((nL, steps + 1, n_paths))
        VRst = np.zeros((nR, steps + 1, n_paths))
        Wst[0] = W
        VLst[:, 0] = VL
        VRst[:, 0] = VR

    def substep(mask: np.ndarray, h: float) -> None:
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return
        w = W[idx]
        drift = np.zeros(idx.size)
        for i in range(nL):
            drift += rhoL[i] / (w - VL[i, idx])
        for i in range(nR):
            drift += rhoR[i] / (w - VR[i, idx])
        xi = rng.standard_normal(idx.size)
        cap = 3.0 * sqk * math.sqrt(h)
        w_new = w + sqk * math.sqrt(h) * xi + np.clip(h * drift, -cap, cap)
        # images under the frozen-W Loewner flow (exact in h, order safe)
        for i in range(nL):
            VL[i, idx] = w - np.sqrt((w - VL[i, idx]) ** 2 + 4.0 * h)
        for i in range(nR):
            VR[i, idx] = w + np.sqrt((VR[i, idx] - w) ** 2 + 4.0 * h)
        W[idx] = w_new
        # enforce V ordering within each side (points may merge)
        for i in range(1, nL):
            VL[i, idx] = np.minimum(VL[i, idx], VL[i - 1, idx])
        for i in range(1, nR):
            VR[i, idx] = np.maximum(VR[i, idx], VR[i - 1, idx])

    def handle_collisions(t_now: float) -> None:
        nonlocal alive
        for i in range(nL):
            coll = alive & (W - VL[i] < EPS_C)
            if not coll.any():
                continue
            floored[coll] = True
            if cumL[i] <= -2.0:
                alive &= ~coll
                threshold_time[coll & np.isnan(threshold_time)] = t_now
            else:
                W[coll] = VL[i, coll] + EPS_C
        for i in range(nR):
            coll = alive & (VR[i] - W < EPS_C)
            if not coll.any():
                continue
            floored[coll] = True
            if cumR[i] <= -2.0:
                alive &= ~coll
                threshold_time[coll & np.isnan(threshold_time)] = t_now
            else:
                W[coll] = VR[i, coll] - EPS_C

    for step in range(steps):
        gaps = np.full(n_paths, np.inf)
        for i in range(nL):
            gaps = np.minimum(gaps, W - VL[i])
        for i in range(nR):
            gaps = np.minimum(gaps, VR[i] - W)
        ns = np.ones(n_paths, dtype=np.int64)
        need = gaps < _kernels.ADAPT_FACTOR * np.sqrt(k * dt)
        ns[need] = 16
        very = gaps < _kernels.ADAPT_FACTOR * np.sqrt(k * dt / 16.0)
        ns[very] = 256
        for count in np.unique(ns):
            mask = alive & (ns == count)
            h = dt / count
            for _ in range(count):
                substep(mask, h)
                handle_collisions((step + 1) * dt)
                mask &= alive
        bad = alive & ~np.isfinite(W)
        if bad.any():
            raise SimulationError(f"non-finite driving value at step {step}")
        if store:
            Wst[step + 1] = W
            VLst[:, step + 1] = VL
            VRst[:, step + 1] = VR
    out = {"W": W, "VL": VL, "VR": VR, "threshold_time": threshold_time, "alive": alive,
           "floored": floored}
    if store:
        out["W_path"], out["VL_path"], out["VR_path"] = Wst, VLst, VRst
    return out


def simulate_driving(cfg: ForcePointConfig, T: float, dt: float, seed: int) -> DrivingPath:
    """One Euler-Maruyama path of the driving SDE with its force points."""
    if dt <= 0 or T <= 0:
        raise DomainError("T and dt must be positive")
    res = _generic_drive(cfg, T, dt, seed, 1, store=True)
    steps = res["W_path"].shape[0]
    tt = float(res["threshold_time"][0])
    return DrivingPath(
        dt=dt,
        times=np.arange(steps) * dt,
        W=res["W_path"][:, 0],
        V_left=res["VL_path"][:, :, 0],
        V_right=res["VR_path"][:, :, 0],
        config=cfg,
        seed=seed,
        threshold_time=None if math.isnan(tt) else tt,
    )


def driving_endpoint_batch(cfg: ForcePointConfig, T: float, dt: float, seed: int,
                           n_paths: int) -> dict:
    """Final-state arrays over many paths (distributional tests)."""
    return _generic_drive(cfg, T, dt, seed, n_paths, store=False)


def evolve_observer(path: DrivingPath, z0: float, swallow_eps: float = SWALLOW_EPS
                    ) -> ObserverState:
    """Integrate g_t(z0) and g_t'(z0) along the stored grid.

    Each step applies the exact Loewner flow for the driving value frozen
    at the step midpoint: g -> w + sign * sqrt((g - w)^2 + 4 dt).  This is
    stable for any dt / |g - W| ratio and exact for constant driving.
    """
    return _observer_trajectory(path, z0, swallow_eps)[2]


def _observer_trajectory(path: DrivingPath, z0: float, swallow_eps: float = SWALLOW_EPS):
    W = path.W
    dt = path.dt
    g = float(z0)
    lg = 0.0
    gs = np.empty(W.size)
    lgs = np.empty(W.size)
    gs[0], lgs[0] = g, lg
    side = math.copysign(1.0, g - W[0])
    for k in range(W.size - 1):
        wm = 0.5 * (W[k] + W[k + 1])
        d = g - wm
        # swallowed: the image reached the driving value (or the driving
        # value crossed it within a step)
        if abs(d) < swallow_eps or math.copysign(1.0, d) != side:
            return gs[: k + 1], lgs[: k + 1], ObserverState(g, math.exp(lg), True, k * dt)
        g = wm + math.copysign(math.sqrt(d * d + 4.0 * dt), d)
        lg = lg - 0.5 * math.log1p(4.0 * dt / (d * d))
        gs[k + 1], lgs[k + 1] = g, lg
        dn = g - W[k + 1]
        if abs(dn) < swallow_eps or math.copysign(1.0, dn) != side:
            return gs[: k + 2], lgs[: k + 2], ObserverState(g, math.exp(lg), True, (k + 1) * dt)
    return gs, lgs, ObserverState(g, math.exp(lg), False, None)


@dataclass
class PsiPrimeResult:
    value: float
    value_half_horizon: float
    converged: bool


def psi_prime_at_one(path: DrivingPath, conv_tol: float = DEFAULT_CONV_TOL) -> PsiPrimeResult:
    """Mapping-out derivative estimate from a stored driving path.

    Non-boundary-hitting contract: the first/last hit points are 0 and
    infinity, so the estimate is g'(1) / (g(1) - g(0+)).  The image of 0+
    is read from a stored force point at 0+ when available, otherwise from
    an auxiliary observer started at EPS_C.  A sample whose horizon-T and
    horizon-T/2 values differ by more than conv_tol (relative) is flagged.
    """
    if path.threshold_time is not None:
        raise DomainError("path stopped at its continuation threshold")
    gs, lgs, obs1 = _observer_trajectory(path, 1.0)
    if obs1.swallowed:
        raise DomainError(f"curve swallowed the point 1 at t = {obs1.swallow_time}")
    a_from_force = None
    for i, (x, _) in enumerate(path.config.right):
        if x <= EPS_C:
            a_from_force = path.V_right[i]
    if a_from_force is None:
        a_gs, _, obs0 = _observer_trajectory(path, EPS_C, swallow_eps=EPS_C * 1e-3)
        if obs0.swallowed:
            raise DomainError("auxiliary observer at 0+ was swallowed")
        a_traj = a_gs
    else:
        a_traj = a_from_force

    def estimate(idx: int) -> float:
        return math.exp(lgs[idx]) / (gs[idx] - a_traj[idx])

    full = estimate(len(gs) - 1)
    half = estimate((len(gs) - 1) // 2)
    converged = abs(full - half) <= conv_tol * abs(full)
    return PsiPrimeResult(value=full, value_half_horizon=half, converged=converged)


def _probe_grids() -> tuple[np.ndarray, np.ndarray]:
    """Static probe points for hit tracking: (0,1) and (1, ~50)."""
    left = np.concatenate([
        np.linspace(0.05, 0.85, 16, endpoint=True),
        1.0 - np.geomspace(0.1, 0.005, 8),
    ])
    right = 1.0 + np.geomspace(1e-3, 50.0, 24)
    return np.sort(left), np.sort(right)


def _needs_probes(kappa: float, rho_plus: float, rho_1: float) -> bool:
    hit_01 = rho_plus < kappa / 2.0 - 2.0
    hit_1inf = rho_plus + rho_1 < kappa / 2.0 - 2.0
    return bool(hit_01 or hit_1inf)


def _check_grid(T: float, dt: float) -> tuple[int, int]:
    T_units = int(round(T))
    if not (T_units >= 2 and abs(T - T_units) < 1e-12 and T_units % 2 == 0):
        raise DomainError("T must be an even integer (unit dyadic cells)")
    k_base = int(round(-math.log2(dt)))
    if not (1 <= k_base <= 20 and abs(dt - 2.0**-k_base) < 1e-15):
        raise DomainError("dt must be a power of two, 2^-1 .. 2^-20")
    return T_units, k_base


@dataclass
class McDiagnostics:
    n_samples: int
    unconverged_fraction: float
    swallowed_fraction: float
    threshold_fraction: float
    min_psi: float
    mean_steps: float

    def to_dict(self) -> dict:
        return {
            "n": self.n_samples,
            "unconverged_fraction": self.unconverged_fraction,
            "swallowed_fraction": self.swallowed_fraction,
            "threshold_fraction": self.threshold_fraction,
            "min_psi": self.min_psi,
            "mean_steps": self.mean_steps,
        }


def _run_kernel(kappa, rho_m, rho_p, rho_1, n_samples, T, dt, seed, workers=None):
    T_units, k_base = _check_grid(T, dt)
    if workers:
        import numba

        numba.set_num_threads(int(workers))
    pl, pr = _probe_grids()
    probes_on = _needs_probes(kappa, rho_p, rho_1)
    return _kernels.mc_paths(
        np.uint64(seed), n_samples, float(kappa), float(rho_m), float(rho_p),
        float(rho_1), T_units, k_base, probes_on, pl, pr,
    )


def _collect(psi_T, psi_half, flags, steps, conv_tol) -> tuple[np.ndarray, McDiagnostics]:
    n = psi_T.size
    swallowed = flags == _kernels.FLAG_SWALLOWED
    threshold = flags == _kernels.FLAG_THRESHOLD
    bad = flags != _kernels.OK
    ok = ~bad
    with np.errstate(invalid="ignore"):
        unconv = ok & (np.abs(psi_T - psi_half) > conv_tol * np.abs(psi_T))
    diags = McDiagnostics(
        n_samples=n,
        unconverged_fraction=float(unconv.sum()) / n,
        swallowed_fraction=float(swallowed.sum()) / n,
        threshold_fraction=float(threshold.sum()) / n,
        min_psi=float(np.nanmin(psi_T[ok])) if ok.any() else math.nan,
        mean_steps=float(steps.mean()),
    )
    usable = ok & ~unconv
    return usable, diags


def mc_radius_moment(
    kappa: float,
    rho_minus: float,
    rho_plus: float,
    rho_1: float,
    alpha: float,
    n_samples: int,
    T: float,
    dt: float,
    seed: int,
    workers: Optional[int] = None,
    conv_tol: float = DEFAULT_CONV_TOL,
    attach_exact: bool = True,
) -> tuple[MomentEstimate, McDiagnostics]:
    """Monte Carlo E[psi'(1)^alpha] under SLE_kappa(rho_-; rho_+, rho_1).

    Samples with a curve-hit-one event or an unconverged horizon pair are
    excluded; more than MAX_BAD_FRACTION of them raises QualityError.
    """
    q = exact.RadiusMomentQuery(kappa, rho_minus, rho_plus, rho_1, alpha)
    psi_T, psi_half, flags, steps = _run_kernel(
        kappa, rho_minus, rho_plus, rho_1, n_samples, T, dt, seed, workers
    )
    usable, diags = _collect(psi_T, psi_half, flags, steps, conv_tol)
    bad_frac = diags.unconverged_fraction + diags.swallowed_fraction + diags.threshold_fraction
    if bad_frac > MAX_BAD_FRACTION:
        raise QualityError(
            f"{bad_frac:.1%} of samples unconverged/swallowed/thresholded "
            f"(> {MAX_BAD_FRACTION:.0%}); diagnostics: {diags.to_dict()}"
        )
    vals = psi_T[usable] ** alpha
    est = accumulate(vals)
    if attach_exact:
        est = est.with_target(exact.radius_moment_exact(q))
    return est, diags


def mc_reversal_check(
    kappa: float,
    rho_minus: float,
    rho_plus: float,
    rho_1: float,
    alpha_obs: float,
    n_samples: int,
    T: float,
    dt: float,
    seed: int,
    workers: Optional[int] = None,
    conv_tol: float = DEFAULT_CONV_TOL,
    min_ess: float = 100.0,
) -> tuple[MomentEstimate, MomentEstimate, McDiagnostics, McDiagnostics]:
    """Direct vs reversal-weighted estimates of E[psi'(1)^alpha_obs].

    direct: plain MC under SLE_kappa(rho_-; rho_+, rho_1).
    weighted: under the reversed parameters (rho_-; rho_+ + rho_1, -rho_1),
    the self-normalized estimate with weights psi'(1)^(alpha*) where
    alpha* = rho_1 (4 - kappa) / (2 kappa); psi'(1) is invariant under the
    time-reversal map, so both estimate the same moment.
    """
    alpha_star = rho_1 * (4.0 - kappa) / (2.0 * kappa)
    target = exact.radius_moment(kappa, rho_minus, rho_plus, rho_1, alpha_obs)

    psi_T, psi_half, flags, steps = _run_kernel(
        kappa, rho_minus, rho_plus, rho_1, n_samples, T, dt, seed, workers
    )
    usable, diags_d = _collect(psi_T, psi_half, flags, steps, conv_tol)
    direct = accumulate(psi_T[usable] ** alpha_obs).with_target(target)

    psi_T2, psi_half2, flags2, steps2 = _run_kernel(
        kappa, rho_minus, rho_plus + rho_1, -rho_1, n_samples, T, dt, seed + 1, workers
    )
    usable2, diags_w = _collect(psi_T2, psi_half2, flags2, steps2, conv_tol)
    base = psi_T2[usable2]
    weighted = accumulate(base**alpha_obs, weights=base**alpha_star).with_target(target)
    for d in (diags_d, diags_w):
        bad = d.unconverged_fraction + d.swallowed_fraction + d.threshold_fraction
        if bad > MAX_BAD_FRACTION:
            raise QualityError(f"reversal run failed quality gates: {d.to_dict()}")
    if weighted.ess < min_ess:
        raise QualityError(f"effective sample size {weighted.ess:.1f} < {min_ess}")
    return direct, weighted, diags_d, diags_w
