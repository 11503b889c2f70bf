"""Radial (field-average) processes of quantum disks and their conditioned variants.

All processes are variance-2 Brownian motions with constant or h-transform
drift.  Increments are exact Gaussian draws at the grid resolution; the
path supremum is refined to its exact continuum law by adding per-step
Brownian-bridge maxima, so sup-law tests carry no time-discretization
bias.  Conditioned-to-stay-below processes start at barrier - eps_start
(entrance-law approximation, stability gated in tests) and are stepped
with an exact Bessel(3) kernel near the barrier where the h-transform
drift explodes:

    drift(x) = -mu - 2 mu / (e^{mu (a - x)} - 1)
             = -(2/(a-x)) + O(a - x),

so near the barrier the process is sqrt(2) * BES3 plus a bounded correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import DomainError, LqgParams, weight_to_beta
from . import exact

NEAR_FACTOR = 6.0  # switch to the Bessel kernel within NEAR_FACTOR * step std
EPS_START_DEFAULT = 1e-4


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(stream)))


@dataclass
class RadialProcess:
    """A sampled radial process on a uniform grid, with its exact supremum."""

    dt: float
    values: np.ndarray
    drift_spec: str
    seed: int
    sup: float
    hit_time: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt


def _bridge_max(x0: np.ndarray, x1: np.ndarray, h: float, u: np.ndarray) -> np.ndarray:
    """Exact maximum of a variance-2 Brownian bridge over a step of size h."""
    return 0.5 * (x0 + x1 + np.sqrt((x1 - x0) ** 2 - 4.0 * h * np.log(u)))


def sample_M_beta(beta: float, T_max: float, dt: float, seed: int, p: LqgParams) -> RadialProcess:
    """Variance-2 BM with drift -(Q - beta) from 0 (one path)."""
    stats = m_beta_batch(beta, T_max, dt, 1, seed, p, keep_path=True)
    return RadialProcess(
        dt=dt, values=stats["path"], drift_spec=f"bm(drift={-(p.Q - beta)})",
        seed=seed, sup=float(stats["sup"][0]),
    )


def m_beta_batch(
    beta: float, T_max: float, dt: float, n: int, seed: int, p: LqgParams,
    keep_path: bool = False,
) -> dict:
    """n independent drifted paths; returns endpoint and exact-sup arrays."""
    if beta >= p.Q:
        raise DomainError(f"need beta < Q = {p.Q}, got {beta}")
    mu = p.Q - beta
    steps = int(round(T_max / dt))
    g = _rng(seed)
    x = np.zeros(n)
    sup = np.zeros(n)
    path = np.zeros(steps + 1) if keep_path else None
    for k in range(steps):
        xi = g.standard_normal(n)
        u = g.random(n)
        x1 = x - mu * dt + math.sqrt(2.0 * dt) * xi
        sup = np.maximum(sup, _bridge_max(x, x1, dt, u))
        x = x1
        if keep_path:
            path[k + 1] = x[0]
    out = {"sup": sup, "endpoint": x}
    if keep_path:
        out["path"] = path
    return out


def _h_drift(r: np.ndarray, mu: float) -> np.ndarray:
    """Drift of barrier-distance r = a - x under the stay-below h-transform.

    dr = [mu + 2 mu / expm1(mu r)] dt + sqrt(2) dB; explodes like 2/r at 0.
    """
    return mu + 2.0 * mu / np.expm1(mu * r)


def _step_conditioned(r: np.ndarray, mu: float, h: float, g: np.random.Generator) -> np.ndarray:
    """One step of the barrier-distance process, exact-Bessel near 0.

    Far from the barrier: Euler.  Near: r/sqrt(2) is a 3D Bessel process up
    to a bounded drift remainder, stepped as the norm of a 3D Gaussian.
    """
    scale = math.sqrt(2.0 * h)
    near = r < NEAR_FACTOR * scale
    far = ~near
    out = np.empty_like(r)
    if far.any():
        rf = r[far]
        out[far] = rf + _h_drift(rf, mu) * h + scale * g.standard_normal(rf.size)
    if near.any():
        rn = r[near]
        z = g.standard_normal((rn.size, 3))
        bes = np.sqrt((rn / math.sqrt(2.0) + math.sqrt(h) * z[:, 0]) ** 2
                      + h * (z[:, 1] ** 2 + z[:, 2] ** 2))
        # remainder after removing the 2/r Bessel repulsion: bounded near 0
        rem = _h_drift(rn, mu) - 2.0 / rn
        out[near] = math.sqrt(2.0) * bes + rem * h
    return np.maximum(out, 1e-12)


def sample_M_beta_given_max(
    beta: float, a: float, T_max: float, dt: float, seed: int, p: LqgParams
) -> RadialProcess:
    """Path decomposition at the maximum: up-drift to a, then conditioned below.

    Up phase: variance-2 BM with drift +(Q - beta) run until it first hits
    a (bridge-max detection inside steps).  Down phase: drift -(Q - beta)
    conditioned to stay below a, via the h-transform with
    h(x) = 1 - exp(-(Q - beta)(a - x)), entered at a - eps_start.
    """
    stats = m_beta_given_max_batch(beta, a, T_max, dt, 1, seed, p, keep_path=True)
    return RadialProcess(
        dt=dt, values=stats["path"], drift_spec=f"williams(a={a})", seed=seed,
        sup=float(stats["sup"][0]), hit_time=float(stats["hit_time"][0]),
    )


def m_beta_given_max_batch(
    beta: float, a, T_max: float, dt: float, n: int, seed: int, p: LqgParams,
    eps_start: float = EPS_START_DEFAULT, keep_path: bool = False,
) -> dict:
    """Batch Williams paths; ``a`` may be a scalar or a per-path array."""
    if beta >= p.Q:
        raise DomainError(f"need beta < Q = {p.Q}, got {beta}")
    mu = p.Q - beta
    aa = np.broadcast_to(np.asarray(a, dtype=float), (n,)).copy()
    if np.any(aa <= 0.0):
        raise DomainError("maximum level a must be positive")
    steps = int(round(T_max / dt))
    g = _rng(seed)
    x = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    hit_time = np.full(n, np.nan)
    r = np.zeros(n)  # barrier distance once hit
    path = np.zeros(steps + 1) if keep_path else None
    if keep_path:
        path[0] = x[0]
    for k in range(steps):
        up = ~hit
        if up.any():
            xi = g.standard_normal(int(up.sum()))
            u = g.random(int(up.sum()))
            x0 = x[up]
            x1 = x0 + mu * dt + math.sqrt(2.0 * dt) * xi
            m = _bridge_max(x0, x1, dt, u)
            crossed = m >= aa[up]
            xi_idx = np.flatnonzero(up)
            x[xi_idx] = np.where(crossed, aa[up], x1)
            newly = xi_idx[crossed]
            hit[newly] = True
            hit_time[newly] = (k + 1) * dt
            r[newly] = eps_start
        # paths that hit earlier (not this step) evolve the conditioned leg
        prev_down = hit & (hit_time <= k * dt)
        if prev_down.any():
            r[prev_down] = _step_conditioned(r[prev_down], mu, dt, g)
            x[prev_down] = aa[prev_down] - r[prev_down]
        if keep_path:
            path[k + 1] = x[0]
    sup = np.where(hit, aa, np.nan)  # sup equals a by construction once hit
    out = {"sup": sup, "endpoint": x, "hit_time": hit_time, "hit": hit}
    if keep_path:
        out["path"] = path
    return out


def sample_M_Qminus(a: float, T_max: float, dt: float, seed: int) -> RadialProcess:
    """Critical-weight building block: BM to level a, then a - sqrt(2)*BES3."""
    stats = m_qminus_batch(a, T_max, dt, 1, seed, keep_path=True)
    return RadialProcess(
        dt=dt, values=stats["path"], drift_spec=f"qminus(a={a})", seed=seed,
        sup=float(stats["sup"][0]), hit_time=float(stats["hit_time"][0]),
    )


def m_qminus_batch(
    a: float, T_max: float, dt: float, n: int, seed: int, keep_path: bool = False
) -> dict:
    if a <= 0.0:
        raise DomainError("level a must be positive")
    steps = int(round(T_max / dt))
    g = _rng(seed)
    x = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    hit_time = np.full(n, np.nan)
    w3 = np.zeros((n, 3))  # 3D BM driving the post-hit Bessel leg
    path = np.zeros(steps + 1) if keep_path else None
    for k in range(steps):
        up = ~hit
        if up.any():
            m_ = int(up.sum())
            xi = g.standard_normal(m_)
            u = g.random(m_)
            x0 = x[up]
            x1 = x0 + math.sqrt(2.0 * dt) * xi
            mx = _bridge_max(x0, x1, dt, u)
            crossed = mx >= a
            idx = np.flatnonzero(up)
            x[idx] = np.where(crossed, a, x1)
            newly = idx[crossed]
            hit[newly] = True
            hit_time[newly] = (k + 1) * dt
        prev = hit & (hit_time <= k * dt)
        if prev.any():
            w3[prev] += math.sqrt(dt) * g.standard_normal((int(prev.sum()), 3))
            x[prev] = a - math.sqrt(2.0) * np.linalg.norm(w3[prev], axis=1)
        if keep_path:
            path[k + 1] = x[0]
    out = {"sup": np.where(hit, a, np.nan), "endpoint": x, "hit_time": hit_time, "hit": hit}
    if keep_path:
        out["path"] = path
    return out


def sample_disk_radial_conditioned(
    W: float, T_max: float, dt: float, seed: int, p: LqgParams,
    eps_start: float = EPS_START_DEFAULT,
) -> tuple[RadialProcess, RadialProcess]:
    """The two half-line field-average processes of a thick quantum disk.

    Independent variance-2 BMs with drift -(Q - beta), started at
    -eps_start and conditioned to stay negative (h-transform with barrier 0).
    """
    stats = disk_radial_batch(W, T_max, dt, 2, seed, p, eps_start, keep_paths=True)
    procs = []
    for i in range(2):
        procs.append(RadialProcess(
            dt=dt, values=stats["paths"][i], drift_spec=f"disk_radial(W={W})",
            seed=seed, sup=float(stats["paths"][i].max()),
        ))
    return procs[0], procs[1]


def disk_radial_batch(
    W: float, T_max: float, dt: float, n: int, seed: int, p: LqgParams,
    eps_start: float = EPS_START_DEFAULT, keep_paths: bool = False,
) -> dict:
    if W <= p.thick_threshold:
        raise DomainError(f"need a thick weight (> gamma^2/2 = {p.thick_threshold})")
    beta = weight_to_beta(W, p)
    mu = p.Q - beta
    steps = int(round(T_max / dt))
    g = _rng(seed)
    r = np.full(n, eps_start)  # distance below the 0 barrier
    paths = np.zeros((min(n, 2), steps + 1)) if keep_paths else None
    if keep_paths:
        paths[:, 0] = -r[: paths.shape[0]]
    for k in range(steps):
        r = _step_conditioned(r, mu, dt, g)
        if keep_paths:
            paths[:, k + 1] = -r[: paths.shape[0]]
    return {"endpoint": -r, "paths": paths}


@dataclass
class BeadChain:
    """Thin-disk bead decomposition restricted to a length window."""

    beads: list[tuple[float, float]]
    total_left: float
    total_right: float
    window: tuple[float, float]
    t_horizon: float
    measure_weight: float

    @property
    def count(self) -> int:
        return len(self.beads)


def bead_intensity(W: float, window: tuple[float, float], p: LqgParams) -> float:
    """Mass of the weight-(gamma^2 - W) disk length law on the window."""
    lmin, lmax = window
    if not (0.0 < lmin < lmax):
        raise DomainError(f"need 0 < lmin < lmax, got {window}")
    dens = exact.disk_length_density(p.gamma**2 - W, p)
    if dens.infinite:
        return math.inf
    e = dens.exponent
    if abs(e + 1.0) < 1e-12:
        return dens.prefactor * math.log(lmax / lmin)
    return dens.prefactor * (lmax ** (e + 1.0) - lmin ** (e + 1.0)) / (e + 1.0)


def _sample_bead_lengths(W: float, window: tuple[float, float], m: int,
                         g: np.random.Generator, p: LqgParams) -> np.ndarray:
    lmin, lmax = window
    e = exact.disk_length_density(p.gamma**2 - W, p).exponent
    u = g.random(m)
    if abs(e + 1.0) < 1e-12:
        return lmin * (lmax / lmin) ** u
    ep = e + 1.0
    return (lmin**ep + u * (lmax**ep - lmin**ep)) ** (1.0 / ep)


def thin_chain_structure(
    W: float, length_window: tuple[float, float], p: LqgParams, seed: int,
    t_cap: float = 1.0,
) -> BeadChain:
    """Bead structure of a thin two-pointed disk, windowed in bead length.

    The horizon T is drawn uniformly on (0, t_cap); the total intensity
    measure carries the factor (1 - 2W/gamma^2)^{-2} * t_cap which is
    recorded as ``measure_weight``.  Bead count is Poisson(T * Lambda)
    with Lambda the window mass of the weight-(gamma^2 - W) length law;
    left and right bead lengths are drawn from the same windowed marginal
    (their joint law is not modeled).
    """
    g2 = p.gamma * p.gamma
    if not (0.0 < W < g2 / 2.0):
        raise DomainError(f"thin weight required: W in (0, {g2 / 2}), got {W}")
    g = _rng(seed)
    T = t_cap * g.random()
    lam = bead_intensity(W, length_window, p)
    count = int(g.poisson(T * lam))
    left = _sample_bead_lengths(W, length_window, count, g, p)
    right = _sample_bead_lengths(W, length_window, count, g, p)
    beads = list(zip(left.tolist(), right.tolist()))
    weight = (1.0 - 2.0 * W / g2) ** (-2.0) * t_cap
    return BeadChain(
        beads=beads, total_left=float(left.sum()), total_right=float(right.sum()),
        window=length_window, t_horizon=T, measure_weight=weight,
    )
