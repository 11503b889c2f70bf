"""Numba kernels for the SLE(kappa; rho_-, rho_+, rho_1) driving process.

Noise model: a counter-based RNG (splitmix64 chains) attached to the nodes
of a per-unit-time-cell dyadic tree.  The root of cell m carries the
Brownian increment over [m, m+1); splitting a node adds the midpoint
displacement of a Brownian bridge.  Consequences:

* every sample's path is a pure function of (seed, sample index): results
  are bitwise independent of thread count;
* runs at dt and dt/2 share the same Brownian path (the finer run only
  descends one level deeper), so the dt-halving gate measures
  discretization bias rather than fresh Monte Carlo noise;
* adaptive substepping near force-point collisions refines the same tree
  locally, down to dt * 2^-MAX_EXTRA_DEPTH.

The estimator tracked alongside the driving function: V1 = g_t(1),
log g_t'(1), the force-point images, and (in boundary-touching regimes)
probe-point images used to locate the mapping-out normalization points.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange, uint64

U64 = np.uint64
_GOLD = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)

ADAPT_FACTOR = 10.0  # substep while min gap < ADAPT_FACTOR * sqrt(kappa * h)
MAX_EXTRA_DEPTH = 22
EPS_C = 1e-9  # reflection floor on |W - V|
EPS_SWALLOW = 1e-7  # observer/probe swallow declaration

# sample outcome flags
OK = 0
FLAG_SWALLOWED = 1
FLAG_THRESHOLD = 2
FLAG_NONFINITE = 3


@njit(uint64(uint64), cache=True, inline="always")
def _sm64(x):
    z = (x + _GOLD) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(30))) * _MIX1) & U64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> U64(27))) * _MIX2) & U64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _node_normal(mix, key):
    a = _sm64(mix ^ key)
    b = _sm64(a ^ _GOLD)
    u1 = (float(a >> U64(11)) + 1.0) * (2.0**-53)
    u2 = float(b >> U64(11)) * (2.0**-53)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, inline="always")
def _sample_mix(seed, sample_index):
    return _sm64(_sm64(U64(seed)) ^ (U64(sample_index) * U64(0xD1342543DE82EF95) + U64(1)))


@njit(cache=True)
def _psi_estimate(Vp, lgap, lg, probes_on, pl_v, pl_sw, n_pl, pr_v, pr_sw, n_pr):
    """Mapping-out derivative estimate at the current time.

    The gap b - a = g(1) - g(0+) is carried in log form (it contracts
    multiplicatively, and tracking V1 - Vp as a float difference dies by
    cancellation on deep approaches).  a = image of the first unswallowed
    left probe past the rightmost swallowed one (the image of 0+ when
    nothing is swallowed); c likewise from the right (infinity when the
    curve never touched (1, inf)).
    """
    if not probes_on:
        arg = lg - lgap
        if arg > 700.0:
            arg = 700.0
        return np.exp(arg)
    b = Vp + np.exp(lgap)
    a = Vp
    c_inf = True
    c = 0.0
    i_max = -1
    for i in range(n_pl):
        if pl_sw[i]:
            i_max = i
    if i_max >= 0:
        j = i_max + 1
        while j < n_pl and pl_sw[j]:
            j += 1
        if j < n_pl:
            a = pl_v[j]
        else:
            a = 0.5 * (pl_v[n_pl - 1] + b)  # tracker resolution exhausted
    j_min = -1
    for i in range(n_pr - 1, -1, -1):
        if pr_sw[i]:
            j_min = i
    if j_min >= 0:
        c_inf = False
        if j_min > 0:
            c = pr_v[j_min - 1]
        else:
            c = b + 0.5 * (pr_v[0] - b)
    gp = np.exp(lg)
    gap = b - a
    if gap < 1e-250:
        gap = 1e-250
    if c_inf:
        return gp / gap
    return gp * (a - c) / ((b - c) * gap)


@njit(cache=True)
def _one_path(
    seed, sample_index, kappa, rho_m, rho_p, rho_1,
    T_units, k_base, probes_on, pl_x, pr_x,
):
    """Simulate one driving path to time T_units; return the psi'(1)
    estimates at T and T/2 plus an outcome flag.

    Returns (psi_T, psi_half, flag, n_steps).
    """
    mix = _sample_mix(seed, sample_index)
    sqrt_k = np.sqrt(kappa)
    thresh_left = rho_m <= -2.0
    thresh_right1 = rho_p <= -2.0
    thresh_right2 = rho_p + rho_1 <= -2.0

    W = 0.0
    Vm = -EPS_C
    Vp = EPS_C
    lgap = np.log(1.0 - EPS_C)  # log(V1 - Vp)
    lg = 0.0

    n_pl = pl_x.shape[0]
    n_pr = pr_x.shape[0]
    pl_v = pl_x.copy()
    pr_v = pr_x.copy()
    pl_sw = np.zeros(n_pl, dtype=np.bool_)
    pr_sw = np.zeros(n_pr, dtype=np.bool_)

    psi_half = np.nan
    flag = OK
    n_steps = 0

    max_depth = k_base + MAX_EXTRA_DEPTH
    stack_lev = np.empty(max_depth + 2, dtype=np.int64)
    stack_key = np.empty(max_depth + 2, dtype=np.uint64)
    stack_dw = np.empty(max_depth + 2, dtype=np.float64)

    half_cell = T_units // 2

    for cell in range(T_units):
        cell_key = U64(cell) << U64(40)
        sp = 0
        stack_lev[0] = 0
        stack_key[0] = U64(1)
        stack_dw[0] = _node_normal(mix, cell_key)
        sp = 1
        while sp > 0:
            sp -= 1
            lev = stack_lev[sp]
            j = stack_key[sp]
            dw = stack_dw[sp]
            h = 2.0 ** (-lev)
            gap = np.exp(lgap)
            dm = W - Vm
            dp = Vp - W
            d1 = dp + gap
            dmin = dm
            if dp < dmin:
                dmin = dp
            if d1 < dmin:
                dmin = d1
            h_ok = h * (ADAPT_FACTOR * ADAPT_FACTOR * kappa) <= dmin * dmin
            if lev >= k_base and (h_ok or lev >= max_depth):
                # one step of size h: Euler for W (drift capped at the
                # diffusion scale inside the reflection floor), exact
                # frozen-W Loewner flow for the images -- stable for any
                # h / gap ratio, order preserving, and multiplicative in
                # the tracked gap
                drift_move = h * (rho_m / dm - rho_p / dp - rho_1 / d1)
                cap = 3.0 * sqrt_k * np.sqrt(h)
                if drift_move > cap:
                    drift_move = cap
                elif drift_move < -cap:
                    drift_move = -cap
                Wn = W + sqrt_k * dw + drift_move
                sqp = np.sqrt(dp * dp + 4.0 * h)
                sq1 = np.sqrt(d1 * d1 + 4.0 * h)
                Vm = W - np.sqrt(dm * dm + 4.0 * h)
                Vp = W + sqp
                lgap = lgap + np.log((d1 + dp) / (sq1 + sqp))
                lg = lg - 0.5 * np.log1p(4.0 * h / (d1 * d1))
                if probes_on:
                    for i in range(n_pl):
                        if not pl_sw[i]:
                            g = pl_v[i] - W
                            pl_v[i] = W + np.sqrt(g * g + 4.0 * h)
                    for i in range(n_pr):
                        if not pr_sw[i]:
                            g = pr_v[i] - W
                            pr_v[i] = W + np.sqrt(g * g + 4.0 * h)
                W = Wn
                n_steps += 1
                if not (np.isfinite(W) and np.isfinite(Vp) and np.isfinite(lgap)):
                    flag = FLAG_NONFINITE
                    break
                # collision handling: swallow, thresholds, reflection floors
                if (Vp - W) + np.exp(lgap) < EPS_SWALLOW:
                    flag = FLAG_THRESHOLD if thresh_right2 else FLAG_SWALLOWED
                    break
                if Vp - W < EPS_C:
                    if thresh_right1:
                        flag = FLAG_THRESHOLD
                        break
                    W = Vp - EPS_C
                if W - Vm < EPS_C:
                    if thresh_left:
                        flag = FLAG_THRESHOLD
                        break
                    W = Vm + EPS_C
                    if Vp - W < EPS_C:
                        W = 0.5 * (Vm + Vp)
                if probes_on:
                    for i in range(n_pl):
                        if not pl_sw[i] and pl_v[i] - W < EPS_SWALLOW:
                            pl_sw[i] = True
                    for i in range(n_pr):
                        if not pr_sw[i] and pr_v[i] - W < EPS_SWALLOW:
                            pr_sw[i] = True
            else:
                # split: bridge midpoint displacement keyed by this node
                xi = _node_normal(mix, cell_key | j)
                dl = 0.5 * dw + 0.5 * np.sqrt(h) * xi
                stack_lev[sp] = lev + 1
                stack_key[sp] = (j << U64(1)) | U64(1)
                stack_dw[sp] = dw - dl
                sp += 1
                stack_lev[sp] = lev + 1
                stack_key[sp] = j << U64(1)
                stack_dw[sp] = dl
                sp += 1
        if flag != OK:
            break
        if cell + 1 == half_cell:
            psi_half = _psi_estimate(Vp, lgap, lg, probes_on, pl_v, pl_sw, n_pl, pr_v, pr_sw, n_pr)
    if flag in (FLAG_SWALLOWED, FLAG_THRESHOLD, FLAG_NONFINITE):
        return np.nan, psi_half, flag, n_steps
    psi_T = _psi_estimate(Vp, lgap, lg, probes_on, pl_v, pl_sw, n_pl, pr_v, pr_sw, n_pr)
    return psi_T, psi_half, flag, n_steps


@njit(parallel=True, cache=True)
def mc_paths(
    seed, n_samples, kappa, rho_m, rho_p, rho_1, T_units, k_base,
    probes_on, pl_x, pr_x,
):
    psi_T = np.empty(n_samples)
    psi_half = np.empty(n_samples)
    flags = np.empty(n_samples, dtype=np.int64)
    steps = np.empty(n_samples, dtype=np.int64)
    for i in prange(n_samples):
        pt, ph, fl, ns = _one_path(
            seed, i, kappa, rho_m, rho_p, rho_1, T_units, k_base,
            probes_on, pl_x, pr_x,
        )
        psi_T[i] = pt
        psi_half[i] = ph
        flags[i] = fl
        steps[i] = ns
    return psi_T, psi_half, flags, steps
