"""Boundary Gaussian multiplicative chaos on [0, 1].

The free-boundary field restricted to the real line has covariance
G(x, y) = -2 log|x - y| on [0, 1].  The interval is split into N uniform
cells; the field is the centered Gaussian vector of cell averages, with
off-diagonal covariance evaluated at midpoints and the diagonal set to the
exact double cell-average of the kernel,

    C_ii = -2 log(delta) + 3,

(3 = double integral of -2 log|u - v| over the unit square).  Cell masses
are Wick normalized,

    mass_i = delta * exp((gamma/2) phi_i - (gamma^2/8) C_ii) * avg_cell_i prod_j |x - s_j|^(-gamma beta_j / 2),

with the insertion density averaged over the cell (cells are averaging
windows throughout), so E[nu(I)] is exact for every insertion set; in
particular the insertion-free field has E[nu([0,1])] = 1.  This matches
the expectation normalization under which chaos limits are mollifier
independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .harness import MomentEstimate, accumulate
from .params import DomainError, LqgParams, TriangleWeights
from . import exact

MAX_LOG2_N = 16  # dense factorization bound
CELL_SELF_AVG = 3.0  # double average of -2 log|u-v| over the unit cell
EIG_CLIP_REL = 1e-10
DEFAULT_BATCH = 512  # fixed batch size: sample values never depend on worker count


class FactorizationError(RuntimeError):
    """Covariance factorization failed beyond the PSD-projection tolerance."""


@dataclass(frozen=True)
class BoundaryGrid:
    """Uniform midpoint grid of [0, 1] with a power-of-two cell count."""

    N: int
    points: np.ndarray
    delta: float

    @classmethod
    def make(cls, N: int) -> "BoundaryGrid":
        if N < 2 or (N & (N - 1)) != 0 or N > 2**MAX_LOG2_N:
            raise DomainError(f"N must be a power of two in [2, 2^{MAX_LOG2_N}], got {N}")
        delta = 1.0 / N
        pts = (np.arange(N) + 0.5) * delta
        return cls(N=N, points=pts, delta=delta)


def covariance_matrix(grid: BoundaryGrid) -> np.ndarray:
    x = grid.points
    C = -2.0 * np.log(np.abs(x[:, None] - x[None, :]) + np.eye(grid.N))
    np.fill_diagonal(C, -2.0 * math.log(grid.delta) + CELL_SELF_AVG)
    return C


@lru_cache(maxsize=2)
def _factor(N: int) -> np.ndarray:
    """Lower-triangular (or eigen) factor L with L L^T = C."""
    grid = BoundaryGrid.make(N)
    C = covariance_matrix(grid)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        lam, U = np.linalg.eigh(C)
        floor = -EIG_CLIP_REL * lam[-1]
        if lam[0] < floor:
            raise FactorizationError(
                f"covariance at N={N} has eigenvalue {lam[0]:.3e} below the "
                f"PSD-projection tolerance {floor:.3e}"
            )
        return U * np.sqrt(np.clip(lam, 0.0, None))


@dataclass(frozen=True)
class BoundaryFieldSample:
    """One discretized field: values plus the per-point variance used."""

    grid: BoundaryGrid
    values: np.ndarray
    cov_diagonal: np.ndarray
    seed: int


def _normals(seed: int, sample_index: int, n: int) -> np.ndarray:
    key = (int(seed) << 64) | int(sample_index)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(n)


def sample_boundary_field(grid: BoundaryGrid, seed: int, sample_index: int = 0) -> BoundaryFieldSample:
    """Draw one field; deterministic in (seed, sample_index)."""
    L = _factor(grid.N)
    z = _normals(seed, sample_index, grid.N)
    diag = np.full(grid.N, -2.0 * math.log(grid.delta) + CELL_SELF_AVG)
    return BoundaryFieldSample(grid=grid, values=L @ z, cov_diagonal=diag, seed=seed)


_INSERTION_QUAD = 24


def _insertion_log_factor(
    grid: BoundaryGrid, insertions: list[tuple[float, float]], gamma: float
) -> np.ndarray:
    """Log of the per-cell average of prod_j |x - s_j|^(-gamma beta_j / 2).

    Cells are averaging windows (the covariance diagonal is built the same
    way), so the insertion density is averaged over each cell rather than
    sampled at the midpoint; this keeps E[cell mass] exact near the
    insertion singularities, where the midpoint rule loses a
    delta^(1 - gamma beta/2) fraction of the mass.
    """
    if not insertions:
        return np.zeros(grid.N)
    for beta_j, s_j in insertions:
        if gamma * beta_j / 2.0 >= 1.0:
            raise DomainError(
                f"insertion exponent gamma*beta/2 = {gamma * beta_j / 2.0} >= 1: "
                "cell masses adjacent to the insertion are not integrable at this resolution"
            )
        d = np.abs(grid.points - s_j)
        if np.any(d < grid.delta / 10.0):
            raise DomainError(
                f"insertion at {s_j} sits within delta/10 of a cell midpoint; refine N"
            )
    xg, wg = np.polynomial.legendre.leggauss(_INSERTION_QUAD)
    lo = grid.points - grid.delta / 2.0
    xs = lo[:, None] + (xg[None, :] + 1.0) / 2.0 * grid.delta
    prod = np.ones_like(xs)
    for beta_j, s_j in insertions:
        prod = prod * np.abs(xs - s_j) ** (-gamma * beta_j / 2.0)
    avg = prod @ (wg / 2.0)
    # cells touching an endpoint insertion: Gauss-Legendre converges slowly
    # against the |x - s|^-a edge singularity; integrate it as a
    # Gauss-Jacobi weight instead (exact for the smooth remainder)
    from scipy.special import roots_jacobi

    for beta_j, s_j in insertions:
        if s_j not in (0.0, 1.0):
            continue
        a = gamma * beta_j / 2.0
        idx = 0 if s_j == 0.0 else grid.N - 1
        if s_j == 0.0:
            tj, wj = roots_jacobi(_INSERTION_QUAD, 0.0, -a)  # weight (1+t)^-a
        else:
            tj, wj = roots_jacobi(_INSERTION_QUAD, -a, 0.0)  # weight (1-t)^-a
        xcell = lo[idx] + (tj + 1.0) / 2.0 * grid.delta
        rest = np.ones_like(xcell)
        for beta_k, s_k in insertions:
            if s_k == s_j:
                continue
            rest *= np.abs(xcell - s_k) ** (-gamma * beta_k / 2.0)
        # |x - s_j|^-a = (delta/2)^-a (1 +- t)^-a on the mapped cell
        avg[idx] = (grid.delta / 2.0) ** (-a) * float(rest @ wj) / 2.0
    return np.log(avg)


def gmc_length(
    field: BoundaryFieldSample,
    insertions: list[tuple[float, float]],
    interval: tuple[float, float],
    p: LqgParams,
) -> float:
    """Chaos mass of the cells whose midpoints lie in ``interval``."""
    a, b = interval
    if not (0.0 <= a < b <= 1.0):
        raise DomainError(f"interval must be within [0,1], got {interval}")
    g = p.gamma
    grid = field.grid
    logm = (g / 2.0) * field.values - (g * g / 8.0) * field.cov_diagonal
    logm += _insertion_log_factor(grid, insertions, g)
    sel = (grid.points >= a) & (grid.points <= b)
    return float(grid.delta * np.exp(logm[sel]).sum())


def moment_order(beta1: float, beta2: float, beta3: float, p: LqgParams) -> float:
    return (2.0 * p.Q - (beta1 + beta2 + beta3)) / p.gamma


def check_moment_preconditions(beta1: float, beta2: float, beta3: float, p: LqgParams) -> float:
    """Validate Seiberg bounds and the moment-existence window; return order."""
    g, Q = p.gamma, p.Q
    if beta1 >= Q or beta2 >= Q:
        raise DomainError("Seiberg bound violated: need beta1, beta2 < Q")
    if abs(beta1 - beta2) >= beta3:
        raise DomainError("Seiberg bound violated: need |beta1 - beta2| < beta3")
    if beta1 + beta2 + beta3 <= g:
        raise DomainError("Seiberg bound violated: need beta_bar > gamma")
    pm = moment_order(beta1, beta2, beta3, p)
    if pm >= 4.0 / (g * g):
        raise DomainError(f"moment order {pm} >= 4/gamma^2: estimator has no variance-safe window")
    for i, bb in ((1, beta1), (2, beta2)):
        if pm >= (2.0 / g) * (Q - bb):
            raise DomainError(f"moment order {pm} >= (2/gamma)(Q - beta{i}): moment not guaranteed finite")
    return pm


def _mass_batch(
    N: int, seed: int, idx: np.ndarray, log_factor: np.ndarray, gamma: float, diag: np.ndarray
) -> np.ndarray:
    """Total [0,1] chaos mass for the samples in ``idx`` (vectorized)."""
    L = _factor(N)
    Z = np.empty((N, idx.size))
    for j, i in enumerate(idx):
        Z[:, j] = _normals(seed, int(i), N)
    phi = L @ Z
    logm = (gamma / 2.0) * phi + (log_factor - (gamma**2 / 8.0) * diag)[:, None]
    return (1.0 / N) * np.exp(logm).sum(axis=0)


def _all_masses(
    N: int,
    n_samples: int,
    seed: int,
    insertions: list[tuple[float, float]],
    p: LqgParams,
    workers: int = 1,
) -> np.ndarray:
    grid = BoundaryGrid.make(N)
    log_factor = _insertion_log_factor(grid, insertions, p.gamma)
    diag = np.full(N, -2.0 * math.log(grid.delta) + CELL_SELF_AVG)
    _factor(N)  # materialize before threading
    batches = [np.arange(s, min(s + DEFAULT_BATCH, n_samples)) for s in range(0, n_samples, DEFAULT_BATCH)]
    out = np.empty(n_samples)

    def run(bi: int) -> None:
        idx = batches[bi]
        out[idx[0] : idx[-1] + 1] = _mass_batch(N, seed, idx, log_factor, p.gamma, diag)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, range(len(batches))))
    else:
        for bi in range(len(batches)):
            run(bi)
    return out


def mc_gmc_moment(
    beta1: float,
    beta2: float,
    beta3: float,
    N: int,
    n_samples: int,
    p: LqgParams,
    seed: int,
    workers: int = 1,
) -> MomentEstimate:
    """MC estimate of E[nu_phi([0,1])^p] with insertions beta1@0, beta2@1.

    beta3 enters only through the moment order p = (2Q - beta_bar)/gamma.
    The exact target h_bar is attached to the returned estimate.
    """
    pm = check_moment_preconditions(beta1, beta2, beta3, p)
    masses = _all_masses(N, n_samples, seed, [(beta1, 0.0), (beta2, 1.0)], p, workers)
    est = accumulate(masses**pm)
    return est.with_target(exact.gmc_moment_exact(beta1, beta2, beta3, p))


def triangle_length_weighted_sample(
    tw: TriangleWeights,
    target_length: float,
    N: int,
    p: LqgParams,
    seed: int,
    sample_index: int = 0,
) -> tuple[BoundaryFieldSample, float]:
    """One fixed-boundary-length triangle sample plus its importance weight.

    Shifts the free field by (2/gamma) log(ell / L12) so the left arc has
    length exactly ``target_length``; the weight is the fixed-length
    disintegration density
        2 / (gamma prod(Q - beta_i)) * ell^((beta_bar-2Q)/gamma - 1) / L12^((beta_bar-2Q)/gamma).
    Averaging the weight over fields recovers the length-law density.
    """
    if target_length <= 0.0:
        raise DomainError("target length must be positive")
    thick = tw.thick_flags(p)
    if not all(thick):
        raise DomainError("fixed-length sampling requires all-thick weights")
    if N < 2**10:
        raise DomainError("grid too coarse for fixed-length sampling; need N >= 2^10")
    g, Q = p.gamma, p.Q
    grid = BoundaryGrid.make(N)
    field = sample_boundary_field(grid, seed, sample_index)
    ins = [(tw.beta1, 0.0), (tw.beta2, 1.0)]
    L12 = gmc_length(field, ins, (0.0, 1.0), p)
    if L12 <= 0.0 or not math.isfinite(L12):
        raise DomainError(f"degenerate sample: L12 = {L12}")
    s = (tw.beta_bar - 2.0 * Q) / g
    shift = (2.0 / g) * math.log(target_length / L12)
    shifted = BoundaryFieldSample(
        grid=grid, values=field.values + shift, cov_diagonal=field.cov_diagonal, seed=seed
    )
    pref = 2.0 / (g * (Q - tw.beta1) * (Q - tw.beta2) * (Q - tw.beta3))
    weight = pref * target_length ** (s - 1.0) / L12**s
    return shifted, weight


def mc_triangle_length_weights(
    tw: TriangleWeights,
    target_length: float,
    N: int,
    n_samples: int,
    p: LqgParams,
    seed: int,
    workers: int = 1,
) -> MomentEstimate:
    """Mean importance weight over fields, targeted at the exact density."""
    g, Q = p.gamma, p.Q
    if not all(tw.thick_flags(p)):
        raise DomainError("fixed-length sampling requires all-thick weights")
    s = (tw.beta_bar - 2.0 * Q) / g
    masses = _all_masses(N, n_samples, seed, [(tw.beta1, 0.0), (tw.beta2, 1.0)], p, workers)
    pref = 2.0 / (g * (Q - tw.beta1) * (Q - tw.beta2) * (Q - tw.beta3))
    weights = pref * target_length ** (s - 1.0) * masses ** (-s)
    est = accumulate(weights)
    dens = exact.triangle_length_density(tw, p)
    return est.with_target(dens.at(target_length))
