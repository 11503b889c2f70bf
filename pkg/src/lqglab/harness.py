"""Monte-Carlo bookkeeping: streaming moments, weighted estimates, verdicts.

Unweighted estimates use Welford accumulation (mergeable, permutation
stable); weighted estimates are self-normalized importance-sampling means
with ESS = (sum w)^2 / sum w^2 and a delta-method standard error.  Every
estimate carries heavy-tail diagnostics (excess kurtosis of the summands
and the statistic mass carried by the top 1% of samples); ``compare``
refuses to pass a gate backed by a degenerate estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DegenerateEstimateError(ValueError):
    """All-zero weights or otherwise unusable sample set."""


@dataclass
class MomentEstimate:
    """A Monte Carlo estimate paired (optionally) with its exact target."""

    mean: float
    stderr: float
    n: int
    ess: float
    exact_target: Optional[float] = None
    z_score: Optional[float] = None
    kurtosis: float = 0.0
    top1_mass: float = 0.0

    def with_target(self, exact: float) -> "MomentEstimate":
        z = None
        if math.isfinite(exact) and self.stderr > 0.0:
            z = (self.mean - exact) / self.stderr
        return MomentEstimate(
            self.mean, self.stderr, self.n, self.ess, exact, z,
            self.kurtosis, self.top1_mass,
        )

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "ess": self.ess,
            "exact": self.exact_target,
            "z": self.z_score,
            "kurtosis": self.kurtosis,
            "top1_mass": self.top1_mass,
        }


def _tail_diagnostics(contrib: np.ndarray) -> tuple[float, float]:
    """Excess kurtosis and top-1% share of the absolute contributions."""
    n = contrib.size
    mu = contrib.mean()
    d = contrib - mu
    var = np.mean(d * d)
    kurt = float(np.mean(d**4) / var**2 - 3.0) if var > 0 else 0.0
    mass = np.abs(contrib)
    total = mass.sum()
    if total == 0.0:
        return kurt, 0.0
    k = max(1, n // 100)
    top = np.sort(mass)[-k:].sum()
    return kurt, float(top / total)


def accumulate(values, weights=None) -> MomentEstimate:
    """Single-pass mean/stderr of a sample array, optionally weighted.

    Weighted estimates are self-normalized: mean = sum(w v)/sum(w),
    stderr^2 = sum(w^2 (v - mean)^2) / (sum w)^2.  numpy pairwise
    summation keeps the reduction permutation-stable to ~1e-12.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise DegenerateEstimateError("need at least two samples")
    n = v.size
    if weights is None:
        mean = float(v.mean())
        sd = float(v.std(ddof=1))
        kurt, top = _tail_diagnostics(v)
        return MomentEstimate(mean, sd / math.sqrt(n), n, float(n),
                              kurtosis=kurt, top1_mass=top)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != v.shape:
        raise DegenerateEstimateError("weights shape mismatch")
    if np.all(w == 0.0):
        raise DegenerateEstimateError("all weights are zero")
    if np.any(w < 0.0):
        raise DegenerateEstimateError("negative importance weights")
    wsum = float(w.sum())
    mean = float(np.sum(w * v) / wsum)
    resid = v - mean
    stderr = float(math.sqrt(np.sum((w * resid) ** 2)) / wsum)
    ess = float(wsum * wsum / np.sum(w * w))
    kurt, top = _tail_diagnostics(w * v)
    return MomentEstimate(mean, stderr, n, ess, kurtosis=kurt, top1_mass=top)


@dataclass
class StreamingMoments:
    """Mergeable Welford accumulator (parallel-combine form)."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def add_array(self, xs) -> None:
        other = StreamingMoments()
        xs = np.asarray(xs, dtype=np.float64)
        other.n = int(xs.size)
        if other.n:
            other.mean = float(xs.mean())
            other.m2 = float(np.sum((xs - other.mean) ** 2))
        self.merge(other)

    def merge(self, other: "StreamingMoments") -> "StreamingMoments":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        d = other.mean - self.mean
        self.mean += d * other.n / n
        self.m2 += other.m2 + d * d * self.n * other.n / n
        self.n = n
        return self

    def estimate(self) -> MomentEstimate:
        if self.n < 2:
            raise DegenerateEstimateError("need at least two samples")
        sd = math.sqrt(self.m2 / (self.n - 1))
        return MomentEstimate(self.mean, sd / math.sqrt(self.n), self.n, float(self.n))


@dataclass
class Verdict:
    """One pass/fail gate with the numbers it was decided on."""

    passed: bool
    criterion: str
    measured: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"pass": self.passed, "criterion": self.criterion, "measured": self.measured}


def compare(
    est: MomentEstimate,
    exact: float,
    k_sigma: float = 3.0,
    rel_tol: float = 0.05,
    divergence_floor: float = 1e3,
    max_top1_mass: float = 0.5,
) -> Verdict:
    """Dual-gate comparison of an estimate against an exact target.

    Finite target: pass iff |mean - exact| <= k_sigma*stderr AND
    stderr <= rel_tol*|exact| (the second gate stops huge-stderr vacuous
    passes).  Infinite target: pass iff mean exceeds divergence_floor.
    A weighted estimator whose top 1% of samples carries more than
    ``max_top1_mass`` of the statistic is refused outright.
    """
    measured = {
        "mean": est.mean, "stderr": est.stderr, "exact": exact,
        "k_sigma": k_sigma, "rel_tol": rel_tol, "top1_mass": est.top1_mass,
    }
    if not math.isfinite(est.mean):
        return Verdict(False, "estimate is non-finite", measured)
    if math.isinf(exact):
        # top-heaviness is the signature of a divergent moment, not a
        # defect; the refusal below protects finite comparisons only
        measured["divergence_floor"] = divergence_floor
        ok = est.mean > divergence_floor
        return Verdict(ok, f"divergence floor: mean > {divergence_floor:g}", measured)
    if est.top1_mass > max_top1_mass:
        return Verdict(
            False,
            f"estimator degenerate: top 1% of samples carries {est.top1_mass:.2f} of the statistic",
            measured,
        )
    gap = abs(est.mean - exact)
    ok_z = gap <= k_sigma * est.stderr
    ok_rel = est.stderr <= rel_tol * abs(exact)
    measured["abs_gap"] = gap
    return Verdict(
        ok_z and ok_rel,
        f"|mean-exact| <= {k_sigma:g} stderr and stderr <= {rel_tol:g}|exact|",
        measured,
    )
