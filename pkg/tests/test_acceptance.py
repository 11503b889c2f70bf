"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test prints a single [PASS]/[FAIL] line (run with -s to see them
live).  Monte Carlo scales: criterion 3 uses n = 10^4 paths per set with
horizon/step gates; criteria 5-6 use N = 2^13 grids with 2x10^4 fields;
criterion 8 holds ESS >= 10^3.  Everything is seeded and deterministic.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import stats

from lqglab import exact, gmc, sle, specfun, surfaces
from lqglab.cli import _identity_rows, main as cli_main
from lqglab.harness import compare
from lqglab.params import LqgParams, TriangleWeights

pytestmark = pytest.mark.slow

SEED = 20260810
WORKERS = 2


def _verdict(num: int, label: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {label} -- {detail}")
    return ok


# -------------------------------------------------------------------- 1 --
def test_criterion_1_double_gamma():
    t0 = time.time()
    worst_shift = worst_norm = worst_sym = 0.0
    zs = np.linspace(0.1, 5.0, 50)
    for b in (0.5, 0.8, 1.0, 1.41):
        ev = specfun.get_evaluator(b)
        for z in zs:
            for step, arg, bpow in ((b, b * z, -b * z + 0.5), (1 / b, z / b, z / b - 0.5)):
                lhs = ev.log_abs_sign(z)[0] - ev.log_abs_sign(z + step)[0]
                rhs = specfun.log_gamma(arg)[0] + bpow * math.log(b) \
                    - 0.5 * math.log(2 * math.pi)
                worst_shift = max(worst_shift, abs(lhs - rhs) / max(1.0, abs(rhs)))
        worst_norm = max(worst_norm, abs(ev.log_abs_sign(ev.q / 2)[0]))
        ev2 = specfun.get_evaluator(1 / b)
        worst_sym = max(worst_sym, max(
            abs(ev.log_abs_sign(z)[0] - ev2.log_abs_sign(z)[0]) for z in zs))
    wall = time.time() - t0
    ok = worst_shift < 1e-9 and worst_norm < 1e-10 and worst_sym < 1e-9 and wall < 60
    assert _verdict(1, "double gamma shifts / normalization / b-symmetry", ok,
                    f"shift {worst_shift:.2e} (<1e-9), Q/2 {worst_norm:.2e} (<1e-10), "
                    f"sym {worst_sym:.2e} (<1e-9), {wall:.0f}s (<60s)")


# -------------------------------------------------------------------- 2 --
def test_criterion_2_identity_suite():
    t0 = time.time()
    rows = _identity_rows(20)
    worst: dict[str, float] = {}
    for r in rows:
        worst[r["identity_name"]] = max(worst.get(r["identity_name"], 0.0), r["residual"])
    thresholds = {
        "r_bar_reflection": 1e-8,
        "h_bar_reflection": 1e-6,
        "m_shift_2_over_gamma": 1e-6,
        "m_shift_gamma_over_2": 1e-6,
        "m_shift_multiplicative": 1e-6,
        "m_two_root_invariance": 1e-8,
        "reversal_consistency": 1e-6,
        "m_alpha0_is_one": 1e-10,
        "m_gamma_closed_form": 1e-8,
        "m_Q_closed_form": 1e-8,
    }
    wall = time.time() - t0
    ok = wall < 300
    details = []
    for name, tol in thresholds.items():
        got = worst.get(name, math.inf)
        ok &= got < tol
        details.append(f"{name} {got:.1e}")
    assert _verdict(2, "special-function identity suite", ok,
                    "; ".join(details) + f"; {wall:.0f}s (<300s)")


# -------------------------------------------------------------------- 3 --
@pytest.mark.parametrize("kappa,rm,rp,r1,alpha", [
    (2.0, 0.0, 0.0, 0.0, -1.0),
    (3.0, 1.0, 1.0, 1.0, -0.5),
    (2.0, 0.5, 0.5, 1.0, -0.3),
])
def test_criterion_3_radius_moment_mc(kappa, rm, rp, r1, alpha):
    T, dt, n = 1024.0, 2.0**-10, 10000
    est, diags = sle.mc_radius_moment(kappa, rm, rp, r1, alpha, n, T, dt,
                                      seed=SEED, workers=WORKERS)
    gate = compare(est, est.exact_target, k_sigma=3.0, rel_tol=0.03)
    # dt-halving gate on path-coupled reruns
    est2, _ = sle.mc_radius_moment(kappa, rm, rp, r1, alpha, 600, T, dt / 2,
                                   seed=SEED, workers=WORKERS)
    dt_ok = abs(est.mean - est2.mean) <= math.hypot(est.stderr, est2.stderr)
    ok = gate.passed and dt_ok and diags.unconverged_fraction <= 0.05
    assert _verdict(
        3, f"radius moment MC at ({kappa},{rm},{rp},{r1},{alpha})", ok,
        f"mc {est.mean:.5f}+-{est.stderr:.5f} vs exact {est.exact_target:.5f} "
        f"(z={est.z_score:+.2f}); stderr/exact {est.stderr/est.exact_target:.3%} (<=3%); "
        f"T-gate unconv {diags.unconverged_fraction:.2%} (<=5%); "
        f"dt-gate |d|={abs(est.mean-est2.mean):.2e}<= {math.hypot(est.stderr, est2.stderr):.2e}",
    )


# -------------------------------------------------------------------- 4 --
def test_criterion_4_divergence_threshold():
    kappa, rm, rp, r1 = 2.0, 0.0, 0.0, 1.0
    alpha0 = exact.alpha_threshold(kappa, rp, r1)
    assert alpha0 == pytest.approx(4.0)
    # qualitative divergence scan: moderate horizon, loose per-sample
    # convergence tolerance (the heavy-psi samples drive the statistic)
    psi, _, fl, _ = sle._run_kernel(kappa, rm, rp, r1, 20000, 64, 2.0**-9,
                                    SEED, workers=WORKERS)
    ok_mask = fl == 0
    vals_hi = psi[ok_mask] ** (alpha0 + 0.5)
    vals_lo = psi[ok_mask] ** (alpha0 - 0.5)
    mean_lo = vals_lo.mean()
    from lqglab.harness import accumulate

    est_hi = accumulate(vals_hi)
    floor = 10.0 * mean_lo
    gate = compare(est_hi, math.inf, divergence_floor=floor)
    # running mean growth with n (prefix checkpoints)
    prefix = vals_hi[: len(vals_hi) // 16].mean()
    grows = est_hi.mean > prefix
    ok = gate.passed and grows
    assert _verdict(
        4, "divergence at alpha0 + 0.5", ok,
        f"mean(a0+.5)={est_hi.mean:.1f} > 10 x mean(a0-.5)={mean_lo:.1f} -> floor {floor:.1f}; "
        f"running mean {prefix:.1f} (n/16) -> {est_hi.mean:.1f} (n), top1 {est_hi.top1_mass:.2f}",
    )


# -------------------------------------------------------------------- 5 --
@pytest.mark.parametrize("b1,b2,b3,n", [
    (0.5, 0.5, 2.0, 20000),
    (0.8, 0.8, 2.0, 10000),
])
def test_criterion_5_gmc_moment(b1, b2, b3, n):
    p = LqgParams(1.0)
    N = 2**13
    est = gmc.mc_gmc_moment(b1, b2, b3, N, n, p, seed=SEED, workers=WORKERS)
    gate = compare(est, est.exact_target, k_sigma=3.0, rel_tol=0.05)
    est2 = gmc.mc_gmc_moment(b1, b2, b3, 2 * N, 4000, p, seed=SEED + 1, workers=WORKERS)
    grid_ok = abs(est.mean - est2.mean) <= 3.0 * math.hypot(est.stderr, est2.stderr)
    ok = gate.passed and grid_ok
    assert _verdict(
        5, f"GMC moment at betas ({b1},{b2},{b3})", ok,
        f"mc {est.mean:.4f}+-{est.stderr:.4f} vs exact {est.exact_target:.4f} "
        f"(z={est.z_score:+.2f}, rel stderr {est.stderr/est.exact_target:.2%}); "
        f"N->2N gate |d|={abs(est.mean-est2.mean):.3f} <= {3*math.hypot(est.stderr, est2.stderr):.3f}",
    )


# -------------------------------------------------------------------- 6 --
def test_criterion_6_fixed_length_weights():
    p = LqgParams(1.0)
    tw = TriangleWeights.from_weights(1.5, 1.5, 1.5, p)
    dens = exact.triangle_length_density(tw, p)
    N, n = 2**13, 20000
    zs, logs = [], []
    ells = (0.5, 1.0, 2.0)
    for i, ell in enumerate(ells):
        est = gmc.mc_triangle_length_weights(tw, ell, N, n, p, seed=SEED + 10 * i,
                                             workers=WORKERS)
        zs.append(est.z_score)
        logs.append(math.log(est.mean))
    slope = np.polyfit(np.log(ells), logs, 1)[0]
    ok = all(abs(z) <= 3.0 for z in zs) and abs(slope - dens.exponent) < 0.05
    assert _verdict(
        6, "fixed-length importance weights vs length law", ok,
        f"z-scores {[f'{z:+.2f}' for z in zs]} (|z|<=3); fitted exponent {slope:.4f} "
        f"vs {dens.exponent} (|d|<0.05)",
    )


# -------------------------------------------------------------------- 7 --
def test_criterion_7_radial_laws():
    p = LqgParams(1.0)
    n = 10000
    crit = stats.kstwobign.ppf(0.99) / math.sqrt(n)
    details = []
    ok = True
    for beta in (p.gamma, (p.gamma + p.Q) / 2, p.Q - 0.1):
        mu = p.Q - beta
        T = max(30.0, 40.0 / mu**2)
        out = surfaces.m_beta_batch(beta, T, 0.05, n, SEED, p)
        ks = stats.kstest(out["sup"], stats.expon(scale=1 / mu).cdf).statistic
        ok &= ks < crit
        details.append(f"sup KS(beta={beta:.2f})={ks:.4f}")
    # Williams mixture consistency at the 1% level
    beta = 0.6 * p.gamma + 0.4 * p.Q
    mu = p.Q - beta
    rng = np.random.Generator(np.random.Philox(key=SEED))
    a_mix = rng.exponential(1 / mu, size=n)
    T = max(16.0, 24.0 / mu**2)
    mix = surfaces.m_beta_given_max_batch(beta, a_mix, T, 0.01, n, SEED + 1, p)
    ref = surfaces.m_beta_batch(beta, T, 0.01, n, SEED + 2, p)
    ks2 = stats.ks_2samp(mix["endpoint"], ref["endpoint"]).statistic
    crit2 = stats.kstwobign.ppf(0.99) * math.sqrt(2.0 / n)
    ok &= ks2 < crit2
    details.append(f"Williams KS={ks2:.4f} (<{crit2:.4f})")
    # M^{Q-} post-hit Bessel mean within 3 stderr
    qm = surfaces.m_qminus_batch(1.0, 30.0, 0.01, n, SEED + 3)
    hit = qm["hit"]
    s = 30.0 - qm["hit_time"][hit]
    ratio = (1.0 - qm["endpoint"][hit]) / math.sqrt(2.0) / np.sqrt(8.0 * s / np.pi)
    m, se = ratio.mean(), ratio.std(ddof=1) / math.sqrt(hit.sum())
    ok &= abs(m - 1.0) <= 3 * se
    details.append(f"Bessel ratio {m:.4f}+-{se:.4f}")
    assert _verdict(7, f"radial process laws (KS 1% crit {crit:.4f})", ok, "; ".join(details))


# -------------------------------------------------------------------- 8 --
def test_criterion_8_reversal():
    direct, weighted, dd, dw = sle.mc_reversal_check(
        2.0, 0.5, 0.5, 1.0, -0.3, 4000, 1024.0, 2.0**-10, seed=SEED,
        workers=WORKERS, min_ess=1000.0,
    )
    comb = math.hypot(direct.stderr, weighted.stderr)
    ok = abs(direct.mean - weighted.mean) <= 3 * comb and weighted.ess >= 1000.0
    # rho_1 = 0 control: both estimators target the same law trivially
    dc, wc, _, _ = sle.mc_reversal_check(2.0, 0.5, 0.5, 0.0, -0.3, 1200, 128.0,
                                         2.0**-9, seed=SEED + 1, workers=WORKERS,
                                         conv_tol=5e-3, min_ess=100.0)
    comb_c = math.hypot(dc.stderr, wc.stderr)
    ok &= abs(dc.mean - wc.mean) <= 3 * comb_c
    assert _verdict(
        8, "statistical reversibility", ok,
        f"direct {direct.mean:.5f}+-{direct.stderr:.5f} vs weighted "
        f"{weighted.mean:.5f}+-{weighted.stderr:.5f} (|d|={abs(direct.mean-weighted.mean):.2e}"
        f" <= {3*comb:.2e}); ESS {weighted.ess:.0f} (>=1000); "
        f"rho1=0 control |d|={abs(dc.mean-wc.mean):.2e} <= {3*comb_c:.2e}",
    )


# -------------------------------------------------------------------- 9 --
def test_criterion_9_determinism(tmp_path):
    base = ["verify-radius", "--kappa", "2", "--rho-minus", "0", "--rho-plus", "0",
            "--rho1", "0", "--alpha", "-1.0", "--n-samples", "400", "--T", "64",
            "--dt", str(2.0**-8), "--seed", "7", "--conv-tol", "0.05", "--skip-dt-gate"]
    r1, r2 = tmp_path / "w1.json", tmp_path / "w2.json"
    cli_main(base + ["--workers", "1", "--out", str(r1)])
    cli_main(base + ["--workers", "2", "--out", str(r2)])
    radius_ok = r1.read_bytes() == r2.read_bytes()
    gbase = ["verify-gmc", "--gamma", "1", "--beta1", "0.5", "--beta2", "0.5",
             "--beta3", "2.0", "--n-samples", "2000", "--log2n", "10", "--seed", "5",
             "--skip-grid-gate"]
    g1, g2 = tmp_path / "g1.json", tmp_path / "g2.json"
    cli_main(gbase + ["--workers", "1", "--out", str(g1)])
    cli_main(gbase + ["--workers", "2", "--out", str(g2)])
    gmc_ok = g1.read_bytes() == g2.read_bytes()
    ok = radius_ok and gmc_ok
    assert _verdict(9, "byte-identical reports across worker counts", ok,
                    f"radius {radius_ok}, gmc {gmc_ok}")
