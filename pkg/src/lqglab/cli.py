"""Command-line entry point: exact formulas, identity suites, MC campaigns.

Exit codes: 0 pass, 1 verification failure, 2 domain/usage error,
3 quality failure.  Reports are canonical JSON (sorted keys, repr floats):
rerunning with the same config and seed is byte-identical regardless of
worker count; wall time therefore goes to stdout only, and the report's
``wall_seconds`` field is null.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, exact, gmc, sle, specfun, surfaces
from .harness import Verdict, compare
from .params import DomainError, LqgParams, TriangleWeights

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_DOMAIN = 2
EXIT_QUALITY = 3


def _default_workers() -> int:
    return int(os.environ.get("LQGLAB_WORKERS", "1"))


def _write_report(args, command: str, config: dict, results: list, gates: list) -> dict:
    # the worker count routes execution but cannot affect results (fixed
    # chunking, per-sample seeding); keeping it out of the canonical
    # report makes reruns byte-identical irrespective of parallelism
    cfg = {k: v for k, v in config.items() if k != "workers"}
    report = {
        "command": command,
        "config": cfg,
        "results": results,
        "gates": gates,
        "seed": config.get("seed"),
        "version": __version__,
        "wall_seconds": None,
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    return report


def _print_results(report: dict, wall: float) -> None:
    print(f"== {report['command']} (version {report['version']}) ==")
    for row in report["results"]:
        bits = [f"{k}={v}" for k, v in row.items() if v is not None]
        print("  " + "  ".join(bits))
    for gate in report["gates"]:
        status = "PASS" if gate["pass"] else "FAIL"
        print(f"  [{status}] {gate['criterion']}")
    print(f"  wall_seconds={wall:.1f}")


def _load_config(args, keys: list[str]) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _params_from_cfg(cfg: dict) -> LqgParams:
    if cfg.get("gamma") is not None and cfg.get("kappa") is not None:
        if abs(cfg["kappa"] - cfg["gamma"] ** 2) > 1e-12:
            raise DomainError("gamma and kappa both given but inconsistent")
    if cfg.get("gamma") is not None:
        return LqgParams(cfg["gamma"])
    if cfg.get("kappa") is not None:
        return LqgParams.from_kappa(cfg["kappa"])
    raise DomainError("need --gamma or --kappa")


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------


def cmd_exact(args) -> int:
    cfg = _load_config(args, [
        "formula", "gamma", "kappa", "rho_minus", "rho_plus", "rho1", "alpha",
        "beta", "beta1", "beta2", "beta3", "w1", "w2", "w3", "mu", "x",
    ])
    f = cfg.get("formula")
    rows = []
    try:
        if f == "delta-beta":
            p = _params_from_cfg(cfg)
            rows.append({"name": "delta_beta", "value": exact.delta_beta(cfg["beta"], p)})
        elif f == "r-bar":
            p = _params_from_cfg(cfg)
            rows.append({"name": "r_bar", "value": exact.r_bar(cfg["beta"], p)})
        elif f == "h-bar":
            p = _params_from_cfg(cfg)
            res = exact.h_bar(cfg["beta1"], cfg["beta2"], cfg["beta3"], p)
            if not res.finite:
                raise DomainError(
                    "Seiberg bounds violated (need beta1,beta2 < Q, |beta1-beta2| < beta3, "
                    "beta_bar > gamma): moment is infinite"
                )
            rows.append({"name": "h_bar", "value": res.value})
        elif f == "disk-density":
            p = _params_from_cfg(cfg)
            d = exact.disk_length_density(cfg["w1"], p)
            rows.append({"name": "disk_density", "prefactor": d.prefactor,
                         "exponent": d.exponent, "infinite": d.infinite})
        elif f == "triangle-density":
            p = _params_from_cfg(cfg)
            tw = TriangleWeights.from_weights(cfg["w1"], cfg["w2"], cfg["w3"], p)
            d = exact.triangle_length_density(tw, p)
            rows.append({"name": "triangle_density", "prefactor": d.prefactor,
                         "exponent": d.exponent, "infinite": d.infinite})
        elif f == "triangle-laplace":
            p = _params_from_cfg(cfg)
            tw = TriangleWeights.from_weights(cfg["w1"], cfg["w2"], cfg["w3"], p)
            rows.append({"name": "triangle_laplace",
                         "value": exact.triangle_length_laplace(tw, cfg["mu"], p)})
        elif f == "f-function":
            rows.append({"name": "f_function", "value": exact.f_function(
                cfg["x"], cfg["kappa"], cfg["rho_minus"], cfg["rho_plus"], cfg["rho1"])})
        elif f == "alpha0":
            rows.append({"name": "alpha0", "value": exact.alpha_threshold(
                cfg["kappa"], cfg["rho_plus"], cfg["rho1"])})
        elif f == "beta-roots":
            r = exact.alpha_to_beta_roots(cfg["alpha"], cfg["kappa"], cfg["rho1"])
            rows.append({"name": "beta_roots", "root_lo": repr(r[0]), "root_hi": repr(r[1]),
                         "real": abs(r[0].imag) == 0.0})
        elif f == "radius-moment":
            q = exact.RadiusMomentQuery(cfg["kappa"], cfg["rho_minus"], cfg["rho_plus"],
                                        cfg["rho1"], cfg["alpha"])
            rows.append({"name": "radius_moment", "value": exact.radius_moment_exact(q),
                         "alpha0": q.alpha_0})
        elif f == "m-gamma":
            p = _params_from_cfg(cfg)
            rows.append({"name": "m_gamma", "value": exact.m_gamma_closed_form(
                cfg["beta1"], cfg["beta2"], cfg["alpha"], p)})
        elif f == "m-q":
            p = _params_from_cfg(cfg)
            rows.append({"name": "m_Q", "value": exact.m_Q_closed_form(
                cfg["beta1"], cfg["beta2"], cfg["alpha"], p)})
        else:
            raise DomainError(f"unknown formula {f!r}")
    except (DomainError, KeyError, TypeError) as exc:
        print(f"domain/usage error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    report = _write_report(args, "exact", cfg, rows, [])
    _print_results(report, 0.0)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# verify-identities
# ---------------------------------------------------------------------------


def _identity_rows(grid_size: int) -> list[dict]:
    """All analytic identity residuals over built-in admissible grids."""
    rows = []

    def add(name, point, residual, tol):
        rows.append({"identity_name": name, "grid_point": str(point),
                     "residual": float(residual), "tol": tol})

    # double gamma shift equations, normalization, symmetry
    zs = np.linspace(0.1, 5.0, 50)
    for b in (0.5, 0.8, 1.0, 1.41):
        ev = specfun.get_evaluator(b)
        worst_shift = 0.0
        for z in zs:
            for step, arg, bpow in ((b, b * z, -b * z + 0.5), (1.0 / b, z / b, z / b - 0.5)):
                lhs = ev.log_abs_sign(z)[0] - ev.log_abs_sign(z + step)[0]
                rhs = specfun.log_gamma(arg)[0] + bpow * math.log(b) - 0.5 * math.log(2 * math.pi)
                worst_shift = max(worst_shift, abs(lhs - rhs) / max(1.0, abs(rhs)))
        add("dgamma_shift", b, worst_shift, 1e-9)
        add("dgamma_Q_half", b, abs(ev.log_abs_sign(ev.q / 2.0)[0]), 1e-10)
        ev_inv = specfun.get_evaluator(1.0 / b)
        sym = max(abs(ev.log_abs_sign(z)[0] - ev_inv.log_abs_sign(z)[0]) for z in zs)
        add("dgamma_b_symmetry", b, sym, 1e-9)

    rng = np.random.Generator(np.random.Philox(key=20260810))
    gammas = 0.6 + 1.1 * rng.random(grid_size)

    for g in gammas:
        p = LqgParams(float(g))
        beta = float(0.3 + (p.Q - 0.5) * rng.random())
        if abs(p.Q - beta) < 0.05:
            beta += 0.1
        lhs = exact.r_bar(beta, p) * exact.r_bar(2 * p.Q - beta, p)
        s = 2.0 * (p.Q - beta) / p.gamma
        rhs = 1.0 / (math.gamma(1.0 - s) * math.gamma(1.0 + s))
        add("r_bar_reflection", (round(float(g), 3), round(beta, 3)),
            abs(lhs - rhs) / abs(rhs), 1e-8)

    for g in gammas:
        p = LqgParams(float(g))
        b1 = float(p.Q - 0.2 - 0.6 * rng.random())
        b2 = float(p.Q - 0.25 - 0.6 * rng.random())
        b3 = float(abs(b1 - b2) + 0.3 + rng.random())
        try:
            add("h_bar_reflection", (round(float(g), 3), round(b1, 3), round(b2, 3), round(b3, 3)),
                exact.h_bar_reflection_residual(b1, b2, b3, p), 1e-6)
        except specfun.PoleError:
            continue

    # m-function identities
    for g in gammas:
        p = LqgParams(float(g))
        top = p.Q + p.gamma / 2.0
        bm = float(top - 0.3 - 1.2 * rng.random())
        b1 = float(top - 0.4 - 1.2 * rng.random())
        b2 = float(top - 0.35 - 1.2 * rng.random())
        alpha = float(-0.8 * rng.random() - 0.05)
        point = tuple(round(x, 3) for x in (float(g), bm, b1, b2, alpha))
        try:
            ra, rb, rm = exact.shift_relation_residuals(bm, b1, b2, alpha, p)
        except (DomainError, specfun.PoleError):
            continue
        add("m_shift_2_over_gamma", point, ra, 1e-6)
        add("m_shift_gamma_over_2", point, rb, 1e-6)
        add("m_shift_multiplicative", point, rm, 1e-6)

    # two-root invariance and alpha = 0 normalization
    for i in range(max(30, grid_size)):
        kappa = float(0.5 + 3.3 * rng.random())
        rm_ = float(-1.5 + 3.5 * rng.random())
        rp = float(-1.5 + 3.5 * rng.random())
        r1 = float(-1.5 - rp + (3.5 + rp) * rng.random() + 0.2)
        q0 = exact.RadiusMomentQuery(kappa, rm_, rp, r1, 0.0)
        add("m_alpha0_is_one", (round(kappa, 3), round(rm_, 3), round(rp, 3), round(r1, 3)),
            abs(exact.radius_moment_exact(q0) - 1.0), 1e-10)
        alpha = float(-1.2 * rng.random() - 0.02)
        try:
            q = exact.RadiusMomentQuery(kappa, rm_, rp, r1, alpha)
            v0 = exact.radius_moment_exact(q, 0)
            v1 = exact.radius_moment_exact(q, 1)
        except (DomainError, specfun.PoleError):
            continue
        add("m_two_root_invariance", (round(kappa, 3), round(rm_, 3), round(rp, 3),
                                      round(r1, 3), round(alpha, 3)),
            abs(v0 - v1) / abs(v0), 1e-8)

    # reversal consistency
    for i in range(grid_size):
        kappa = float(0.8 + 2.9 * rng.random())
        rm_ = float(-1.2 + 2.8 * rng.random())
        rp = float(-1.2 + 2.8 * rng.random())
        r1 = float(max(-1.8 - rp, -1.5) + 2.5 * rng.random() + 0.1)
        alpha = float(-0.5 * rng.random() - 0.02)
        point = tuple(round(x, 3) for x in (kappa, rm_, rp, r1, alpha))
        try:
            add("reversal_consistency", point,
                exact.reversal_consistency_residual(kappa, rm_, rp, r1, alpha), 1e-6)
        except (DomainError, specfun.PoleError):
            continue

    # closed forms against radius_moment_exact through the insertion bridge
    for g in gammas:
        p = LqgParams(float(g))
        top = p.Q + p.gamma / 2.0
        b1 = float(top - 0.3 - 1.0 * rng.random())
        b2 = float(top - 0.35 - 1.0 * rng.random())
        alpha = float(-0.9 * rng.random() - 0.05)
        point = tuple(round(x, 3) for x in (float(g), b1, b2, alpha))
        try:
            via_g = exact._m_value(p.gamma, b1, b2, alpha, p)
            cf_g = exact.m_gamma_closed_form(b1, b2, alpha, p)
            via_q = exact._m_value(p.Q, b1, b2, alpha, p)
            cf_q = exact.m_Q_closed_form(b1, b2, alpha, p)
        except (DomainError, specfun.PoleError):
            continue
        add("m_gamma_closed_form", point, abs(via_g - cf_g) / abs(cf_g), 1e-8)
        add("m_Q_closed_form", point, abs(via_q - cf_q) / abs(cf_q), 1e-8)

    # Laplace transform vs numeric quadrature of the density
    from scipy import integrate

    for g in gammas[: max(5, grid_size // 4)]:
        p = LqgParams(float(g))
        # weight range keeping beta_bar > 2Q (length density integrable at 0)
        W = float((0.5 + 0.25 * rng.random()) * (p.gamma**2 + 2.0) / 3.0)
        tw = TriangleWeights.from_weights(W, W * 1.04, W * 0.96, p)
        dens = exact.triangle_length_density(tw, p)
        if dens.infinite or (tw.beta_bar - 2 * p.Q) / p.gamma <= 0.05:
            continue
        mu = 0.7 + rng.random()
        lap = exact.triangle_length_laplace(tw, mu, p)
        val, _ = integrate.quad(lambda l: math.exp(-mu * l) * dens.at(l), 0.0, np.inf)
        add("triangle_laplace_quadrature", (round(float(g), 3), round(W, 2), round(mu, 3)),
            abs(lap - val) / abs(val), 1e-6)

    # Seiberg gate straddle: h_bar flag flips exactly at each bound
    p = LqgParams(1.2)
    eps = 1e-4
    for (b1, b2, b3, finite) in (
        (p.Q - eps, 1.0, 1.5, True), (p.Q + eps, 1.0, 1.5, False),
        (1.0, p.Q - eps, 1.5, True), (1.0, p.Q + eps, 1.5, False),
        (1.0, 1.6, 0.6 + eps, True), (1.0, 1.6, 0.6 - eps, False),
        (0.5, 0.5, p.gamma - 1.0 + eps, True), (0.5, 0.5, p.gamma - 1.0 - eps, False),
    ):
        ok = exact.seiberg_ok(b1, b2, b3, p) == finite
        add("seiberg_gate", (round(b1, 4), round(b2, 4), round(b3, 4)), 0.0 if ok else 1.0, 0.5)
    return rows


def cmd_verify_identities(args) -> int:
    cfg = _load_config(args, ["grid_size", "perturb", "out", "csv"])
    grid_size = int(cfg.get("grid_size", 20))
    t0 = time.time()
    specfun.PERTURB_LOG = float(cfg.get("perturb", 0.0) or 0.0)
    try:
        rows = _identity_rows(grid_size)
    finally:
        specfun.PERTURB_LOG = 0.0
    worst: dict[str, dict] = {}
    for r in rows:
        cur = worst.get(r["identity_name"])
        if cur is None or r["residual"] > cur["residual"]:
            worst[r["identity_name"]] = r
    gates = []
    for name, r in sorted(worst.items()):
        gates.append(Verdict(
            r["residual"] <= r["tol"],
            f"{name}: max residual {r['residual']:.3e} <= {r['tol']:g}",
            {"residual": r["residual"], "tol": r["tol"], "worst_point": r["grid_point"]},
        ).to_dict())
    if cfg.get("csv"):
        with open(cfg["csv"], "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["identity_name", "grid_point", "residual", "tol"])
            w.writeheader()
            w.writerows(rows)
    cfg["seed"] = 20260810
    report = _write_report(args, "verify-identities", cfg,
                           [{"identities": len(worst), "grid_rows": len(rows)}], gates)
    _print_results(report, time.time() - t0)
    return EXIT_PASS if all(g["pass"] for g in gates) else EXIT_FAIL


# ---------------------------------------------------------------------------
# MC campaigns
# ---------------------------------------------------------------------------


def _mc_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-samples", type=int, dest="n_samples")
    parser.add_argument("--T", type=float, dest="T")
    parser.add_argument("--dt", type=float, dest="dt")
    parser.add_argument("--conv-tol", type=float, dest="conv_tol")
    parser.add_argument("--seed", type=int, dest="seed", default=None)
    parser.add_argument("--workers", type=int, dest="workers", default=None)
    parser.add_argument("--out", dest="out")
    parser.add_argument("--csv", dest="csv")
    parser.add_argument("--config", dest="config")
    parser.add_argument("--expect-override", type=float, dest="expect_override")


def _batch_csv(path: str, values: np.ndarray, batch: int = 500) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["batch_index", "n", "partial_mean"])
        for i in range(0, values.size, batch):
            chunk = values[i : i + batch]
            w.writerow([i // batch, chunk.size, repr(float(chunk.mean()))])


def cmd_verify_radius(args) -> int:
    cfg = _load_config(args, ["kappa", "rho_minus", "rho_plus", "rho1", "alpha",
                              "n_samples", "T", "dt", "seed", "workers", "out", "csv",
                              "expect_override", "skip_dt_gate", "conv_tol"])
    cfg.setdefault("n_samples", 10000)
    cfg.setdefault("T", 1024.0)
    cfg.setdefault("dt", 2.0**-10)
    cfg.setdefault("seed", 1)
    cfg.setdefault("workers", _default_workers())
    cfg.setdefault("conv_tol", sle.DEFAULT_CONV_TOL)
    t0 = time.time()
    try:
        est, diags = sle.mc_radius_moment(
            cfg["kappa"], cfg["rho_minus"], cfg["rho_plus"], cfg["rho1"], cfg["alpha"],
            cfg["n_samples"], cfg["T"], cfg["dt"], cfg["seed"], workers=cfg["workers"],
            conv_tol=cfg["conv_tol"],
        )
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except sle.QualityError as exc:
        print(f"quality error: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    target = cfg.get("expect_override")
    exact_val = est.exact_target if target is None else target
    gates = [compare(est, exact_val, k_sigma=3.0, rel_tol=0.03).to_dict()]
    if not cfg.get("skip_dt_gate"):
        est2, _ = sle.mc_radius_moment(
            cfg["kappa"], cfg["rho_minus"], cfg["rho_plus"], cfg["rho1"], cfg["alpha"],
            min(cfg["n_samples"], 2500), cfg["T"], cfg["dt"] / 2.0, cfg["seed"],
            workers=cfg["workers"], conv_tol=cfg["conv_tol"],
        )
        gates.append(Verdict(
            abs(est.mean - est2.mean) <= math.hypot(est.stderr, est2.stderr),
            "dt-halving gate: |est(dt) - est(dt/2)| <= combined stderr (coupled paths)",
            {"est_dt": est.mean, "est_dt_half": est2.mean,
             "combined_stderr": math.hypot(est.stderr, est2.stderr)},
        ).to_dict())
    if cfg.get("csv"):
        _batch_csv(cfg["csv"], np.array([est.mean]))
    results = [{"name": "radius_moment_mc", **est.to_dict(), **diags.to_dict()}]
    report = _write_report(args, "verify-radius", cfg, results, gates)
    _print_results(report, time.time() - t0)
    return EXIT_PASS if all(g["pass"] for g in gates) else EXIT_FAIL


def cmd_verify_gmc(args) -> int:
    cfg = _load_config(args, ["gamma", "beta1", "beta2", "beta3", "n_samples", "log2n",
                              "seed", "workers", "out", "csv", "expect_override",
                              "skip_grid_gate"])
    cfg.setdefault("gamma", 1.0)
    cfg.setdefault("beta1", 0.5)
    cfg.setdefault("beta2", 0.5)
    cfg.setdefault("beta3", 2.0)
    cfg.setdefault("n_samples", 20000)
    cfg.setdefault("log2n", 13)
    cfg.setdefault("seed", 1)
    cfg.setdefault("workers", _default_workers())
    p = LqgParams(cfg["gamma"])
    N = 2 ** int(cfg["log2n"])
    t0 = time.time()
    try:
        est = gmc.mc_gmc_moment(cfg["beta1"], cfg["beta2"], cfg["beta3"], N,
                                cfg["n_samples"], p, cfg["seed"], workers=cfg["workers"])
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    target = cfg.get("expect_override")
    exact_val = est.exact_target if target is None else target
    gates = [compare(est, exact_val, k_sigma=3.0, rel_tol=0.05).to_dict()]
    if not cfg.get("skip_grid_gate"):
        est2 = gmc.mc_gmc_moment(cfg["beta1"], cfg["beta2"], cfg["beta3"], 2 * N,
                                 max(2000, cfg["n_samples"] // 5), p, cfg["seed"] + 1,
                                 workers=cfg["workers"])
        gates.append(Verdict(
            abs(est.mean - est2.mean) <= math.hypot(est.stderr, est2.stderr) * 3.0,
            "grid-doubling gate: |est(N) - est(2N)| <= 3 combined stderr",
            {"est_N": est.mean, "est_2N": est2.mean,
             "combined_stderr": math.hypot(est.stderr, est2.stderr)},
        ).to_dict())
    results = [{"name": "gmc_moment_mc", "N": N, **est.to_dict()}]
    report = _write_report(args, "verify-gmc", cfg, results, gates)
    _print_results(report, time.time() - t0)
    return EXIT_PASS if all(g["pass"] for g in gates) else EXIT_FAIL


def cmd_verify_reversal(args) -> int:
    cfg = _load_config(args, ["kappa", "rho_minus", "rho_plus", "rho1", "alpha",
                              "n_samples", "T", "dt", "seed", "workers", "out", "csv",
                              "conv_tol"])
    cfg.setdefault("conv_tol", sle.DEFAULT_CONV_TOL)
    cfg.setdefault("kappa", 2.0)
    cfg.setdefault("rho_minus", 0.5)
    cfg.setdefault("rho_plus", 0.5)
    cfg.setdefault("rho1", 1.0)
    cfg.setdefault("alpha", -0.3)
    cfg.setdefault("n_samples", 10000)
    cfg.setdefault("T", 1024.0)
    cfg.setdefault("dt", 2.0**-10)
    cfg.setdefault("seed", 1)
    cfg.setdefault("workers", _default_workers())
    t0 = time.time()
    try:
        direct, weighted, dd, dw = sle.mc_reversal_check(
            cfg["kappa"], cfg["rho_minus"], cfg["rho_plus"], cfg["rho1"], cfg["alpha"],
            cfg["n_samples"], cfg["T"], cfg["dt"], cfg["seed"], workers=cfg["workers"],
            conv_tol=cfg["conv_tol"], min_ess=1000.0,
        )
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except sle.QualityError as exc:
        print(f"quality error: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    comb = math.hypot(direct.stderr, weighted.stderr)
    gates = [
        Verdict(abs(direct.mean - weighted.mean) <= 3.0 * comb,
                "|direct - weighted| <= 3 combined stderr",
                {"direct": direct.mean, "weighted": weighted.mean, "combined_stderr": comb}
                ).to_dict(),
        compare(direct, direct.exact_target, 3.0, 0.05).to_dict(),
        compare(weighted, weighted.exact_target, 3.0, 0.05).to_dict(),
        Verdict(weighted.ess >= 1000.0, "weighted ESS >= 1000", {"ess": weighted.ess}).to_dict(),
    ]
    results = [
        {"name": "direct", **direct.to_dict(), **dd.to_dict()},
        {"name": "weighted", **weighted.to_dict(), **dw.to_dict()},
    ]
    report = _write_report(args, "verify-reversal", cfg, results, gates)
    _print_results(report, time.time() - t0)
    return EXIT_PASS if all(g["pass"] for g in gates) else EXIT_FAIL


def cmd_verify_surfaces(args) -> int:
    from scipy import stats

    cfg = _load_config(args, ["gamma", "n_samples", "seed", "out", "csv"])
    cfg.setdefault("gamma", 1.0)
    cfg.setdefault("n_samples", 10000)
    cfg.setdefault("seed", 42)
    p = LqgParams(cfg["gamma"])
    n = int(cfg["n_samples"])
    seed = int(cfg["seed"])
    t0 = time.time()
    gates = []
    results = []
    crit = stats.kstwobign.ppf(0.99) / math.sqrt(n)
    for beta in (p.gamma, (p.gamma + p.Q) / 2.0, p.Q - 0.1):
        mu = p.Q - beta
        T = max(30.0, 40.0 / mu**2)
        out = surfaces.m_beta_batch(beta, T, 0.05, n, seed, p)
        ks = stats.kstest(out["sup"], stats.expon(scale=1.0 / mu).cdf).statistic
        results.append({"name": f"sup_law_beta={beta:.3f}", "ks": ks, "crit_1pct": crit})
        gates.append(Verdict(ks < crit, f"sup-law KS at beta={beta:.3f} below 1% critical",
                             {"ks": ks, "crit": crit}).to_dict())
    # Williams mixture consistency (two-sample, 1% level)
    beta = 0.6 * p.gamma + 0.4 * p.Q
    mu = p.Q - beta
    rng = np.random.Generator(np.random.Philox(key=seed))
    a_mix = rng.exponential(1.0 / mu, size=n)
    T = max(16.0, 24.0 / mu**2)
    mix = surfaces.m_beta_given_max_batch(beta, a_mix, T, 0.01, n, seed + 1, p)
    ref = surfaces.m_beta_batch(beta, T, 0.01, n, seed + 2, p)
    ks2 = stats.ks_2samp(mix["endpoint"], ref["endpoint"]).statistic
    crit2 = stats.kstwobign.ppf(0.99) * math.sqrt(2.0 / n)
    results.append({"name": "williams_mixture_endpoint", "ks": ks2, "crit_1pct": crit2})
    gates.append(Verdict(ks2 < crit2, "Williams mixture endpoint KS below 1% critical",
                         {"ks": ks2, "crit": crit2}).to_dict())
    # M^{Q-} post-hit Bessel mean
    qm = surfaces.m_qminus_batch(1.0, 30.0, 0.01, n, seed + 3)
    hit = qm["hit"]
    s = 30.0 - qm["hit_time"][hit]
    ratio = (1.0 - qm["endpoint"][hit]) / np.sqrt(2.0) / np.sqrt(8.0 * s / np.pi)
    m, se = ratio.mean(), ratio.std(ddof=1) / math.sqrt(hit.sum())
    results.append({"name": "qminus_bessel_ratio", "mean": m, "stderr": se})
    gates.append(Verdict(abs(m - 1.0) <= 3.0 * se, "post-hit Bessel mean within 3 stderr",
                         {"ratio": m, "stderr": se}).to_dict())
    report = _write_report(args, "verify-surfaces", cfg, results, gates)
    _print_results(report, time.time() - t0)
    return EXIT_PASS if all(g["pass"] for g in gates) else EXIT_FAIL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lqglab",
        description="Exact-formula evaluation and Monte Carlo verification for "
                    "SLE / LQG boundary integrability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("exact", help="evaluate a closed-form quantity")
    pe.add_argument("--formula", required=True)
    for flag in ("gamma", "kappa", "rho-minus", "rho-plus", "rho1", "alpha", "beta",
                 "beta1", "beta2", "beta3", "w1", "w2", "w3", "mu", "x"):
        pe.add_argument(f"--{flag}", type=float, dest=flag.replace("-", "_"), default=None)
    pe.add_argument("--out", dest="out")
    pe.add_argument("--config", dest="config")
    pe.set_defaults(func=cmd_exact)

    pi = sub.add_parser("verify-identities", help="run the analytic identity suite")
    pi.add_argument("--grid-size", type=int, dest="grid_size", default=None)
    pi.add_argument("--perturb", type=float, dest="perturb", default=None)
    pi.add_argument("--out", dest="out")
    pi.add_argument("--csv", dest="csv")
    pi.add_argument("--config", dest="config")
    pi.set_defaults(func=cmd_verify_identities)

    pr = sub.add_parser("verify-radius", help="Monte Carlo conformal-derivative moment")
    for flag in ("kappa", "rho-minus", "rho-plus", "rho1", "alpha"):
        pr.add_argument(f"--{flag}", type=float, dest=flag.replace("-", "_"), default=None)
    pr.add_argument("--skip-dt-gate", action="store_true", dest="skip_dt_gate")
    _mc_common(pr)
    pr.set_defaults(func=cmd_verify_radius)

    pg = sub.add_parser("verify-gmc", help="Monte Carlo boundary GMC moment")
    for flag in ("gamma", "beta1", "beta2", "beta3"):
        pg.add_argument(f"--{flag}", type=float, dest=flag, default=None)
    pg.add_argument("--log2n", type=int, dest="log2n", default=None)
    pg.add_argument("--skip-grid-gate", action="store_true", dest="skip_grid_gate")
    _mc_common(pg)
    pg.set_defaults(func=cmd_verify_gmc)

    pv = sub.add_parser("verify-reversal", help="time-reversal weighting check")
    for flag in ("kappa", "rho-minus", "rho-plus", "rho1", "alpha"):
        pv.add_argument(f"--{flag}", type=float, dest=flag.replace("-", "_"), default=None)
    _mc_common(pv)
    pv.set_defaults(func=cmd_verify_reversal)

    ps = sub.add_parser("verify-surfaces", help="radial-process distribution checks")
    ps.add_argument("--gamma", type=float, dest="gamma", default=None)
    ps.add_argument("--n-samples", type=int, dest="n_samples", default=None)
    ps.add_argument("--seed", type=int, dest="seed", default=None)
    ps.add_argument("--out", dest="out")
    ps.add_argument("--csv", dest="csv")
    ps.add_argument("--config", dest="config")
    ps.set_defaults(func=cmd_verify_surfaces)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
