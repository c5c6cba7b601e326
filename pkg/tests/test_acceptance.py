"""Acceptance criteria 1-11, one test each.

Every test records a one-line PASS/FAIL verdict with the measured quantity;
the verdicts are printed in the terminal summary (see conftest.py).
"""

import csv
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from driftlearn import cli
from driftlearn import merton as M
from driftlearn import simulate as S
from driftlearn.errors import BlowupError
from driftlearn.filters import PriorBelief1D, PriorBeliefND, posterior_variance
from oracles import residual_cara_1d, residual_crra_1d, residual_nd

RESULTS = []
MC_PATHS = 100_000


def verdict(n, ok, detail, started=None):
    took = f" ({time.perf_counter() - started:.1f} s)" if started is not None else ""
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}{took}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def figure_positions(out, which):
    """Times and inventories of each labelled path in a figure dataset."""
    with open(os.path.join(out, f"figure{which}.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    paths = {}
    for r in rows:
        t, q = paths.setdefault(r["label"], ([], []))
        t.append(float(r["t"]))
        q.append(float(r["position"]))
    return {k: (np.array(t), np.array(q)) for k, (t, q) in paths.items()}


@pytest.fixture(scope="module")
def figure_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("figures")
    for k in (1, 2, 3):
        assert cli.main(["figures", str(k), "--out", str(out)]) == 0
    return str(out)


def test_criterion_01_q_opt():
    t0 = time.perf_counter()
    cfg = cli.load_config("figure1")
    q_opt = float(cfg.sim.mu) / (cfg.utility.gamma * cfg.market.scalar_sigma() ** 2)
    verdict(1, round(q_opt) == 138889 and abs(q_opt - 138888.9) < 0.05,
            f"q_opt = {q_opt:.4f} shares", t0)


def test_criterion_02_ode_residuals():
    t0 = time.perf_counter()
    mkt, prior = M.FrictionlessMarket(0.0, 0.6), PriorBelief1D.from_std(0.01, 0.03)
    cara, crra = M.UtilitySpec.cara(2e-7, 10.0), M.UtilitySpec.crra(2.0, 10.0)
    res = {
        "cara 1d": residual_cara_1d(lambda t: M.cara_coeffs_1d(t, mkt, cara, prior).a,
                                    lambda t: M.cara_coeffs_1d(t, mkt, cara, prior).b,
                                    0.6, 0.0009, 2e-7, 10.0),
        "crra 1d": residual_crra_1d(lambda t: M.crra_coeffs_1d(t, mkt, crra, prior).a,
                                    lambda t: M.crra_coeffs_1d(t, mkt, crra, prior).b,
                                    0.6, 0.0009, 2.0, 10.0),
    }
    Sigma = np.array([[0.36, 0.072], [0.072, 0.16]])
    p2 = PriorBeliefND([0.01, 0.005], [[0.0009, 0.0001], [0.0001, 0.0004]])
    m2 = M.FrictionlessMarket(0.0, Sigma)
    for name, fn, u, power in (("cara nd", M.cara_coeffs_nd, cara, False),
                               ("crra nd", M.crra_coeffs_nd, crra, True)):
        coeffs = lambda t, fn=fn, u=u: (lambda c: (c.a, c.b))(fn(t, m2, u, p2))
        res[name] = residual_nd(coeffs, Sigma, p2.Gamma0, u.gamma, 10.0, power)
    worst = max(res.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in res.items())
    verdict(2, worst < 1e-6, f"max scaled residual over 100 points: {detail}", t0)


def test_criterion_03_numeric_riccati():
    t0 = time.perf_counter()
    mkt, prior = M.FrictionlessMarket(0.0, 0.6), PriorBelief1D.from_std(0.01, 0.03)
    u = M.UtilitySpec.crra(2.0, 10.0)
    grid, _, b = M.riccati_1d_numeric(mkt, u, prior, steps=10_000)
    closed = np.array([M.crra_coeffs_1d(t, mkt, u, prior).b for t in grid[:-1]])
    rel = float(np.max(np.abs(b[:-1] - closed) / np.abs(closed)))
    verdict(3, rel < 1e-6, f"max relative error of b(t) = {rel:.2e}", t0)


def test_criterion_04_one_by_one_reduction():
    t0 = time.perf_counter()
    m1, mk = M.FrictionlessMarket(0.001, np.array([[0.36]])), M.FrictionlessMarket(0.001, 0.6)
    p1, pk = PriorBeliefND([0.01], [[0.0009]]), PriorBelief1D(0.01, 0.0009)
    cara, crra, log = M.UtilitySpec.cara(2e-7, 10.0), M.UtilitySpec.crra(2.0, 10.0), M.UtilitySpec.log(10.0)
    low = M.UtilitySpec.crra(0.05, 10.0, True)
    rel = lambda x, y: abs(float(np.squeeze(x)) - float(np.squeeze(y))) / max(abs(float(np.squeeze(y))), 1e-300)
    errs = []
    for t in (0.0, 2.5, 7.0, 9.9):
        errs += [rel(M.cara_allocation_nd(t, [0.02], m1, cara, p1), M.cara_allocation_1d(t, 0.02, mk, cara, pk)),
                 rel(M.crra_allocation_nd(t, [0.02], m1, crra, p1), M.crra_allocation_1d(t, 0.02, mk, crra, pk)),
                 rel(M.crra_allocation_nd(t, [0.02], m1, log, p1), M.crra_allocation_1d(t, 0.02, mk, log, pk))]
        for fn_nd, fn_1d, u in ((M.cara_coeffs_nd, M.cara_coeffs_1d, cara),
                                (M.crra_coeffs_nd, M.crra_coeffs_1d, crra),
                                (M.log_coeffs_nd, M.log_coeffs_1d, log)):
            if t < 9.9:
                c_nd, c_1d = fn_nd(t, m1, u, p1), fn_1d(t, mk, u, pk)
                errs += [rel(c_nd.a, c_1d.a), rel(c_nd.b, c_1d.b)]
        for u in (cara, crra, log):
            errs.append(rel(M.value(t, 1.5, [0.02], m1, u, p1), M.value(t, 1.5, 0.02, mk, u, pk)))
    errs.append(rel(M.crra_blowup_nd(m1, low, PriorBeliefND([0.0], [[0.36]])).t_tilde,
                    M.crra_blowup_1d(mk, low, PriorBelief1D(0.0, 0.36)).t_tilde))
    worst = max(errs)
    verdict(4, worst < 1e-12, f"max relative difference over {len(errs)} comparisons = {worst:.1e}", t0)


@pytest.fixture(scope="module")
def desk_estimates():
    started = time.perf_counter()
    out = {}
    for preset in ("cara_desk", "crra_desk", "cara_two_assets"):
        cfg = cli.load_config(preset, paths=MC_PATHS)
        rules = {"optimal": S.optimal_rule(cfg.sim, cfg.market, cfg.utility, cfg.prior),
                 "naive": S.naive_rule(cfg.sim, cfg.market, cfg.utility)}
        evals = {k: (lambda p, r=r: S.run_frictionless(p, r, cfg.market, cfg.V0)) for k, r in rules.items()}
        est = S.estimate_utilities(cfg.sim, cfg.model, cfg.prior, evals, cfg.utility)
        closed = M.value(0.0, cfg.V0, cfg.prior.beta0 if cfg.market.dim > 1 else float(cfg.prior.beta0),
                         cfg.market, cfg.utility, cfg.prior)
        out[preset] = (est, float(closed))
    out["elapsed"] = time.perf_counter() - started
    return out


def test_criterion_05_value_function_monte_carlo(desk_estimates):
    parts, ok = [], True
    for preset in ("cara_desk", "crra_desk", "cara_two_assets"):
        est, closed = desk_estimates[preset]
        z = (est["optimal"].mean - closed) / est["optimal"].std_error
        ok &= abs(z) <= 3
        parts.append(f"{preset} MC {est['optimal'].mean:.6f} vs {closed:.6f} ({z:+.2f} SE)")
    verdict(5, ok, f"{MC_PATHS} paths: " + "; ".join(parts)
            + f" ({desk_estimates['elapsed']:.1f} s)")


def test_criterion_06_naive_suboptimal(desk_estimates):
    t0 = time.perf_counter()
    parts, ok = [], True
    for preset in ("cara_desk", "crra_desk"):
        est = desk_estimates[preset][0]
        gap = (est["optimal"].mean - est["naive"].mean) / est["optimal"].std_error
        ok &= gap >= -2
        parts.append(f"{preset} optimal - naive = {gap:+.4f} SE")
    cfg = cli.load_config("crra_desk", paths=5000)
    log_u = M.UtilitySpec.log(cfg.utility.T)
    paths = S.simulate_paths(cfg.sim, cfg.model, cfg.prior)
    opt = S.run_frictionless(paths, S.optimal_rule(cfg.sim, cfg.market, log_u, cfg.prior), cfg.market, cfg.V0)
    naive = S.run_frictionless(paths, S.naive_rule(cfg.sim, cfg.market, log_u), cfg.market, cfg.V0)
    same = bool(np.array_equal(opt, naive))
    ok &= same
    parts.append(f"log utility path-wise equal on {paths.n_paths} paths: {same}")
    verdict(6, ok, "; ".join(parts), t0)


def test_criterion_07_liquidation_complete(figure_dir):
    t0 = time.perf_counter()
    paths = figure_positions(figure_dir, 2)
    qT = {k: v[1][-1] for k, v in paths.items()}
    ok = all(abs(q) < 1000 for q in qT.values())
    verdict(7, ok, "q_T by path: " + ", ".join(f"{k} {v:.0f}" for k, v in qT.items())
            + " (bound |q_T| < 1000)", t0)


def test_criterion_08_transition_complete_and_u_shape(figure_dir):
    t0 = time.perf_counter()
    _, q = figure_positions(figure_dir, 3)["flat"]
    gap = abs(q[-1] - 2e5)
    dips = q.min() < 1e5
    verdict(8, gap < 2000 and dips,
            f"flat path q_T = {q[-1]:.0f} (|q_T - 200000| = {gap:.0f}, bound 2000), "
            f"min q = {q.min():.0f} < q0: {dips}", t0)


def test_criterion_09_blowup_gating():
    t0 = time.perf_counter()
    cfg = cli.load_config("crra_blowup")
    dom = M.crra_blowup_1d(cfg.market, cfg.utility, cfg.prior)
    refused = 0
    for t in (0.0, 5.0, 9.0, 9.45):
        try:
            M.crra_allocation_1d(t, 0.01, cfg.market, cfg.utility, cfg.prior)
        except BlowupError:
            refused += 1
    M.crra_allocation_1d(9.5, 0.01, cfg.market, cfg.utility, cfg.prior)
    two = M.UtilitySpec.crra(2.0, 10.0)
    t_two = M.crra_blowup_1d(cfg.market, two, cfg.prior).t_tilde
    for t in np.linspace(0, 10, 11):
        M.crra_allocation_1d(t, 0.01, cfg.market, two, cfg.prior)
    ok = abs(dom.t_tilde - 9.45) < 1e-12 and refused == 4 and t_two < 0
    verdict(9, ok, f"t_tilde = {dom.t_tilde:.12g}, refused {refused}/4 evaluations at t <= 9.45, "
            f"gamma=2 t_tilde = {t_two:.4g}", t0)


def test_criterion_10_filter_statistics():
    t0 = time.perf_counter()
    prior = PriorBelief1D.from_std(0.01, 0.03)
    checks = []
    for dynamics, S0 in ((S.LOGNORMAL, 1.0), (S.BACHELIER, 50.0)):
        cfg = S.SimConfig(MC_PATHS, 40, 101, 10.0)
        paths = S.simulate_paths(cfg, S.PriceModel(M.FrictionlessMarket(0.0, 0.6), S0, dynamics), prior)
        beta, mu = paths.beta[:, :, 0], paths.mu[:, 0]
        for k in (10, 20, 40):
            t = cfg.times[k]
            nu_t = float(posterior_variance(t, 0.6, prior.nu0_sq))
            # posterior variance is the conditional spread of the true drift
            err = (mu - beta[:, k]) ** 2
            checks.append(((err.mean() - nu_t) / (err.std(ddof=1) / np.sqrt(err.size)), "var"))
            # total variance: Var(beta_t) = nu0^2 - nu_t^2
            dev = (beta[:, k] - prior.beta0) ** 2
            checks.append(((dev.mean() - (prior.nu0_sq - nu_t)) / (dev.std(ddof=1) / np.sqrt(dev.size)), "tot"))
            # martingale: E[beta_t] = beta0 and E[(beta_T - beta_t) (beta_t - beta0)] = 0
            m = beta[:, k] - prior.beta0
            checks.append((m.mean() / (m.std(ddof=1) / np.sqrt(m.size)), "mean"))
            if k < 40:
                inc = (beta[:, 40] - beta[:, k]) * m
                checks.append((inc.mean() / (inc.std(ddof=1) / np.sqrt(inc.size)), "mart"))
    worst = max(abs(z) for z, _ in checks)
    verdict(10, worst <= 3, f"{len(checks)} checks at {MC_PATHS} paths, worst |z| = {worst:.2f} SE", t0)


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    runs = {}
    for name, env in (("a", {}), ("b", {}), ("one_thread", {"NUMBA_NUM_THREADS": "1"})):
        out = tmp_path / name
        for k in (1, 2, 3):
            subprocess.run([sys.executable, "-m", "driftlearn", "figures", str(k), "--out", str(out)],
                           check=True, capture_output=True, env=dict(os.environ, **env))
        runs[name] = {f.name: f.read_bytes() for f in sorted(out.iterdir())}
    same = runs["a"] == runs["b"] == runs["one_thread"]
    verdict(11, same and len(runs["a"]) == 6,
            f"{len(runs['a'])} files byte-identical across two runs and a single-thread run: {same}", t0)
