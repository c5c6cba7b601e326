"""Command-line entry point: ``driftlearn solve | simulate | figures``.

Experiments are described by INI files with sections ``market``,
``objective``, ``prior``, ``execution`` and ``sim``.  Built-in presets live
in the package's ``presets`` directory and can be named instead of a path.

Exit codes: 0 on success, 2 for invalid configuration or arguments, 3 when a
value function blows up or a Riccati integration escapes.
"""

import argparse
import configparser
import logging
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import merton
from .errors import BlowupError, DomainError, RiccatiEscapeError
from .execution import (AcCoeffTable, ExecutionSpec, Liquidation, Transition, VolumeCurve,
                        solve_execution)
from .filters import PriorBelief1D, PriorBeliefND
from .merton import FrictionlessMarket, UtilitySpec
from .simulate import (BACHELIER, LOGNORMAL, PathGenerator, PriceModel, SimConfig,
                       UtilityEstimate, naive_rule, optimal_rule, run_execution, run_frictionless)

log = logging.getLogger("driftlearn")

EXECUTION_PROBLEMS = ("choice", "liquidation", "transition")
FRICTIONLESS_PROBLEMS = ("frictionless-cara", "frictionless-crra", "frictionless-log")
TRAJECTORY_COLUMNS = ("path_id", "t", "S", "beta", "position", "cash", "wealth")
FIGURE_LABELS = ("up", "flat", "down")


class ConfigError(DomainError):
    """Invalid or incomplete experiment configuration."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _vector(text):
    return np.array([float(x) for x in text.replace(" ", "").split(",") if x], dtype=np.float64)


def _matrix(text):
    rows = [r for r in text.replace(" ", "").split(";") if r]
    return np.array([[float(x) for x in r.split(",")] for r in rows], dtype=np.float64)


@dataclass
class ExperimentConfig:
    problem: str
    market: FrictionlessMarket
    model: PriceModel
    prior: object
    utility: UtilitySpec
    execution: Optional[ExecutionSpec] = None
    q0: float = 0.0
    X0: float = 0.0
    V0: float = 1.0
    sim: Optional[SimConfig] = None
    dump_paths: int = 10
    candidates: int = 64
    steps: int = 0
    name: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def is_execution(self):
        return self.problem in EXECUTION_PROBLEMS


def preset_names():
    root = resources.files("driftlearn") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def read_config_text(ref):
    """Text of a config file path, or of a built-in preset named ``ref``."""
    if os.path.isfile(ref):
        with open(ref) as fh:
            return fh.read(), ref
    name = ref[:-4] if ref.endswith(".ini") else ref
    if name in preset_names():
        return (resources.files("driftlearn") / "presets" / f"{name}.ini").read_text(), name
    raise ConfigError(f"no config file or preset named {ref!r}")


def parse_config(text, name="config", seed=None, paths=None, steps=None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive: sigma vs Sigma
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    if not cp.sections():
        raise ConfigError("config is empty")
    for sec in ("market", "objective", "prior"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing [{sec}] section")
    try:
        return _build(cp, name, seed, paths, steps)
    except (ValueError, KeyError, configparser.Error) as exc:
        if isinstance(exc, DomainError):
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"invalid config value: {exc}") from exc


def _build(cp, name, seed, paths, steps):
    mk, ob, pr = cp["market"], cp["objective"], cp["prior"]
    problem = ob.get("problem", "").strip().lower()
    if problem not in EXECUTION_PROBLEMS + FRICTIONLESS_PROBLEMS:
        raise ConfigError(f"objective.problem must be one of "
                          f"{', '.join(EXECUTION_PROBLEMS + FRICTIONLESS_PROBLEMS)}")
    has_exec = cp.has_section("execution")
    if problem in EXECUTION_PROBLEMS and not has_exec:
        raise ConfigError(f"problem {problem!r} needs an [execution] section")
    if problem in FRICTIONLESS_PROBLEMS and has_exec:
        raise ConfigError(f"problem {problem!r} takes no [execution] section")

    r = mk.getfloat("r", 0.0)
    if "Sigma" in mk:
        market = FrictionlessMarket(r, _matrix(mk["Sigma"]))
    elif "vols" in mk:
        market = FrictionlessMarket.from_correlation(r, _vector(mk["vols"]), _matrix(mk["corr"]))
    else:
        market = FrictionlessMarket(r, mk.getfloat("sigma"))
    default_dyn = BACHELIER if problem in EXECUTION_PROBLEMS else LOGNORMAL
    dynamics = mk.get("dynamics", default_dyn).strip().lower()
    S0 = _vector(mk.get("S0", "1"))
    model = PriceModel(market, S0 if S0.size > 1 else float(S0[0]), dynamics)

    beta0 = _vector(pr["beta0"])
    if "Gamma0" in pr:
        prior = PriorBeliefND(beta0, _matrix(pr["Gamma0"]))
    elif beta0.size > 1:
        nu0 = _vector(pr["nu0"])
        prior = PriorBeliefND(beta0, np.diag(np.broadcast_to(nu0, beta0.shape) ** 2))
    else:
        prior = PriorBelief1D.from_std(beta0[0], pr.getfloat("nu0"))
    prior_dim = prior.dim if isinstance(prior, PriorBeliefND) else 1
    if prior_dim != market.dim:
        raise ConfigError("prior and market dimensions differ")

    T = ob.getfloat("T")
    ack = ob.getboolean("acknowledge_blowup", False)
    if problem == "frictionless-log":
        utility = UtilitySpec.log(T)
    elif problem == "frictionless-crra":
        utility = UtilitySpec.crra(ob.getfloat("gamma"), T, ack)
    else:
        utility = UtilitySpec.cara(ob.getfloat("gamma"), T)

    execution, q0, X0 = None, 0.0, 0.0
    if problem in EXECUTION_PROBLEMS:
        if market.dim != 1 or dynamics != BACHELIER:
            raise ConfigError("execution problems use one asset with Bachelier dynamics")
        ex = cp["execution"]
        if "volume_breaks" in ex:
            volume = VolumeCurve(_vector(ex["volume_breaks"]), _vector(ex["volume_values"]))
        else:
            volume = VolumeCurve.constant(ex.getfloat("volume", 4e6))
        K = ob.getfloat("K", 0.0)
        if problem == "choice":
            if K != 0.0 or "q_target" in ob:
                raise ConfigError("the choice problem has no terminal penalty")
            penalty = None
        elif problem == "liquidation":
            penalty = Liquidation(K)
        else:
            penalty = Transition(K, ob.getfloat("q_target"))
        execution = ExecutionSpec(ex.getfloat("eta"), volume, penalty)
        q0 = ex.getfloat("q0", 0.0)
        X0 = ex.getfloat("X0", 0.0)

    sim, dump, cands, V0 = None, 10, 64, 1.0
    if cp.has_section("sim"):
        sc = cp["sim"]
        n_paths = paths if paths is not None else sc.getint("n_paths", 1000)
        n_steps = sc.getint("n_steps", 1000) if steps is None else steps
        mode = sc.get("drift_mode", "prior").strip().lower()
        mu = _vector(sc["mu"]) if "mu" in sc else None
        if mu is not None and mu.size == 1:
            mu = float(mu[0])
        if n_paths < 1:
            raise ConfigError(f"n_paths must be at least 1, got {n_paths}")
        sim = SimConfig(n_paths, n_steps, seed if seed is not None else sc.getint("seed", 0), T,
                        mode, mu, sc.getint("chunk_size", 4096))
        dump = sc.getint("dump_paths", 10)
        cands = sc.getint("candidates", 64)
        V0 = sc.getfloat("V0", 1.0)
    elif paths is not None and paths < 1:
        raise ConfigError(f"n_paths must be at least 1, got {paths}")

    default_steps = 10_000 if problem in EXECUTION_PROBLEMS else 1000
    n_solve = steps if steps is not None else ob.getint("steps", default_steps)
    return ExperimentConfig(problem, market, model, prior, utility, execution, q0, X0, V0, sim,
                            dump, cands, n_solve, name)


def load_config(ref, **overrides) -> ExperimentConfig:
    text, name = read_config_text(ref)
    return parse_config(text, name, **overrides)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _fmt(x):
    return f"{x:.17g}"


def frictionless_table(cfg: ExperimentConfig, steps):
    """Closed-form coefficients and allocation gain on a uniform grid."""
    u, m, p = cfg.utility, cfg.market, cfg.prior
    times = np.linspace(0.0, u.T, steps + 1)
    d = m.dim
    one_d = d == 1 and isinstance(p, PriorBelief1D)
    if u.kind == merton.CARA:
        coeffs = merton.cara_coeffs_1d if one_d else merton.cara_coeffs_nd
    elif u.kind == merton.LOG:
        coeffs = merton.log_coeffs_1d if one_d else merton.log_coeffs_nd
    else:
        coeffs = merton.crra_coeffs_1d if one_d else merton.crra_coeffs_nd
    if one_d:
        header = ["t", "a", "b", "gain"]
    else:
        header = (["t", "a"] + [f"B_{i}_{j}" for i in range(d) for j in range(d)]
                  + [f"gain_{i}_{j}" for i in range(d) for j in range(d)])
    rows = []
    for t in times:
        c = coeffs(t, m, u, p)
        g = merton.optimal_gain(t, m, u, p)
        rows.append([t, c.a] + list(np.ravel(c.b)) + list(np.ravel(g)))
    return header, rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(x if isinstance(x, str) else _fmt(x) for x in row) + "\n")


def trajectory_rows(path_ids, times, S, beta, position, cash, wealth, labels=None):
    """Rows in the trajectory schema; multi-asset columns are flattened per asset."""
    rows = []
    for i, pid in enumerate(path_ids):
        lead = [labels[i]] if labels is not None else []
        for k, t in enumerate(times):
            rows.append(lead + [str(int(pid)), t] + list(np.atleast_1d(S[i, k]))
                        + list(np.atleast_1d(beta[i, k])) + list(np.atleast_1d(position[i, k]))
                        + [cash[i, k], wealth[i, k]])
    return rows


def trajectory_header(d, labelled=False):
    lead = ["label"] if labelled else []
    if d == 1:
        return lead + list(TRAJECTORY_COLUMNS)
    per = lambda n: [f"{n}_{i}" for i in range(d)]
    return lead + ["path_id", "t"] + per("S") + per("beta") + per("position") + ["cash", "wealth"]


def _report_line(label, samples):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size >= 2:
        return UtilityEstimate.from_samples(samples).report(label)
    return f"{label}: mean={_fmt(float(samples.mean()))} se=nan n={samples.size}"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _check_blowup(cfg):
    u = cfg.utility
    if u.kind == merton.CARA or u.kind == merton.LOG:
        return
    one_d = cfg.market.dim == 1 and isinstance(cfg.prior, PriorBelief1D)
    dom = (merton.crra_blowup_1d if one_d else merton.crra_blowup_nd)(cfg.market, u, cfg.prior)
    if dom.blows_up:
        raise BlowupError(f"CRRA value function blows up at t_tilde={dom.t_tilde:.6g} "
                          f"inside [0, {u.T:g}]", dom.t_tilde)
    if u.gamma < 1 and not u.acknowledge_blowup:
        raise ConfigError("CRRA with gamma < 1 needs objective.acknowledge_blowup = true")


def _solve_table(cfg, euler):
    return solve_execution(cfg.execution, cfg.market, cfg.utility, cfg.prior, cfg.steps, euler)


def cmd_solve(cfg: ExperimentConfig, out, euler=False):
    os.makedirs(out, exist_ok=True)
    if cfg.is_execution:
        table = _solve_table(cfg, euler)
        path = os.path.join(out, "coefficients.csv")
        table.to_csv(path)
    else:
        _check_blowup(cfg)
        header, rows = frictionless_table(cfg, cfg.steps)
        path = os.path.join(out, "coefficients.csv")
        write_csv(path, header, rows)
    print(f"wrote {path}")
    return path


def _execution_run(cfg, table, chunk, euler):
    res = run_execution(chunk, table, cfg.execution, cfg.q0, cfg.X0, euler=euler)
    S = chunk.S[:, :, 0]
    return res, S


def cmd_simulate(cfg: ExperimentConfig, out, table_path=None, euler=False):
    if cfg.sim is None:
        raise ConfigError("simulate needs a [sim] section")
    os.makedirs(out, exist_ok=True)
    sim = cfg.sim
    gen = PathGenerator(sim, cfg.model, cfg.prior)
    traj_path = os.path.join(out, "trajectories.csv")
    n_dump = min(cfg.dump_paths, sim.n_paths)
    d = cfg.market.dim
    rows, lines = [], [f"problem: {cfg.problem}", f"seed: {sim.seed}", f"n_steps: {sim.n_steps}"]
    if cfg.is_execution:
        table = AcCoeffTable.from_csv(table_path) if table_path else _solve_table(cfg, euler)
        u_samples, qT = [], []
        for chunk in gen.chunks():
            res, S = _execution_run(cfg, table, chunk, euler)
            u_samples.append(cfg.utility(res.objective))
            qT.append(res.q[:, -1])
            keep = chunk.path_ids < n_dump
            if np.any(keep):
                wealth = res.X + res.q * S
                rows += trajectory_rows(chunk.path_ids[keep], chunk.times, S[keep],
                                        chunk.beta[keep, :, 0], res.q[keep], res.X[keep], wealth[keep])
        qT = np.concatenate(qT)
        lines.append(_report_line("optimal", np.concatenate(u_samples)))
        lines.append(f"terminal_inventory: mean={_fmt(qT.mean())} max_abs={_fmt(np.abs(qT).max())}")
    else:
        _check_blowup(cfg)
        if cfg.model.dynamics != LOGNORMAL:
            raise ConfigError("frictionless problems use log-normal prices")
        opt = optimal_rule(sim, cfg.market, cfg.utility, cfg.prior)
        naive = naive_rule(sim, cfg.market, cfg.utility)
        u_opt, u_naive = [], []
        for chunk in gen.chunks():
            wp = run_frictionless(chunk, opt, cfg.market, cfg.V0, record=True)
            u_opt.append(cfg.utility(wp.terminal))
            u_naive.append(cfg.utility(run_frictionless(chunk, naive, cfg.market, cfg.V0)))
            keep = chunk.path_ids < n_dump
            if np.any(keep):
                pos = wp.position[keep]
                rows += trajectory_rows(chunk.path_ids[keep], chunk.times, chunk.S[keep],
                                        chunk.beta[keep], pos if d > 1 else pos[:, :, 0],
                                        wp.cash[keep], wp.wealth[keep])
        lines.append(_report_line("optimal", np.concatenate(u_opt)))
        lines.append(_report_line("naive", np.concatenate(u_naive)))
        lines.append("closed_form: " + _fmt(merton.value(0.0, cfg.V0, cfg.prior.beta0, cfg.market,
                                                           cfg.utility, cfg.prior)))
    write_csv(traj_path, trajectory_header(d), rows)
    report = os.path.join(out, "report.txt")
    with open(report, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return traj_path, report


def select_trend_paths(S):
    """Indices of the up-trend, flat and down-trend paths by realized S_T - S_0."""
    move = S[:, -1] - S[:, 0]
    return int(np.argmax(move)), int(np.argmin(np.abs(move))), int(np.argmin(move))


def cmd_figures(which, out, seed=None, steps=None, euler=False):
    if which not in (1, 2, 3):
        raise ConfigError(f"unknown figure {which}; choose 1, 2 or 3")
    cfg = load_config(f"figure{which}", seed=seed, steps=steps)
    sim = cfg.sim
    cand = SimConfig(cfg.candidates, sim.n_steps, sim.seed, sim.T, sim.drift_mode, sim.mu,
                     sim.chunk_size)
    table = _solve_table(cfg, euler)
    paths = PathGenerator(cand, cfg.model, cfg.prior).generate(0, cand.n_paths)
    idx = list(select_trend_paths(paths.S[:, :, 0]))
    res, S = _execution_run(cfg, table, paths, euler)
    wealth = res.X + res.q * S
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"figure{which}.csv")
    rows = trajectory_rows(paths.path_ids[idx], paths.times, S[idx], paths.beta[idx, :, 0],
                           res.q[idx], res.X[idx], wealth[idx], labels=list(FIGURE_LABELS))
    write_csv(path, trajectory_header(1, labelled=True), rows)
    summary = [f"figure: {which}", f"seed: {sim.seed}", f"candidates: {cand.n_paths}",
               f"q0: {_fmt(cfg.q0)}"]
    pen = cfg.execution.penalty
    if isinstance(pen, Transition):
        summary.append(f"q_target: {_fmt(pen.q_target)}")
    mu = sim.mu if sim.mu is not None else cfg.prior.beta0
    sigma = cfg.market.scalar_sigma()
    summary.append(f"q_opt: {_fmt(float(np.squeeze(mu)) / (cfg.utility.gamma * sigma ** 2))}")
    for label, i in zip(FIGURE_LABELS, idx):
        q = res.q[i]
        summary.append(f"{label}: path_id={int(paths.path_ids[i])} S_T-S_0={_fmt(S[i, -1] - S[i, 0])} "
                       f"q_T={_fmt(q[-1])} q_min={_fmt(q.min())} q_mean={_fmt(q.mean())}")
    with open(os.path.join(out, f"figure{which}_summary.txt"), "w") as fh:
        fh.write("\n".join(summary) + "\n")
    print("\n".join(summary))
    return path


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="driftlearn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True,
                           help="INI file or preset name (" + ", ".join(preset_names()) + ")")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--steps", type=int, default=None, help="time steps")
        p.add_argument("--euler", action="store_true", help="explicit Euler instead of RK4")

    p = sub.add_parser("solve", help="write coefficient tables")
    common(p)
    p = sub.add_parser("simulate", help="simulate trajectories and estimate utilities")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--table", default=None, help="coefficient CSV from 'solve' to reuse")
    p = sub.add_parser("figures", help="three-path datasets for the execution examples")
    common(p, config=False)
    p.add_argument("which", type=int, help="figure index: 1, 2 or 3")
    p.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "figures":
            cmd_figures(args.which, args.out, args.seed, args.steps, args.euler)
        else:
            overrides = {"steps": args.steps}
            if args.command == "simulate":
                overrides.update(seed=args.seed, paths=args.paths)
                cfg = load_config(args.config, **overrides)
                cmd_simulate(cfg, args.out, args.table, args.euler)
            else:
                cfg = load_config(args.config, **overrides)
                cmd_solve(cfg, args.out, args.euler)
    except (BlowupError, RiccatiEscapeError) as exc:
        t = getattr(exc, "t_tilde", getattr(exc, "t_escape", None))
        print(f"error: {exc}", file=sys.stderr)
        if t is not None:
            print(f"blow-up time: {t:.6g}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
