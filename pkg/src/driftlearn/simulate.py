"""Seeded Monte Carlo engine for the allocation and execution problems.

Paths are generated in chunks from a counter-based generator addressed by
(seed, stream, path index, step), so any chunking or thread schedule yields the
same numbers.  Each path draws its drift once (from the prior, or uses a fixed
value), then simulates prices and recomputes the posterior mean at every step.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from . import linalg
from ._accel import NUMBA_ENABLED, jit, prange
from .errors import DomainError
from .execution import (AcCoeffTable, ExecutionSpec, inventory_paths, penalty_value)
from .filters import PriorBelief1D, PriorBeliefND
from .merton import CARA, FrictionlessMarket, UtilitySpec, naive_gain, optimal_gain
from .rng import STREAM_BROWNIAN, STREAM_DRIFT, normal_at, stream_key, CounterRNG

log = logging.getLogger(__name__)

LOGNORMAL, BACHELIER = "lognormal", "bachelier"
DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class PriceModel:
    """Asset dynamics: ``market`` (rate and volatility), initial prices and kind.

    For Bachelier dynamics ``market.sigma`` is an absolute volatility.
    """

    market: FrictionlessMarket
    S0: object = 1.0
    dynamics: str = LOGNORMAL

    def __post_init__(self):
        S0 = np.broadcast_to(np.asarray(self.S0, dtype=np.float64), (self.market.dim,)).copy()
        if self.dynamics not in (LOGNORMAL, BACHELIER):
            raise DomainError(f"unknown dynamics {self.dynamics!r}")
        if not np.all(np.isfinite(S0)) or (self.dynamics == LOGNORMAL and np.any(S0 <= 0)):
            raise DomainError("initial prices must be finite (and positive for log-normal)")
        S0.flags.writeable = False
        object.__setattr__(self, "S0", S0)

    @property
    def dim(self):
        return self.market.dim


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``drift_mode`` is ``"prior"`` (drift drawn once per path from the prior) or
    ``"fixed"`` (every path uses ``mu``).
    """

    n_paths: int
    n_steps: int
    seed: int
    T: float
    drift_mode: str = "prior"
    mu: Optional[object] = None
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        for name in ("n_paths", "n_steps", "chunk_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v}")
        if not (0 <= self.seed < 2**64):
            raise DomainError("seed must fit in 64 unsigned bits")
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError("T must be positive")
        if self.drift_mode not in ("prior", "fixed"):
            raise DomainError(f"drift_mode must be 'prior' or 'fixed', got {self.drift_mode!r}")
        if self.drift_mode == "fixed" and self.mu is None:
            raise DomainError("fixed drift mode needs mu")

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.n_steps + 1)


@dataclass(frozen=True)
class PathSet:
    """Simulated paths ``path_ids[i]``: prices and beliefs of shape (paths, steps+1, d)."""

    path_ids: np.ndarray
    times: np.ndarray
    S: np.ndarray
    beta: np.ndarray
    mu: np.ndarray

    @property
    def n_paths(self):
        return self.path_ids.size


@dataclass(frozen=True)
class UtilityEstimate:
    mean: float
    std_error: float
    n_paths: int

    @classmethod
    def from_samples(cls, samples):
        u = np.asarray(samples, dtype=np.float64).ravel()
        if u.size < 2:
            raise DomainError("a standard error needs at least two paths")
        return cls(float(np.mean(u)), float(np.std(u, ddof=1) / np.sqrt(u.size)), int(u.size))

    def report(self, label="utility"):
        return f"{label}: mean={self.mean:.17g} se={self.std_error:.17g} n={self.n_paths}"


def _as_prior_nd(prior, d):
    if isinstance(prior, PriorBelief1D):
        prior = PriorBeliefND(np.array([prior.beta0]), np.array([[prior.nu0_sq]]))
    if prior.dim != d:
        raise DomainError(f"prior dimension {prior.dim} does not match market dimension {d}")
    return prior


def filter_tables(times, Sigma, prior: PriorBeliefND):
    """Per-time matrices so that ``beta_k = offset[k] + slope[k] @ x_k``.

    ``x_k`` is the filter statistic at ``times[k]``; slope = Gamma_t Sigma^-1 and
    offset = Gamma_t Gamma0^-1 beta0.
    """
    Sigma_inv = linalg.invert_spd(Sigma, "Sigma")
    G0_inv = linalg.invert_spd(prior.Gamma0, "Gamma0")
    d = Sigma.shape[0]
    slope = np.empty((times.size, d, d))
    offset = np.empty((times.size, d))
    for k, t in enumerate(times):
        G = linalg.invert_spd(G0_inv + t * Sigma_inv, "posterior precision")
        slope[k] = G @ Sigma_inv
        offset[k] = G @ (G0_inv @ prior.beta0)
    return slope, offset


@jit(parallel=True)
def _paths_kernel(key_drift, key_bm, path_ids, n_steps, dt, S0, mu_fixed, from_prior,
                  beta0, chol_G0, chol_S, half_var, lognormal, slope, offset,
                  S_out, beta_out, mu_out):
    n = path_ids.shape[0]
    d = S0.shape[0]
    sq = np.sqrt(dt)
    for p in prange(n):
        pid = path_ids[p]
        z = np.empty(d)
        mu = np.empty(d)
        S = np.empty(d)
        x = np.zeros(d)
        if from_prior:
            for i in range(d):
                z[i] = normal_at(key_drift, pid, np.uint64(i))
            for i in range(d):
                acc = beta0[i]
                for j in range(i + 1):
                    acc += chol_G0[i, j] * z[j]
                mu[i] = acc
        else:
            for i in range(d):
                mu[i] = mu_fixed[i]
        for i in range(d):
            mu_out[p, i] = mu[i]
            S[i] = S0[i]
            S_out[p, 0, i] = S0[i]
            beta_out[p, 0, i] = offset[0, i]
        for k in range(n_steps):
            for i in range(d):
                z[i] = normal_at(key_bm, pid, np.uint64(k * d + i))
            t1 = (k + 1) * dt
            for i in range(d):
                dw = 0.0
                for j in range(i + 1):
                    dw += chol_S[i, j] * z[j]
                dw *= sq
                if lognormal:
                    S[i] = S[i] * np.exp((mu[i] - half_var[i]) * dt + dw)
                    x[i] = np.log(S[i] / S0[i]) + half_var[i] * t1
                else:
                    S[i] = S[i] + mu[i] * dt + dw
                    x[i] = S[i] - S0[i]
                S_out[p, k + 1, i] = S[i]
            for i in range(d):
                acc = offset[k + 1, i]
                for j in range(d):
                    acc += slope[k + 1, i, j] * x[j]
                beta_out[p, k + 1, i] = acc


def _paths_numpy(rng, path_ids, n_steps, dt, S0, mu_fixed, from_prior, beta0, chol_G0, chol_S,
                 half_var, lognormal, slope, offset):
    n, d = path_ids.size, S0.size
    pid = path_ids[:, None]
    if from_prior:
        z = rng.normal(STREAM_DRIFT, pid, np.arange(d, dtype=np.uint64)[None, :])
        mu = beta0[None, :] + z @ chol_G0.T
    else:
        mu = np.broadcast_to(mu_fixed, (n, d)).copy()
    S_out = np.empty((n, n_steps + 1, d))
    beta_out = np.empty((n, n_steps + 1, d))
    S_out[:, 0] = S0
    beta_out[:, 0] = offset[0]
    S = np.broadcast_to(S0, (n, d)).copy()
    sq = np.sqrt(dt)
    cols = np.arange(d, dtype=np.uint64)[None, :]
    for k in range(n_steps):
        z = rng.normal(STREAM_BROWNIAN, pid, np.uint64(k * d) + cols)
        dw = (z @ chol_S.T) * sq
        t1 = (k + 1) * dt
        if lognormal:
            S = S * np.exp((mu - half_var) * dt + dw)
            x = np.log(S / S0) + half_var * t1
        else:
            S = S + mu * dt + dw
            x = S - S0
        S_out[:, k + 1] = S
        beta_out[:, k + 1] = offset[k + 1] + x @ slope[k + 1].T
    return S_out, beta_out, mu


class PathGenerator:
    """Chunked path simulation for one (config, model, prior) triple."""

    def __init__(self, config: SimConfig, model: PriceModel, prior):
        self.config = config
        self.model = model
        d = model.dim
        self.prior = _as_prior_nd(prior, d)
        Sigma = model.market.Sigma
        self.chol_S = linalg.cholesky(Sigma, "Sigma")
        self.chol_G0 = linalg.cholesky(self.prior.Gamma0, "Gamma0")
        self.half_var = 0.5 * np.diag(Sigma) if model.dynamics == LOGNORMAL else np.zeros(d)
        self.slope, self.offset = filter_tables(config.times, Sigma, self.prior)
        if config.drift_mode == "fixed":
            mu = np.broadcast_to(np.asarray(config.mu, dtype=np.float64), (d,)).copy()
        else:
            mu = np.zeros(d)
        self.mu_fixed = mu
        self.rng = CounterRNG(config.seed)

    def chunks(self):
        c = self.config
        for start in range(0, c.n_paths, c.chunk_size):
            yield self.generate(start, min(start + c.chunk_size, c.n_paths))

    def generate(self, start, stop, use_numba=None) -> PathSet:
        c, m = self.config, self.model
        if not (0 <= start < stop):
            raise DomainError("empty or negative path range")
        ids = np.arange(start, stop, dtype=np.uint64)
        lognormal = m.dynamics == LOGNORMAL
        from_prior = c.drift_mode == "prior"
        if use_numba is None:
            use_numba = NUMBA_ENABLED
        if use_numba:
            n, d = ids.size, m.dim
            S = np.empty((n, c.n_steps + 1, d))
            beta = np.empty((n, c.n_steps + 1, d))
            mu = np.empty((n, d))
            _paths_kernel(stream_key(c.seed, STREAM_DRIFT), stream_key(c.seed, STREAM_BROWNIAN),
                          ids, c.n_steps, c.dt, m.S0, self.mu_fixed, from_prior,
                          self.prior.beta0, self.chol_G0, self.chol_S, self.half_var,
                          lognormal, self.slope, self.offset, S, beta, mu)
        else:
            S, beta, mu = _paths_numpy(self.rng, ids, c.n_steps, c.dt, m.S0, self.mu_fixed,
                                       from_prior, self.prior.beta0, self.chol_G0, self.chol_S,
                                       self.half_var, lognormal, self.slope, self.offset)
        return PathSet(ids, c.times, S, beta, mu)


def simulate_paths(config: SimConfig, model: PriceModel, prior, start=0, stop=None) -> PathSet:
    """Paths ``start .. stop-1`` (all paths by default)."""
    stop = config.n_paths if stop is None else stop
    return PathGenerator(config, model, prior).generate(start, stop)


# ---------------------------------------------------------------------------
# frictionless strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearRule:
    """Position ``gain[k] @ (beta_k - r) + offset[k]`` held over step k.

    ``kind`` is ``"amount"`` (currency in each asset, CARA) or ``"fraction"``
    (share of wealth, CRRA and log).
    """

    gain: np.ndarray
    kind: str
    r: float
    offset: Optional[np.ndarray] = None

    def positions(self, beta):
        # beta: (paths, steps+1, d) -> positions for each step start (paths, steps, d)
        pos = np.einsum("kij,pkj->pki", self.gain[:-1], beta[:, :-1] - self.r)
        if self.offset is not None:
            pos = pos + self.offset[None, :-1]
        return pos


def _gain_grid(fn, times, d):
    g = np.empty((times.size, d, d))
    for k, t in enumerate(times):
        g[k] = np.atleast_2d(fn(min(t, times[-1])))
    return g


def optimal_rule(config: SimConfig, market: FrictionlessMarket, utility: UtilitySpec, prior) -> LinearRule:
    kind = "amount" if utility.kind == CARA else "fraction"
    gain = _gain_grid(lambda t: optimal_gain(t, market, utility, prior), config.times, market.dim)
    return LinearRule(gain, kind, market.r)


def naive_rule(config: SimConfig, market: FrictionlessMarket, utility: UtilitySpec) -> LinearRule:
    kind = "amount" if utility.kind == CARA else "fraction"
    gain = _gain_grid(lambda t: naive_gain(t, market, utility), config.times, market.dim)
    return LinearRule(gain, kind, market.r)


@dataclass(frozen=True)
class WealthPaths:
    wealth: np.ndarray     # (paths, steps+1)
    position: np.ndarray   # (paths, steps+1, d); last row repeats the final position
    cash: np.ndarray       # (paths, steps+1)

    @property
    def terminal(self):
        return self.wealth[:, -1]


def run_frictionless(paths: PathSet, rule: LinearRule, market: FrictionlessMarket, V0: float,
                     record: bool = False):
    """Terminal wealth (and optionally full trajectories) of a linear rule.

    Amount rules hold ``M_k`` in the assets over each step with the rest at
    the risk-free rate.  Fraction rules use the exact log-wealth update for a
    constant fraction over the step, so wealth stays positive.
    """
    S = paths.S
    if np.any(S <= 0):
        raise DomainError("frictionless strategies need positive (log-normal) prices")
    n, n1, d = S.shape
    dt = paths.times[1] - paths.times[0]
    r = market.r
    pos = rule.positions(paths.beta)
    growth = np.exp(r * dt)
    wealth = np.empty((n, n1)) if record else None
    if rule.kind == "amount":
        V = np.full(n, float(V0))
        if record:
            wealth[:, 0] = V
        for k in range(n1 - 1):
            M = pos[:, k]
            V = (V - M.sum(axis=1)) * growth + (M * (S[:, k + 1] / S[:, k])).sum(axis=1)
            if record:
                wealth[:, k + 1] = V
        terminal = V
    else:
        if V0 <= 0:
            raise DomainError("fraction rules need positive initial wealth")
        Sigma = market.Sigma
        half_var = 0.5 * np.diag(Sigma)
        logV = np.full(n, np.log(V0))
        if record:
            wealth[:, 0] = V0
        for k in range(n1 - 1):
            th = pos[:, k]
            dX = np.log(S[:, k + 1] / S[:, k]) + half_var * dt
            quad = np.einsum("pi,ij,pj->p", th, Sigma, th)
            logV = logV + (th * dX).sum(axis=1) + r * (1.0 - th.sum(axis=1)) * dt - 0.5 * quad * dt
            if record:
                wealth[:, k + 1] = np.exp(logV)
        terminal = np.exp(logV)
        assert np.all(terminal > 0)
    if not record:
        return terminal
    pos_full = np.concatenate([pos, pos[:, -1:]], axis=1)
    if rule.kind == "amount":
        cash = wealth - pos_full.sum(axis=2)
        position = pos_full
    else:
        cash = wealth * (1.0 - pos_full.sum(axis=2))
        position = pos_full
    return WealthPaths(wealth, position, cash)


# ---------------------------------------------------------------------------
# execution strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExecutionResult:
    q: np.ndarray          # (paths, steps+1)
    v: np.ndarray          # (paths, steps)
    X: np.ndarray          # (paths, steps+1)
    objective: np.ndarray  # x_T + q_T S_T - penalty(q_T)


def twap_inventory(q0, q_end, n_paths, times):
    """Constant-rate schedule from ``q0`` to ``q_end``."""
    frac = (times - times[0]) / (times[-1] - times[0])
    return np.broadcast_to(q0 + (q_end - q0) * frac, (n_paths, times.size)).copy()


def run_execution(paths: PathSet, table: AcCoeffTable, spec: ExecutionSpec, q0: float,
                  X0: float = 0.0, inventory=None, euler: bool = False) -> ExecutionResult:
    """Cash and objective along 1d price paths for the optimal (or a given) schedule.

    ``inventory`` (paths, steps+1) overrides the optimal schedule, e.g. with
    :func:`twap_inventory`.  Cash integrals use the trapezoidal price on each
    step and the step's volume for the execution cost.
    """
    if paths.S.shape[2] != 1:
        raise DomainError("execution runs on a single asset")
    S = paths.S[:, :, 0]
    n, n1 = S.shape
    steps = n1 - 1
    if abs(paths.times[-1] - table.T) > 1e-9 * max(table.T, 1.0):
        raise DomainError("path horizon differs from the coefficient table horizon")
    dt = table.T / steps
    if inventory is None:
        q = inventory_paths(table, paths.beta[:, :, 0], q0, spec, euler)
    else:
        q = np.array(inventory, dtype=np.float64, copy=True)
        if q.shape != S.shape:
            raise DomainError("inventory shape must match the price paths")
    vol = spec.volume.per_step(table.T, steps)
    v = np.diff(q, axis=1) / dt
    dead = (vol == 0.0)
    if np.any(dead):
        moving = dead[None, :] & (v != 0.0)
        if np.any(moving):
            log.info("forcing zero trading rate on %d zero-volume steps", int(moving.sum()))
            v[:, dead] = 0.0
            q = np.concatenate([q[:, :1], q[:, :1] + np.cumsum(v * dt, axis=1)], axis=1)
    safe_vol = np.where(dead, 1.0, vol)
    cost = np.where(dead, 0.0, spec.eta * v * v / safe_vol[None, :]) * dt
    trade = v * dt * 0.5 * (S[:, :-1] + S[:, 1:])
    X = np.empty_like(S)
    X[:, 0] = X0
    X[:, 1:] = X0 - np.cumsum(trade + cost, axis=1)
    objective = X[:, -1] + q[:, -1] * S[:, -1] - penalty_value(spec.penalty, q[:, -1])
    return ExecutionResult(q, v, X, objective)


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------

def estimate_utilities(config: SimConfig, model: PriceModel, prior,
                       evaluators: Dict[str, Callable[[PathSet], np.ndarray]],
                       utility: UtilitySpec) -> Dict[str, UtilityEstimate]:
    """Mean terminal utility of several strategies on common simulated paths.

    Each evaluator maps a :class:`PathSet` chunk to terminal wealth (or the
    execution objective).  Samples are gathered in path order before reduction
    so the result does not depend on the chunk size.
    """
    if config.n_paths < 2:
        raise DomainError("estimating a standard error needs at least two paths")
    gen = PathGenerator(config, model, prior)
    samples = {name: np.empty(config.n_paths) for name in evaluators}
    for chunk in gen.chunks():
        lo, hi = int(chunk.path_ids[0]), int(chunk.path_ids[-1]) + 1
        for name, fn in evaluators.items():
            samples[name][lo:hi] = utility(fn(chunk))
    return {name: UtilityEstimate.from_samples(u) for name, u in samples.items()}


def estimate_utility(config, model, prior, evaluator, utility) -> UtilityEstimate:
    return estimate_utilities(config, model, prior, {"strategy": evaluator}, utility)["strategy"]
