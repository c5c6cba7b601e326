"""Optimal execution with drift learning and quadratic trading costs.

A CARA trader holds cash ``x`` and ``q`` shares of an asset with Bachelier
dynamics and an unknown Gaussian drift.  Trading at rate ``v`` costs
``V_t L(v / V_t)`` per unit time with ``L(rho) = eta rho^2``, and a quadratic
terminal penalty ``l(q)`` may force liquidation or a target inventory.  The
value function reduces to

    u(t, x, q, S, beta) = -exp(-gamma (x + q S - theta(t, q, beta))),
    theta = a + b beta^2 / 2 + c beta q + d q^2 / 2 (+ e beta + f q),

with coefficients obeying a backward Riccati-type system integrated here on a
uniform grid.  The optimal inventory then follows
``q' = -(V_t / 2 eta) (c beta + d q + f)``.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from ._accel import jit, prange
from .errors import DomainError, RiccatiEscapeError
from .filters import PriorBelief1D, learning_gain
from .merton import CARA, FrictionlessMarket, UtilitySpec

log = logging.getLogger(__name__)

ESCAPE_BOUND = 1e12
DEFAULT_STEPS = 10_000
CHOICE_COLUMNS = ("a", "b", "c", "d")
TRANSITION_COLUMNS = ("a", "b", "c", "d", "e", "f")


# ---------------------------------------------------------------------------
# execution costs
# ---------------------------------------------------------------------------

def legendre_H(p, eta):
    """Legendre transform of ``L(rho) = eta rho^2``: ``H(p) = p^2 / (4 eta)``."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    p = np.asarray(p, dtype=np.float64)
    return p * p / (4.0 * eta)


def legendre_H_prime(p, eta):
    """Optimal participation rate ``H'(p) = p / (2 eta)``."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    return np.asarray(p, dtype=np.float64) / (2.0 * eta)


@dataclass(frozen=True)
class CostFunction:
    """Execution cost ``L(rho) = eta |rho|^(1+phi) + psi |rho|``.

    ``phi`` is the cost exponent (1 gives the quadratic case the ODE reduction
    relies on) and ``psi`` a proportional cost such as half the bid-ask spread.
    """

    eta: float
    phi: float = 1.0
    psi: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if not self.phi > 0:
            raise DomainError("phi must be positive for L to be superlinear")
        if self.psi < 0:
            raise DomainError("psi must be non-negative")

    @property
    def is_quadratic(self):
        return self.phi == 1.0 and self.psi == 0.0

    def L(self, rho):
        r = np.abs(np.asarray(rho, dtype=np.float64))
        return self.eta * r ** (1.0 + self.phi) + self.psi * r

    def H(self, p):
        """Legendre transform ``sup_rho (rho p - L(rho))``.

        Analytic in the quadratic case, otherwise a bounded 1d maximization on
        the side of ``rho`` that carries the sign of ``p``.
        """
        if self.is_quadratic:
            return float(legendre_H(p, self.eta))
        return self._H_numeric(float(p))

    def _H_numeric(self, p):
        excess = abs(p) - self.psi
        if excess <= 0:
            return 0.0
        # stationary point of rho * excess - eta rho^(1+phi) bounds the search
        hi = 2.0 * (excess / (self.eta * (1.0 + self.phi))) ** (1.0 / self.phi) + 1e-12
        res = minimize_scalar(lambda r: -(r * excess - self.eta * r ** (1.0 + self.phi)),
                              bounds=(0.0, hi), method="bounded",
                              options={"xatol": 1e-12 * hi})
        return float(max(-res.fun, 0.0))


# ---------------------------------------------------------------------------
# specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VolumeCurve:
    """Piecewise-constant market volume: ``values[i]`` on ``[breaks[i], breaks[i+1])``."""

    breaks: Sequence[float] = (0.0,)
    values: Sequence[float] = (4e6,)

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if b.ndim != 1 or b.shape != v.shape or b.size == 0:
            raise DomainError("volume breaks and values must be 1d and of equal length")
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise DomainError("volume breaks must start at 0 and increase strictly")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("volumes must be finite and non-negative")
        object.__setattr__(self, "breaks", tuple(b.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    @classmethod
    def constant(cls, volume):
        return cls((0.0,), (float(volume),))

    def __call__(self, t):
        idx = np.searchsorted(np.asarray(self.breaks), np.asarray(t, dtype=np.float64), side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, None)]

    def per_step(self, T, steps):
        """Volume on each step of a uniform grid, sampled at step midpoints."""
        h = T / steps
        return np.asarray(self(h * (np.arange(steps) + 0.5)), dtype=np.float64)


@dataclass(frozen=True)
class Liquidation:
    """Terminal penalty ``K q^2 / 2``."""

    K: float

    def __post_init__(self):
        if not (np.isfinite(self.K) and self.K >= 0):
            raise DomainError("K must be finite and non-negative")


@dataclass(frozen=True)
class Transition:
    """Terminal penalty ``K (q - q_target)^2 / 2``."""

    K: float
    q_target: float

    def __post_init__(self):
        if not (np.isfinite(self.K) and self.K >= 0 and np.isfinite(self.q_target)):
            raise DomainError("K must be non-negative and q_target finite")


Penalty = Union[None, Liquidation, Transition]


def penalty_value(penalty: Penalty, q):
    q = np.asarray(q, dtype=np.float64)
    if penalty is None:
        return np.zeros_like(q)
    if isinstance(penalty, Transition):
        return 0.5 * penalty.K * (q - penalty.q_target) ** 2
    return 0.5 * penalty.K * q * q


@dataclass(frozen=True)
class ExecutionSpec:
    eta: float
    volume: VolumeCurve = field(default_factory=VolumeCurve)
    penalty: Penalty = None

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise DomainError(f"eta must be positive, got {self.eta}")

    def terminal_row(self):
        p = self.penalty
        if isinstance(p, Transition):
            return np.array([0.5 * p.K * p.q_target ** 2, 0.0, 0.0, p.K, 0.0, -p.K * p.q_target])
        K = 0.0 if p is None else p.K
        return np.array([0.0, 0.0, 0.0, K])


# ---------------------------------------------------------------------------
# coefficient table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AcCoeffTable:
    """Coefficients of ``theta`` on a uniform grid ``0 = t_0 < ... < t_n = T``.

    ``coeffs`` has one row per grid time and the columns named in ``columns``
    (a..d, or a..f for the transition problem).
    """

    grid: np.ndarray
    coeffs: np.ndarray
    columns: tuple = CHOICE_COLUMNS

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        c = np.asarray(self.coeffs, dtype=np.float64)
        if self.columns not in (CHOICE_COLUMNS, TRANSITION_COLUMNS):
            raise DomainError(f"unexpected coefficient columns {self.columns}")
        if g.ndim != 1 or g.size < 2 or c.shape != (g.size, len(self.columns)):
            raise DomainError("grid and coefficient shapes disagree")
        if g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise DomainError("coefficient grid must start at 0 and increase")
        g.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "coeffs", c)

    @property
    def T(self):
        return float(self.grid[-1])

    @property
    def steps(self):
        return self.grid.size - 1

    def column(self, name):
        if name in self.columns:
            return self.coeffs[:, self.columns.index(name)]
        if name in ("e", "f"):
            return np.zeros(self.grid.size)
        raise KeyError(name)

    def at(self, t):
        """Coefficient row(s) at ``t``, linearly interpolated; always six columns a..f."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-12)):
            raise DomainError(f"t outside the table range [0, {self.T}]")
        return np.stack([np.interp(t, self.grid, self.column(n)) for n in TRANSITION_COLUMNS], axis=-1)

    def to_csv(self, path=None):
        """CSV with header ``t,a,b,c,d[,e,f]`` and 17 significant digits."""
        buf = io.StringIO()
        buf.write(",".join(("t",) + self.columns) + "\n")
        rows = np.column_stack([self.grid, self.coeffs])
        for row in rows:
            buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            rows = np.array([[float(x) for x in r] for r in reader if r])
        if header[0] != "t":
            raise DomainError("coefficient CSV must start with a 't' column")
        return cls(rows[:, 0], rows[:, 1:], tuple(header[1:]))


# ---------------------------------------------------------------------------
# backward integration
# ---------------------------------------------------------------------------

@jit
def _ac_rhs(t, y, gam, s2, nu0sq, kappa, out):
    # kappa = V_t / (2 eta); y = (a, b, c, d, e, f)
    g = nu0sq / (s2 + nu0sq * t)
    gs2 = gam * s2
    a, b, c, d, e, f = y[0], y[1], y[2], y[3], y[4], y[5]
    out[0] = -0.5 * s2 * g * g * b - 0.5 * gs2 * g * g * e * e + 0.5 * kappa * f * f
    out[1] = -gs2 * g * g * b * b + kappa * c * c
    out[2] = 1.0 - gs2 * g * g * b * c + gs2 * g * b + kappa * c * d
    out[3] = -gs2 - gs2 * g * g * c * c + 2.0 * gs2 * g * c + kappa * d * d
    out[4] = -gs2 * g * g * b * e + kappa * c * f
    out[5] = -gs2 * g * g * c * e + gs2 * g * e + kappa * d * f


@jit
def _integrate_backward(y_T, T, steps, kappa_steps, gam, s2, nu0sq, use_euler, bound):
    # returns (table, escape_step); escape_step = -1 on success
    h = T / steps
    n = y_T.shape[0]
    table = np.zeros((steps + 1, 6))
    for j in range(n):
        table[steps, j] = y_T[j]
    y = table[steps].copy()
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    tmp = np.empty(6)
    for k in range(steps - 1, -1, -1):
        t1 = (k + 1) * h
        kap = kappa_steps[k]
        _ac_rhs(t1, y, gam, s2, nu0sq, kap, k1)
        if use_euler:
            for j in range(6):
                y[j] = y[j] - h * k1[j]
        else:
            for j in range(6):
                tmp[j] = y[j] - 0.5 * h * k1[j]
            _ac_rhs(t1 - 0.5 * h, tmp, gam, s2, nu0sq, kap, k2)
            for j in range(6):
                tmp[j] = y[j] - 0.5 * h * k2[j]
            _ac_rhs(t1 - 0.5 * h, tmp, gam, s2, nu0sq, kap, k3)
            for j in range(6):
                tmp[j] = y[j] - h * k3[j]
            _ac_rhs(k * h, tmp, gam, s2, nu0sq, kap, k4)
            for j in range(6):
                y[j] = y[j] - h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(6):
            if not abs(y[j]) <= bound:
                return table, k
            table[k, j] = y[j]
    return table, -1


def _check_inputs(spec, market, utility, prior, steps):
    if not isinstance(spec, ExecutionSpec):
        raise DomainError("expected an ExecutionSpec")
    if utility.kind != CARA:
        raise DomainError("execution problems use CARA utility")
    if not isinstance(prior, PriorBelief1D):
        raise DomainError("execution problems use a scalar drift prior")
    if int(steps) != steps or steps < 100:
        raise DomainError(f"steps must be an integer >= 100, got {steps}")
    return market.scalar_sigma()


def _solve(spec, market, utility, prior, steps, euler, columns):
    sigma = _check_inputs(spec, market, utility, prior, steps)
    T, steps = utility.T, int(steps)
    y_T = np.zeros(6)
    term = spec.terminal_row()
    y_T[:term.size] = term
    kappa = spec.volume.per_step(T, steps) / (2.0 * spec.eta)
    table, esc = _integrate_backward(y_T, float(T), steps, kappa, utility.gamma, sigma * sigma,
                                     prior.nu0_sq, bool(euler), ESCAPE_BOUND)
    if esc >= 0:
        t_esc = esc * T / steps
        raise RiccatiEscapeError(
            f"coefficient magnitude exceeded {ESCAPE_BOUND:.0e} at t={t_esc:.6g} "
            "integrating backward from T", t_esc)
    grid = np.linspace(0.0, T, steps + 1)
    table[-1, :term.size] = term  # exact terminal row
    return AcCoeffTable(grid, table[:, :len(columns)].copy(), columns)


def solve_choice_liq_odes(spec: ExecutionSpec, market: FrictionlessMarket, utility: UtilitySpec,
                          prior: PriorBelief1D, steps: int = DEFAULT_STEPS,
                          euler: bool = False) -> AcCoeffTable:
    """Backward RK4 (or Euler) for (a, b, c, d) with terminal row (0, 0, 0, K).

    ``market.sigma`` is the absolute (Bachelier) volatility.  Raises
    :class:`RiccatiEscapeError` if a coefficient exceeds ``ESCAPE_BOUND``.
    """
    if isinstance(spec.penalty, Transition):
        raise DomainError("use solve_transition_odes for a transition penalty")
    return _solve(spec, market, utility, prior, steps, euler, CHOICE_COLUMNS)


def solve_transition_odes(spec: ExecutionSpec, market: FrictionlessMarket, utility: UtilitySpec,
                          prior: PriorBelief1D, steps: int = DEFAULT_STEPS,
                          euler: bool = False) -> AcCoeffTable:
    """Backward RK4 (or Euler) for (a, ..., f) with terminal row
    (K q_target^2 / 2, 0, 0, K, 0, -K q_target)."""
    if not isinstance(spec.penalty, Transition):
        raise DomainError("solve_transition_odes needs a Transition penalty")
    return _solve(spec, market, utility, prior, steps, euler, TRANSITION_COLUMNS)


def solve_execution(spec, market, utility, prior, steps=DEFAULT_STEPS, euler=False):
    """Dispatch on the penalty type."""
    if isinstance(spec.penalty, Transition):
        return solve_transition_odes(spec, market, utility, prior, steps, euler)
    return solve_choice_liq_odes(spec, market, utility, prior, steps, euler)


def theta_eval(table: AcCoeffTable, t, q, beta):
    a, b, c, d, e, f = np.moveaxis(table.at(t), -1, 0)
    return a + 0.5 * b * beta * beta + c * beta * q + 0.5 * d * q * q + e * beta + f * q


def value_eval(table: AcCoeffTable, gamma, t, x, q, S, beta):
    """``u(t, x, q, S, beta) = -exp(-gamma (x + q S - theta(t, q, beta)))``."""
    return -np.exp(-gamma * (x + q * S - theta_eval(table, t, q, beta)))


# ---------------------------------------------------------------------------
# forward inventory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InventoryPath:
    """Inventory on a uniform grid; ``v[k]`` is the rate used on step k."""

    times: np.ndarray
    q: np.ndarray
    v: np.ndarray
    beta: np.ndarray
    X: Optional[np.ndarray] = None


@dataclass(frozen=True)
class _ForwardCoeffs:
    # c, d, f at step starts, midpoints and ends, plus per-step kappa
    nodes: np.ndarray
    mids: np.ndarray
    kappa: np.ndarray


def _grid_steps(table, times):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size < 2:
        raise DomainError("path grid needs at least two times")
    steps = times.size - 1
    expected = np.linspace(0.0, table.T, steps + 1)
    if not np.allclose(times, expected, rtol=0.0, atol=1e-9 * max(table.T, 1.0)):
        raise DomainError(
            f"path grid must be uniform on the table range [0, {table.T}]")
    return steps


def forward_coeffs(table: AcCoeffTable, spec: ExecutionSpec, steps: int) -> _ForwardCoeffs:
    T = table.T
    h = T / steps
    t_nodes = np.linspace(0.0, T, steps + 1)
    t_mids = h * (np.arange(steps) + 0.5)
    nodes = table.at(t_nodes)[:, [2, 3, 5]]
    mids = table.at(t_mids)[:, [2, 3, 5]]
    kappa = spec.volume.per_step(T, steps) / (2.0 * spec.eta)
    return _ForwardCoeffs(np.ascontiguousarray(nodes), np.ascontiguousarray(mids), kappa)


@jit
def _inventory_step(q, beta, kap, h, c0, d0, f0, cm, dm, fm, c1, d1, f1, use_euler):
    k1 = -kap * (c0 * beta + d0 * q + f0)
    if use_euler:
        return q + h * k1
    k2 = -kap * (cm * beta + dm * (q + 0.5 * h * k1) + fm)
    k3 = -kap * (cm * beta + dm * (q + 0.5 * h * k2) + fm)
    k4 = -kap * (c1 * beta + d1 * (q + h * k3) + f1)
    return q + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@jit(parallel=True)
def _inventory_kernel(beta, q0, nodes, mids, kappa, h, use_euler):
    n_paths, n1 = beta.shape
    q = np.empty((n_paths, n1))
    for p in prange(n_paths):
        q[p, 0] = q0
        for k in range(n1 - 1):
            q[p, k + 1] = _inventory_step(
                q[p, k], beta[p, k], kappa[k], h,
                nodes[k, 0], nodes[k, 1], nodes[k, 2],
                mids[k, 0], mids[k, 1], mids[k, 2],
                nodes[k + 1, 0], nodes[k + 1, 1], nodes[k + 1, 2], use_euler)
    return q


def _inventory_numpy(beta, q0, nodes, mids, kappa, h, use_euler):
    n_paths, n1 = beta.shape
    q = np.empty((n_paths, n1))
    q[:, 0] = q0
    for k in range(n1 - 1):
        q[:, k + 1] = _inventory_step(
            q[:, k], beta[:, k], kappa[k], h,
            nodes[k, 0], nodes[k, 1], nodes[k, 2],
            mids[k, 0], mids[k, 1], mids[k, 2],
            nodes[k + 1, 0], nodes[k + 1, 1], nodes[k + 1, 2], use_euler)
    return q


def inventory_paths(table: AcCoeffTable, beta_paths, q0, spec: ExecutionSpec, euler=False):
    """Optimal inventories for a batch of belief paths of shape (paths, steps+1).

    The belief is held at its value at the start of each step so the control
    stays non-anticipating; the coefficients are interpolated linearly.
    """
    from ._accel import NUMBA_ENABLED

    beta = np.ascontiguousarray(np.atleast_2d(np.asarray(beta_paths, dtype=np.float64)))
    steps = beta.shape[1] - 1
    if steps < 1:
        raise DomainError("belief paths need at least two points")
    fc = forward_coeffs(table, spec, steps)
    h = table.T / steps
    kern = _inventory_kernel if NUMBA_ENABLED else _inventory_numpy
    return kern(beta, float(q0), fc.nodes, fc.mids, fc.kappa, h, bool(euler))


def optimal_inventory(table: AcCoeffTable, beta_path, q0, spec: ExecutionSpec,
                      times=None, euler=False) -> InventoryPath:
    """Forward-integrate ``q' = -(V_t / 2 eta) (c beta + d q + f)`` along one belief path.

    ``beta_path`` must be sampled on a uniform grid over the table's [0, T];
    ``times`` (optional) is checked against that grid.
    """
    beta = np.asarray(beta_path, dtype=np.float64)
    if beta.ndim != 1:
        raise DomainError("beta_path must be one-dimensional")
    steps = beta.size - 1
    grid = np.linspace(0.0, table.T, steps + 1)
    if times is not None:
        if np.asarray(times).shape != beta.shape:
            raise DomainError("times and beta_path lengths differ")
        _grid_steps(table, times)
    q = inventory_paths(table, beta[None, :], q0, spec, euler)[0]
    v = np.diff(q) / (table.T / steps)
    return InventoryPath(grid, q, v, beta)
