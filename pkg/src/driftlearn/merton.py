"""Closed-form optimal allocations and value functions without frictions.

The investor learns the drift through a Gaussian prior and maximizes expected
CARA or CRRA utility of terminal wealth.  Value functions take the forms

    CARA: u = -exp(-gamma (e^{r(T-t)} V + a(t) + 1/2 (beta-r)' B(t) (beta-r)))
    CRRA: u = (e^{r(T-t)} V)^{1-gamma} / (1-gamma) * exp(a(t) + 1/2 (beta-r)' B(t) (beta-r))
    log:  u = log(e^{r(T-t)} V) + a(t) + 1/2 (beta-r)' B(t) (beta-r)

and every optimal position is linear in the excess posterior mean beta - r, so
each rule is exposed both as a position and as its linear ``gain``.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import linalg
from ._accel import jit
from .errors import BlowupError, DomainError
from .filters import PriorBelief1D, PriorBeliefND, learning_gain

LOG_GAMMA_TOL = 1e-12
CARA, CRRA, LOG = "cara", "crra", "log"


@dataclass(frozen=True)
class UtilitySpec:
    """Utility family, risk aversion and horizon.

    ``gamma`` is absolute risk aversion for CARA and relative risk aversion for
    CRRA.  CRRA with ``gamma`` within 1e-12 of one is stored as ``log``.
    CRRA with ``gamma < 1`` is refused unless ``acknowledge_blowup`` is set.
    """

    kind: str
    gamma: Optional[float]
    T: float
    acknowledge_blowup: bool = False

    def __post_init__(self):
        kind = self.kind.lower()
        gamma = self.gamma
        if kind not in (CARA, CRRA, LOG):
            raise DomainError(f"unknown utility kind {self.kind!r}")
        if kind == LOG:
            gamma = 1.0
        elif gamma is None or not np.isfinite(gamma) or gamma <= 0:
            raise DomainError(f"gamma must be positive, got {gamma}")
        if kind == CRRA and abs(gamma - 1.0) <= LOG_GAMMA_TOL:
            kind, gamma = LOG, 1.0
        if not (np.isfinite(self.T) and self.T > 0):
            raise DomainError(f"horizon T must be positive, got {self.T}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def cara(cls, gamma, T):
        return cls(CARA, gamma, T)

    @classmethod
    def crra(cls, gamma, T, acknowledge_blowup=False):
        return cls(CRRA, gamma, T, acknowledge_blowup)

    @classmethod
    def log(cls, T):
        return cls(LOG, None, T)

    @property
    def is_power(self):
        return self.kind in (CRRA, LOG)

    def __call__(self, V):
        V = np.asarray(V, dtype=np.float64)
        if self.kind == CARA:
            return -np.exp(-self.gamma * V)
        if self.kind == LOG:
            return np.log(V)
        return V ** (1.0 - self.gamma) / (1.0 - self.gamma)


@dataclass(frozen=True)
class FrictionlessMarket:
    """Risk-free rate and log-normal volatility (scalar sigma or matrix Sigma)."""

    r: float
    sigma: Union[float, np.ndarray]
    Sigma: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.r):
            raise DomainError("r must be finite")
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.ndim == 0:
            if not s > 0:
                raise DomainError(f"sigma must be positive, got {self.sigma}")
            Sigma = np.array([[float(s) ** 2]])
            object.__setattr__(self, "sigma", float(s))
        else:
            Sigma = linalg.as_symmetric(s, "Sigma")
            linalg.cholesky(Sigma, "Sigma")
            object.__setattr__(self, "sigma", Sigma)
        Sigma.flags.writeable = False
        object.__setattr__(self, "Sigma", Sigma)

    @classmethod
    def from_correlation(cls, r, vols, corr):
        vols = np.asarray(vols, dtype=np.float64)
        return cls(r, np.asarray(corr, dtype=np.float64) * np.outer(vols, vols))

    @property
    def dim(self):
        return self.Sigma.shape[0]

    @property
    def vol(self):
        """Per-asset volatilities sqrt(diag(Sigma))."""
        return np.sqrt(np.diag(self.Sigma))

    def scalar_sigma(self):
        if self.dim != 1:
            raise DomainError(f"expected a single risky asset, market has {self.dim}")
        return float(np.sqrt(self.Sigma[0, 0]))


@dataclass(frozen=True)
class CaraCoeffs:
    """Value-function coefficients (a, b) or (a, B) at time ``t``.

    Also returned by the CRRA and log solvers, where they play the same role
    in the exponent (CRRA) or additive correction (log).
    """

    t: float
    a: float
    b: Union[float, np.ndarray]


@dataclass(frozen=True)
class BlowupDomain:
    """Times where a CRRA value function is finite.

    ``t_tilde`` is the blow-up time.  The valid interval is [0, T] when
    ``t_tilde < 0`` and the half-open (t_tilde, T] otherwise.
    """

    t_tilde: float
    T: float

    @property
    def blows_up(self):
        return self.t_tilde >= 0

    @property
    def valid_interval(self):
        return (max(self.t_tilde, 0.0), self.T)

    @property
    def left_open(self):
        return self.blows_up

    def contains(self, t):
        if t > self.T:
            return False
        if self.blows_up:
            return t > self.t_tilde
        return t >= 0

    def check(self, t):
        if not self.contains(t):
            raise BlowupError(
                f"value function blows up at t_tilde={self.t_tilde:.6g}; "
                f"t={t:.6g} is outside the valid interval", self.t_tilde)


def _check_t(t, utility):
    if not (0.0 <= t <= utility.T):
        raise DomainError(f"t={t} outside [0, T={utility.T}]")


def _need(utility, *kinds):
    if utility.kind not in kinds:
        raise DomainError(f"operation needs {' or '.join(kinds)} utility, got {utility.kind}")


def _prior_1d(prior):
    if not isinstance(prior, PriorBelief1D):
        raise DomainError("expected a PriorBelief1D")
    return prior


# ---------------------------------------------------------------------------
# one risky asset
# ---------------------------------------------------------------------------

def cara_multiplier(t, market, utility, prior):
    """chi(t) = g(T)/g(t) = (sigma^2 + nu0^2 t) / (sigma^2 + nu0^2 T)."""
    s2 = market.scalar_sigma() ** 2
    return (s2 + prior.nu0_sq * t) / (s2 + prior.nu0_sq * utility.T)


def cara_coeffs_1d(t, market: FrictionlessMarket, utility: UtilitySpec,
                   prior: PriorBelief1D) -> CaraCoeffs:
    _need(utility, CARA)
    _check_t(t, utility)
    prior = _prior_1d(prior)
    sigma = market.scalar_sigma()
    gam, T = utility.gamma, utility.T
    g_t = learning_gain(t, sigma, prior.nu0_sq)
    g_T = learning_gain(T, sigma, prior.nu0_sq)
    y = g_t * (T - t)  # g(t)/g(T) - 1
    a = (np.log1p(y) - (T - t) * g_T) / (2.0 * gam)
    b = (T - t) * g_T / (gam * sigma * sigma * g_t)
    return CaraCoeffs(float(t), float(a), float(b))


def cara_gain_1d(t, market, utility, prior):
    """Amount per unit of excess drift: e^{-r(T-t)} chi(t) / (gamma sigma^2)."""
    _need(utility, CARA)
    _check_t(t, utility)
    sigma = market.scalar_sigma()
    disc = np.exp(-market.r * (utility.T - t))
    return float(disc * cara_multiplier(t, market, utility, prior) / (utility.gamma * sigma * sigma))


def cara_allocation_1d(t, beta, market, utility, prior):
    """Optimal amount invested in the risky asset."""
    return cara_gain_1d(t, market, utility, _prior_1d(prior)) * (beta - market.r)


def cara_value_1d(t, V, beta, market, utility, prior):
    c = cara_coeffs_1d(t, market, utility, prior)
    x = np.exp(market.r * (utility.T - t)) * V + c.a + 0.5 * c.b * (beta - market.r) ** 2
    return -np.exp(-utility.gamma * x)


def crra_blowup_1d(market, utility, prior) -> BlowupDomain:
    """Blow-up time t~ = (1-gamma) T - gamma sigma^2 / nu0^2."""
    _need(utility, CRRA, LOG)
    gam, T = utility.gamma, utility.T
    if utility.kind == LOG:
        return BlowupDomain(-np.inf, T)
    s2 = market.scalar_sigma() ** 2
    return BlowupDomain(float((1.0 - gam) * T - gam * s2 / _prior_1d(prior).nu0_sq), T)


def _crra_guard(t, utility, domain):
    _check_t(t, utility)
    domain.check(t)
    if utility.kind == CRRA and utility.gamma < 1 and not utility.acknowledge_blowup:
        raise DomainError(
            "CRRA with gamma < 1 requires acknowledge_blowup=True "
            "(the Bayesian value function blows up in finite time)")


def crra_coeffs_1d(t, market, utility, prior) -> CaraCoeffs:
    """Exponent coefficients (a, b) of the CRRA value function; (0, 0) for log."""
    _need(utility, CRRA, LOG)
    prior = _prior_1d(prior)
    _crra_guard(t, utility, crra_blowup_1d(market, utility, prior))
    if utility.kind == LOG:
        return CaraCoeffs(float(t), 0.0, 0.0)
    sigma = market.scalar_sigma()
    gam, T = utility.gamma, utility.T
    g_t = learning_gain(t, sigma, prior.nu0_sq)
    g_T = learning_gain(T, sigma, prior.nu0_sq)
    # x = g(T)/g(t) - 1 = -g(T)(T-t), written without a subtraction
    x = -g_T * (T - t)
    a = -0.5 * gam * np.log1p(x / gam) + 0.5 * np.log1p(x)
    b = (1.0 - gam) / (sigma * sigma) * g_T * (T - t) / (g_t * (gam + x))
    return CaraCoeffs(float(t), float(a), float(b))


def log_coeffs_1d(t, market, utility, prior) -> CaraCoeffs:
    """Additive correction for log utility: u = log(e^{r(T-t)} V) + a + b (beta-r)^2 / 2.

    b(t) = (T-t)/sigma^2 and a(t) = (g(t)/g(T) - 1 - log(g(t)/g(T))) / 2.
    """
    _need(utility, LOG)
    _check_t(t, utility)
    prior = _prior_1d(prior)
    sigma = market.scalar_sigma()
    # y = g(t)/g(T) - 1
    y = learning_gain(t, sigma, prior.nu0_sq) * (utility.T - t)
    a = 0.5 * (y - np.log1p(y))
    b = (utility.T - t) / (sigma * sigma)
    return CaraCoeffs(float(t), float(a), float(b))


def crra_multiplier(t, market, utility, prior):
    """chi(t) = gamma g(T) / ((gamma-1) g(t) + g(T)); identically 1 for log."""
    if utility.kind == LOG:
        return 1.0
    sigma = market.scalar_sigma()
    g_t = learning_gain(t, sigma, prior.nu0_sq)
    g_T = learning_gain(utility.T, sigma, prior.nu0_sq)
    return float(utility.gamma * g_T / ((utility.gamma - 1.0) * g_t + g_T))


def crra_gain_1d(t, market, utility, prior):
    _need(utility, CRRA, LOG)
    prior = _prior_1d(prior)
    _crra_guard(t, utility, crra_blowup_1d(market, utility, prior))
    if utility.kind == LOG:
        return naive_gain(t, market, utility)
    s2 = market.scalar_sigma() ** 2
    return crra_multiplier(t, market, utility, prior) / (utility.gamma * s2)


def crra_allocation_1d(t, beta, market, utility, prior):
    """Optimal fraction of wealth in the risky asset."""
    return crra_gain_1d(t, market, utility, prior) * (beta - market.r)


def crra_value_1d(t, V, beta, market, utility, prior):
    if V <= 0:
        raise DomainError("CRRA wealth must be positive")
    grown = np.exp(market.r * (utility.T - t)) * V
    if utility.kind == LOG:
        c = log_coeffs_1d(t, market, utility, prior)
        return np.log(grown) + c.a + 0.5 * c.b * (beta - market.r) ** 2
    c = crra_coeffs_1d(t, market, utility, prior)
    gam = utility.gamma
    return grown ** (1.0 - gam) / (1.0 - gam) * np.exp(c.a + 0.5 * c.b * (beta - market.r) ** 2)


@jit
def _riccati_rhs_1d(t, a, b, power, gam, s2, nu0sq):
    g = nu0sq / (s2 + nu0sq * t)
    da = -0.5 * s2 * g * g * b
    if power:
        k = (1.0 - gam) / gam
        db = -s2 * g * g * b * b / gam - k / s2 - 2.0 * k * g * b
    else:
        db = 2.0 * g * b - 1.0 / (gam * s2)
    return da, db


@jit
def _riccati_backward_1d(T, steps, power, gam, s2, nu0sq, use_euler):
    h = T / steps
    a = np.zeros(steps + 1)
    b = np.zeros(steps + 1)
    for k in range(steps - 1, -1, -1):
        t1 = (k + 1) * h
        a1, b1 = a[k + 1], b[k + 1]
        ka1, kb1 = _riccati_rhs_1d(t1, a1, b1, power, gam, s2, nu0sq)
        if use_euler:
            a[k] = a1 - h * ka1
            b[k] = b1 - h * kb1
            continue
        ka2, kb2 = _riccati_rhs_1d(t1 - 0.5 * h, a1 - 0.5 * h * ka1, b1 - 0.5 * h * kb1,
                                   power, gam, s2, nu0sq)
        ka3, kb3 = _riccati_rhs_1d(t1 - 0.5 * h, a1 - 0.5 * h * ka2, b1 - 0.5 * h * kb2,
                                   power, gam, s2, nu0sq)
        ka4, kb4 = _riccati_rhs_1d(k * h, a1 - h * ka3, b1 - h * kb3, power, gam, s2, nu0sq)
        a[k] = a1 - h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
        b[k] = b1 - h / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
    return a, b


def riccati_1d_numeric(market, utility, prior, steps=10_000, euler=False):
    """Backward fixed-step RK4 (or Euler) for the one-asset (a, b) system.

    Independent of the closed forms; used to cross-check them.  Returns the
    uniform grid and the arrays a, b.  Power utility requires a domain
    without blow-up on [0, T].
    """
    prior = _prior_1d(prior)
    if utility.kind == LOG:
        raise DomainError("the log case has no exponent coefficients to integrate")
    if utility.kind == CRRA:
        dom = crra_blowup_1d(market, utility, prior)
        if dom.blows_up:
            raise BlowupError(f"blow-up at t_tilde={dom.t_tilde:.6g} inside [0, T]", dom.t_tilde)
    if int(steps) != steps or steps < 1:
        raise DomainError("steps must be a positive integer")
    s2 = market.scalar_sigma() ** 2
    a, b = _riccati_backward_1d(float(utility.T), int(steps), utility.kind == CRRA,
                                utility.gamma, s2, prior.nu0_sq, bool(euler))
    return np.linspace(0.0, utility.T, int(steps) + 1), a, b


# ---------------------------------------------------------------------------
# d risky assets
# ---------------------------------------------------------------------------

class _Learning:
    """Posterior-covariance geometry shared by the multi-asset formulas.

    With A = Sigma^{1/2} Gamma0^{-1} Sigma^{1/2} = U diag(lam) U', the
    posterior covariance is Gamma_s = Sigma^{1/2} U diag(1/(lam+s)) U' Sigma^{1/2},
    which gives whole time grids of Gamma_s without repeated inversions.
    Point evaluations go through Cholesky inverses instead.
    """

    def __init__(self, market, prior):
        if isinstance(prior, PriorBelief1D):
            prior = PriorBeliefND(np.array([prior.beta0]), np.array([[prior.nu0_sq]]))
        if prior.dim != market.dim:
            raise DomainError(f"prior has dimension {prior.dim}, market {market.dim}")
        self.prior = prior
        self.Sigma = market.Sigma
        self.Sigma_inv = linalg.invert_spd(self.Sigma, "Sigma")
        self.Gamma0_inv = linalg.invert_spd(prior.Gamma0, "Gamma0")
        self.S_half = linalg.sqrt_spd(self.Sigma, "Sigma")
        self.A = linalg.as_symmetric(self.S_half @ self.Gamma0_inv @ self.S_half)
        self.lam, self.U = linalg.eigh(self.A)
        self.W = self.S_half @ self.U  # Gamma_s = W diag(1/(lam+s)) W'

    def precision(self, t):
        return self.Gamma0_inv + t * self.Sigma_inv

    def gamma(self, t):
        return linalg.invert_spd(self.precision(t), "posterior precision")

    def gamma_batch(self, s, diag_fn=None):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        d = diag_fn(s) if diag_fn is not None else 1.0 / (self.lam[None, :] + s[:, None])
        return np.einsum("ik,nk,jk->nij", self.W, d, self.W)


def _vec(beta, d, name="beta"):
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if b.shape != (d,):
        raise DomainError(f"{name} must have length {d}, got shape {b.shape}")
    return b


def cara_gain_nd(t, market, utility, prior):
    """e^{-r(T-t)} Sigma^-1 Gamma_T Gamma_t^-1 / gamma."""
    _need(utility, CARA)
    _check_t(t, utility)
    L = _Learning(market, prior)
    disc = np.exp(-market.r * (utility.T - t))
    return disc / utility.gamma * L.Sigma_inv @ L.gamma(utility.T) @ L.precision(t)


def cara_allocation_nd(t, beta, market, utility, prior):
    """Optimal amounts invested in each risky asset."""
    d = market.dim
    return cara_gain_nd(t, market, utility, prior) @ (_vec(beta, d) - market.r)


def cara_coeffs_nd(t, market, utility, prior, panels=1000) -> CaraCoeffs:
    _need(utility, CARA)
    _check_t(t, utility)
    L = _Learning(market, prior)
    T, gam = utility.T, utility.gamma
    # P_t - P_t Gamma_T P_t in the eigenbasis of A, free of cancellation at t = T
    Z = L.Sigma_inv @ L.W
    diag = (L.lam + t) * (T - t) / (L.lam + T)
    B = (Z * diag) @ Z.T / gam
    B = 0.5 * (B + B.T)
    lam_T = 1.0 / (L.lam + T)
    integrand = lambda s: L.Sigma_inv @ L.gamma_batch(
        s, lambda ss: 1.0 / (L.lam[None, :] + ss[:, None]) - lam_T[None, :])
    a = linalg.trace_quadrature(integrand, t, T, panels, vectorized=True) / (2.0 * gam)
    return CaraCoeffs(float(t), a, B)


def cara_value_nd(t, V, beta, market, utility, prior):
    c = cara_coeffs_nd(t, market, utility, prior)
    x = _vec(beta, market.dim) - market.r
    w = np.exp(market.r * (utility.T - t)) * V + c.a + 0.5 * x @ c.b @ x
    return -np.exp(-utility.gamma * w)


def crra_blowup_nd(market, utility, prior) -> BlowupDomain:
    """t~ = (1-gamma) T - gamma lambda_min(Sigma^{1/2} Gamma0^{-1} Sigma^{1/2})."""
    _need(utility, CRRA, LOG)
    if utility.kind == LOG:
        return BlowupDomain(-np.inf, utility.T)
    L = _Learning(market, prior)
    lmin = linalg.lambda_min(L.A)
    return BlowupDomain(float((1.0 - utility.gamma) * utility.T - utility.gamma * lmin), utility.T)


def crra_gain_nd(t, market, utility, prior):
    """Sigma^-1 (Gamma_t^-1 + (gamma-1) Gamma_T^-1)^-1 Gamma_t^-1; Sigma^-1 for log."""
    _need(utility, CRRA, LOG)
    _crra_guard(t, utility, crra_blowup_nd(market, utility, prior))
    L = _Learning(market, prior)
    if utility.kind == LOG:
        return L.Sigma_inv.copy()
    P_t = L.precision(t)
    mid = P_t + (utility.gamma - 1.0) * L.precision(utility.T)
    # mid is SPD for gamma > 1; for gamma < 1 it is SPD exactly on the valid interval
    return L.Sigma_inv @ linalg.invert_spd(mid, "allocation matrix") @ P_t


def crra_allocation_nd(t, beta, market, utility, prior):
    """Optimal fractions of wealth in each risky asset."""
    return crra_gain_nd(t, market, utility, prior) @ (_vec(beta, market.dim) - market.r)


def crra_coeffs_nd(t, market, utility, prior, panels=1000) -> CaraCoeffs:
    _need(utility, CRRA, LOG)
    _crra_guard(t, utility, crra_blowup_nd(market, utility, prior))
    d = market.dim
    if utility.kind == LOG:
        return CaraCoeffs(float(t), 0.0, np.zeros((d, d)))
    L = _Learning(market, prior)
    gam, T = utility.gamma, utility.T
    # -P_t + (Gamma_t/gamma + (1-1/gamma) Gamma_t P_T Gamma_t)^-1 in the eigenbasis of A
    Z = L.Sigma_inv @ L.W
    mixed = (L.lam + t) / gam + (1.0 - 1.0 / gam) * (L.lam + T)
    diag = (L.lam + t) * (1.0 - 1.0 / gam) * (t - T) / mixed
    B = (Z * diag) @ Z.T
    B = 0.5 * (B + B.T)

    def diag(ss):
        lam = L.lam[None, :]
        mixed = (lam + ss[:, None]) / gam + (1.0 - 1.0 / gam) * (lam + T)
        return 1.0 / mixed - 1.0 / (lam + ss[:, None])

    integrand = lambda s: L.Sigma_inv @ L.gamma_batch(s, diag)
    a = 0.5 * linalg.trace_quadrature(integrand, t, T, panels, vectorized=True)
    return CaraCoeffs(float(t), a, B)


def log_coeffs_nd(t, market, utility, prior, panels=1000) -> CaraCoeffs:
    """Log-utility correction: B(t) = (T-t) Sigma^-1,
    a(t) = 1/2 int_t^T (T-s) Tr(Gamma_s Sigma^-1 Gamma_s Sigma^-1) ds."""
    _need(utility, LOG)
    _check_t(t, utility)
    L = _Learning(market, prior)
    T = utility.T
    B = (T - t) * L.Sigma_inv

    def integrand(s):
        G = L.gamma_batch(s)
        M = G @ L.Sigma_inv
        return (T - s)[:, None, None] * (M @ M)

    a = 0.5 * linalg.trace_quadrature(integrand, t, T, panels, vectorized=True)
    return CaraCoeffs(float(t), a, B)


def crra_value_nd(t, V, beta, market, utility, prior):
    if V <= 0:
        raise DomainError("CRRA wealth must be positive")
    x = _vec(beta, market.dim) - market.r
    grown = np.exp(market.r * (utility.T - t)) * V
    if utility.kind == LOG:
        c = log_coeffs_nd(t, market, utility, prior)
        return np.log(grown) + c.a + 0.5 * x @ c.b @ x
    c = crra_coeffs_nd(t, market, utility, prior)
    gam = utility.gamma
    return grown ** (1.0 - gam) / (1.0 - gam) * np.exp(c.a + 0.5 * x @ c.b @ x)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def naive_gain(t, market, utility):
    """Gain of the certainty-equivalent rule that plugs beta_t in for the drift."""
    _check_t(t, utility)
    Sigma_inv = linalg.invert_spd(market.Sigma, "Sigma")
    g = Sigma_inv / utility.gamma
    if utility.kind == CARA:
        g = g * np.exp(-market.r * (utility.T - t))
    return g if market.dim > 1 else float(g[0, 0])


def naive_allocation(t, beta, market, utility):
    """Known-drift Merton position with the drift replaced by ``beta``.

    Amount for CARA, fraction of wealth for CRRA and log.
    """
    gain = naive_gain(t, market, utility)
    if market.dim == 1:
        return gain * (float(np.squeeze(beta)) - market.r)
    return gain @ (_vec(beta, market.dim) - market.r)


def known_drift_allocation(t, mu, market, utility):
    """Merton position when the drift ``mu`` is known (degenerate prior)."""
    return naive_allocation(t, mu, market, utility)


def optimal_gain(t, market, utility, prior):
    """Gain matrix of the optimal rule for any utility and dimension."""
    if market.dim == 1 and isinstance(prior, PriorBelief1D):
        if utility.kind == CARA:
            return np.array([[cara_gain_1d(t, market, utility, prior)]])
        return np.array([[crra_gain_1d(t, market, utility, prior)]])
    if utility.kind == CARA:
        return cara_gain_nd(t, market, utility, prior)
    return crra_gain_nd(t, market, utility, prior)


def value(t, V, beta, market, utility, prior):
    """Closed-form value function u(t, V, beta) for any utility and dimension."""
    if market.dim == 1 and isinstance(prior, PriorBelief1D):
        beta = float(np.squeeze(beta))
        if utility.kind == CARA:
            return float(cara_value_1d(t, V, beta, market, utility, prior))
        return float(crra_value_1d(t, V, beta, market, utility, prior))
    if utility.kind == CARA:
        return float(cara_value_nd(t, V, beta, market, utility, prior))
    return float(crra_value_nd(t, V, beta, market, utility, prior))
