"""Conjugate Gaussian learning of an unknown constant drift.

Given a Gaussian prior on the drift and continuously observed prices, the
posterior stays Gaussian and depends on the path only through the current
price.  Observations are therefore passed as sufficient statistics: the log
return for log-normal dynamics, the price change for Bachelier dynamics.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import linalg
from .errors import DomainError

Array = np.ndarray


def _finite(name, *values):
    for v in values:
        if not np.all(np.isfinite(np.asarray(v, dtype=np.float64))):
            raise DomainError(f"{name} must be finite")


def _check_time_sigma(sigma, t):
    _finite("inputs", sigma, t)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")


@dataclass(frozen=True)
class PriorBelief1D:
    """Gaussian prior N(beta0, nu0_sq) on a scalar drift."""

    beta0: float
    nu0_sq: float

    def __post_init__(self):
        _finite("prior", self.beta0, self.nu0_sq)
        if not self.nu0_sq > 0:
            raise DomainError(
                "nu0_sq must be positive; use the known-drift rules for a degenerate prior")

    @classmethod
    def from_std(cls, beta0, nu0):
        return cls(float(beta0), float(nu0) ** 2)

    @property
    def nu0(self):
        return float(np.sqrt(self.nu0_sq))


@dataclass(frozen=True)
class PriorBeliefND:
    """Gaussian prior N(beta0, Gamma0) on a drift vector."""

    beta0: Array
    Gamma0: Array

    def __post_init__(self):
        beta0 = np.atleast_1d(np.asarray(self.beta0, dtype=np.float64)).copy()
        _finite("prior mean", beta0)
        gamma0 = linalg.as_symmetric(self.Gamma0, "Gamma0")
        if gamma0.shape[0] != beta0.shape[0]:
            raise DomainError(
                f"Gamma0 is {gamma0.shape[0]}x{gamma0.shape[0]} but beta0 has length {beta0.shape[0]}")
        linalg.cholesky(gamma0, "Gamma0")
        beta0.flags.writeable = False
        gamma0.flags.writeable = False
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "Gamma0", gamma0)

    @property
    def dim(self):
        return self.beta0.shape[0]


@dataclass(frozen=True)
class PosteriorState:
    """Posterior belief at time ``t``.

    ``var_t`` is the scalar variance in one dimension and the covariance
    matrix otherwise; ``g_t`` (the learning gain) is only defined in 1d.
    """

    t: float
    beta_t: Union[float, Array]
    var_t: Union[float, Array]
    g_t: Optional[float] = None


def learning_gain(t, sigma, nu0_sq):
    """g(t) = nu0^2 / (sigma^2 + nu0^2 t), vectorized over ``t``."""
    return nu0_sq / (sigma * sigma + nu0_sq * np.asarray(t, dtype=np.float64))


def posterior_variance(t, sigma, nu0_sq):
    return sigma * sigma * nu0_sq / (sigma * sigma + nu0_sq * np.asarray(t, dtype=np.float64))


def _posterior_1d(prior, sigma, t, statistic):
    _check_time_sigma(sigma, t)
    _finite("observation", statistic)
    s2 = sigma * sigma
    den = s2 + prior.nu0_sq * t
    beta_t = (s2 * prior.beta0 + prior.nu0_sq * statistic) / den
    return PosteriorState(
        t=float(t),
        beta_t=float(beta_t),
        var_t=float(s2 * prior.nu0_sq / den),
        g_t=float(prior.nu0_sq / den),
    )


def posterior_lognormal_1d(prior: PriorBelief1D, sigma: float, t: float,
                           log_return: float) -> PosteriorState:
    """Posterior after observing ``log(S_t/S_0)`` under dS = mu S dt + sigma S dW."""
    _check_time_sigma(sigma, t)
    return _posterior_1d(prior, sigma, t, log_return + 0.5 * sigma * sigma * t)


def posterior_bachelier_1d(prior: PriorBelief1D, sigma: float, t: float,
                           price_change: float) -> PosteriorState:
    """Posterior after observing ``S_t - S_0`` under dS = mu dt + sigma dW."""
    return _posterior_1d(prior, sigma, t, price_change)


def lognormal_statistic(S_t, S_0, sigma, t):
    """``log(S_t/S_0) + sigma^2 t / 2``; rejects non-positive prices."""
    S_t = np.asarray(S_t, dtype=np.float64)
    if np.any(S_t <= 0) or np.any(np.asarray(S_0) <= 0):
        raise DomainError("log-normal observations need strictly positive prices")
    return np.log(S_t / S_0) + 0.5 * np.asarray(sigma) ** 2 * t


def _posterior_nd(prior, Sigma, t, statistic):
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    _finite("inputs", t, statistic)
    Sigma = linalg.as_symmetric(Sigma, "Sigma")
    x = np.atleast_1d(np.asarray(statistic, dtype=np.float64))
    d = prior.dim
    if Sigma.shape != (d, d) or x.shape != (d,):
        raise DomainError(
            f"dimension mismatch: prior {d}, Sigma {Sigma.shape}, observation {x.shape}")
    sigma_inv = linalg.invert_spd(Sigma, "Sigma")
    gamma0_inv = linalg.invert_spd(prior.Gamma0, "Gamma0")
    precision = gamma0_inv + t * sigma_inv
    gamma_t = linalg.invert_spd(precision, "posterior precision")
    beta_t = gamma_t @ (gamma0_inv @ prior.beta0 + sigma_inv @ x)
    return PosteriorState(t=float(t), beta_t=beta_t, var_t=gamma_t)


def posterior_lognormal_nd(prior: PriorBeliefND, Sigma, t: float, log_returns) -> PosteriorState:
    """Multi-asset posterior after observing the vector ``log(S_t/S_0)``.

    Gamma_t = (Gamma0^-1 + t Sigma^-1)^-1 and
    beta_t = Gamma_t (Gamma0^-1 beta0 + Sigma^-1 (log(S_t/S_0) + diag(Sigma) t / 2)).
    """
    Sigma = linalg.as_symmetric(Sigma, "Sigma")
    x = np.atleast_1d(np.asarray(log_returns, dtype=np.float64)) + 0.5 * np.diag(Sigma) * t
    return _posterior_nd(prior, Sigma, t, x)


def posterior_bachelier_nd(prior: PriorBeliefND, Sigma, t: float, price_changes) -> PosteriorState:
    return _posterior_nd(prior, Sigma, t, price_changes)


def innovation_increments(times, prices, betas, sigma, dynamics="lognormal"):
    """Increments of the observation-filtration Brownian motion along one path.

    For log-normal prices
    W^_t = (log(S_t/S_0) + sigma^2 t/2)/sigma - int_0^t beta_s/sigma ds,
    and for Bachelier prices W^_t = (S_t - S_0 - int_0^t beta_s ds)/sigma.
    The drift integral uses the left endpoint of each step (non-anticipating).
    """
    times = np.asarray(times, dtype=np.float64)
    prices = np.asarray(prices, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    if times.ndim != 1 or prices.shape != times.shape or betas.shape != times.shape:
        raise DomainError("times, prices and betas must be 1d arrays of equal length")
    dt = np.diff(times)
    if times.size < 2 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise DomainError("path must be sampled on a uniform grid")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    _finite("path", prices, betas)
    if dynamics == "lognormal":
        if np.any(prices <= 0):
            raise DomainError("log-normal paths need strictly positive prices")
        obs = np.diff(np.log(prices)) + 0.5 * sigma * sigma * dt
    elif dynamics == "bachelier":
        obs = np.diff(prices)
    else:
        raise DomainError(f"unknown dynamics {dynamics!r}")
    return (obs - betas[:-1] * dt) / sigma
