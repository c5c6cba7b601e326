"""Small dense symmetric matrix algebra.

Everything here is sized for the handful of assets a desk allocates across
(d up to a few dozen).  Inverses and square roots go through a cyclic Jacobi
eigensolver or a Cholesky factorization written as plain loops, which numba
compiles when available.
"""

import numpy as np

from ._accel import jit
from .errors import DomainError

ASYMMETRY_TOL = 1e-8
MAX_CONDITION = 1e12


def as_symmetric(m, name="matrix"):
    """Validate a square matrix and return its symmetrized float copy.

    Asymmetry above ``ASYMMETRY_TOL`` (max-abs of ``m - m.T`` relative to the
    largest entry) is a caller bug and raises :class:`DomainError`.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    scale = max(np.max(np.abs(a)), 1e-300)
    asym = np.max(np.abs(a - a.T)) / scale
    if asym > ASYMMETRY_TOL:
        raise DomainError(f"{name} is not symmetric (relative asymmetry {asym:.3g})")
    return 0.5 * (a + a.T)


@jit
def _jacobi_eigh(a_in, tol, max_sweeps):
    a = a_in.copy()
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        diag = 0.0
        for i in range(n):
            diag += a[i, i] * a[i, i]
        if off <= tol * tol * max(diag, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v


@jit
def _cholesky(a):
    # returns (L, failed_pivot); failed_pivot = -1 on success
    n = a.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, j
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return L, -1


def eigh(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = as_symmetric(m)
    w, v = _jacobi_eigh(a, 1e-15, 100)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def lambda_min(m) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(eigh(m)[0][0])


def cholesky(m, name="matrix"):
    """Lower Cholesky factor; raises :class:`DomainError` naming the failed pivot."""
    a = as_symmetric(m, name)
    L, pivot = _cholesky(a)
    if pivot >= 0:
        raise DomainError(f"{name} is not positive definite: Cholesky pivot {pivot} is non-positive")
    return L


def _spd_eig(m, name):
    a = as_symmetric(m, name)
    cholesky(a, name)
    w, v = eigh(a)
    cond = w[-1] / w[0]
    if cond > MAX_CONDITION:
        raise DomainError(f"{name} is ill-conditioned (condition number {cond:.3g} > {MAX_CONDITION:.0e})")
    return w, v


def condition_number(m) -> float:
    w, _ = eigh(m)
    return float(np.max(np.abs(w)) / np.min(np.abs(w)))


def invert_spd(m, name="matrix"):
    """Inverse of a symmetric positive definite matrix via its Cholesky factor."""
    a = as_symmetric(m, name)
    _spd_eig(a, name)
    L = cholesky(a, name)
    n = a.shape[0]
    Linv = np.linalg.solve(L, np.eye(n))
    inv = Linv.T @ Linv
    return 0.5 * (inv + inv.T)


def sqrt_spd(m, name="matrix"):
    """Symmetric positive definite square root."""
    w, v = _spd_eig(m, name)
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def simpson_weights(panels: int) -> np.ndarray:
    if panels < 1:
        raise ValueError("panels must be >= 1")
    w = np.ones(2 * panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def trace_quadrature(f, t_lo: float, t_hi: float, panels: int = 1000,
                     vectorized: bool = False) -> float:
    """Composite Simpson approximation of the integral of ``Tr f(s)`` on [t_lo, t_hi].

    ``f`` maps a time to a square matrix (or a scalar, read as 1x1).  Each
    panel uses its two endpoints and midpoint, so cubic integrands are exact.
    With ``vectorized=True`` ``f`` receives the whole node array and returns a
    stack of matrices of shape ``(nodes, d, d)``.
    """
    if t_hi < t_lo:
        raise ValueError("t_lo must not exceed t_hi")
    if t_hi == t_lo:
        return 0.0
    s = np.linspace(t_lo, t_hi, 2 * panels + 1)
    h = (t_hi - t_lo) / (2 * panels)
    if vectorized:
        mats = np.asarray(f(s), dtype=np.float64)
        if mats.ndim == 1:
            vals = mats
        else:
            vals = np.trace(mats, axis1=-2, axis2=-1)
    else:
        vals = np.array([np.trace(np.atleast_2d(f(si))) for si in s])
    return float(h * np.dot(simpson_weights(panels), vals))
