"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of Python/numpy and
decorated with :func:`jit`.  When numba is missing, or when the environment
variable ``DRIFTLEARN_DISABLE_NUMBA`` is set to a truthy value before import,
the decorator is a no-op and the kernels run as ordinary Python.  Monte Carlo
kernels additionally ship a vectorized numpy twin that is used in that mode.
"""

import os

_FLAG = os.environ.get("DRIFTLEARN_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - depends on environment
    _numba = None

NUMBA_ENABLED = _numba is not None

if NUMBA_ENABLED and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # prefer OpenMP/workqueue; an outdated TBB only produces warnings
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def jit(*args, parallel=False, **kwargs):
    """``numba.njit`` with caching, or the identity when numba is off."""
    if not NUMBA_ENABLED:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    opts = dict(cache=True, nogil=True, parallel=parallel)
    opts.update(kwargs)
    if len(args) == 1 and callable(args[0]):
        return _numba.njit(**opts)(args[0])
    return _numba.njit(*args, **opts)


if NUMBA_ENABLED:
    prange = _numba.prange
else:
    prange = range


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
