"""Compare the numba kernels with their pure-numpy/Python counterparts.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed after
a warm-up call so that numba compilation is excluded.  The fallback columns
are what the package runs when ``DRIFTLEARN_DISABLE_NUMBA=1`` is set.
"""

import argparse
import timeit

import numpy as np

from driftlearn import _accel
from driftlearn import execution as E
from driftlearn import merton as M
from driftlearn import simulate as S
from driftlearn.filters import PriorBelief1D


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.NUMBA_ENABLED:
        raise SystemExit("numba is not available (or disabled); nothing to compare")

    market = M.FrictionlessMarket(0.0, 0.6)
    prior = PriorBelief1D.from_std(0.01, 0.1)
    utility = M.UtilitySpec.cara(2e-6, 1.0)
    spec = E.ExecutionSpec(0.15, E.VolumeCurve.constant(4e6), E.Transition(5e-6, 2e5))

    cfg = S.SimConfig(args.paths, args.steps, 3, 1.0)
    gen = S.PathGenerator(cfg, S.PriceModel(market, 50.0, S.BACHELIER), prior)
    table = E.solve_execution(spec, market, utility, prior, args.steps)
    beta = np.ascontiguousarray(gen.generate(0, args.paths).beta[:, :, 0])
    fc = E.forward_coeffs(table, spec, args.steps)
    h = table.T / args.steps
    y_T = np.zeros(6)
    y_T[:6] = spec.terminal_row()
    kappa = spec.volume.per_step(1.0, args.steps) / (2 * spec.eta)
    ac_args = (y_T, 1.0, args.steps, kappa, utility.gamma, 0.36, prior.nu0_sq, False, E.ESCAPE_BOUND)
    ric_args = (10.0, args.steps, True, 2.0, 0.36, 0.0009, False)

    cases = [
        (f"price paths ({args.paths} x {args.steps})",
         lambda: gen.generate(0, args.paths, use_numba=True),
         lambda: gen.generate(0, args.paths, use_numba=False)),
        (f"inventory paths ({args.paths} x {args.steps})",
         lambda: E._inventory_kernel(beta, 1e5, fc.nodes, fc.mids, fc.kappa, h, False),
         lambda: E._inventory_numpy(beta, 1e5, fc.nodes, fc.mids, fc.kappa, h, False)),
        (f"execution ODEs ({args.steps} RK4 steps)",
         lambda: E._integrate_backward(*ac_args),
         lambda: E._integrate_backward.py_func(*ac_args)),
        (f"CRRA Riccati ({args.steps} RK4 steps)",
         lambda: M._riccati_backward_1d(*ric_args),
         lambda: M._riccati_backward_1d.py_func(*ric_args)),
    ]
    print(f"{'kernel':<38}{'numba [s]':>12}{'fallback [s]':>14}{'speed-up':>10}")
    for name, fast, slow in cases:
        t_fast, t_slow = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:<38}{t_fast:>12.4f}{t_slow:>14.4f}{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
