import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from driftlearn import _accel
from driftlearn import execution as E
from driftlearn import simulate as S
from driftlearn.filters import PriorBelief1D, PriorBeliefND
from driftlearn.merton import FrictionlessMarket, UtilitySpec, riccati_1d_numeric

SCRIPT = textwrap.dedent("""
    import sys
    import numpy as np
    from driftlearn import _accel
    from driftlearn import execution as E
    from driftlearn import simulate as S
    from driftlearn.filters import PriorBelief1D, PriorBeliefND
    from driftlearn.merton import FrictionlessMarket, UtilitySpec, riccati_1d_numeric

    def compute():
        m1 = FrictionlessMarket(0.0, 0.6)
        prior = PriorBelief1D.from_std(0.01, 0.1)
        cfg = S.SimConfig(40, 300, 3, 1.0)
        paths = S.simulate_paths(cfg, S.PriceModel(m1, 50.0, S.BACHELIER), prior)
        spec = E.ExecutionSpec(0.15, E.VolumeCurve.constant(4e6), E.Transition(5e-6, 2e5))
        table = E.solve_execution(spec, m1, UtilitySpec.cara(2e-6, 1.0), prior, 300)
        q = E.inventory_paths(table, paths.beta[:, :, 0], 1e5, spec)
        m2 = FrictionlessMarket(0.0, np.array([[0.36, 0.072], [0.072, 0.16]]))
        p2 = PriorBeliefND([0.01, 0.005], [[0.0009, 0.0001], [0.0001, 0.0004]])
        ln = S.simulate_paths(S.SimConfig(30, 50, 14, 10.0), S.PriceModel(m2, [1.0, 2.0]), p2)
        _, _, b = riccati_1d_numeric(m1, UtilitySpec.crra(2.0, 1.0), prior, steps=500)
        return dict(S=paths.S, beta=paths.beta, mu=paths.mu, coeffs=table.coeffs, q=q,
                    S2=ln.S, beta2=ln.beta, mu2=ln.mu, b=b)

    if __name__ == "__main__":
        np.savez(sys.argv[1], backend=_accel.backend(), **compute())
""")


@pytest.fixture(scope="module")
def numpy_results(tmp_path_factory):
    d = tmp_path_factory.mktemp("backend")
    script = d / "compute.py"
    script.write_text(SCRIPT)
    env = dict(os.environ, DRIFTLEARN_DISABLE_NUMBA="1")
    subprocess.run([sys.executable, str(script), str(d / "np.npz")], check=True, env=env)
    return np.load(d / "np.npz")


def test_fallback_is_selected(numpy_results):
    assert str(numpy_results["backend"]) == "numpy"


@pytest.mark.skipif(not _accel.NUMBA_ENABLED, reason="numba not installed")
def test_backends_agree(numpy_results):
    ns = {}
    exec(compile(SCRIPT, "compute", "exec"), ns)
    fast = ns["compute"]()
    for key, value in fast.items():
        np.testing.assert_allclose(value, numpy_results[key], rtol=1e-12, atol=1e-12, err_msg=key)
    np.testing.assert_array_equal(fast["mu"], numpy_results["mu"])


def test_in_process_generators_agree():
    cfg = S.SimConfig(25, 60, 5, 10.0)
    gen = S.PathGenerator(cfg, S.PriceModel(FrictionlessMarket(0.0, 0.6), 1.0), PriorBelief1D.from_std(0.01, 0.03))
    a, b = gen.generate(0, 25, use_numba=False), gen.generate(0, 25)
    np.testing.assert_allclose(a.S, b.S, rtol=1e-13)
    np.testing.assert_allclose(a.beta, b.beta, rtol=1e-12, atol=1e-15)


def test_single_thread_is_identical(tmp_path):
    code = textwrap.dedent("""
        import sys, numpy as np
        from driftlearn import simulate as S
        from driftlearn.filters import PriorBelief1D
        from driftlearn.merton import FrictionlessMarket
        cfg = S.SimConfig(64, 100, 7, 1.0)
        p = S.simulate_paths(cfg, S.PriceModel(FrictionlessMarket(0.0, 0.6), 50.0, "bachelier"),
                             PriorBelief1D.from_std(0.01, 0.1))
        np.save(sys.argv[1], p.S)
    """)
    script = tmp_path / "t.py"
    script.write_text(code)
    outs = []
    for threads in ("1", str(os.cpu_count() or 1)):
        env = dict(os.environ, NUMBA_NUM_THREADS=threads)
        subprocess.run([sys.executable, str(script), str(tmp_path / f"{threads}.npy")], check=True, env=env)
        outs.append(np.load(tmp_path / f"{threads}.npy"))
    np.testing.assert_array_equal(outs[0], outs[1])
