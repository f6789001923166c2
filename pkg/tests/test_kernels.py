import os
import subprocess
import sys

import numpy as np
import pytest

from fransim import kernels
from fransim.kernels import _numba, _numpy


def random_game(rng, n=12, n_rx=4, n_sub=5, n_levels=6):
    gains = rng.uniform(1e-10, 1e-6, (n, n_rx, n_sub))
    server = rng.integers(0, n_rx, n)
    levels = np.geomspace(1e-3, 0.2, n_levels)
    lvl = np.where(rng.random((n, n_sub)) < 0.5, 0, -1).astype(np.int64)
    cap = np.full(n, 0.2 / n_sub)
    return lvl, gains, server, levels, cap


ARGS = dict(alpha=3e8, kappa=1.0, noise=1e-13, bandwidth=180e3)


def test_default_backend_is_numba():
    if os.environ.get("FRANSIM_DISABLE_NUMBA", "") not in ("", "0"):
        pytest.skip("numba disabled in this environment")
    assert kernels.BACKEND == "numba"


def test_env_flag_selects_numpy():
    out = subprocess.run([sys.executable, "-c", "from fransim import kernels; print(kernels.BACKEND)"],
                         env={**os.environ, "FRANSIM_DISABLE_NUMBA": "1"}, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.parametrize("seed", range(5))
def test_best_response_backends_agree(seed):
    rng = np.random.default_rng(seed)
    lvl, gains, server, levels, cap = random_game(rng)
    for f, k in zip(*np.nonzero(lvl >= 0)):
        a = _numpy.best_response_level(f, k, lvl, gains, server, levels, cap, *ARGS.values())
        b = _numba.best_response_level(f, k, lvl, gains, server, levels, cap, *ARGS.values())
        assert (int(a[0]), bool(a[1])) == (int(b[0]), bool(b[1]))


@pytest.mark.parametrize("seed", range(5))
def test_sweeps_backends_agree(seed):
    rng = np.random.default_rng(seed)
    lvl, gains, server, levels, cap = random_game(rng)
    pf, pk = (a.astype(np.int64) for a in np.nonzero(lvl >= 0))
    la, lb = lvl.copy(), lvl.copy()
    ra = _numpy.sweep_to_equilibrium(pf, pk, la, gains, server, levels, cap, *ARGS.values(), 100)
    rb = _numba.sweep_to_equilibrium(pf, pk, lb, gains, server, levels, cap, *ARGS.values(), 100)
    assert tuple(map(int, ra)) == tuple(map(int, rb))
    assert np.array_equal(la, lb)


@pytest.mark.parametrize("seed", range(5))
def test_utility_terms_backends_agree(seed):
    rng = np.random.default_rng(seed)
    lvl, gains, server, levels, _ = random_game(rng)
    ra, pa = _numpy.utility_terms(lvl, gains, server, levels, *ARGS.values())
    rb, pb = _numba.utility_terms(lvl, gains, server, levels, *ARGS.values())
    np.testing.assert_allclose(ra, rb, rtol=1e-9)
    np.testing.assert_allclose(pa, pb, rtol=1e-12)


def tally_oracle(n_cross, fast, kinds, gate_kinds, gate_on, n_kinds):
    out = [np.zeros(n_kinds, np.int64) for _ in range(5)]
    executed, gated, s1, s2, fast_done = out
    c = 0
    for i, n in enumerate(n_cross):
        for j in range(n):
            kd = kinds[c]
            c += 1
            if gate_on and fast[i] and gate_kinds[kd]:
                gated[kd] += 1
                continue
            executed[kd] += 1
            (s2 if j == 0 else s1)[kd] += 1
            fast_done[kd] += fast[i]
    return out


@pytest.mark.parametrize("gate_on", [True, False])
def test_session_counts_backends_and_oracle(gate_on):
    rng = np.random.default_rng(7)
    n_cross = rng.poisson(1.3, 500).astype(np.int64)
    fast = rng.random(500) < 0.3
    kinds = rng.integers(0, 4, n_cross.sum()).astype(np.int64)
    gate_kinds = np.array([False, False, True, False])
    expect = tally_oracle(n_cross, fast, kinds, gate_kinds, gate_on, 4)
    for impl in (_numpy, _numba):
        got = impl.session_counts(n_cross, fast, kinds, gate_kinds, gate_on, 4)
        for a, b in zip(got, expect):
            assert np.array_equal(a, b)


def test_session_counts_empty():
    for impl in (_numpy, _numba):
        got = impl.session_counts(np.zeros(0, np.int64), np.zeros(0, bool), np.zeros(0, np.int64),
                                  np.array([False, True]), True, 2)
        assert all(np.array_equal(a, np.zeros(2, np.int64)) for a in got)


def test_benchmark_script_runs():
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = subprocess.run([sys.executable, script, "--n-faps", "3", "--fues-per-fap", "2", "--sessions", "100",
                          "--repeat", "1"], capture_output=True, text=True, check=True)
    assert "sweep_to_equilibrium" in out.stdout and "speedup" in out.stdout
