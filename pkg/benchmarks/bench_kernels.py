"""Time the numba kernels against the pure-numpy fallback on a default-size drop.

    python benchmarks/bench_kernels.py [--n-faps 20] [--fues-per-fap 4] [--repeat 5]

Both backends are imported directly, so the ``FRANSIM_DISABLE_NUMBA`` flag
does not matter here. Numba compile time is excluded by a warm-up call.
"""
import argparse
import time

import numpy as np

from fransim.channel import ChannelParams, TopologyConfig, draw_channel, generate_topology
from fransim.game import PowerGrid, UtilityParams, _kernel_args, assign_subchannels
from fransim.kernels import _numba, _numpy


def game_inputs(n_faps, fues_per_fap, seed):
    rng = np.random.default_rng(seed)
    topo = generate_topology(TopologyConfig(n_faps=n_faps, n_fues_per_fap=fues_per_fap), rng)
    cparams, uparams, grid = ChannelParams(), UtilityParams(), PowerGrid.logarithmic()
    channel = draw_channel(topo, cparams, rng)
    alloc = assign_subchannels(topo, channel, uparams, cparams, grid)
    lvl = alloc.level_matrix(len(topo.fues), channel.n_subchannels)
    pairs = alloc.pairs()
    pf = np.array([f for f, _ in pairs], dtype=np.int64)
    pk = np.array([k for _, k in pairs], dtype=np.int64)
    return lvl, pf, pk, _kernel_args(alloc, channel, uparams, cparams, topo)


def session_inputs(n, seed):
    rng = np.random.default_rng(seed)
    n_cross = rng.poisson(0.6, n).astype(np.int64)
    fast = rng.random(n) < 0.2
    kinds = rng.integers(0, 4, int(n_cross.sum())).astype(np.int64)
    return n_cross, fast, kinds, np.array([False, False, True, False]), True, 4


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-faps", type=int, default=20)
    ap.add_argument("--fues-per-fap", type=int, default=4)
    ap.add_argument("--sessions", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    lvl0, pf, pk, kargs = game_inputs(args.n_faps, args.fues_per_fap, args.seed)
    sess = session_inputs(args.sessions, args.seed)
    # utility_terms is scored on the converged profile, as in the simulator
    lvl_ne = lvl0.copy()
    _numba.sweep_to_equilibrium(pf, pk, lvl_ne, *kargs, 100)
    cases = {
        "sweep_to_equilibrium": lambda m: m.sweep_to_equilibrium(pf, pk, lvl0.copy(), *kargs, 100),
        "utility_terms": lambda m: m.utility_terms(lvl_ne, *kargs[:3], *kargs[4:]),
        "session_counts": lambda m: m.session_counts(*sess),
    }

    print(f"{len(pf)} (F-UE, subchannel) pairs, {lvl0.shape[0]} F-UEs, {args.sessions} sessions")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call in cases.items():
        call(_numba)  # compile
        t_np = timed(lambda: call(_numpy), args.repeat)
        t_nb = timed(lambda: call(_numba), args.repeat)
        print(f"{name:<22}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
