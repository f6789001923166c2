"""Pure-numpy kernels. Same signatures and results as ``_numba``."""
import numpy as np

BUDGET_RTOL = 1e-9


def best_response_level(f, k, lvl, gains, server, levels, cap,
                        alpha, kappa, noise, bandwidth):
    """Best level of F-UE ``f`` on subchannel ``k``; ``cap[f]`` bounds its per-subchannel power."""
    s = server[f]
    on = lvl[:, k] >= 0
    on[f] = False
    interference = np.sum(levels[lvl[on, k]] * gains[on, s, k])
    feasible = levels <= cap[f] * (1.0 + BUDGET_RTOL)
    n_ok = int(np.count_nonzero(feasible))
    if n_ok == 0:
        return 0, True
    p = levels[:n_ok]
    cross = gains[f, 0, k] if s != 0 else 0.0
    u = bandwidth * np.log2(1.0 + p * gains[f, s, k] / (noise + interference)) \
        - alpha * (p * cross) ** kappa
    return int(np.argmax(u)), False


def sweep_to_equilibrium(pair_f, pair_k, lvl, gains, server, levels, cap,
                         alpha, kappa, noise, bandwidth, max_iters):
    """Round-robin best response over ``(pair_f[i], pair_k[i])`` until a sweep changes nothing.

    ``lvl`` is updated in place. Returns ``(sweeps, converged, decreases, saturations)``.
    """
    decreases = 0
    saturations = 0
    for it in range(max_iters):
        changed = False
        for i in range(len(pair_f)):
            f, k = pair_f[i], pair_k[i]
            new, saturated = best_response_level(f, k, lvl, gains, server, levels, cap,
                                                 alpha, kappa, noise, bandwidth)
            saturations += saturated
            if new != lvl[f, k]:
                if new < lvl[f, k]:
                    decreases += 1
                lvl[f, k] = new
                changed = True
        if not changed:
            return it + 1, True, decreases, saturations
    return max_iters, False, decreases, saturations


def utility_terms(lvl, gains, server, levels, alpha, kappa, noise, bandwidth):
    """Per-F-UE summed rate and interference price, shape ``(n_fues,)`` each."""
    n, _, n_sub = gains.shape
    power = np.where(lvl >= 0, levels[np.maximum(lvl, 0)], 0.0)  # (n, K)
    total = np.einsum("uk,urk->rk", power, gains)  # everything arriving at each receiver
    own = power * gains[np.arange(n), server, :]
    interference = total[server, :] - own
    r = np.where(lvl >= 0, bandwidth * np.log2(1.0 + own / (noise + interference)), 0.0)
    cross = np.where((server != 0)[:, None], gains[:, 0, :], 0.0)
    price = alpha * (power * cross) ** kappa
    return r.sum(axis=1), price.sum(axis=1)


def session_counts(n_cross, high, kinds, gate_kinds, gate_on, n_kinds):
    """Tally handovers per kind from per-session crossing draws.

    ``kinds`` lists every crossing's kind, sessions back to back. A crossing
    of a kind flagged in ``gate_kinds`` by a high-speed session is suppressed
    when ``gate_on``. The first crossing of a session is scenario 2.

    Returns ``(executed, gated, scenario1, scenario2, fast_executed)``, each a
    per-kind int64 array.
    """
    n_cross = np.asarray(n_cross, dtype=np.int64)
    session = np.repeat(np.arange(len(n_cross)), n_cross)
    starts = np.cumsum(n_cross) - n_cross
    first = np.arange(len(kinds)) == np.repeat(starts, n_cross)
    fast = high[session]
    blocked = gate_on & fast & gate_kinds[kinds]
    done = ~blocked

    def tally(mask):
        return np.bincount(kinds[mask], minlength=n_kinds).astype(np.int64)

    return (tally(done), tally(blocked), tally(done & ~first), tally(done & first),
            tally(done & fast))
