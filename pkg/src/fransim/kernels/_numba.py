import numpy as np
from numba import njit

from ._numpy import BUDGET_RTOL

njit_kwargs = {"nogil": True, "cache": True}


@njit(**njit_kwargs)
def best_response_level(f, k, lvl, gains, server, levels, cap,
                        alpha, kappa, noise, bandwidth):
    s = server[f]
    n = lvl.shape[0]
    interference = 0.0
    for u in range(n):
        if u != f and lvl[u, k] >= 0:
            interference += levels[lvl[u, k]] * gains[u, s, k]
    cross = gains[f, 0, k] if s != 0 else 0.0
    g = gains[f, s, k]
    denom = noise + interference
    limit = cap[f] * (1.0 + BUDGET_RTOL)
    best = -np.inf
    best_l = -1
    for l in range(levels.shape[0]):
        p = levels[l]
        if p > limit:
            break
        u = bandwidth * np.log2(1.0 + p * g / denom) - alpha * (p * cross) ** kappa
        if u > best:
            best = u
            best_l = l
    if best_l < 0:
        return 0, True
    return best_l, False


@njit(**njit_kwargs)
def sweep_to_equilibrium(pair_f, pair_k, lvl, gains, server, levels, cap,
                         alpha, kappa, noise, bandwidth, max_iters):
    decreases = 0
    saturations = 0
    for it in range(max_iters):
        changed = False
        for i in range(pair_f.shape[0]):
            f = pair_f[i]
            k = pair_k[i]
            new, saturated = best_response_level(f, k, lvl, gains, server, levels, cap,
                                                 alpha, kappa, noise, bandwidth)
            if saturated:
                saturations += 1
            if new != lvl[f, k]:
                if new < lvl[f, k]:
                    decreases += 1
                lvl[f, k] = new
                changed = True
        if not changed:
            return it + 1, True, decreases, saturations
    return max_iters, False, decreases, saturations


@njit(**njit_kwargs)
def utility_terms(lvl, gains, server, levels, alpha, kappa, noise, bandwidth):
    n, _, n_sub = gains.shape
    rates = np.zeros(n)
    prices = np.zeros(n)
    for f in range(n):
        s = server[f]
        for k in range(n_sub):
            if lvl[f, k] < 0:
                continue
            interference = 0.0
            for u in range(n):
                if u != f and lvl[u, k] >= 0:
                    interference += levels[lvl[u, k]] * gains[u, s, k]
            p = levels[lvl[f, k]]
            rates[f] += bandwidth * np.log2(1.0 + p * gains[f, s, k] / (noise + interference))
            if s != 0:
                prices[f] += alpha * (p * gains[f, 0, k]) ** kappa
    return rates, prices


@njit(**njit_kwargs)
def session_counts(n_cross, high, kinds, gate_kinds, gate_on, n_kinds):
    executed = np.zeros(n_kinds, np.int64)
    gated = np.zeros(n_kinds, np.int64)
    s1 = np.zeros(n_kinds, np.int64)
    s2 = np.zeros(n_kinds, np.int64)
    fast = np.zeros(n_kinds, np.int64)
    c = 0
    for i in range(n_cross.shape[0]):
        for j in range(n_cross[i]):
            kind = kinds[c]
            c += 1
            if gate_on and high[i] and gate_kinds[kind]:
                gated[kind] += 1
                continue
            executed[kind] += 1
            if j == 0:
                s2[kind] += 1
            else:
                s1[kind] += 1
            if high[i]:
                fast[kind] += 1
    return executed, gated, s1, s2, fast
