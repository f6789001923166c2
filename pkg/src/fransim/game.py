"""Interference-aware uplink subchannel and power allocation game.

Players are the F-AP-served F-UEs. Each maximises its net utility

    rate - alpha * sum_k (p_k * g_to_mrrh_k) ** kappa + beta * cache_hit

where the price is charged on the interference each F-UE puts on the MRRH.
MRRH-served F-UEs are background transmitters: they get a fixed orthogonal
share of the subchannels at the per-subchannel power cap, pay no
price and earn no reward, but their rate counts in the network total.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import kernels
from .channel import MRRH, ChannelParams, ChannelRealization, Topology, rate, sinr
from .errors import ConfigError, ContractError, InfeasibleError

BUDGET_RTOL = kernels._numpy.BUDGET_RTOL


@dataclass(frozen=True)
class UtilityParams:
    price_coefficient: float = 3e19
    price_exponent: float = 1.0
    reward_coefficient: float = 5e5

    def __post_init__(self):
        if not self.price_coefficient >= 0:
            raise ConfigError("utility.price_coefficient must be >= 0")
        if not self.price_exponent >= 1:
            raise ConfigError("utility.price_exponent must be >= 1")
        if not self.reward_coefficient >= 0:
            raise ConfigError("utility.reward_coefficient must be >= 0")


@dataclass(frozen=True, eq=False)
class PowerGrid:
    levels: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float).copy()
        if lv.ndim != 1 or lv.size == 0:
            raise ConfigError("power grid needs at least one level")
        if lv[0] < 0 or np.any(np.diff(lv) <= 0):
            raise ConfigError("power levels must be >= 0 and strictly increasing")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def logarithmic(cls, p_min: float = 1e-3, p_max: float = 0.2, n: int = 10) -> "PowerGrid":
        if not 0 < p_min < p_max or n < 2:
            raise ConfigError("need 0 < p_min < p_max and at least two levels")
        return cls(np.geomspace(p_min, p_max, n))

    @property
    def p_max(self) -> float:
        return float(self.levels[-1])

    def probe_level(self, cap: float | None = None) -> int:
        """Middle of the levels not above ``cap`` (all levels by default)."""
        n = len(self.levels) if cap is None else int(np.count_nonzero(self.levels <= cap * (1 + BUDGET_RTOL)))
        return max(n, 1) // 2

    def __len__(self):
        return len(self.levels)

    def __eq__(self, other):
        if not isinstance(other, PowerGrid):
            return NotImplemented
        return np.array_equal(self.levels, other.levels)

    def __hash__(self):
        return hash(self.levels.tobytes())


@dataclass
class Allocation:
    """Subchannel sets and per-subchannel power level indices.

    ``fixed`` holds F-UEs whose powers are not game decisions.
    """
    grid: PowerGrid
    subchannel_of: dict[int, tuple[int, ...]] = field(default_factory=dict)
    power_of: dict[tuple[int, int], int] = field(default_factory=dict)
    fixed: frozenset[int] = frozenset()

    def power(self, fue: int, subchannel: int) -> float:
        return float(self.grid.levels[self.power_of[(fue, subchannel)]])

    def total_power(self, fue: int) -> float:
        return math.fsum(self.power(fue, k) for k in self.subchannel_of.get(fue, ()))

    def players(self) -> list[int]:
        return sorted(f for f in self.subchannel_of if f not in self.fixed)

    def pairs(self) -> list[tuple[int, int]]:
        """Strategic (fue, subchannel) pairs in sweep order."""
        return [(f, k) for f in self.players() for k in self.subchannel_of[f]]

    def subchannel_cap(self, n_subchannels: int) -> float:
        """Highest power allowed on one subchannel: the budget split evenly over all subchannels.

        Any assignment then stays within the per-F-UE budget, and each
        subchannel's power game keeps a strategy set of its own.
        """
        return self.grid.p_max / n_subchannels

    def caps(self, n_fues: int, n_subchannels: int) -> np.ndarray:
        return np.full(n_fues, self.subchannel_cap(n_subchannels))

    def copy(self) -> "Allocation":
        return Allocation(self.grid, dict(self.subchannel_of), dict(self.power_of), self.fixed)

    def level_matrix(self, n_fues: int, n_subchannels: int) -> np.ndarray:
        lvl = np.full((n_fues, n_subchannels), -1, dtype=np.int64)
        for (f, k), l in self.power_of.items():
            lvl[f, k] = l
        return lvl

    def with_levels(self, lvl: np.ndarray) -> "Allocation":
        out = self.copy()
        out.power_of = {(f, k): int(lvl[f, k]) for (f, k) in self.power_of}
        return out

    def check(self, topology: Topology) -> None:
        """Raise unless orthogonality, pairing and budget invariants hold."""
        pairs = {(f, k) for f, ks in self.subchannel_of.items() for k in ks}
        if pairs != set(self.power_of):
            raise ContractError("power_of must be defined exactly on assigned pairs")
        used: dict[tuple[int, int], int] = {}
        for f, k in pairs:
            cell = (topology.fues[f].serving_node, k)
            if cell in used:
                raise ContractError(f"subchannel {k} assigned twice in cell {cell[0]}")
            used[cell] = f
        for f in self.subchannel_of:
            if self.total_power(f) > self.grid.p_max * (1 + BUDGET_RTOL):
                raise ContractError(f"F-UE {f} exceeds the power budget")


@dataclass
class GameResult:
    allocation: Allocation
    iterations: int
    converged: bool
    total_net_utility: float
    per_fue_utility: dict[int, float]
    scheme: str = "proposed"
    monotone_violations: int = 0
    budget_saturations: int = 0


class Scheme(str, enum.Enum):
    NON_FRAN = "non_fran"
    EXISTING_FRAN = "existing_fran"
    PROPOSED = "proposed"


# -- utility -----------------------------------------------------------------

def _price_gain(fue: int, k: int, channel: ChannelRealization, topology: Topology) -> float:
    return 0.0 if topology.fues[fue].serving_node == MRRH else channel.gain(fue, MRRH, k)


def net_utility(fue: int, allocation: Allocation, channel: ChannelRealization,
                uparams: UtilityParams, cparams: ChannelParams, topology: Topology) -> float:
    if fue not in allocation.subchannel_of:
        raise ContractError(f"F-UE {fue} is not in the allocation")
    total = 0.0
    for k in allocation.subchannel_of[fue]:
        p = allocation.power(fue, k)
        total += rate(sinr(fue, k, allocation, channel, cparams, topology), cparams)
        total -= uparams.price_coefficient * (p * _price_gain(fue, k, channel, topology)) ** uparams.price_exponent
    return total + uparams.reward_coefficient * topology.cache_hit(fue)


def all_utilities(allocation: Allocation, channel: ChannelRealization, uparams: UtilityParams,
                  cparams: ChannelParams, topology: Topology) -> dict[int, float]:
    """Net utility of every F-UE in the allocation (vectorised)."""
    lvl = allocation.level_matrix(len(topology.fues), channel.n_subchannels)
    rates, prices = kernels.utility_terms(
        lvl, channel.gains, topology.servers(), allocation.grid.levels,
        float(uparams.price_coefficient), float(uparams.price_exponent),
        float(cparams.noise_power), float(cparams.bandwidth))
    return {f: float(rates[f] - prices[f]) + uparams.reward_coefficient * topology.cache_hit(f)
            for f in sorted(allocation.subchannel_of)}


# -- subchannel assignment ---------------------------------------------------

def _max_feasible_level(grid: PowerGrid, n_subchannels: int) -> int:
    ok = np.nonzero(grid.levels * n_subchannels <= grid.p_max * (1 + BUDGET_RTOL))[0]
    return int(ok[-1]) if ok.size else 0


def _macro_allocation(topology: Topology, n_sub: int, grid: PowerGrid) -> Allocation:
    """MRRH F-UEs split the subchannels round-robin at the per-subchannel cap."""
    macro = topology.fues_of(MRRH)
    if len(macro) > n_sub:
        raise InfeasibleError(f"{len(macro)} MRRH F-UEs but only {n_sub} subchannels")
    alloc = Allocation(grid, fixed=frozenset(macro))
    top = _max_feasible_level(grid, n_sub)
    for i, f in enumerate(macro):
        ks = tuple(range(i, n_sub, len(macro)))
        alloc.subchannel_of[f] = ks
        for k in ks:
            alloc.power_of[(f, k)] = top
    return alloc


def _greedy_split(scores: np.ndarray) -> list[list[int]]:
    """Give each subchannel (column) to the best-scoring row, lowest row on ties.

    When the subchannels left equal the rows still without one, only those
    rows compete, so every row ends up with at least one subchannel.
    """
    n_rows, n_sub = scores.shape
    if n_rows > n_sub:
        raise InfeasibleError(f"{n_rows} F-UEs in one cell but only {n_sub} subchannels")
    owned: list[list[int]] = [[] for _ in range(n_rows)]
    empty = np.ones(n_rows, dtype=bool)
    for k in range(n_sub):
        col = np.asarray(scores[:, k], dtype=float)
        if np.count_nonzero(empty) == n_sub - k:
            col = np.where(empty, col, -np.inf)
        best = int(np.argmax(col))
        owned[best].append(k)
        empty[best] = False
    return owned


def _power_matrix(allocation: Allocation, n_fues: int, n_sub: int) -> np.ndarray:
    lvl = allocation.level_matrix(n_fues, n_sub)
    return np.where(lvl >= 0, allocation.grid.levels[np.maximum(lvl, 0)], 0.0)


def _received(allocation: Allocation, channel: ChannelRealization, n_fues: int) -> np.ndarray:
    """Total power arriving at each receiver on each subchannel, shape ``(n_rx, K)``."""
    power = _power_matrix(allocation, n_fues, channel.n_subchannels)
    return np.einsum("uk,urk->rk", power, channel.gains)


def probe_utilities(topology: Topology, channel: ChannelRealization, uparams: UtilityParams,
                    cparams: ChannelParams, grid: PowerGrid, fues: list[int],
                    background: Allocation) -> np.ndarray:
    """Per-subchannel net utility of each F-UE at the probe power, shape ``(len(fues), K)``.

    Interference is what the background allocation (the MRRH F-UEs) puts on
    the F-UE's server; F-AP peers are not yet placed.
    """
    n_sub = channel.n_subchannels
    p = grid.levels[grid.probe_level(grid.p_max / n_sub)]
    fues = np.asarray(fues, dtype=np.int64)
    s = topology.servers()[fues]
    interference = _received(background, channel, len(topology.fues))[s, :]
    r = cparams.bandwidth * np.log2(1.0 + p * channel.gains[fues, s, :] / (cparams.noise_power + interference))
    cross = np.where((s != MRRH)[:, None], channel.gains[fues, MRRH, :], 0.0)
    return r - uparams.price_coefficient * (p * cross) ** uparams.price_exponent


def assign_subchannels(topology: Topology, channel: ChannelRealization, uparams: UtilityParams,
                       cparams: ChannelParams, grid: PowerGrid) -> Allocation:
    """Greedy interference-aware assignment, F-AP by F-AP; powers start at level 0."""
    if not any(u.serving_node != MRRH for u in topology.fues):
        raise ContractError("no F-AP-served F-UE to allocate")
    alloc = _macro_allocation(topology, channel.n_subchannels, grid)
    background = alloc.copy()
    for fap in topology.faps:
        fues = topology.fues_of(fap.id)
        if not fues:
            continue
        scores = probe_utilities(topology, channel, uparams, cparams, grid, fues, background)
        for f, ks in zip(fues, _greedy_split(scores)):
            alloc.subchannel_of[f] = tuple(ks)
            for k in ks:
                alloc.power_of[(f, k)] = 0
    return alloc


def assign_by_gain(topology: Topology, channel: ChannelRealization, grid: PowerGrid) -> Allocation:
    """Rate-greedy assignment (strongest own link wins), all at max affordable power."""
    alloc = _macro_allocation(topology, channel.n_subchannels, grid)
    top = _max_feasible_level(grid, channel.n_subchannels)
    for fap in topology.faps:
        fues = topology.fues_of(fap.id)
        if not fues:
            continue
        scores = channel.gains[fues, fap.id, :]
        for f, ks in zip(fues, _greedy_split(scores)):
            alloc.subchannel_of[f] = tuple(ks)
            for k in ks:
                alloc.power_of[(f, k)] = top
    return alloc


# -- power game --------------------------------------------------------------

def _kernel_args(allocation: Allocation, channel: ChannelRealization, uparams: UtilityParams,
                 cparams: ChannelParams, topology: Topology):
    return (channel.gains, topology.servers(), allocation.grid.levels,
            allocation.caps(len(topology.fues), channel.n_subchannels),
            float(uparams.price_coefficient), float(uparams.price_exponent),
            float(cparams.noise_power), float(cparams.bandwidth))


def best_response(fue: int, subchannel: int, allocation: Allocation, channel: ChannelRealization,
                  uparams: UtilityParams, cparams: ChannelParams, topology: Topology,
                  grid: PowerGrid | None = None) -> tuple[int, bool]:
    """Best power level for one (F-UE, subchannel) with everything else frozen.

    Returns ``(level, saturated)``; ``saturated`` flags that no level fits
    the budget, in which case level 0 is returned.
    """
    if (fue, subchannel) not in allocation.power_of:
        raise ContractError(f"F-UE {fue} is not assigned subchannel {subchannel}")
    if grid is not None and grid is not allocation.grid:
        allocation = replace(allocation, grid=grid)
    lvl = allocation.level_matrix(len(topology.fues), channel.n_subchannels)
    level, saturated = kernels.best_response_level(
        fue, subchannel, lvl, *_kernel_args(allocation, channel, uparams, cparams, topology))
    return int(level), bool(saturated)


def iterate_to_ne(allocation: Allocation, channel: ChannelRealization, uparams: UtilityParams,
                  cparams: ChannelParams, topology: Topology, grid: PowerGrid | None = None,
                  max_iters: int = 100, eps: float = 1e-9) -> GameResult:
    """Sequential round-robin best response from the lowest power level.

    Sweeps visit players by id and their subchannels by index. Stops after a
    sweep that changes nothing (``converged``) or after ``max_iters`` sweeps.
    """
    if max_iters < 1 or not eps > 0:
        raise ContractError("need max_iters >= 1 and eps > 0")
    work = allocation.copy()
    if grid is not None:
        work.grid = grid
    pairs = work.pairs()
    if any(work.power_of[p] != 0 for p in pairs):
        raise ContractError("iterate_to_ne starts from power level 0")
    lvl = work.level_matrix(len(topology.fues), channel.n_subchannels)
    pair_f = np.array([f for f, _ in pairs], dtype=np.int64)
    pair_k = np.array([k for _, k in pairs], dtype=np.int64)
    sweeps, converged, decreases, saturations = kernels.sweep_to_equilibrium(
        pair_f, pair_k, lvl, *_kernel_args(work, channel, uparams, cparams, topology), max_iters)
    work = work.with_levels(lvl)
    per = all_utilities(work, channel, uparams, cparams, topology)
    return GameResult(work, int(sweeps), bool(converged), math.fsum(per.values()), per,
                      monotone_violations=int(decreases), budget_saturations=int(saturations))


def deviation_gains(allocation: Allocation, channel: ChannelRealization, uparams: UtilityParams,
                    cparams: ChannelParams, topology: Topology) -> np.ndarray:
    """Utility change of every budget-feasible unilateral move, shape ``(pairs, levels)``.

    Entries for the current level and for levels above the F-UE's
    per-subchannel cap are ``-inf``.
    Only the moved subchannel's rate and price change, so the gain is their
    difference.
    """
    grid = allocation.grid
    pairs = allocation.pairs()
    if not pairs:
        return np.empty((0, len(grid)))
    n, n_sub = len(topology.fues), channel.n_subchannels
    lvl = allocation.level_matrix(n, n_sub)
    power = _power_matrix(allocation, n, n_sub)
    server = topology.servers()
    own = power * channel.gains[np.arange(n), server, :]
    interference = _received(allocation, channel, n)[server, :] - own

    pf = np.array([f for f, _ in pairs])
    pk = np.array([k for _, k in pairs])
    s = server[pf]
    g = channel.gains[pf, s, pk][:, None]
    denom = cparams.noise_power + interference[pf, pk][:, None]
    cross = np.where(s != MRRH, channel.gains[pf, MRRH, pk], 0.0)[:, None]
    a, kappa = uparams.price_coefficient, uparams.price_exponent

    def local(p):
        return cparams.bandwidth * np.log2(1.0 + p * g / denom) - a * (p * cross) ** kappa

    out = local(grid.levels[None, :]) - local(power[pf, pk][:, None])
    out[:, grid.levels > allocation.subchannel_cap(n_sub) * (1 + BUDGET_RTOL)] = -np.inf
    out[np.arange(len(pairs)), lvl[pf, pk]] = -np.inf
    return out


def verify_ne(result: GameResult | Allocation, channel: ChannelRealization, uparams: UtilityParams,
              cparams: ChannelParams, topology: Topology, grid: PowerGrid | None = None,
              eps: float = 1e-9) -> bool:
    """True iff no single (F-UE, subchannel) move to another affordable level gains more than ``eps``."""
    allocation = result.allocation if isinstance(result, GameResult) else result
    if grid is not None and grid is not allocation.grid:
        allocation = replace(allocation, grid=grid)
    gains = deviation_gains(allocation, channel, uparams, cparams, topology)
    return not bool(np.any(gains > eps))


def run_baseline(scheme: Scheme | str, topology: Topology, channel: ChannelRealization,
                 cparams: ChannelParams, uparams: UtilityParams, grid: PowerGrid,
                 max_iters: int = 100, eps: float = 1e-9) -> GameResult:
    """One allocation scheme, scored under the full ``uparams`` for comparability.

    ``non_fran`` computes no equilibrium and always reports ``converged=False``.
    """
    try:
        scheme = Scheme(scheme)
    except ValueError:
        raise ConfigError(f"unknown scheme {scheme!r}") from None
    if scheme is Scheme.NON_FRAN:
        alloc = assign_by_gain(topology, channel, grid)
        per = all_utilities(alloc, channel, uparams, cparams, topology)
        return GameResult(alloc, 0, False, math.fsum(per.values()), per, scheme=scheme.value)
    decide = uparams if scheme is Scheme.PROPOSED else replace(uparams, reward_coefficient=0.0)
    alloc = assign_subchannels(topology, channel, decide, cparams, grid)
    result = iterate_to_ne(alloc, channel, decide, cparams, topology, grid, max_iters, eps)
    per = all_utilities(result.allocation, channel, uparams, cparams, topology)
    result.per_fue_utility = per
    result.total_net_utility = math.fsum(per.values())
    result.scheme = scheme.value
    return result


GAME_CSV_COLUMNS = ("scheme", "n_faps", "n_fues_per_fap", "seed", "iterations",
                    "converged", "total_net_utility")


def game_csv_row(result: GameResult, n_faps: int, n_fues_per_fap: int, seed: int) -> list[str]:
    """Row in ``GAME_CSV_COLUMNS`` order; floats use ``repr`` so they round-trip."""
    return [result.scheme, str(n_faps), str(n_fues_per_fap), str(seed), str(result.iterations),
            "true" if result.converged else "false", repr(float(result.total_net_utility))]


def parse_game_csv_row(row: Mapping[str, str] | list[str]) -> dict:
    if not isinstance(row, Mapping):
        row = dict(zip(GAME_CSV_COLUMNS, row))
    return {"scheme": row["scheme"], "n_faps": int(row["n_faps"]),
            "n_fues_per_fap": int(row["n_fues_per_fap"]), "seed": int(row["seed"]),
            "iterations": int(row["iterations"]), "converged": row["converged"] == "true",
            "total_net_utility": float(row["total_net_utility"])}
