"""Monte Carlo engine: sessions, boundary crossings, handovers and game snapshots.

A replication draws its randomness from independent streams, one for the
session process and one per snapshot (a fresh topology drop and channel),
then processes it with
either the vectorised session tally (``engine="kernel"``) or a time-ordered
event queue (``engine="events"``). Admission always succeeds, so sessions
never interact and both engines yield identical counts; the event engine
exists to make ordering and causality checkable.

Within a session, boundary crossings form a Poisson process of rate eta on
``[0, holding)``: a Poisson(eta * holding) count of crossings at sorted
uniform offsets, which is the same law as a sequence of exponential
residence times.
"""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .channel import ChannelParams, TopologyConfig, draw_channel, generate_topology
from .errors import ConfigError
from .game import PowerGrid, Scheme, UtilityParams, run_baseline, verify_ne
from .handover import (HandoverKind, OverheadProfile, Procedure, SessionModel, build_trace,
                       expected_overhead_rate, fluid_flow_rate, overhead_breakdown, speed_gate)

KINDS: tuple[HandoverKind, ...] = tuple(HandoverKind)
DEFAULT_MIX = {HandoverKind.FAP_TO_FAP: 0.5, HandoverKind.FAP_TO_MRRH: 0.3,
               HandoverKind.MRRH_TO_FAP: 0.2}
HANDOVER_PARAMS = ("arrival_rate", "mean_holding_time")
UTILITY_PARAMS = ("n_fues_per_fap", "n_faps")
SWEEP_PARAMS = HANDOVER_PARAMS + UTILITY_PARAMS


def default_residence_rate(topology: TopologyConfig) -> float:
    """Fluid-flow crossing rate of an F-AP cell at the mean F-UE speed."""
    mean_speed = ((1 - topology.p_high_speed) * topology.speed_low
                  + topology.p_high_speed * topology.speed_high)
    return fluid_flow_rate(mean_speed, topology.fap_radius)


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 2e5
    seed: int = 20170101
    replications: int = 30
    n_snapshots: int = 10
    procedure: Procedure = Procedure.FRAN
    speed_threshold: float = 10.0
    gate_enabled: bool = True
    session: SessionModel = field(default_factory=lambda: SessionModel(
        0.1, 5.0, default_residence_rate(TopologyConfig())))
    mix: Mapping[HandoverKind, float] = field(default_factory=lambda: dict(DEFAULT_MIX))
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    utility: UtilityParams = field(default_factory=UtilityParams)
    grid: PowerGrid = field(default_factory=PowerGrid.logarithmic)
    overhead: OverheadProfile = field(default_factory=OverheadProfile)
    max_iters: int = 100
    eps: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "procedure", Procedure(self.procedure))
        object.__setattr__(self, "mix", {HandoverKind(k): float(v) for k, v in self.mix.items()})
        self.validate()

    def validate(self) -> None:
        if not self.horizon > 0:
            raise ConfigError("simulation.horizon must be > 0")
        if self.replications < 1:
            raise ConfigError("simulation.replications must be >= 1")
        if self.n_snapshots < 0:
            raise ConfigError("simulation.n_snapshots must be >= 0")
        if not self.speed_threshold > 0:
            raise ConfigError("simulation.speed_threshold must be > 0")
        if self.max_iters < 1:
            raise ConfigError("simulation.max_iters must be >= 1")
        if not self.eps > 0:
            raise ConfigError("simulation.eps must be > 0")
        if any(not p >= 0 for p in self.mix.values()):
            raise ConfigError("handover mix probabilities must be >= 0")
        if abs(math.fsum(self.mix.values()) - 1.0) > 1e-9:
            raise ConfigError("handover mix must sum to 1")
        if self.grid.levels[0] * self.channel.n_subchannels > self.grid.p_max * (1 + 1e-9):
            raise ConfigError("power.p_min times channel.n_subchannels exceeds power.p_max")
        self.topology.validate()

    def with_param(self, name: str, value) -> "SimConfig":
        if name in HANDOVER_PARAMS:
            return replace(self, session=replace(self.session, **{name: float(value)}))
        if name in UTILITY_PARAMS:
            return replace(self, topology=replace(self.topology, **{name: int(value)}))
        raise ConfigError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMS}")

    def p_gated(self) -> float:
        """Probability an F-UE is above the speed threshold."""
        t = self.topology
        return ((t.p_high_speed if t.speed_high > self.speed_threshold else 0.0)
                + ((1 - t.p_high_speed) if t.speed_low > self.speed_threshold else 0.0))


# -- draws -------------------------------------------------------------------

@dataclass
class SessionDraws:
    arrival: np.ndarray
    holding: np.ndarray
    speed: np.ndarray
    n_cross: np.ndarray
    offsets: np.ndarray  # crossing time after arrival, sessions back to back
    kinds: np.ndarray    # index into KINDS, aligned with offsets


def poisson_arrivals(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Arrival epochs in ``[0, horizon)`` from cumulated exponential gaps."""
    if rate == 0:
        return np.empty(0)
    mean = rate * horizon
    chunk = int(mean + 10 * math.sqrt(mean) + 16)
    times = np.cumsum(rng.exponential(1.0 / rate, chunk))
    while times[-1] < horizon:
        more = times[-1] + np.cumsum(rng.exponential(1.0 / rate, chunk))
        times = np.concatenate((times, more))
    return times[times < horizon]


def draw_sessions(rng: np.random.Generator, config: SimConfig) -> SessionDraws:
    s, topo = config.session, config.topology
    arrival = poisson_arrivals(rng, s.arrival_rate, config.horizon)
    n = len(arrival)
    holding = rng.exponential(s.mean_holding_time, n)
    speed = np.where(rng.random(n) < topo.p_high_speed, topo.speed_high, topo.speed_low)
    n_cross = rng.poisson(s.residence_rate * holding).astype(np.int64)
    session = np.repeat(np.arange(n), n_cross)
    offsets = holding[session] * rng.random(len(session))
    order = np.lexsort((offsets, session))
    offsets = offsets[order]
    cum = np.cumsum([config.mix.get(k, 0.0) for k in KINDS])
    kinds = np.minimum(np.searchsorted(cum, rng.random(len(session)) * cum[-1], side="right"),
                       len(KINDS) - 1).astype(np.int64)
    return SessionDraws(arrival, holding, speed, n_cross, offsets, kinds)


# -- records -----------------------------------------------------------------

@dataclass
class ReplicationRecord:
    seed: int
    horizon: float
    procedure: str
    n_sessions: int = 0
    mean_interarrival: float = float("nan")
    crossings: int = 0
    handovers: dict[str, int] = field(default_factory=dict)
    gated: dict[str, int] = field(default_factory=dict)
    fast_handovers: dict[str, int] = field(default_factory=dict)
    scenario1: int = 0
    scenario2: int = 0
    overhead: dict[str, float] = field(default_factory=dict)
    processing_overhead: float = 0.0
    transmitting_overhead: float = 0.0
    utility: dict[str, float] = field(default_factory=dict)
    games: int = 0
    converged: int = 0
    ne_verified: int = 0
    monotone_violations: int = 0

    @property
    def total_handovers(self) -> int:
        return sum(self.handovers.values())

    @property
    def total_overhead(self) -> float:
        return math.fsum(self.overhead.values())

    def overhead_rate(self, kind: HandoverKind | str | None = None) -> float:
        if kind is None:
            return self.total_overhead / self.horizon
        return self.overhead.get(HandoverKind(kind).value, 0.0) / self.horizon

    @property
    def handovers_per_session(self) -> float:
        return self.total_handovers / self.n_sessions if self.n_sessions else float("nan")


def kind_costs(config: SimConfig, procedure: Procedure | None = None) -> dict[HandoverKind, tuple[float, float]]:
    """(processing, transmitting) overhead of one handover of each kind."""
    procedure = Procedure(procedure or config.procedure)
    return {k: overhead_breakdown(build_trace(k, procedure), config.overhead)
            for k in KINDS if config.mix.get(k, 0.0) > 0}


def analytic_overhead_rate(config: SimConfig, kind: HandoverKind | None = None) -> float:
    """Expected overhead rate, with gated MRRH-to-small-cell costs scaled by the pass probability."""
    costs = {k: sum(v) for k, v in kind_costs(config).items()}
    if config.procedure is Procedure.FRAN and config.gate_enabled:
        for k in costs:
            if k.macro_to_small:
                costs[k] *= 1.0 - config.p_gated()
    if kind is not None:
        costs = {k: (c if k is HandoverKind(kind) else 0.0) for k, c in costs.items()}
    mix = {k: p for k, p in config.mix.items() if p > 0}
    return expected_overhead_rate(config.session, costs, mix)


def _fill_counts(rec: ReplicationRecord, config: SimConfig, executed, gated, s1, s2, fast):
    costs = kind_costs(config)
    rec.handovers = {k.value: int(executed[i]) for i, k in enumerate(KINDS) if k in costs}
    rec.gated = {k.value: int(gated[i]) for i, k in enumerate(KINDS) if k in costs}
    rec.fast_handovers = {k.value: int(fast[i]) for i, k in enumerate(KINDS) if k in costs}
    rec.scenario1, rec.scenario2 = int(np.sum(s1)), int(np.sum(s2))
    rec.overhead = {k.value: executed[i] * sum(costs[k]) for i, k in enumerate(KINDS) if k in costs}
    rec.processing_overhead = math.fsum(executed[i] * costs[k][0] for i, k in enumerate(KINDS) if k in costs)
    rec.transmitting_overhead = math.fsum(executed[i] * costs[k][1] for i, k in enumerate(KINDS) if k in costs)


# -- event engine --------------------------------------------------------------

class EventKind(enum.Enum):
    SESSION_ARRIVAL = "session_arrival"
    SESSION_END = "session_end"
    BOUNDARY_CROSSING = "boundary_crossing"
    SNAPSHOT = "snapshot"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    subject: int


class EventQueue:
    """Min-heap of events keyed by time, ties in insertion order."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0

    def push(self, event: Event) -> None:
        if event.time < 0:
            raise ValueError("event time must be >= 0")
        heapq.heappush(self._heap, (event.time, self._seq, event))
        self._seq += 1

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[2]

    def __len__(self):
        return len(self._heap)


def _run_events(draws: SessionDraws, config: SimConfig, snapshot_times: Sequence[float],
                on_snapshot: Callable[[int], None], log: list | None):
    n_kinds = len(KINDS)
    executed, gated, s1, s2, fast = (np.zeros(n_kinds, np.int64) for _ in range(5))
    starts = np.cumsum(draws.n_cross) - draws.n_cross
    crossed = np.zeros(len(draws.arrival), np.int64)
    q = EventQueue()
    for i, t in enumerate(snapshot_times):
        q.push(Event(t, EventKind.SNAPSHOT, i))
    for i, t in enumerate(draws.arrival):
        q.push(Event(float(t), EventKind.SESSION_ARRIVAL, i))
    gate_on = config.procedure is Procedure.FRAN and config.gate_enabled
    while q:
        ev = q.pop()
        if log is not None:
            log.append(ev)
        if ev.kind is EventKind.SNAPSHOT:
            on_snapshot(ev.subject)
        elif ev.kind is EventKind.SESSION_ARRIVAL:
            i = ev.subject
            for j in range(draws.n_cross[i]):
                q.push(Event(ev.time + float(draws.offsets[starts[i] + j]), EventKind.BOUNDARY_CROSSING, i))
            q.push(Event(ev.time + float(draws.holding[i]), EventKind.SESSION_END, i))
        elif ev.kind is EventKind.BOUNDARY_CROSSING:
            i = ev.subject
            j = crossed[i]
            crossed[i] += 1
            c = int(draws.kinds[starts[i] + j])
            speed = float(draws.speed[i])
            if gate_on and not speed_gate(speed, config.speed_threshold, KINDS[c], config.procedure):
                gated[c] += 1
                continue
            executed[c] += 1
            (s2 if j == 0 else s1)[c] += 1
            if speed > config.speed_threshold:
                fast[c] += 1
    return executed, gated, s1, s2, fast


# -- replication ---------------------------------------------------------------

SCHEMES = tuple(s.value for s in Scheme)


def _snapshot(config: SimConfig, rng: np.random.Generator, rec: ReplicationRecord,
              totals: dict[str, list[float]]) -> None:
    """One drop: a fresh topology and channel, then all three schemes on it."""
    topology = generate_topology(config.topology, rng)
    channel = draw_channel(topology, config.channel, rng)
    for scheme in Scheme:
        res = run_baseline(scheme, topology, channel, config.channel, config.utility, config.grid,
                           config.max_iters, config.eps)
        totals[scheme.value].append(res.total_net_utility)
        if scheme is Scheme.NON_FRAN:
            continue
        rec.games += 1
        rec.monotone_violations += res.monotone_violations
        if res.converged:
            rec.converged += 1
            rec.ne_verified += verify_ne(res, channel, config.utility, config.channel, topology,
                                         eps=config.eps)


def run_replication(config: SimConfig, seed: int, *, engine: str = "kernel",
                    handover: bool = True, utility: bool = True,
                    event_log: list | None = None) -> ReplicationRecord:
    """One independent replication; deterministic in ``(config, seed)``."""
    if engine not in ("kernel", "events"):
        raise ConfigError(f"unknown engine {engine!r}")
    sess_ss, snap_ss = np.random.SeedSequence(seed).spawn(2)
    rec = ReplicationRecord(int(seed), config.horizon, config.procedure.value)
    n_snap = config.n_snapshots if utility else 0
    totals: dict[str, list[float]] = {s: [] for s in SCHEMES}
    snap_rngs = [np.random.default_rng(s) for s in snap_ss.spawn(n_snap)]

    def on_snapshot(i: int) -> None:
        _snapshot(config, snap_rngs[i], rec, totals)

    if handover:
        draws = draw_sessions(np.random.default_rng(sess_ss), config)
        rec.n_sessions = len(draws.arrival)
        if rec.n_sessions:
            rec.mean_interarrival = float(np.mean(np.diff(draws.arrival, prepend=0.0)))
        rec.crossings = int(np.sum(draws.n_cross))
    if engine == "events":
        times = [config.horizon * (i + 1) / (n_snap + 1) for i in range(n_snap)]
        if handover:
            counts = _run_events(draws, config, times, on_snapshot, event_log)
        else:
            empty = SessionDraws(*(np.empty(0, dtype=t) for t in (float, float, float, np.int64, float, np.int64)))
            _run_events(empty, config, times, on_snapshot, event_log)
    else:
        if handover:
            gate_kinds = np.array([k.macro_to_small for k in KINDS])
            gate_on = config.procedure is Procedure.FRAN and config.gate_enabled
            counts = kernels.session_counts(draws.n_cross, draws.speed > config.speed_threshold,
                                            draws.kinds, gate_kinds, gate_on, len(KINDS))
        for i in range(n_snap):
            on_snapshot(i)
    if handover:
        _fill_counts(rec, config, *counts)
    rec.utility = {s: float(np.mean(v)) for s, v in totals.items() if v}
    return rec


# -- experiments ---------------------------------------------------------------

def derive_seed(base: int, point: int, replication: int) -> int:
    """Seed for one replication at one sweep point (SeedSequence spawn-key counter)."""
    ss = np.random.SeedSequence(base, spawn_key=(point, replication))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class MetricRow:
    sweep_param: str
    sweep_value: float
    variant: str
    metric: str
    mean: float
    std_err: float
    n_reps: int


@dataclass
class MetricsReport:
    rows: list[MetricRow] = field(default_factory=list)
    records: dict[tuple[float, str], list[ReplicationRecord]] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def series(self, variant: str, metric: str | None = None) -> list[MetricRow]:
        return [r for r in self.rows if r.variant == variant and (metric is None or r.metric == metric)]

    def variants(self) -> list[str]:
        return list(dict.fromkeys(r.variant for r in self.rows))

    def extend(self, other: "MetricsReport", prefix: str = "", suffix: str = "") -> None:
        self.rows.extend(replace(r, variant=prefix + r.variant + suffix) for r in other.rows)
        for (v, group), recs in other.records.items():
            self.records[(v, prefix + group + suffix)] = recs


def mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) >= 2 else float("nan")
    return float(np.mean(x)), se


def run_experiment(config: SimConfig, param: str, values: Sequence[float], *,
                   procedures: Sequence[Procedure | str] = (Procedure.FRAN, Procedure.NON_FRAN),
                   kinds: Sequence[HandoverKind | str] = (HandoverKind.FAP_TO_FAP, HandoverKind.FAP_TO_MRRH),
                   progress: Callable[[str], None] | None = None) -> MetricsReport:
    """Replicate every sweep point and aggregate.

    Handover sweeps report ``overhead_rate`` per ``procedure/kind`` variant;
    utility sweeps report ``total_net_utility`` per scheme. Replication ``r``
    at point ``i`` uses ``derive_seed(config.seed, i, r)`` for every variant,
    so variants at one point share their random draws.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    report = MetricsReport(metadata={"sweep_param": param})
    for i, value in enumerate(values):
        point = config.with_param(param, value)
        seeds = [derive_seed(config.seed, i, r) for r in range(config.replications)]
        if param in HANDOVER_PARAMS:
            for proc in map(Procedure, procedures):
                cfg = replace(point, procedure=proc)
                recs = [run_replication(cfg, s, utility=False) for s in seeds]
                report.records[(float(value), proc.value)] = recs
                for kind in map(HandoverKind, kinds):
                    m, se = mean_and_se([r.overhead_rate(kind) for r in recs])
                    report.rows.append(MetricRow(param, float(value), f"{proc.value}/{kind.value}",
                                                 "overhead_rate", m, se, len(recs)))
        else:
            recs = [run_replication(point, s, handover=False) for s in seeds]
            report.records[(float(value), "utility")] = recs
            for scheme in SCHEMES:
                m, se = mean_and_se([r.utility[scheme] for r in recs])
                report.rows.append(MetricRow(param, float(value), scheme, "total_net_utility",
                                             m, se, len(recs)))
        if progress:
            progress(f"{param}={value}: {config.replications} replications done")
    return report
