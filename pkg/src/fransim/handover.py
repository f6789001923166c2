"""Handover signalling procedures and overhead accounting.

Each procedure is a frozen table of messages. A message is a path of
entities: the first element sends, the last receives, anything in between
relays. A one-element path is a processing-only step (e.g. admission
control) that touches no link.

The FRAN tables keep handover decision at the F-AP / F-AP gateway and keep
data forwarding off the core. The non-FRAN tables are built so every FRAN
message is still present (possibly with its path extended to or from the
MME), plus extra core round trips; per-entity and per-link usage counts of a
non-FRAN trace therefore dominate the FRAN counts, with strictly more MME
processing.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from .errors import ConfigError


class Entity(str, enum.Enum):
    FUE = "F-UE"
    FAP = "F-AP"
    SRRH = "SRRH"
    MRRH = "MRRH"
    GATEWAY = "FAP-Gateway"
    BBU = "BBU-Pool"
    MME = "MME-Core"


class LinkKind(str, enum.Enum):
    RADIO = "radio"            # F-UE <-> F-AP / SRRH / MRRH
    FAP_GATEWAY = "fap_gateway"  # F-AP or SRRH <-> gateway
    MRRH_BBU = "mrrh_bbu"
    GATEWAY_CORE = "gateway_core"
    GATEWAY_BBU = "gateway_bbu"
    BBU_CORE = "bbu_core"


class Procedure(str, enum.Enum):
    FRAN = "fran"
    NON_FRAN = "non_fran"


class HandoverKind(str, enum.Enum):
    FAP_TO_FAP = "FAP->FAP"
    FAP_TO_MRRH = "FAP->MRRH"
    MRRH_TO_FAP = "MRRH->FAP"
    SRRH_TO_SRRH = "SRRH->SRRH"
    SRRH_TO_MRRH = "SRRH->MRRH"
    MRRH_TO_SRRH = "MRRH->SRRH"

    @property
    def macro_to_small(self) -> bool:
        return self in (HandoverKind.MRRH_TO_FAP, HandoverKind.MRRH_TO_SRRH)


_SMALL = (Entity.FAP, Entity.SRRH)


def link_kind(a: Entity, b: Entity) -> LinkKind:
    """Classify a hop; raises for entity pairs with no physical link."""
    pair = {a, b}
    if Entity.FUE in pair:
        other = (pair - {Entity.FUE}) or {Entity.FUE}
        if other.pop() in (*_SMALL, Entity.MRRH):
            return LinkKind.RADIO
    elif Entity.GATEWAY in pair and pair & set(_SMALL) and len(pair) == 2:
        return LinkKind.FAP_GATEWAY
    elif pair == {Entity.MRRH, Entity.BBU}:
        return LinkKind.MRRH_BBU
    elif pair == {Entity.GATEWAY, Entity.MME}:
        return LinkKind.GATEWAY_CORE
    elif pair == {Entity.GATEWAY, Entity.BBU}:
        return LinkKind.GATEWAY_BBU
    elif pair == {Entity.BBU, Entity.MME}:
        return LinkKind.BBU_CORE
    raise ValueError(f"no link between {a.value} and {b.value}")


@dataclass(frozen=True)
class Message:
    name: str
    src: Entity
    dst: Entity
    via: tuple[Entity, ...] = ()

    @property
    def path(self) -> tuple[Entity, ...]:
        if self.src == self.dst and not self.via:
            return (self.src,)
        return (self.src, *self.via, self.dst)

    def hops(self) -> list[LinkKind]:
        p = self.path
        return [link_kind(a, b) for a, b in zip(p, p[1:])]


@dataclass(frozen=True)
class SignalingTrace:
    handover_kind: HandoverKind
    procedure: Procedure
    messages: tuple[Message, ...]
    highest_complexity: bool = False

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a trace needs at least one message")
        first = self.messages[0]
        if first.src != Entity.FUE:
            raise ValueError("a trace starts with the F-UE measurement report")
        for m in self.messages:
            m.hops()

    def processing_counts(self) -> Counter:
        return Counter(e for m in self.messages for e in m.path)

    def link_counts(self) -> Counter:
        return Counter(h for m in self.messages for h in m.hops())


UE, FAP, MRRH, GW, BBU, MME = (Entity.FUE, Entity.FAP, Entity.MRRH,
                               Entity.GATEWAY, Entity.BBU, Entity.MME)

# name, path
_TABLES: dict[tuple[HandoverKind, Procedure], tuple[tuple[str, tuple[Entity, ...]], ...]] = {
    (HandoverKind.FAP_TO_MRRH, Procedure.FRAN): (
        ("measurement_report", (UE, FAP)),
        ("handover_decision_request", (FAP, GW)),
        ("handover_decision_response", (GW, FAP)),
        ("handover_request", (FAP, GW, BBU, MRRH)),
        ("admission_control", (MRRH,)),
        ("handover_request_ack", (MRRH, BBU, GW, FAP)),
        ("rrc_reconfiguration", (FAP, UE)),
        ("reconfiguration_complete", (UE, MRRH)),
        ("data_forwarding", (FAP, GW, BBU, MRRH)),
        ("path_switch", (MRRH, BBU, GW)),
        ("ue_context_release", (GW, FAP)),
    ),
    (HandoverKind.FAP_TO_MRRH, Procedure.NON_FRAN): (
        ("measurement_report", (UE, FAP)),
        ("handover_required", (FAP, GW, MME)),
        ("handover_decision", (MME,)),
        ("handover_decision_response", (MME, GW, FAP)),
        ("handover_request", (FAP, GW, BBU, MRRH)),
        ("admission_query", (MRRH, BBU, MME)),
        ("admission_control", (MRRH,)),
        ("admission_decision", (MME,)),
        ("admission_response", (MME, BBU, MRRH)),
        ("handover_request_ack", (MRRH, BBU, GW, FAP)),
        ("rrc_reconfiguration", (FAP, UE)),
        ("reconfiguration_complete", (UE, MRRH)),
        ("data_forwarding", (FAP, GW, BBU, MRRH)),
        ("core_data_redirect", (MME, BBU, MRRH)),
        ("path_switch", (MRRH, BBU, GW, MME)),
        ("path_switch_ack", (MME, BBU, MRRH)),
        ("ue_context_release", (MME, GW, FAP)),
    ),
    (HandoverKind.FAP_TO_FAP, Procedure.FRAN): (
        ("measurement_report", (UE, FAP)),
        ("handover_decision_request", (FAP, GW)),
        ("handover_decision_response", (GW, FAP)),
        ("handover_request", (FAP, GW, FAP)),
        ("admission_control", (FAP,)),
        ("handover_request_ack", (FAP, GW, FAP)),
        ("rrc_reconfiguration", (FAP, UE)),
        ("reconfiguration_complete", (UE, FAP)),
        ("data_forwarding", (FAP, GW, FAP)),
        ("path_switch", (FAP, GW)),
        ("ue_context_release", (GW, FAP)),
    ),
    (HandoverKind.FAP_TO_FAP, Procedure.NON_FRAN): (
        ("measurement_report", (UE, FAP)),
        ("handover_required", (FAP, GW, MME)),
        ("handover_decision", (MME,)),
        ("handover_decision_response", (MME, GW, FAP)),
        ("handover_request", (FAP, GW, FAP)),
        ("admission_query", (FAP, GW, MME)),
        ("admission_control", (FAP,)),
        ("admission_decision", (MME,)),
        ("admission_response", (MME, GW, FAP)),
        ("handover_request_ack", (FAP, GW, FAP)),
        ("rrc_reconfiguration", (FAP, UE)),
        ("reconfiguration_complete", (UE, FAP)),
        ("data_forwarding", (FAP, GW, FAP)),
        ("core_data_redirect", (MME, GW, FAP)),
        ("path_switch", (FAP, GW, MME)),
        ("path_switch_ack", (MME, GW)),
        ("ue_context_release", (MME, GW, FAP)),
    ),
    # No direct MRRH to F-AP signalling exists: candidate discovery and every
    # request go through the BBU pool and the gateway.
    (HandoverKind.MRRH_TO_FAP, Procedure.FRAN): (
        ("measurement_report", (UE, MRRH)),
        ("candidate_discovery_request", (MRRH, BBU, GW)),
        ("candidate_discovery_response", (GW, BBU, MRRH)),
        ("measurement_configuration", (MRRH, UE)),
        ("candidate_measurement_report", (UE, MRRH)),
        ("handover_decision_request", (MRRH, BBU, GW)),
        ("handover_decision_response", (GW, BBU, MRRH)),
        ("handover_request", (MRRH, BBU, GW, FAP)),
        ("admission_control", (FAP,)),
        ("handover_request_ack", (FAP, GW, BBU, MRRH)),
        ("rrc_reconfiguration", (MRRH, UE)),
        ("reconfiguration_complete", (UE, FAP)),
        ("data_forwarding", (MRRH, BBU, GW, FAP)),
        ("path_switch", (FAP, GW)),
        ("ue_context_release", (GW, BBU, MRRH)),
    ),
    (HandoverKind.MRRH_TO_FAP, Procedure.NON_FRAN): (
        ("measurement_report", (UE, MRRH)),
        ("candidate_discovery_request", (MRRH, BBU, GW, MME)),
        ("candidate_discovery_response", (MME, GW, BBU, MRRH)),
        ("measurement_configuration", (MRRH, UE)),
        ("candidate_measurement_report", (UE, MRRH)),
        ("handover_required", (MRRH, BBU, GW, MME)),
        ("handover_decision", (MME,)),
        ("handover_decision_response", (MME, GW, BBU, MRRH)),
        ("handover_request", (MRRH, BBU, GW, FAP)),
        ("admission_query", (FAP, GW, MME)),
        ("admission_control", (FAP,)),
        ("admission_decision", (MME,)),
        ("admission_response", (MME, GW, FAP)),
        ("handover_request_ack", (FAP, GW, BBU, MRRH)),
        ("rrc_reconfiguration", (MRRH, UE)),
        ("reconfiguration_complete", (UE, FAP)),
        ("data_forwarding", (MRRH, BBU, GW, FAP)),
        ("core_data_redirect", (MME, GW, FAP)),
        ("path_switch", (FAP, GW, MME)),
        ("path_switch_ack", (MME, GW)),
        ("ue_context_release", (MME, GW, BBU, MRRH)),
    ),
}

_SRRH_ALIAS = {
    HandoverKind.SRRH_TO_SRRH: HandoverKind.FAP_TO_FAP,
    HandoverKind.SRRH_TO_MRRH: HandoverKind.FAP_TO_MRRH,
    HandoverKind.MRRH_TO_SRRH: HandoverKind.MRRH_TO_FAP,
}


@lru_cache(maxsize=None)
def build_trace(kind: HandoverKind | str, procedure: Procedure | str) -> SignalingTrace:
    """Canonical message sequence for one handover.

    SRRH handovers reuse the F-AP tables with the SRRH in place of the F-AP.
    MRRH to small-cell traces carry ``highest_complexity=True``.
    """
    kind, procedure = HandoverKind(kind), Procedure(procedure)
    base = _SRRH_ALIAS.get(kind, kind)
    rows = _TABLES[(base, procedure)]
    swap = {FAP: Entity.SRRH} if base is not kind else {}
    messages = tuple(
        Message(name, swap.get(p[0], p[0]), swap.get(p[-1], p[-1]),
                tuple(swap.get(e, e) for e in p[1:-1]))
        for name, p in rows
    )
    return SignalingTrace(kind, procedure, messages, highest_complexity=kind.macro_to_small)


def format_trace(trace: SignalingTrace) -> str:
    """Human-readable table: one line per message, ``name from via... to``."""
    lines = [f"# {trace.handover_kind.value} {trace.procedure.value}"
             + (" (highest complexity)" if trace.highest_complexity else "")]
    for m in trace.messages:
        lines.append("\t".join([m.name, m.src.value, *(v.value for v in m.via), m.dst.value]))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class OverheadProfile:
    processing: Mapping[Entity, float] = field(default_factory=lambda: dict(DEFAULT_PROCESSING))
    links: Mapping[LinkKind, float] = field(default_factory=lambda: dict(DEFAULT_LINKS))
    # off only for degenerate profiles such as all-zero costs; config files always check
    check_ordering: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "processing", {Entity(k): float(v) for k, v in self.processing.items()})
        object.__setattr__(self, "links", {LinkKind(k): float(v) for k, v in self.links.items()})
        for key, v in (*self.processing.items(), *self.links.items()):
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"overhead cost for {key.value} must be a finite value >= 0")
        mme = self.processing.get(Entity.MME)
        for e in (Entity.FUE, Entity.FAP):
            if self.check_ordering and mme is not None and e in self.processing and not self.processing[e] < mme:
                raise ConfigError(f"processing cost of {e.value} must be below that of {Entity.MME.value}")


DEFAULT_PROCESSING = {
    Entity.FUE: 1.0, Entity.FAP: 1.0, Entity.SRRH: 1.0, Entity.MRRH: 2.0,
    Entity.GATEWAY: 2.0, Entity.BBU: 4.0, Entity.MME: 8.0,
}
DEFAULT_LINKS = {
    LinkKind.RADIO: 1.0, LinkKind.FAP_GATEWAY: 2.0, LinkKind.MRRH_BBU: 4.0,
    LinkKind.GATEWAY_CORE: 6.0, LinkKind.GATEWAY_BBU: 4.0, LinkKind.BBU_CORE: 2.0,
}


def overhead_breakdown(trace: SignalingTrace, profile: OverheadProfile) -> tuple[float, float]:
    """(processing, transmitting) overhead of one handover."""
    processing = transmitting = 0.0
    for m in trace.messages:
        for e in m.path:
            try:
                processing += profile.processing[e]
            except KeyError:
                raise ConfigError(f"overhead profile has no processing cost for {e.value}") from None
        for h in m.hops():
            try:
                transmitting += profile.links[h]
            except KeyError:
                raise ConfigError(f"overhead profile has no link cost for {h.value}") from None
    return processing, transmitting


def trace_overhead(trace: SignalingTrace, profile: OverheadProfile) -> float:
    processing, transmitting = overhead_breakdown(trace, profile)
    return processing + transmitting


@dataclass(frozen=True)
class SessionModel:
    arrival_rate: float = 0.1
    mean_holding_time: float = 5.0
    residence_rate: float = 0.1

    def __post_init__(self):
        if not self.arrival_rate >= 0:
            raise ConfigError("session.arrival_rate must be >= 0")
        if not self.mean_holding_time > 0:
            raise ConfigError("session.mean_holding_time must be > 0")
        if not self.residence_rate >= 0:
            raise ConfigError("session.residence_rate must be >= 0")

    @property
    def holding_rate(self) -> float:
        return 1.0 / self.mean_holding_time


def fluid_flow_rate(speed: float, radius: float) -> float:
    """Cell-boundary crossing rate ``v L / (pi A)`` of a circular cell."""
    perimeter, area = 2.0 * math.pi * radius, math.pi * radius ** 2
    return speed * perimeter / (math.pi * area)


@dataclass(frozen=True)
class ScenarioProbabilities:
    p_s1: float  # expected scenario-1 handovers per session
    p_s2: float
    expected_handovers: float


def scenario_probabilities(session: SessionModel) -> ScenarioProbabilities:
    """Scenario split for exponential holding (rate mu) and residence (rate eta).

    A session's first crossing happens while active with probability
    eta / (eta + mu) (scenario 2); in total it crosses eta / mu times on
    average, the remainder being scenario 1.
    """
    eta, mu = session.residence_rate, session.holding_rate
    p_s2 = eta / (eta + mu)
    expected = eta / mu
    return ScenarioProbabilities(expected - p_s2, p_s2, expected)


def expected_overhead_rate(session: SessionModel, trace_costs: Mapping[HandoverKind, float],
                           mix: Mapping[HandoverKind, float]) -> float:
    total = math.fsum(mix.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"handover mix sums to {total!r}, not 1")
    per_handover = math.fsum(p * trace_costs[k] for k, p in mix.items() if p)
    return session.arrival_rate * scenario_probabilities(session).expected_handovers * per_handover


def speed_gate(speed: float, threshold: float, kind: HandoverKind | str,
               procedure: Procedure | str = Procedure.FRAN) -> bool:
    """Whether the handover may proceed; FRAN keeps fast F-UEs on the MRRH."""
    if not threshold > 0:
        raise ConfigError("speed threshold must be > 0")
    if Procedure(procedure) is Procedure.NON_FRAN:
        return True
    return not (HandoverKind(kind).macro_to_small and speed > threshold)
