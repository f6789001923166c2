"""Network topology and the uplink channel model.

Node ids: the MRRH is receiver 0, F-APs are receivers ``1..n_faps``; F-UEs
are numbered ``0..n_fues-1`` independently. Gains are stored as a dense
array ``gains[fue, rx, subchannel]`` since every F-UE is heard by every
receiver on every subchannel in a co-channel deployment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError

if TYPE_CHECKING:
    from .game import Allocation

MRRH = 0
MIN_DISTANCE = 1.0  # metres; clamps the d**-gamma singularity


def thermal_noise(bandwidth: float, dbm_per_hz: float = -174.0) -> float:
    """Thermal noise power in watts over ``bandwidth`` Hz."""
    return 10.0 ** ((dbm_per_hz - 30.0) / 10.0) * bandwidth


@dataclass(frozen=True)
class FAP:
    id: int
    position: tuple[float, float]
    radius: float
    cache_hit_ratio: float


@dataclass(frozen=True)
class FUE:
    id: int
    position: tuple[float, float]
    serving_node: int
    speed: float


@dataclass(frozen=True)
class Topology:
    mrrh_position: tuple[float, float]
    mrrh_radius: float
    faps: tuple[FAP, ...]
    fues: tuple[FUE, ...]

    def __post_init__(self):
        if self.mrrh_radius <= 0:
            raise ConfigError("mrrh_radius must be > 0")
        ids = [f.id for f in self.faps]
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigError("F-AP ids must be 1..n_faps in order")
        if [u.id for u in self.fues] != list(range(len(self.fues))):
            raise ConfigError("F-UE ids must be 0..n_fues-1 in order")
        for fap in self.faps:
            if fap.radius <= 0:
                raise ConfigError(f"F-AP {fap.id}: radius must be > 0")
            if not 0.0 <= fap.cache_hit_ratio <= 1.0:
                raise ConfigError(f"F-AP {fap.id}: cache_hit_ratio outside [0, 1]")
            if _dist(fap.position, self.mrrh_position) > self.mrrh_radius * (1 + 1e-12):
                raise ConfigError(f"F-AP {fap.id} lies outside the MRRH disc")
        for ue in self.fues:
            if ue.serving_node == MRRH:
                centre, radius = self.mrrh_position, self.mrrh_radius
            elif 1 <= ue.serving_node <= len(self.faps):
                fap = self.faps[ue.serving_node - 1]
                centre, radius = fap.position, fap.radius
            else:
                raise ConfigError(f"F-UE {ue.id}: unknown serving node {ue.serving_node}")
            if _dist(ue.position, centre) > radius * (1 + 1e-12):
                raise ConfigError(f"F-UE {ue.id} lies outside its server's disc")

    @property
    def n_rx(self) -> int:
        return len(self.faps) + 1

    def servers(self) -> np.ndarray:
        return np.array([u.serving_node for u in self.fues], dtype=np.int64)

    def cache_hit(self, fue: int) -> float:
        """Cache-hit ratio of the F-UE's serving F-AP (0 when MRRH-served)."""
        node = self.fues[fue].serving_node
        return 0.0 if node == MRRH else self.faps[node - 1].cache_hit_ratio

    def fues_of(self, node: int) -> list[int]:
        return [u.id for u in self.fues if u.serving_node == node]

    def rx_positions(self) -> np.ndarray:
        return np.array([self.mrrh_position] + [f.position for f in self.faps], dtype=float)

    def distances(self) -> np.ndarray:
        """Clamped F-UE to receiver distances, shape ``(n_fues, n_rx)``."""
        ue = np.array([u.position for u in self.fues], dtype=float).reshape(-1, 2)
        rx = self.rx_positions()
        d = np.hypot(ue[:, None, 0] - rx[None, :, 0], ue[:, None, 1] - rx[None, :, 1])
        return np.maximum(d, MIN_DISTANCE)


def _dist(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class TopologyConfig:
    mrrh_radius: float = 500.0
    n_faps: int = 10
    n_fues_per_fap: int = 4
    n_macro_fues: int = 4
    fap_radius: float = 30.0
    speed_low: float = 1.5
    speed_high: float = 20.0
    p_high_speed: float = 0.2
    cache_hit_min: float = 0.2
    cache_hit_max: float = 0.8
    min_fap_distance: float = 100.0

    def validate(self) -> None:
        if self.mrrh_radius <= 0:
            raise ConfigError("topology.mrrh_radius must be > 0")
        if self.fap_radius <= 0:
            raise ConfigError("topology.fap_radius must be > 0")
        if self.fap_radius > self.mrrh_radius:
            raise ConfigError("topology.fap_radius must not exceed topology.mrrh_radius")
        for name in ("n_faps", "n_fues_per_fap", "n_macro_fues"):
            if getattr(self, name) < 0:
                raise ConfigError(f"topology.{name} must be >= 0")
        if not 0.0 <= self.min_fap_distance < self.mrrh_radius:
            raise ConfigError("topology.min_fap_distance must lie in [0, mrrh_radius)")
        if not 0 <= self.speed_low <= self.speed_high:
            raise ConfigError("topology.speed_low/speed_high must satisfy 0 <= low <= high")
        if not 0.0 <= self.p_high_speed <= 1.0:
            raise ConfigError("topology.p_high_speed must lie in [0, 1]")
        if not 0.0 <= self.cache_hit_min <= self.cache_hit_max <= 1.0:
            raise ConfigError("topology.cache_hit_min/max must satisfy 0 <= min <= max <= 1")


def uniform_disc(rng: np.random.Generator, n: int, radius: float,
                 centre: Sequence[float] = (0.0, 0.0), inner: float = 0.0) -> np.ndarray:
    """``n`` points uniform over a disc, or the annulus ``inner <= r <= radius``."""
    r = np.sqrt(inner ** 2 + (radius ** 2 - inner ** 2) * rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack((centre[0] + r * np.cos(theta), centre[1] + r * np.sin(theta)))


def generate_topology(config: TopologyConfig, rng: np.random.Generator) -> Topology:
    config.validate()
    fap_xy = uniform_disc(rng, config.n_faps, config.mrrh_radius, inner=config.min_fap_distance)
    hit = rng.uniform(config.cache_hit_min, config.cache_hit_max, config.n_faps)
    faps = tuple(
        FAP(i + 1, (float(x), float(y)), config.fap_radius, float(q))
        for i, ((x, y), q) in enumerate(zip(fap_xy, hit))
    )
    placed: list[tuple[np.ndarray, int]] = []
    for fap in faps:
        pts = uniform_disc(rng, config.n_fues_per_fap, fap.radius, fap.position)
        placed.extend((p, fap.id) for p in pts)
    macro = uniform_disc(rng, config.n_macro_fues, config.mrrh_radius)
    placed.extend((p, MRRH) for p in macro)
    fast = rng.random(len(placed)) < config.p_high_speed
    fues = tuple(
        FUE(i, (float(p[0]), float(p[1])), node,
            config.speed_high if fast[i] else config.speed_low)
        for i, (p, node) in enumerate(placed)
    )
    return Topology((0.0, 0.0), config.mrrh_radius, faps, fues)


@dataclass(frozen=True)
class ChannelParams:
    pathloss_exponent: float = 3.76
    reference_gain: float = 1e-3  # -30 dB at 1 m
    bandwidth: float = 180e3
    n_subchannels: int = 16
    noise_power: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.noise_power is None:
            object.__setattr__(self, "noise_power", thermal_noise(self.bandwidth))
        self.validate()

    def validate(self) -> None:
        if not self.pathloss_exponent > 2:
            raise ConfigError("channel.pathloss_exponent must be > 2")
        if not self.reference_gain > 0:
            raise ConfigError("channel.reference_gain must be > 0")
        if not self.noise_power > 0:
            raise ConfigError("channel.noise_power must be > 0")
        if not self.bandwidth > 0:
            raise ConfigError("channel.bandwidth must be > 0")
        if self.n_subchannels < 1:
            raise ConfigError("channel.n_subchannels must be >= 1")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    gains: np.ndarray  # (n_fues, n_rx, n_subchannels), linear power gain

    def __post_init__(self):
        self.gains.setflags(write=False)

    def gain(self, tx: int, rx: int, subchannel: int) -> float:
        return float(self.gains[tx, rx, subchannel])

    @property
    def n_subchannels(self) -> int:
        return self.gains.shape[2]


def pathloss(distance, params: ChannelParams):
    d = np.maximum(distance, MIN_DISTANCE)
    return params.reference_gain * d ** (-params.pathloss_exponent)


def draw_channel(topology: Topology, params: ChannelParams,
                 rng: np.random.Generator) -> ChannelRealization:
    """Path loss times an independent exponential(1) Rayleigh power fade per link and subchannel."""
    mean = pathloss(topology.distances(), params)
    fading = rng.standard_exponential((len(topology.fues), topology.n_rx, params.n_subchannels))
    return ChannelRealization(mean[:, :, None] * fading)


def sinr(fue: int, subchannel: int, allocation: "Allocation", channel: ChannelRealization,
         params: ChannelParams, topology: Topology) -> float:
    """Uplink SINR of ``fue`` at its serving node on ``subchannel``.

    Every other F-UE transmitting on the same subchannel anywhere in the
    network counts as interference.
    """
    if (fue, subchannel) not in allocation.power_of:
        raise ContractError(f"F-UE {fue} is not assigned subchannel {subchannel}")
    server = topology.fues[fue].serving_node
    own = allocation.power(fue, subchannel) * channel.gain(fue, server, subchannel)
    interference = 0.0
    for (u, k) in allocation.power_of:
        if k == subchannel and u != fue:
            interference += allocation.power(u, k) * channel.gain(u, server, k)
    return own / (params.noise_power + interference)


def rate(sinr_value: float, params: ChannelParams) -> float:
    """Shannon rate in bit/s on one subchannel."""
    if sinr_value < 0:
        raise ContractError(f"negative SINR {sinr_value!r}")
    return params.bandwidth * math.log2(1.0 + sinr_value)


# -- text dumps --------------------------------------------------------------

TOPOLOGY_COLUMNS = ("kind", "id", "x", "y", "radius_or_server", "extra")
CHANNEL_COLUMNS = ("tx", "rx", "subchannel", "gain")


def dump_topology(topology: Topology) -> str:
    """Tab-separated node records, columns as in ``TOPOLOGY_COLUMNS``.

    ``extra`` holds the cache-hit ratio for F-APs and the speed for F-UEs.
    """
    rows: list[Iterable[object]] = [TOPOLOGY_COLUMNS]
    x, y = topology.mrrh_position
    rows.append(("MRRH", MRRH, repr(x), repr(y), repr(topology.mrrh_radius), ""))
    for f in topology.faps:
        rows.append(("FAP", f.id, repr(f.position[0]), repr(f.position[1]),
                     repr(f.radius), repr(f.cache_hit_ratio)))
    for u in topology.fues:
        rows.append(("FUE", u.id, repr(u.position[0]), repr(u.position[1]),
                     u.serving_node, repr(u.speed)))
    return "\n".join("\t".join(str(c) for c in row) for row in rows) + "\n"


def dump_channel(channel: ChannelRealization) -> str:
    """One tab-separated line per (tx, rx, subchannel) gain."""
    lines = ["\t".join(CHANNEL_COLUMNS)]
    for (t, r, k), g in np.ndenumerate(channel.gains):
        lines.append(f"{t}\t{r}\t{k}\t{float(g)!r}")
    return "\n".join(lines) + "\n"


def load_channel(text: str) -> ChannelRealization:
    rows = [ln.split("\t") for ln in text.strip().splitlines()[1:]]
    idx = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in rows], dtype=np.int64)
    shape = tuple(idx.max(axis=0) + 1)
    gains = np.zeros(shape)
    gains[idx[:, 0], idx[:, 1], idx[:, 2]] = [float(r[3]) for r in rows]
    return ChannelRealization(gains)
