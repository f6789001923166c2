"""TOML configuration: sections mirror ``SimConfig``; every key is optional.

Example::

    [simulation]
    horizon = 2e5
    replications = 30
    procedure = "fran"

    [session]
    arrival_rate = 0.1
    mean_holding_time = 5.0
    # residence_rate defaults to the fluid-flow rate of an F-AP cell

    [mix]
    "FAP->FAP" = 0.5
    "FAP->MRRH" = 0.3
    "MRRH->FAP" = 0.2

    [topology]      # TopologyConfig fields
    [channel]       # ChannelParams fields
    [utility]       # UtilityParams fields
    [power]         # p_min, p_max, n_levels, or an explicit levels list
    [overhead.processing]   # entity name -> cost, e.g. "MME-Core" = 8
    [overhead.links]        # link kind -> cost, e.g. gateway_core = 6

    [experiment]    # optional sweep overrides
    values = [0.02, 0.1]
    n_faps = [10, 20]
    sweep_param = "arrival_rate"   # custom experiments only
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import ChannelParams, TopologyConfig
from .errors import ConfigError
from .game import PowerGrid, UtilityParams
from .handover import DEFAULT_LINKS, DEFAULT_PROCESSING, Entity, HandoverKind, LinkKind, OverheadProfile, \
    Procedure, SessionModel
from .sim import SWEEP_PARAMS, SimConfig, default_residence_rate

SIMULATION_KEYS = ("horizon", "seed", "replications", "n_snapshots", "procedure",
                   "speed_threshold", "gate_enabled", "max_iters", "eps")
SESSION_KEYS = ("arrival_rate", "mean_holding_time", "residence_rate")
POWER_KEYS = ("p_min", "p_max", "n_levels", "levels")
EXPERIMENT_KEYS = ("sweep_param", "values", "n_faps", "procedures", "kinds")
SECTIONS = ("simulation", "session", "mix", "topology", "channel", "utility", "power",
            "overhead", "experiment")


@dataclass(frozen=True)
class ExperimentOverrides:
    sweep_param: str | None = None
    values: tuple[float, ...] | None = None
    n_faps: tuple[int, ...] | None = None
    procedures: tuple[str, ...] | None = None
    kinds: tuple[str, ...] | None = None


def _check_keys(section: str, table: dict, allowed) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")


def _number(section: str, key: str, value: Any, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be finite")
    return float(value)


def _typed(section: str, table: dict, cls) -> dict:
    """Coerce a table onto a dataclass's fields, using the defaults' types."""
    defaults = cls()
    allowed = {f.name for f in fields(cls)}
    _check_keys(section, table, allowed)
    out = {}
    for key, value in table.items():
        default = getattr(defaults, key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{section}.{key} must be true or false")
            out[key] = value
        else:
            out[key] = _number(section, key, value, int if isinstance(default, int) else float)
    return out


def _kind(name: str) -> HandoverKind:
    for k in HandoverKind:
        if name in (k.value, k.name, k.name.lower()):
            return k
    raise ConfigError(f"unknown handover kind {name!r} in [mix]")


def _overhead(table: dict) -> OverheadProfile:
    _check_keys("overhead", table, ("processing", "links"))
    processing, links = dict(DEFAULT_PROCESSING), dict(DEFAULT_LINKS)
    for sub, target, enum_cls in (("processing", processing, Entity), ("links", links, LinkKind)):
        part = table.get(sub, {})
        _check_keys(f"overhead.{sub}", part, {e.value for e in enum_cls})
        for key, value in part.items():
            target[enum_cls(key)] = _number(f"overhead.{sub}", f'"{key}"', value)
    return OverheadProfile(processing, links)


def _power(table: dict) -> PowerGrid:
    _check_keys("power", table, POWER_KEYS)
    if "levels" in table:
        if set(table) - {"levels"}:
            raise ConfigError("power.levels cannot be combined with p_min/p_max/n_levels")
        if not isinstance(table["levels"], list):
            raise ConfigError("power.levels must be a list of numbers")
        return PowerGrid([_number("power", "levels", v) for v in table["levels"]])
    p_min = _number("power", "p_min", table.get("p_min", 1e-3))
    p_max = _number("power", "p_max", table.get("p_max", 0.2))
    n = _number("power", "n_levels", table.get("n_levels", 10), int)
    if not 0 < p_min < p_max:
        raise ConfigError("power.p_min/p_max must satisfy 0 < p_min < p_max")
    if n < 2:
        raise ConfigError("power.n_levels must be >= 2")
    return PowerGrid.logarithmic(p_min, p_max, n)


def _experiment(table: dict) -> ExperimentOverrides:
    _check_keys("experiment", table, EXPERIMENT_KEYS)
    param = table.get("sweep_param")
    if param is not None and param not in SWEEP_PARAMS:
        raise ConfigError(f"experiment.sweep_param must be one of {SWEEP_PARAMS}, got {param!r}")

    def seq(key, kind):
        if key not in table:
            return None
        v = table[key]
        if not isinstance(v, list) or not v:
            raise ConfigError(f"experiment.{key} must be a nonempty list")
        return tuple(kind(x) for x in v)

    procedures = seq("procedures", str)
    for p in procedures or ():
        if p not in {x.value for x in Procedure}:
            raise ConfigError(f"experiment.procedures: unknown procedure {p!r}")
    kinds = seq("kinds", lambda s: _kind(s).value)
    values = seq("values", lambda x: _number("experiment", "values", x))
    n_faps = seq("n_faps", lambda x: _number("experiment", "n_faps", x, int))
    if n_faps and any(n < 1 for n in n_faps):
        raise ConfigError("experiment.n_faps entries must be >= 1")
    return ExperimentOverrides(param, values, n_faps, procedures, kinds)


def config_from_dict(data: dict) -> tuple[SimConfig, ExperimentOverrides]:
    """Build a validated config from parsed TOML; invalid values raise ``ConfigError`` naming the key."""
    for section in data:
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    kwargs: dict[str, Any] = {}

    sim = data.get("simulation", {})
    _check_keys("simulation", sim, SIMULATION_KEYS)
    for key, value in sim.items():
        if key == "procedure":
            try:
                kwargs[key] = Procedure(value)
            except ValueError:
                raise ConfigError(f"simulation.procedure must be 'fran' or 'non_fran', got {value!r}") from None
        elif key == "gate_enabled":
            if not isinstance(value, bool):
                raise ConfigError("simulation.gate_enabled must be true or false")
            kwargs[key] = value
        else:
            kind = int if key in ("seed", "replications", "n_snapshots", "max_iters") else float
            kwargs[key] = _number("simulation", key, value, kind)
    if "seed" in kwargs and kwargs["seed"] < 0:
        raise ConfigError("simulation.seed must be >= 0")

    topology = TopologyConfig(**_typed("topology", data.get("topology", {}), TopologyConfig))
    topology.validate()
    kwargs["topology"] = topology
    kwargs["channel"] = ChannelParams(**_typed("channel", data.get("channel", {}), ChannelParams))
    kwargs["utility"] = UtilityParams(**_typed("utility", data.get("utility", {}), UtilityParams))
    kwargs["grid"] = _power(data.get("power", {}))
    kwargs["overhead"] = _overhead(data.get("overhead", {}))

    sess = data.get("session", {})
    _check_keys("session", sess, SESSION_KEYS)
    s = {k: _number("session", k, v) for k, v in sess.items()}
    s.setdefault("residence_rate", default_residence_rate(topology))
    kwargs["session"] = SessionModel(**{"arrival_rate": 0.1, "mean_holding_time": 5.0, **s})

    if "mix" in data:
        mix = data["mix"]
        if not isinstance(mix, dict) or not mix:
            raise ConfigError("[mix] must be a nonempty table")
        kwargs["mix"] = {_kind(k): _number("mix", f'"{k}"', v) for k, v in mix.items()}

    return SimConfig(**kwargs), _experiment(data.get("experiment", {}))


def parse_config(path: str | Path) -> SimConfig:
    """Read and validate a TOML config file. A missing file raises ``FileNotFoundError``."""
    return load_config(path)[0]


def load_config(path: str | Path) -> tuple[SimConfig, ExperimentOverrides]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    return config_from_dict(data)


def with_overrides(config: SimConfig, *, seed: int | None = None, replications: int | None = None) -> SimConfig:
    changes = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed must be >= 0")
        changes["seed"] = seed
    if replications is not None:
        changes["replications"] = replications
    return replace(config, **changes) if changes else config
