"""Fog RAN simulator: handover signalling overhead and uplink resource allocation game."""
from .channel import ChannelParams, Topology, TopologyConfig, draw_channel, generate_topology
from .errors import ConfigError, ContractError, InfeasibleError
from .game import PowerGrid, Scheme, UtilityParams, iterate_to_ne, run_baseline, verify_ne
from .handover import HandoverKind, OverheadProfile, Procedure, SessionModel, build_trace, trace_overhead
from .sim import MetricsReport, SimConfig, analytic_overhead_rate, run_experiment, run_replication

__version__ = "0.1.0"
