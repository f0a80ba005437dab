"""Quorum-based read/write/repair coordination for regenerating-coded storage.

The library models a coded file abstractly (parameters plus an update
footprint), places chunks on nodes, and simulates the voting and locking
protocol with a deterministic discrete-event engine.  Closed-form availability
and queueing formulas live in :mod:`regenquorum.analysis`.
"""
from .code_model import CodeParams, FootprintMatrix, QuorumValues, gifford_check, quorum_values, validate_params
from .config import load_config, parse_config
from .placement import PlacementMap, assign, build_groups
from .routing import Topology, pick_read_nodes, write_distance_table
from .scheduler import DeadlockConfig, SlotPolicy
from .sim_engine import ConfigError, SimConfig, Simulation, WorkloadParams, backlog_experiment, run, run_mm1
from .trace import Metrics, SimTrace, record_metrics, trace_check

__all__ = [
    "CodeParams", "FootprintMatrix", "QuorumValues", "gifford_check", "quorum_values", "validate_params",
    "load_config", "parse_config", "PlacementMap", "assign", "build_groups", "Topology",
    "pick_read_nodes", "write_distance_table", "DeadlockConfig", "SlotPolicy", "ConfigError", "SimConfig", "Simulation",
    "WorkloadParams", "backlog_experiment", "run", "run_mm1", "Metrics", "SimTrace", "record_metrics",
    "trace_check",
]
