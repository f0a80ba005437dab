"""INI scenario files.

Example::

    [code]
    N = 10
    n = 20
    k = 4
    d = 6
    alpha = 2
    beta = 1
    q = 6

    [footprint]
    mode = uniform      ; dense | uniform | file
    seed = 1

    [scheduler]
    slot_mode = time    ; time | count
    slot_value = 1.0
    t0 = 1.0

    [workload]
    lambda_r = 2
    lambda_w = 1
    mu_r = 3
    mu_w = 3

    [topology]
    shape = path        ; path | ring | edges (then: edges = 0-1 1-2 ...)

    [sim]
    message_delay = 0.05
    horizon = 200
    seed = 0
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .code_model import CodeParams, FootprintMatrix
from .routing import Topology
from .scheduler import DeadlockConfig, SlotPolicy
from .sim_engine import ConfigError, SimConfig, WorkloadParams

OUTPUT_ENV = "REGENQUORUM_OUT"


@dataclass
class Scenario:
    sim: SimConfig
    output_dir: Path
    source: Optional[Path] = None


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp

    def raw(self, section: str, field: str, default=None, required: bool = False):
        if self.cp.has_option(section, field):
            return self.cp.get(section, field).strip()
        if required:
            raise ConfigError(f"{section}.{field}: missing required field")
        return default

    def num(self, section, field, cast=float, default=None, required=False):
        v = self.raw(section, field, None, required)
        if v is None:
            return default
        try:
            return cast(v)
        except ValueError:
            raise ConfigError(f"{section}.{field}: cannot read {v!r} as {cast.__name__}") from None


def _edges(text: str, section: str = "topology") -> list:
    out = []
    for tok in text.replace(",", " ").split():
        try:
            a, b = tok.split("-")
            out.append((int(a), int(b)))
        except ValueError:
            raise ConfigError(f"{section}.edges: bad edge {tok!r}, expected a-b") from None
    return out


def parse_config(text: str, base_dir: Optional[Path] = None) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # N and n are different fields
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"unreadable config: {e}") from None
    r = _Reader(cp)
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    ints = {f: r.num("code", f, int, required=True) for f in ("N", "n", "k", "d", "alpha", "beta", "q")}
    params = CodeParams(**ints)
    total = params.total_chunks

    mode = r.raw("footprint", "mode", "dense")
    try:
        if mode == "dense":
            fp = FootprintMatrix.dense(params.k, total)
        elif mode == "uniform":
            fp = FootprintMatrix.uniform(params.k, params.q, total, r.num("footprint", "seed", int, 0))
        elif mode == "file":
            path = base_dir / r.raw("footprint", "path", required=True)
            if not path.exists():
                raise ConfigError(f"footprint.path: {path} does not exist")
            fp = FootprintMatrix.from_csv(path.read_text(), total)
        else:
            raise ConfigError(f"footprint.mode: unknown mode {mode!r}")
    except (ValueError, IndexError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"footprint: {e}") from None

    try:
        slots = SlotPolicy(r.raw("scheduler", "slot_mode", "time"),
                           r.num("scheduler", "slot_value", float, 1.0))
    except ValueError as e:
        raise ConfigError(f"scheduler.slot_mode/slot_value: {e}") from None
    t0 = r.num("scheduler", "t0", float, required=True)
    if not t0 > 0:
        raise ConfigError("scheduler.t0: must be positive")
    deadlock = DeadlockConfig(t0)

    wl = WorkloadParams(
        lambda_r=r.num("workload", "lambda_r", float, 0.0),
        lambda_w=r.num("workload", "lambda_w", float, 0.0),
        lambda_rep=r.num("workload", "lambda_rep", float, 0.0),
        mu_r=r.num("workload", "mu_r", float, required=True),
        mu_w=r.num("workload", "mu_w", float, required=True),
        mu_rep=r.num("workload", "mu_rep", float, None),
    )

    shape = r.raw("topology", "shape", "path")
    try:
        if shape == "path":
            topo = Topology.path(params.N)
        elif shape == "ring":
            topo = Topology.ring(params.N)
        elif shape == "edges":
            topo = Topology(params.N, _edges(r.raw("topology", "edges", required=True)))
        else:
            raise ConfigError(f"topology.shape: unknown shape {shape!r}")
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"topology: {e}") from None

    sim = SimConfig(
        params=params, footprint=fp, slot_policy=slots, deadlock=deadlock, workload=wl,
        topology=topo,
        placement_mode=r.raw("sim", "placement", "grouped"),
        message_delay=r.num("sim", "message_delay", float, 0.0),
        horizon=r.num("sim", "horizon", float, 100.0),
        seed=r.num("sim", "seed", int, 0),
        max_events=r.num("sim", "max_events", int, 50_000_000),
    )
    out = os.environ.get(OUTPUT_ENV) or r.raw("sim", "output_dir", "out")
    out_path = Path(out)
    if not out_path.is_absolute():
        out_path = base_dir / out_path
    return Scenario(sim=sim, output_dir=out_path)


def load_config(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    sc = parse_config(path.read_text(), base_dir=path.parent)
    sc.source = path
    return sc
