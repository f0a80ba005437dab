"""Batch entry points: ``python -m regenquorum <command> ...``.

Exit codes: 0 success, 2 usage or configuration error, 1 invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import analysis
from .chunk_store import ChunkError
from .config import OUTPUT_ENV, load_config
from .placement import CapacityExceeded, assign, build_groups
from .sim_engine import ConfigError, backlog_experiment, run
from .trace import SimTrace, trace_check

FIGURE_SCHEMA = "# regenquorum-figure5 v1"


class UsageError(Exception):
    pass


def _out_dir(default: Path, override: Optional[str]) -> Path:
    d = Path(override) if override else Path(os.environ.get(OUTPUT_ENV) or default)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- simulate
def cmd_simulate(args) -> int:
    sc = load_config(args.config)
    seeds = _int_list(args.seeds) if args.seeds else [args.seed if args.seed is not None else sc.sim.seed]
    out = _out_dir(sc.output_dir, args.out)
    status = 0
    for seed in seeds:
        target = out if len(seeds) == 1 else out / f"seed-{seed}"
        target.mkdir(parents=True, exist_ok=True)
        try:
            trace, metrics = run(sc.sim, seed)
        except (AssertionError, ChunkError) as e:
            print(f"seed {seed}: invariant violated: {e}", file=sys.stderr)
            return 1
        trace.write_csv(target / "trace.csv")
        metrics.write_csv(target / "metrics.csv")
        line = (f"seed {seed}: {metrics.values['completed']} requests, "
                f"{metrics.values['deadlock_rounds']} deadlock rounds, {metrics.values['events']} events")
        if args.check:
            rep = trace_check(trace)
            line += f", trace check {'ok' if rep.ok else 'FAILED'}"
            if not rep.ok:
                status = 1
                for v in rep.violations[:10]:
                    print("  " + v, file=sys.stderr)
        print(line)
    return status


# ---------------------------------------------------------------- analyze
def _parse_kv(items: Sequence[str]) -> dict:
    out = {}
    for it in items:
        if "=" not in it:
            raise UsageError(f"expected key=value, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k] = float(v)
        except ValueError:
            raise UsageError(f"{k}: {v!r} is not a number") from None
    return out


def _parse_sweep(items: Sequence[str]) -> dict:
    """``key=v1,v2,...`` or ``key=start:stop:count`` (inclusive linspace)."""
    grid = {}
    for it in items:
        if "=" not in it:
            raise UsageError(f"expected key=values, got {it!r}")
        k, v = it.split("=", 1)
        try:
            if ":" in v:
                a, b, n = v.split(":")
                grid[k] = [float(x) for x in np.linspace(float(a), float(b), int(n))]
            else:
                grid[k] = [float(x) for x in v.split(",")]
        except ValueError:
            raise UsageError(f"bad sweep specification {it!r}") from None
    return grid


def cmd_analyze(args) -> int:
    if args.formula not in analysis.FORMULAS:
        raise UsageError(f"unknown formula {args.formula!r}; known: {', '.join(sorted(analysis.FORMULAS))}")
    params = _parse_kv(args.params)
    if args.sweep:
        grid = {k: [v] for k, v in params.items()}
        grid.update(_parse_sweep(args.sweep))
        text = analysis.formula_table(args.formula, grid)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    v = analysis.evaluate(args.formula, params)
    print(f"{v.value!r}" + ("  FLAG: exceeds 1" if v.out_of_range else ""))
    return 0


# ---------------------------------------------------------------- figure5
def figure5_table(mu: float, t_max: float, steps: int, n0s: Sequence[int], replications: int,
                  seed: int) -> List[dict]:
    """Analytical and empirical backlog curves on an evenly spaced grid.

    ``empirical_none`` is the fraction of runs where no request has finished yet
    and estimates ``analytical``; ``empirical_P0`` estimates ``pmf_P0``.
    """
    if not mu > 0:
        raise UsageError("mu must be positive")
    if steps < 2 or not t_max > 0:
        raise UsageError("need steps >= 2 and t_max > 0")
    if not n0s or min(n0s) < 1 or replications < 1:
        raise UsageError("N0 values and replications must be positive")
    ts = np.linspace(0.0, t_max, steps)
    rows = [{"t": float(t), "analytical": analysis.completion_zero_limit(mu, float(t))} for t in ts]
    for N0 in n0s:
        emp = backlog_experiment(N0, mu, ts, replications, seed)
        for i, t in enumerate(ts):
            rows[i][f"pmf_P0_N0={N0}"] = analysis.completion_pmf(N0, mu, float(t), 0)
            rows[i][f"empirical_P0_N0={N0}"] = float(emp[i, 0])
            rows[i][f"empirical_none_N0={N0}"] = float(emp[i, N0])
    return rows


def figure5_csv(rows: List[dict], mu: float, replications: int) -> str:
    buf = io.StringIO()
    buf.write(f"{FIGURE_SCHEMA} mu={mu!r} replications={replications}\n")
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) for k, v in r.items()})
    return buf.getvalue()


def read_figure5(text: str) -> List[dict]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(FIGURE_SCHEMA):
        raise ValueError("missing figure5 schema header")
    return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(io.StringIO("\n".join(lines[1:])))]


def cmd_figure5(args) -> int:
    n0s = _int_list(args.n0)
    rows = figure5_table(args.mu, args.t_max, args.steps, n0s, args.replications, args.seed)
    text = figure5_csv(rows, args.mu, args.replications)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    worst = 0.0
    for r in rows:
        for N0 in n0s:
            bound = analysis.binomial_bound(r["analytical"], args.replications)
            diff = abs(r[f"empirical_none_N0={N0}"] - r["analytical"])
            worst = max(worst, diff - bound)
    print(f"max excess over 3-sigma band: {max(worst, 0.0):.3g}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- placement / trace-check
def cmd_placement(args) -> int:
    sc = load_config(args.config)
    p = sc.sim.params
    groups = build_groups(sc.sim.footprint)
    pm = assign(groups, p.N, p.alpha)
    text = pm.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for pos, g in enumerate(pm.order):
        members = sorted(groups[g].chunks)
        nodes = sorted({pm.location[c][0] for c in members})
        print(f"group {g} (step {pos}): chunks {members} on nodes {nodes}", file=sys.stderr)
    return 0


def cmd_trace_check(args) -> int:
    try:
        trace = SimTrace.read_csv(args.trace)
    except (OSError, ValueError, KeyError) as e:
        raise UsageError(f"cannot read trace: {e}") from None
    rep = trace_check(trace)
    print(f"{rep.rows} rows, {rep.quorums} quorums, {rep.lock_grants} lock grants")
    if rep.ok:
        print("ok")
        return 0
    for v in rep.violations:
        print(v)
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regenquorum", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write trace.csv and metrics.csv")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", help="comma-separated seeds; one output subdirectory each")
    s.add_argument("--out", help=f"output directory (else ${OUTPUT_ENV}, else [sim] output_dir)")
    s.add_argument("--check", action="store_true", help="replay each trace through the checker")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="evaluate a closed-form formula")
    a.add_argument("formula")
    a.add_argument("params", nargs="*", help="key=value")
    a.add_argument("--sweep", nargs="+", help="key=v1,v2 or key=start:stop:count")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("figure5", help="backlog completion curves, analytical and simulated")
    f.add_argument("--mu", type=float, default=10.0)
    f.add_argument("--t-max", type=float, default=1.0)
    f.add_argument("--steps", type=int, default=21)
    f.add_argument("--n0", default="1,2,5,50")
    f.add_argument("--replications", type=int, default=10_000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_figure5)

    p = sub.add_parser("placement", help="group formation and chunk layout for a scenario")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_placement)

    t = sub.add_parser("trace-check", help="replay a trace file and re-check invariants")
    t.add_argument("trace")
    t.set_defaults(func=cmd_trace_check)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError, CapacityExceeded, analysis.DomainError,
            analysis.UnstableQueue) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
