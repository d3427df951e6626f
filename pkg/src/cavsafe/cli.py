"""Command-line front end: ``cavsafe run --scenario scenario1 --out out/``."""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import sim
from .errors import ParseError, UnknownKind, ValidationError
from .metrics import compute_metrics, lateral_samples, rear_end_series
from .pedestrian import barycenter
from .dynamics import BicycleState
from .scenario import load_scenario_file, pedestrian_at

TRACE_COLUMNS = ("t", "vehicle_id", "mode", "p", "v", "u2", "x", "y", "theta", "delta", "b5", "active_tags")
EXPORT_KINDS = ("speeds", "ped_distances", "min_safety", "trajectory_xy", "steering")


@dataclass(frozen=True)
class RunReport:
    scenario: str
    seed: int | None
    wall_ms: float
    metrics: dict
    files: dict  # label -> path


def fmt(value):
    """Locale-independent, 9 significant digits; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return f"{value:.9g}"


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(TRACE_COLUMNS)
        for r in trace:
            out.writerow([fmt(r.t), r.vehicle_id, r.mode, fmt(r.p), fmt(r.v), fmt(r.u2), fmt(r.x), fmt(r.y),
                          fmt(r.theta), fmt(r.delta), fmt(r.b5), ";".join(r.active_tags)])


def read_trace(path):
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if tuple(header) != TRACE_COLUMNS:
            raise ParseError(f"unexpected trace header {header}")
        trace = []
        for row in rows:
            t, vid, mode, p, v, u2, x, y, th, d, b5, tags = row
            trace.append(sim.TraceRecord(
                float(t), int(vid), mode, float(p), float(v), float(u2), float(x), float(y), float(th),
                float(d), float(b5) if b5 else None, tuple(tags.split(";")) if tags else ()))
    return trace


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(c) if isinstance(c, float) or c is None else c for c in row])


def _wide(trace, value):
    """One row per time, one column per vehicle."""
    ids = sorted({r.vehicle_id for r in trace})
    rows = {}
    for r in trace:
        rows.setdefault(r.t, {})[r.vehicle_id] = value(r)
    table = [[t] + [cells.get(vid) for vid in ids] for t, cells in sorted(rows.items())]
    return ids, table


def export_series(trace, kind, config, out_dir):
    """Write the data behind one figure family; returns the file path."""
    if kind not in EXPORT_KINDS:
        raise UnknownKind(f"unknown export kind {kind!r}; expected one of {', '.join(EXPORT_KINDS)}")
    path = Path(out_dir) / f"{kind}.csv"
    if kind == "speeds":
        ids, table = _wide(trace, lambda r: r.v)
        _write_table(path, ["t"] + [f"v_{vid}" for vid in ids], table)
    elif kind == "ped_distances":
        sigma = config.params.sigma

        def dist(r):
            ped = pedestrian_at(config.pedestrian_script, r.t)
            if ped is None:
                return None
            bx, by = barycenter(BicycleState(r.x, r.y, r.theta, r.v), sigma)
            return math.hypot(bx - ped.x0, by - ped.y0)

        ids, table = _wide(trace, dist)
        _write_table(path, ["t"] + [f"d_{vid}" for vid in ids], table)
    elif kind == "min_safety":
        lateral = {}
        for s in lateral_samples(trace, config):
            lateral[s.t] = min(lateral.get(s.t, s.slack), s.slack)
        rows = [[t, b1, lateral.get(t)] for t, b1 in rear_end_series(trace, config)]
        _write_table(path, ["t", "min_rear_end", "min_lateral"], rows)
    elif kind == "trajectory_xy":
        _write_table(path, ["t", "vehicle_id", "x", "y"], [[r.t, r.vehicle_id, r.x, r.y] for r in trace])
    else:
        _write_table(path, ["t", "vehicle_id", "mode", "delta"],
                     [[r.t, r.vehicle_id, r.mode, r.delta] for r in trace])
    return path


def _parse_kinds(text):
    kinds = [k.strip() for k in text.split(",") if k.strip()] if text else []
    for k in kinds:
        if k not in EXPORT_KINDS:
            raise UnknownKind(f"unknown export kind {k!r}; expected one of {', '.join(EXPORT_KINDS)}")
    return kinds


def run(args):
    """Load, simulate, write the trace and summary; returns a RunReport."""
    config = load_scenario_file(args.scenario)
    kinds = _parse_kinds(args.export)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    anti = False if args.no_anti_overshoot else None
    started = time.perf_counter()
    world = sim.make_world(config, args.seed, anti)
    limit = world.params.horizon if args.until is None else min(args.until, world.params.horizon)
    try:
        while world.t <= limit + 1e-9:
            if not sim.step_world(world):
                break
    except Exception as exc:
        raise RuntimeFault(world.step, world.t, exc) from exc
    wall_ms = 1000.0 * (time.perf_counter() - started)

    trace_path = out_dir / "trace.csv"
    write_trace(world.trace, trace_path)
    trace = read_trace(trace_path)
    files = {"trace": str(trace_path)}
    for kind in kinds:
        files[kind] = str(export_series(trace, kind, config, out_dir))
    metrics = compute_metrics(trace, config).summary()
    report = RunReport(config.name, args.seed, round(wall_ms, 3), metrics, files)
    summary_path = out_dir / "summary.yaml"
    files["summary"] = str(summary_path)
    doc = {
        "scenario": report.scenario,
        "seed": report.seed,
        "wall_ms": report.wall_ms,
        "end_time": float(fmt(world.t)),
        "anti_overshoot": world.params.anti_overshoot,
        "metrics": metrics,
        "files": files,
    }
    summary_path.write_text(yaml.safe_dump(doc, sort_keys=False))
    return report


class RuntimeFault(Exception):
    def __init__(self, step, t, cause):
        self.step, self.t, self.cause = step, t, cause
        super().__init__(f"step {step} (t={t:.3f} s): {type(cause).__name__}: {cause}")


def _fmt_min(value):
    return "n/a" if value is None else f"{value:.4g}"


def build_parser():
    parser = argparse.ArgumentParser(prog="cavsafe", description="Simulate CAVs at an intersection with a pedestrian event.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its trace")
    r.add_argument("--scenario", required=True, help="scenario file, or a bundled name such as scenario1")
    r.add_argument("--out", default="out", help="output directory")
    r.add_argument("--seed", type=int, default=None, help="seed for tie-breaking among simultaneous arrivals")
    r.add_argument("--until", type=float, default=None, help="stop after this many simulated seconds")
    r.add_argument("--no-anti-overshoot", action="store_true", help="disable the recovery anti-overshoot constraint")
    r.add_argument("--export", default="", help=f"comma-separated series to export: {','.join(EXPORT_KINDS)}")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        report = run(args)
    except (ParseError, ValidationError, UnknownKind) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeFault as exc:
        print(f"runtime fault at {exc}", file=sys.stderr)
        return 2
    m = report.metrics
    print(f"{report.scenario}: {m['vehicles']} vehicles, min rear-end {_fmt_min(m['min_rear_end'])}, "
          f"min lateral {_fmt_min(m['min_lateral'])}, min pedestrian {_fmt_min(m['min_pedestrian'])}, "
          f"{report.wall_ms:.0f} ms -> {report.files['trace']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
