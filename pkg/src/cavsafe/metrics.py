"""Safety metrics and structural checks computed from a finished trace.

Everything here reads only the trace records and the scenario geometry, so a
trace written to disk and read back yields the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .sim import LEGAL_TRANSITIONS, MODES


@dataclass(frozen=True)
class LateralSample:
    t: float
    conflict_id: int
    earlier: int
    later: int
    slack: float


@dataclass(frozen=True)
class SafetyMetrics:
    """Minima are ``None`` when no pair (or no pedestrian sample) exists."""

    min_rear_end: float | None
    min_lateral: float | None
    min_pedestrian: float | None
    speeds: dict = field(default_factory=dict)  # vehicle id -> ((t, ...), (v, ...))
    lateral_samples: tuple = ()

    def summary(self):
        return {
            "min_rear_end": self.min_rear_end,
            "min_lateral": self.min_lateral,
            "min_pedestrian": self.min_pedestrian,
            "vehicles": len(self.speeds),
            "min_speed": {vid: min(vs) for vid, (_, vs) in sorted(self.speeds.items())},
        }


def _by_step(trace, dt):
    steps = {}
    for rec in trace:
        steps.setdefault(round(rec.t / dt), []).append(rec)
    return steps


def _path_of(config):
    return {v.vehicle_id: v.path_id for v in config.vehicles}


def rear_end_series(trace, config):
    """Per step: (t, smallest ``p_ahead - p - phi v - gamma`` over same-lane neighbours)."""
    params = config.params
    path_of = _path_of(config)
    out = []
    for _, recs in sorted(_by_step(trace, params.dt).items()):
        lanes = {}
        for r in recs:
            lanes.setdefault(path_of[r.vehicle_id], []).append(r)
        worst = None
        for lane in lanes.values():
            lane.sort(key=lambda r: (-r.p, r.vehicle_id))
            for ahead, behind in zip(lane, lane[1:]):
                b1 = ahead.p - behind.p - params.phi * behind.v - params.gamma
                worst = b1 if worst is None else min(worst, b1)
        out.append((recs[0].t, worst))
    return out


def lateral_samples(trace, config):
    """Lateral slack of every crossing pair, taken when the first of the two reaches the conflict.

    The slack is ``|p_k - p_i| - phi v_later - gamma~`` with
    ``gamma~ = gamma + |L_i - L_k|``. Pairs where one vehicle is not in the
    zone at that instant are skipped.
    """
    params = config.params
    path_of = _path_of(config)
    per_vehicle = {}
    for r in trace:
        per_vehicle.setdefault(r.vehicle_id, []).append(r)
    at = {(r.vehicle_id, round(r.t / params.dt)): r for r in trace}
    samples = []
    for conflict in config.conflicts:
        marks = {}
        for vid, recs in per_vehicle.items():
            pid = path_of[vid]
            if pid not in conflict.paths:
                continue
            L = dict(config.path(pid).conflict_points)[conflict.conflict_id]
            hit = next((r for r in recs if r.p >= L), None)
            if hit is not None:
                marks[vid] = (round(hit.t / params.dt), L, pid)
        ids = sorted(marks)
        for a_pos, a in enumerate(ids):
            for b in ids[a_pos + 1:]:
                if marks[a][2] == marks[b][2]:
                    continue
                first, second = sorted((a, b), key=lambda vid: (marks[vid][0], vid))
                step, L_first, _ = marks[first]
                L_second = marks[second][1]
                r1, r2 = at.get((first, step)), at.get((second, step))
                if r1 is None or r2 is None:
                    continue
                gamma_tilde = params.gamma + abs(L_first - L_second)
                slack = abs(r1.p - r2.p) - params.phi * r2.v - gamma_tilde
                samples.append(LateralSample(r1.t, conflict.conflict_id, first, second, slack))
    samples.sort(key=lambda s: (s.t, s.conflict_id, s.earlier))
    return tuple(samples)


def compute_metrics(trace, config):
    rear = [b for _, b in rear_end_series(trace, config) if b is not None]
    lateral = lateral_samples(trace, config)
    b5 = [r.b5 for r in trace if r.b5 is not None]
    speeds = {}
    for r in trace:
        ts, vs = speeds.setdefault(r.vehicle_id, ([], []))
        ts.append(r.t)
        vs.append(r.v)
    return SafetyMetrics(
        min(rear) if rear else None,
        min(s.slack for s in lateral) if lateral else None,
        min(b5) if b5 else None,
        {vid: (tuple(ts), tuple(vs)) for vid, (ts, vs) in speeds.items()},
        lateral,
    )


def validate_trace(trace, dt):
    """Structural problems of a trace as readable strings; empty when clean."""
    problems = []
    last_t = -math.inf
    seen = set()
    last = {}
    for i, r in enumerate(trace):
        if r.t < last_t:
            problems.append(f"record {i}: time {r.t} goes backwards")
        last_t = max(last_t, r.t)
        if r.mode not in MODES:
            problems.append(f"record {i}: unknown mode {r.mode!r}")
        step = round(r.t / dt)
        key = (r.vehicle_id, step)
        if key in seen:
            problems.append(f"record {i}: second record for vehicle {r.vehicle_id} at t={r.t}")
        seen.add(key)
        prev = last.get(r.vehicle_id)
        if prev is not None:
            if step != prev[0] + 1:
                problems.append(f"record {i}: vehicle {r.vehicle_id} skips from step {prev[0]} to {step}")
            if prev[1] != r.mode and (prev[1], r.mode) not in LEGAL_TRANSITIONS:
                problems.append(f"record {i}: illegal transition {prev[1]} -> {r.mode} for vehicle {r.vehicle_id}")
        last[r.vehicle_id] = (step, r.mode)
    return problems
