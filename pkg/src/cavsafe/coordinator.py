"""The coordinator database and the resequencing order for replanning.

The coordinator only stores plans: each CAV commits its trajectory, and later
CAVs query the time windows during which their path is constrained by those
commitments. Mutation is single-writer (the simulation loop).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import StaleSnapshot, UnknownPath


@dataclass(frozen=True)
class CommitRecord:
    vehicle_id: int
    path_id: int
    entry_time: float
    traj: object  # CubicTrajectory
    seq: int  # commit counter, breaks entry-time ties


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    tag: str  # RearEnd | Lateral
    vehicle_id: int
    conflict_id: int | None = None


@dataclass(frozen=True)
class QueryResult:
    intervals: tuple
    speed_limit: float


@dataclass
class CoordinatorDb:
    config: object  # ScenarioConfig
    speed_limit: float | None = None
    records: dict = field(default_factory=dict)
    occupancy: dict = field(default_factory=dict)  # conflict_id -> {vehicle_id: t_n or None}
    version: int = 0
    _seq: int = 0

    def __post_init__(self):
        if self.speed_limit is None:
            self.speed_limit = self.config.params.speed_limit

    def snapshot(self):
        return copy.deepcopy(self)

    def trajectory(self, vehicle_id):
        return self.records[vehicle_id].traj

    def vehicles_on(self, path_id):
        """Committed vehicles on a path, ordered by entry time."""
        recs = [r for r in self.records.values() if r.path_id == path_id]
        return [r.vehicle_id for r in sorted(recs, key=lambda r: (r.entry_time, r.seq))]

    def predecessor(self, vehicle_id, path_id, entry_time):
        """Closest committed vehicle on the same lane that entered before ``entry_time``."""
        best = None
        for r in self.records.values():
            if r.path_id != path_id or r.vehicle_id == vehicle_id:
                continue
            if vehicle_id in self.records:
                mine = self.records[vehicle_id]
                ahead = (r.entry_time, r.seq) < (mine.entry_time, mine.seq)
            else:
                ahead = r.entry_time <= entry_time
            if ahead and (best is None or (r.entry_time, r.seq) > (best.entry_time, best.seq)):
                best = r
        return None if best is None else best.vehicle_id

    def commit(self, vehicle_id, path_id, traj, entry_time, expected_version=None):
        if expected_version is not None and expected_version != self.version:
            raise StaleSnapshot(f"db at version {self.version}, caller checked {expected_version}")
        if vehicle_id in self.records:
            seq = self.records[vehicle_id].seq
            entry_time = self.records[vehicle_id].entry_time
        else:
            self._seq += 1
            seq = self._seq
        self.records[vehicle_id] = CommitRecord(vehicle_id, path_id, entry_time, traj, seq)
        path = self.config.path(path_id)
        for cid, L in path.conflict_points:
            self.occupancy.setdefault(cid, {})[vehicle_id] = traj.crossing_time(L)
        self.version += 1
        return self

    def remove(self, vehicle_id):
        if self.records.pop(vehicle_id, None) is not None:
            for occ in self.occupancy.values():
                occ.pop(vehicle_id, None)
            self.version += 1
        return self

    def crossing_time(self, vehicle_id, conflict_id):
        return self.occupancy.get(conflict_id, {}).get(vehicle_id)


def _activation_intervals(ts, active, tag, vehicle_id, conflict_id=None):
    out = []
    start = prev = None
    for t, on in zip(ts, active):
        if on and start is None:
            start = t
        elif not on and start is not None:
            out.append(Interval(float(start), float(prev), tag, vehicle_id, conflict_id))
            start = None
        prev = t
    if start is not None:
        out.append(Interval(float(start), float(prev), tag, vehicle_id, conflict_id))
    return out


def register_and_query(db, vehicle_id, path_id):
    """Time windows during which committed plans constrain ``path_id``, and the limit S.

    Rear-end windows span the stay of every committed vehicle on the same path.
    Lateral windows are the sampled times at which a committed vehicle on a
    crossing path is within its own safe distance ``phi v + gamma~`` of the
    shared conflict point.
    """
    config = db.config
    try:
        path = config.path(path_id)
    except KeyError:
        raise UnknownPath(path_id) from None
    params = config.params
    intervals = []
    for kid in db.vehicles_on(path_id):
        if kid != vehicle_id:
            traj = db.trajectory(kid)
            intervals.append(Interval(traj.t0, traj.tf, "RearEnd", kid))
    for cid, L_i in path.conflict_points:
        for other in sorted(config.conflict(cid).paths - {path_id}):
            L_k = dict(config.path(other).conflict_points)[cid]
            gamma_tilde = params.gamma + abs(L_i - L_k)
            for kid in db.vehicles_on(other):
                if kid == vehicle_id:
                    continue
                traj = db.trajectory(kid)
                n = int(np.floor((traj.tf - traj.t0) / params.dt + 1e-9))
                ts = traj.t0 + params.dt * np.arange(n + 1)
                active = np.abs(traj.position(ts) - L_k) <= params.phi * traj.speed(ts) + gamma_tilde
                intervals.extend(_activation_intervals(ts, active, "Lateral", kid, cid))
    intervals.sort(key=lambda iv: (iv.start, iv.vehicle_id))
    return QueryResult(tuple(intervals), db.speed_limit)


def commit_trajectory(db, vehicle_id, traj, entry_time=None, expected_version=None):
    entry = traj.t0 if entry_time is None else entry_time
    return db.commit(vehicle_id, traj.path_id, traj, entry, expected_version)


def planning_order(arrivals, rng):
    """Order vehicles by arrival time; simultaneous arrivals are shuffled by ``rng``.

    ``arrivals`` is a list of (vehicle_id, arrival_time).
    """
    groups = {}
    for vid, t in arrivals:
        groups.setdefault(t, []).append(vid)
    order = []
    for t in sorted(groups):
        ids = sorted(groups[t])
        if len(ids) > 1:
            ids = [ids[i] for i in rng.permutation(len(ids))]
        order.extend(ids)
    return order


@dataclass(frozen=True)
class ChainEntry:
    vehicle_id: int
    weight: float  # 1 / length of the feasible exit-time range
    processing_time: float  # shortest exit time
    path_id: int

    def __post_init__(self):
        if not (self.weight > 0 and self.processing_time > 0):
            raise ValueError("ChainEntry needs weight > 0 and processing_time > 0")


def chain_rho(chain):
    """Best prefix ratio sum(weight) / sum(processing) and the prefix length achieving it.

    Ratios are compared exactly so ties resolve to the longest maximising prefix.
    """
    best, best_len = None, 0
    w = p = Fraction(0)
    for k, e in enumerate(chain, start=1):
        w += Fraction(e.weight)
        p += Fraction(e.processing_time)
        r = w / p
        if best is None or r >= best:
            best, best_len = r, k
    return best, best_len


def resequence(entries):
    """Replanning order: repeatedly emit the best-ratio prefix of the best chain.

    Chains are the entries grouped by path, keeping the input (on-path) order.
    Ties between chains go to the lower path id, then the lower leading vehicle id.
    """
    chains = {}
    for e in entries:
        chains.setdefault(e.path_id, []).append(e)
    order = []
    while chains:
        scored = []
        for pid, chain in chains.items():
            rho, length = chain_rho(chain)
            scored.append((-rho, pid, chain[0].vehicle_id, length))
        _, pid, _, length = min(scored)
        order.extend(chains[pid][:length])
        rest = chains[pid][length:]
        if rest:
            chains[pid] = rest
        else:
            del chains[pid]
    return order
