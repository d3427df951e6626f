"""Intersection geometry, scenario documents and the parameter set.

A scenario document is YAML with four required top-level sections::

    name: scenario1            # optional
    geometry:
      paths:
        - {id: 1, road: north, entry: [8.75, -65.0], heading: 1.5707963267948966,
           lane_offset: -8.75, length: 100.0, road_edges: [-10.5, 0.0]}
      conflicts:
        - {id: 1, position: [8.75, -1.75], paths: [1, 4]}
    vehicles:
      - {id: 1, path: 1, arrival: 0.0, speed: 8.0}
    pedestrian:
      waypoints:
        - {t: 4.7, x: 10.5, y: -13.0, speed: 1.5, orientation: -3.141592653589793}
    params: {dt: 0.025, phi: 1.8, ...}

``entry`` is the lane-centre point where the path enters the control zone.
``lane_offset`` is the signed lateral offset (left of travel positive) of the
lane centre from the road reference line, and ``road_edges`` gives the
``[right, left]`` edge offsets from that same reference line. Conflict
arclengths are derived by projecting the conflict position onto each path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .errors import NoSharedConflict, NotOnPath, ParseError, ValidationError

_ON_PATH_TOL = 1e-9
SCENARIO_DIR = Path(__file__).parent / "scenarios"


@dataclass(frozen=True)
class EllipseParams:
    """Tunables of the pedestrian unsafe ellipse for one CAV."""

    epsilon: float = 2.0
    k1: float = 1.5
    k2: float = 18.0
    k3: float = 10.0
    lam: float = 2.0


@dataclass(frozen=True)
class ControllerParams:
    dt: float = 0.025
    phi: float = 1.8
    gamma: float = 1.5
    sigma: float = 2.0
    r_b: float = 1.0
    v_min: float = 0.1
    v_max: float = 25.0
    u_min: float = -5.0
    u_max: float = 5.0
    j_min: float = -7.0
    j_max: float = 5.0
    # (w1, w2, w3, w4): acceleration tracking, steering, lane slack, speed slack
    weights_emergency: tuple = (0.0, 0.0, 0.0, 1.0)
    weights_recovery: tuple = (1.5, 1.0, 2.0, 0.0)
    emergency_speed: float = 6.0
    sensing_range: float = 30.0
    delta_max0: float = 0.6
    speed_limit: float = 25.0
    ellipse: EllipseParams = field(default_factory=EllipseParams)
    anti_overshoot_margin: float = 0.05
    align_lateral_tol: float = 0.05
    align_heading_tol: float = 0.01
    qp_regularization: float = 1e-4
    anti_overshoot: bool = True
    horizon: float = 20.0
    seed: int = 0

    @property
    def speed_cap(self):
        """Effective planning cap: the vehicle limit or the coordinator limit S."""
        return min(self.v_max, self.speed_limit)


@dataclass(frozen=True)
class PathGeometry:
    path_id: int
    road: str
    entry_point: tuple
    heading: float
    lane_center_offset: float
    length: float
    road_edges: tuple
    conflict_points: tuple = ()  # ((conflict_id, arclength), ...) increasing

    @property
    def direction(self):
        return axis_direction(self.heading)

    @property
    def normal(self):
        """Unit vector pointing to the left of travel."""
        hx, hy = self.direction
        return (-hy, hx)

    def point_at(self, arclength, lateral=0.0):
        hx, hy = self.direction
        nx, ny = self.normal
        x0, y0 = self.entry_point
        return (x0 + arclength * hx + lateral * nx, y0 + arclength * hy + lateral * ny)

    def to_path_frame(self, x, y):
        """World point -> (arclength, lateral offset from the lane centre)."""
        dx = x - self.entry_point[0]
        dy = y - self.entry_point[1]
        hx, hy = self.direction
        nx, ny = self.normal
        return dx * hx + dy * hy, dx * nx + dy * ny

    @property
    def corridor(self):
        """Road edges as lateral offsets from this lane's centre: (right, left)."""
        right, left = self.road_edges
        return right - self.lane_center_offset, left - self.lane_center_offset

    def lateral_axis(self):
        """World axis (0 for x, 1 for y) across the road and the sign of +lateral on it."""
        nx, ny = self.normal
        return (0, nx) if abs(nx) > 0.5 else (1, ny)


@dataclass(frozen=True)
class ConflictPoint:
    conflict_id: int
    position: tuple
    paths: frozenset


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: int
    path_id: int
    arrival_time: float
    entry_speed: float
    ellipse: EllipseParams | None = None


@dataclass(frozen=True)
class PedestrianWaypoint:
    t: float
    x: float
    y: float
    speed: float
    orientation: float


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    paths: tuple
    conflicts: tuple
    vehicles: tuple
    pedestrian_script: tuple
    params: ControllerParams

    def path(self, path_id):
        for p in self.paths:
            if p.path_id == path_id:
                return p
        raise KeyError(path_id)

    def conflict(self, conflict_id):
        for c in self.conflicts:
            if c.conflict_id == conflict_id:
                return c
        raise KeyError(conflict_id)

    def shared_conflict(self, path_a, path_b):
        """Conflict id shared by two paths, or None."""
        for c in self.conflicts:
            if path_a in c.paths and path_b in c.paths and path_a != path_b:
                return c.conflict_id
        return None

    def ellipse_for(self, vehicle_id):
        for v in self.vehicles:
            if v.vehicle_id == vehicle_id and v.ellipse is not None:
                return v.ellipse
        return self.params.ellipse


def axis_direction(heading):
    """Exact unit vector of an axis-aligned heading."""
    quarter = heading / (math.pi / 2)
    k = round(quarter)
    if abs(quarter - k) > 1e-9:
        raise ValidationError("heading", f"{heading} is not axis-aligned")
    return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[k % 4]


def conflict_distance(config, path_id, conflict_id):
    """Arclength of ``conflict_id`` from the entry of ``path_id``."""
    path = config.path(path_id)
    for cid, arclength in path.conflict_points:
        if cid == conflict_id:
            return arclength
    raise NotOnPath(f"conflict {conflict_id} is not on path {path_id}")


def zeta(config, path_a, path_b):
    """Absolute difference of the shared conflict's distances from both entries."""
    cid = config.shared_conflict(path_a, path_b)
    if cid is None:
        raise NoSharedConflict(f"paths {path_a} and {path_b} do not intersect")
    return abs(conflict_distance(config, path_a, cid) - conflict_distance(config, path_b, cid))


# -- parsing -------------------------------------------------------------------

def _num(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    return float(value)


def _pair(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValidationError(name, "expected a two-element list")
    return (_num(value[0], name), _num(value[1], name))


def _require(mapping, key, where):
    if not isinstance(mapping, dict):
        raise ParseError(f"{where} must be a mapping")
    if key not in mapping:
        raise ValidationError(f"{where}.{key}" if where else key, "missing")
    return mapping[key]


def _parse_ellipse(raw, name):
    if not isinstance(raw, dict):
        raise ValidationError(name, "expected a mapping")
    known = {f.name for f in fields(EllipseParams)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(name, f"unknown keys {sorted(unknown)}")
    return EllipseParams(**{k: _num(v, f"{name}.{k}") for k, v in raw.items()})


def _parse_params(raw):
    if not isinstance(raw, dict):
        raise ParseError("params must be a mapping")
    known = {f.name: f for f in fields(ControllerParams)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ValidationError(f"params.{key}", "unknown parameter")
        if key.startswith("weights_"):
            if not isinstance(value, (list, tuple)) or len(value) != 4:
                raise ValidationError(f"params.{key}", "expected four weights")
            kwargs[key] = tuple(_num(w, f"params.{key}") for w in value)
        elif key == "ellipse":
            kwargs[key] = _parse_ellipse(value, "params.ellipse")
        elif key == "anti_overshoot":
            if not isinstance(value, bool):
                raise ValidationError("params.anti_overshoot", "expected a boolean")
            kwargs[key] = value
        elif key == "seed":
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValidationError("params.seed", "expected a nonnegative integer")
            kwargs[key] = value
        else:
            kwargs[key] = _num(value, f"params.{key}")
    return ControllerParams(**kwargs)


def _validate_params(p):
    if not p.v_min < p.v_max:
        raise ValidationError("v_min", "must be strictly below v_max")
    if p.v_min <= 0:
        raise ValidationError("v_min", "must be positive")
    for lo, hi in (("u_min", "u_max"), ("j_min", "j_max")):
        if getattr(p, lo) >= 0:
            raise ValidationError(lo, f"must be negative (require {lo} < 0 < {hi})")
        if getattr(p, hi) <= 0:
            raise ValidationError(hi, f"must be positive (require {lo} < 0 < {hi})")
    if p.dt <= 0:
        raise ValidationError("dt", "must be positive")
    for name in ("weights_emergency", "weights_recovery"):
        if any(w < 0 for w in getattr(p, name)):
            raise ValidationError(name, "weights must be nonnegative")
    for name in ("phi", "sigma", "sensing_range", "speed_limit", "horizon"):
        if getattr(p, name) <= 0:
            raise ValidationError(name, "must be positive")
    for name in ("gamma", "r_b", "qp_regularization", "anti_overshoot_margin", "delta_max0"):
        if getattr(p, name) < 0:
            raise ValidationError(name, "must be nonnegative")
    _validate_ellipse(p.ellipse, "params.ellipse")


def _validate_ellipse(e, name):
    if e.epsilon <= 0:
        raise ValidationError(f"{name}.epsilon", "must be positive")
    for k in ("k1", "k2", "k3", "lam"):
        if getattr(e, k) <= 0:
            raise ValidationError(f"{name}.{k}", "must be positive")


def _build_paths(raw_paths, conflicts):
    paths = []
    seen = set()
    for i, raw in enumerate(raw_paths):
        where = f"geometry.paths[{i}]"
        pid = _require(raw, "id", where)
        if not isinstance(pid, int) or pid in seen:
            raise ValidationError(f"{where}.id", "ids must be unique integers")
        seen.add(pid)
        heading = _num(_require(raw, "heading", where), f"{where}.heading")
        axis_direction(heading)
        length = _num(_require(raw, "length", where), f"{where}.length")
        if length <= 0:
            raise ValidationError(f"{where}.length", "must be positive")
        edges = _pair(_require(raw, "road_edges", where), f"{where}.road_edges")
        offset = _num(raw.get("lane_offset", 0.0), f"{where}.lane_offset")
        if not edges[0] < offset < edges[1]:
            raise ValidationError(f"{where}.lane_offset", "lane centre must lie between the road edges")
        paths.append(PathGeometry(
            path_id=pid,
            road=str(_require(raw, "road", where)),
            entry_point=_pair(_require(raw, "entry", where), f"{where}.entry"),
            heading=heading,
            lane_center_offset=offset,
            length=length,
            road_edges=edges,
        ))
    by_id = {p.path_id: p for p in paths}
    points = {pid: [] for pid in by_id}
    for c in conflicts:
        for pid in sorted(c.paths):
            if pid not in by_id:
                raise ValidationError(f"conflict {c.conflict_id}", f"unknown path {pid}")
            path = by_id[pid]
            along, lateral = path.to_path_frame(*c.position)
            if abs(lateral) > _ON_PATH_TOL:
                raise ValidationError(f"conflict {c.conflict_id}", f"not on path {pid}")
            if not 0 < along < path.length:
                raise ValidationError(f"conflict {c.conflict_id}", f"outside the control zone of path {pid}")
            points[pid].append((c.conflict_id, along))
    out = []
    for path in paths:
        pts = sorted(points[path.path_id], key=lambda item: item[1])
        for (_, a), (_, b) in zip(pts, pts[1:]):
            if not a < b:
                raise ValidationError(f"path {path.path_id}", "conflict arclengths must be strictly increasing")
        out.append(replace(path, conflict_points=tuple(pts)))
    return tuple(out)


def _build_conflicts(raw_conflicts):
    conflicts = []
    pairs = set()
    ids = set()
    for i, raw in enumerate(raw_conflicts or []):
        where = f"geometry.conflicts[{i}]"
        cid = _require(raw, "id", where)
        if not isinstance(cid, int) or cid in ids:
            raise ValidationError(f"{where}.id", "ids must be unique integers")
        ids.add(cid)
        incident = _require(raw, "paths", where)
        if not isinstance(incident, list) or len(incident) < 2:
            raise ValidationError(f"{where}.paths", "need at least two paths")
        for a in incident:
            for b in incident:
                if a < b:
                    if (a, b) in pairs:
                        raise ValidationError(f"{where}.paths", f"paths {a},{b} already share a conflict")
                    pairs.add((a, b))
        conflicts.append(ConflictPoint(cid, _pair(_require(raw, "position", where), f"{where}.position"),
                                       frozenset(incident)))
    return tuple(conflicts)


def _build_vehicles(raw_vehicles, paths, params):
    path_ids = {p.path_id for p in paths}
    vehicles = []
    ids = set()
    last_arrival = {}
    for i, raw in enumerate(raw_vehicles or []):
        where = f"vehicles[{i}]"
        vid = _require(raw, "id", where)
        if not isinstance(vid, int) or vid in ids:
            raise ValidationError(f"{where}.id", "ids must be unique integers")
        ids.add(vid)
        pid = _require(raw, "path", where)
        if pid not in path_ids:
            raise ValidationError(f"{where}.path", f"unknown path {pid}")
        arrival = _num(_require(raw, "arrival", where), f"{where}.arrival")
        if arrival < 0:
            raise ValidationError(f"{where}.arrival", "must be nonnegative")
        if pid in last_arrival and arrival <= last_arrival[pid]:
            raise ValidationError(f"{where}.arrival", "vehicles on one path must arrive in increasing time order")
        last_arrival[pid] = arrival
        speed = _num(_require(raw, "speed", where), f"{where}.speed")
        if not params.v_min <= speed <= params.v_max:
            raise ValidationError(f"{where}.speed", "entry speed outside [v_min, v_max]")
        ellipse = None
        if raw.get("ellipse") is not None:
            ellipse = _parse_ellipse(raw["ellipse"], f"{where}.ellipse")
            _validate_ellipse(ellipse, f"{where}.ellipse")
        vehicles.append(VehicleSpec(vid, pid, arrival, speed, ellipse))
    return tuple(vehicles)


def _build_pedestrian(raw):
    if raw is None:
        return ()
    if not isinstance(raw, dict):
        raise ParseError("pedestrian must be a mapping")
    points = []
    for i, wp in enumerate(raw.get("waypoints") or []):
        where = f"pedestrian.waypoints[{i}]"
        w = PedestrianWaypoint(*(_num(_require(wp, k, where), f"{where}.{k}")
                                 for k in ("t", "x", "y", "speed", "orientation")))
        if w.speed < 0:
            raise ValidationError(f"{where}.speed", "must be nonnegative")
        if not -math.pi <= w.orientation < math.pi:
            raise ValidationError(f"{where}.orientation", "must lie in [-pi, pi)")
        if points and w.t <= points[-1].t:
            raise ValidationError(f"{where}.t", "waypoint times must increase")
        points.append(w)
    return tuple(points)


def load_scenario(text):
    """Parse and validate a scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a mapping")
    for section in ("geometry", "vehicles", "pedestrian", "params"):
        if section not in doc:
            raise ParseError(f"missing section {section!r}")
    geometry = doc["geometry"]
    if not isinstance(geometry, dict) or not isinstance(geometry.get("paths"), list):
        raise ParseError("geometry.paths must be a list")
    params = _parse_params(doc["params"] or {})
    _validate_params(params)
    conflicts = _build_conflicts(geometry.get("conflicts"))
    paths = _build_paths(geometry["paths"], conflicts)
    if doc["vehicles"] is not None and not isinstance(doc["vehicles"], list):
        raise ParseError("vehicles must be a list")
    vehicles = _build_vehicles(doc["vehicles"], paths, params)
    return ScenarioConfig(
        name=str(doc.get("name", "scenario")),
        paths=paths,
        conflicts=conflicts,
        vehicles=vehicles,
        pedestrian_script=_build_pedestrian(doc["pedestrian"]),
        params=params,
    )


def dump_scenario(config):
    """Serialize a config back to a scenario document."""
    params = asdict(config.params)
    params["weights_emergency"] = list(params["weights_emergency"])
    params["weights_recovery"] = list(params["weights_recovery"])
    vehicles = []
    for v in config.vehicles:
        item = {"id": v.vehicle_id, "path": v.path_id, "arrival": v.arrival_time, "speed": v.entry_speed}
        if v.ellipse is not None:
            item["ellipse"] = asdict(v.ellipse)
        vehicles.append(item)
    doc = {
        "name": config.name,
        "geometry": {
            "paths": [
                {"id": p.path_id, "road": p.road, "entry": list(p.entry_point), "heading": p.heading,
                 "lane_offset": p.lane_center_offset, "length": p.length, "road_edges": list(p.road_edges)}
                for p in config.paths
            ],
            "conflicts": [
                {"id": c.conflict_id, "position": list(c.position), "paths": sorted(c.paths)}
                for c in config.conflicts
            ],
        },
        "vehicles": vehicles,
        "pedestrian": {"waypoints": [
            {"t": w.t, "x": w.x, "y": w.y, "speed": w.speed, "orientation": w.orientation}
            for w in config.pedestrian_script
        ]},
        "params": params,
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_scenario_file(path_or_name):
    """Load a scenario from a file path or by bundled name (e.g. ``scenario1``)."""
    path = Path(path_or_name)
    if not path.exists():
        bundled = SCENARIO_DIR / f"{path_or_name}.yaml"
        if not bundled.exists():
            raise ParseError(f"no scenario file or bundled scenario named {path_or_name!r}")
        path = bundled
    return load_scenario(path.read_text())


def pedestrian_at(script, t):
    """Pedestrian state at time ``t`` or None when the script does not cover ``t``.

    Positions interpolate linearly between waypoints; speed and orientation are
    those of the segment's starting waypoint.
    """
    if not script or t < script[0].t or t > script[-1].t:
        return None
    from .pedestrian import PedestrianState

    for a, b in zip(script, script[1:]):
        if a.t <= t <= b.t:
            w = (t - a.t) / (b.t - a.t)
            return PedestrianState(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), a.speed, a.orientation)
    last = script[-1]
    return PedestrianState(last.x, last.y, last.speed, last.orientation)
