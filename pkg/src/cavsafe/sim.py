"""Deterministic world loop: spawning, mode logic, pedestrian events and traces.

Modes
-----
Normal     follows a feasible committed cubic exactly.
Filtered   tracks its cubic through a one-variable safety filter on acceleration.
Emergency  solves the (u1, u2, e, s) pedestrian QP on the bicycle model.
Recovery   same QP with recovery weights until the CAV is back on its lane centre.

A vehicle may run Normal only while every vehicle it has to yield to (its
predecessor on the lane, earlier crossers at shared conflicts) is Normal too,
and no pedestrian event is active on its road; otherwise its committed plan
could be invalidated by someone else's deviation, and it drops to Filtered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import barriers
from .barriers import PhiParams
from .coordinator import ChainEntry, CoordinatorDb, planning_order, resequence
from .dynamics import BicycleState, ControlInput, normalize_angle, step_bicycle
from .errors import InfeasibleEntry, NumericalBreakdown
from .pedestrian import (
    NVARS, U1, U2, E, S, anti_overshoot, b5_value, build_ellipse, jerk_bounds, lane_recenter_soft,
    pedestrian_hocbf, road_boundary_conditions, speed_soft, steering_limit,
)
from .planner import CubicTrajectory, feasible_exit_range, plan_min_time, reference_control, solve_cubic
from .qpsolve import QuadraticProgram, solve
from .scenario import pedestrian_at

NORMAL, FILTERED, EMERGENCY, RECOVERY = "Normal", "Filtered", "Emergency", "Recovery"
MODES = (NORMAL, FILTERED, EMERGENCY, RECOVERY)
LEGAL_TRANSITIONS = frozenset({
    (NORMAL, FILTERED), (FILTERED, NORMAL),
    (NORMAL, EMERGENCY), (FILTERED, EMERGENCY),
    (EMERGENCY, RECOVERY), (RECOVERY, NORMAL), (RECOVERY, FILTERED),
    # an aligned CAV leaves Emergency straight through a replan
    (EMERGENCY, NORMAL), (EMERGENCY, FILTERED),
})
SOFT_TAGS = frozenset({"SoftLane", "SoftSpeed"})

HALF_WIDTH = 0.9  # m, keeps the rear axle this far inside the road edges
ACTIVE_TOL = 1e-6
RETRY_DELAY = 0.5  # s between replanning attempts of a Filtered vehicle
RECOVERY_REPLAN = 0.25  # s between reference replans while recovering


@dataclass(frozen=True)
class TraceRecord:
    t: float
    vehicle_id: int
    mode: str
    p: float
    v: float
    u2: float
    x: float
    y: float
    theta: float
    delta: float
    b5: float | None
    active_tags: tuple


@dataclass(frozen=True)
class LogEvent:
    t: float
    vehicle_id: int | None
    kind: str
    detail: str = ""


@dataclass
class Vehicle:
    spec: object
    path: object
    state: BicycleState
    mode: str
    mode_since: float
    ellipse: object
    traj: CubicTrajectory | None = None
    plan_ok: bool = False
    u2_prev: float = 0.0
    delta: float = 0.0
    side: float = 0.0
    retry_at: float = 0.0
    replan_at: float = 0.0

    @property
    def vid(self):
        return self.spec.vehicle_id

    @property
    def frame(self):
        """(arclength, lateral offset from the lane centre)."""
        return self.path.to_path_frame(self.state.x, self.state.y)

    @property
    def p(self):
        return self.frame[0]

    @property
    def v(self):
        return self.state.v


@dataclass
class World:
    config: object
    params: object
    rng: np.random.Generator
    db: CoordinatorDb
    pending: list
    step: int = 0
    vehicles: dict = field(default_factory=dict)
    event_road: str | None = None
    queue: list = field(default_factory=list)
    pair_order: dict = field(default_factory=dict)
    lateral_skip: set = field(default_factory=set)
    trace: list = field(default_factory=list)
    log: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    pedestrian: object = None

    @property
    def t(self):
        return self.step * self.params.dt


def make_world(config, seed=None, anti_overshoot=None):
    """Fresh world; ``seed`` and ``anti_overshoot`` override the scenario params."""
    params = config.params
    if seed is not None or anti_overshoot is not None:
        params = replace(
            params,
            seed=params.seed if seed is None else int(seed),
            anti_overshoot=params.anti_overshoot if anti_overshoot is None else bool(anti_overshoot),
        )
        config = replace(config, params=params)
    rng = np.random.default_rng(params.seed)
    order = planning_order([(v.vehicle_id, v.arrival_time) for v in config.vehicles], rng)
    specs = {v.vehicle_id: v for v in config.vehicles}
    return World(config, params, rng, CoordinatorDb(config), [specs[vid] for vid in order])


def _log(world, vid, kind, detail=""):
    world.log.append(LogEvent(world.t, vid, kind, detail))


def _set_mode(world, veh, mode):
    if veh.mode != mode:
        world.transitions.append((world.t, veh.vid, veh.mode, mode))
        veh.mode = mode
        veh.mode_since = world.t


# ---------------------------------------------------------------- geometry

def _on_road(ped, path):
    along, lateral = path.to_path_frame(ped.x0, ped.y0)
    right, left = path.corridor
    return right - 1e-9 <= lateral <= left + 1e-9 and 0.0 <= along <= path.length


def pedestrian_on_road(world, ped, road):
    if ped is None:
        return False
    return any(_on_road(ped, p) for p in world.config.paths if p.road == road)


def _predecessor(world, veh):
    """Nearest present vehicle physically ahead on the same lane."""
    p = veh.p
    best = None
    for k in world.vehicles.values():
        if k is veh or k.path.path_id != veh.path.path_id:
            continue
        pk = k.p
        if pk > p or (pk == p and k.vid < veh.vid):
            if best is None or pk < best[1]:
                best = (k, pk)
    return None if best is None else best[0]


def _crossers(world, veh):
    """(other, conflict id, own arclength, other's arclength) on crossing paths, both short of it."""
    cfg = world.config
    out = []
    p_i = veh.p
    for cid, L_i in veh.path.conflict_points:
        if p_i > L_i:
            continue
        for other_pid in sorted(cfg.conflict(cid).paths - {veh.path.path_id}):
            L_k = dict(cfg.path(other_pid).conflict_points)[cid]
            for k in world.vehicles.values():
                if k.path.path_id == other_pid and k.p <= L_k:
                    out.append((k, cid, L_i, L_k))
    return out


def _earlier(world, a, b, cid, L_a, L_b):
    """Which of ``a``/``b`` crosses ``cid`` first; fixed once decided for the pair."""
    key = (min(a.vid, b.vid), max(a.vid, b.vid), cid)
    if key not in world.pair_order:
        def eta(veh, L):
            t = world.db.crossing_time(veh.vid, cid)
            if t is None:
                t = world.t + (L - veh.p) / max(veh.v, world.params.v_min)
            return t

        ta, tb = eta(a, L_a), eta(b, L_b)
        world.pair_order[key] = a.vid if (ta, a.vid) <= (tb, b.vid) else b.vid
    return world.pair_order[key]


def yield_to(world, veh):
    """Vehicles whose motion constrains ``veh``: lane predecessor and earlier crossers."""
    out = []
    pred = _predecessor(world, veh)
    if pred is not None:
        out.append(pred)
    for k, cid, L_i, L_k in _crossers(world, veh):
        if _earlier(world, veh, k, cid, L_i, L_k) == k.vid:
            out.append(k)
    return out


def may_be_normal(world, veh):
    if world.event_road is not None and veh.path.road == world.event_road:
        return False
    return all(k.mode == NORMAL for k in yield_to(world, veh))


# ---------------------------------------------------------------- planning

def _commit(world, veh, traj, plan_ok):
    veh.traj = traj
    veh.plan_ok = plan_ok
    world.db.commit(veh.vid, veh.path.path_id, traj, veh.spec.arrival_time)


def replan(world, veh):
    """Plan from the current state and commit; True when the plan passed every check."""
    params = world.params
    p = min(max(veh.p, 0.0), veh.path.length)
    v = min(max(veh.v, params.v_min), params.v_max)
    try:
        result = plan_min_time(veh.vid, veh.path.path_id, world.t, p, v, world.db, params,
                               entry_time=veh.spec.arrival_time)
    except InfeasibleEntry as exc:
        _log(world, veh.vid, "PlanFailed", str(exc))
        return False
    if isinstance(result, CubicTrajectory):
        _commit(world, veh, result, True)
        return True
    _commit(world, veh, result.reference, False)
    kind = result.last_violation.kind if result.last_violation else "none"
    _log(world, veh.vid, "NeedsSafetyFilter", kind)
    return False


def _commit_emergency_prediction(world, veh):
    """Coordinator view of an emergency CAV: the rest of the path at the emergency speed."""
    params = world.params
    p = min(max(veh.p, 0.0), veh.path.length)
    remaining = veh.path.length - p
    if remaining <= 0:
        return
    v = max(veh.v, params.v_min)
    duration = max(remaining / max(params.emergency_speed, params.v_min), params.dt)
    _commit(world, veh, solve_cubic(world.t, world.t + duration, p, v, veh.path.length, veh.path.path_id), False)


def _settle(world, veh):
    """After a replan: Normal when allowed and the plan is feasible, else Filtered."""
    ok = replan(world, veh)
    if ok and may_be_normal(world, veh):
        _set_mode(world, veh, NORMAL)
    else:
        _set_mode(world, veh, FILTERED)
        veh.retry_at = world.t + RETRY_DELAY


def _chain_entries(world, vehicles):
    params = world.params
    entries = []
    ordered = sorted(vehicles, key=lambda k: (k.path.path_id, -k.p, k.vid))
    for k in ordered:
        remaining = k.path.length - k.p
        if remaining <= 0:
            continue
        v = min(max(k.v, params.v_min), params.v_max)
        rng = feasible_exit_range(v, remaining, params)
        weight = 1.0 / rng.length if rng.length > 0 else 1e9
        entries.append(ChainEntry(k.vid, weight, max(rng.t_lower, 1e-9), k.path.path_id))
    return entries


def _enqueue(world, vehicles):
    fresh = [k for k in vehicles if k.vid not in world.queue]
    world.queue.extend(e.vehicle_id for e in resequence(_chain_entries(world, fresh)))


def _process_queue(world):
    while world.queue:
        vid = world.queue.pop(0)
        veh = world.vehicles.get(vid)
        if veh is None or veh.mode in (EMERGENCY, RECOVERY):
            continue
        if veh.mode == NORMAL:
            continue
        _settle(world, veh)
        return vid
    return None


# ---------------------------------------------------------------- spawning

def _spawn(world, spec):
    path = world.config.path(spec.path_id)
    x, y = path.point_at(0.0)
    veh = Vehicle(spec, path, BicycleState(x, y, path.heading, spec.entry_speed), None, world.t,
                  world.config.ellipse_for(spec.vehicle_id))
    world.vehicles[spec.vehicle_id] = veh
    if world.event_road is not None and path.road == world.event_road:
        _commit_emergency_prediction(world, veh)
        _set_mode(world, veh, EMERGENCY)
        _log(world, veh.vid, "EmergencyOnEntry")
        return veh
    _settle(world, veh)
    if veh.mode == NORMAL:
        veh.u2_prev = reference_control(veh.traj, world.t)
    return veh


# ---------------------------------------------------------------- events

def detect_pedestrian(world, ped):
    """Vehicles seeing the pedestrian ahead, inside their road corridor and sensing range."""
    if ped is None:
        return set()
    params = world.params
    found = set()
    for veh in world.vehicles.values():
        if not _on_road(ped, veh.path):
            continue
        along, _ = veh.path.to_path_frame(ped.x0, ped.y0)
        if along < veh.p:
            continue
        bx = veh.state.x + 0.5 * params.sigma * math.cos(veh.state.theta)
        by = veh.state.y + 0.5 * params.sigma * math.sin(veh.state.theta)
        if math.hypot(ped.x0 - bx, ped.y0 - by) <= params.sensing_range:
            found.add(veh.vid)
    return found


def broadcast_and_transition(world, detectors):
    """Same-road vehicles enter Emergency; everyone else is queued for replanning."""
    road = world.vehicles[min(detectors)].path.road
    world.event_road = road
    _log(world, min(detectors), "Detection", ",".join(str(d) for d in sorted(detectors)))
    others = []
    for veh in world.vehicles.values():
        if veh.path.road == road:
            if veh.mode in (NORMAL, FILTERED):
                _commit_emergency_prediction(world, veh)
                _set_mode(world, veh, EMERGENCY)
        else:
            if veh.mode == NORMAL:
                _set_mode(world, veh, FILTERED)
            if veh.mode == FILTERED:
                others.append(veh)
    _enqueue(world, others)


def _aligned(world, veh):
    params = world.params
    _, lateral = veh.frame
    heading_err = normalize_angle(veh.state.theta - veh.path.heading)
    return abs(lateral) <= params.align_lateral_tol and abs(heading_err) <= params.align_heading_tol


def _snap_to_lane_heading(veh):
    veh.state = veh.state._replace(theta=veh.path.heading)
    veh.delta = 0.0


def _start_recovery(world, veh):
    axis, sign = veh.path.lateral_axis()
    _, lateral = veh.frame
    veh.side = 1.0 if lateral * sign > 0 else -1.0
    _set_mode(world, veh, RECOVERY)
    replan(world, veh)
    veh.replan_at = world.t + RECOVERY_REPLAN


def end_of_event(world, veh, ped):
    """Leave Emergency once the pedestrian is off the road or passed by the clearance."""
    if veh.mode != EMERGENCY:
        return None
    done = not pedestrian_on_road(world, ped, veh.path.road)
    if not done:
        along, _ = veh.path.to_path_frame(ped.x0, ped.y0)
        done = veh.p > along + veh.ellipse.epsilon
    if not done:
        return None
    if _aligned(world, veh):
        _snap_to_lane_heading(veh)
        _settle(world, veh)
    else:
        _start_recovery(world, veh)
    return veh.mode


# ---------------------------------------------------------------- control

def _longitudinal_rows(world, veh):
    """Scalar acceleration rows: speed limits, rear-end and lateral certificates."""
    params = world.params
    p, v = veh.p, veh.v
    rows = list(barriers.speed_conditions(v, params.v_min, params.speed_cap))
    pred = _predecessor(world, veh)
    if pred is not None:
        rows.append(barriers.rear_end_condition(p, v, pred.p, pred.v, params.phi, params.gamma))
    for k, cid, L_i, L_k in _crossers(world, veh):
        if _earlier(world, veh, k, cid, L_i, L_k) != k.vid:
            continue
        key = (veh.vid, k.vid, cid)
        if key in world.lateral_skip:
            continue
        gamma_tilde = params.gamma + abs(L_i - L_k)
        phi_params = PhiParams(params.phi, gamma_tilde, max(veh.spec.entry_speed, params.v_min), L_i)
        if barriers.lateral_slack(p, v, k.p, phi_params) < 0:
            world.lateral_skip.add(key)
            _log(world, veh.vid, "LateralSkipped", f"negative at first use against {k.vid}")
            continue
        row = barriers.lateral_condition(p, v, k.p, k.v, phi_params)
        if row is not None:
            rows.append(row)
    return rows


def filtered_control(world, veh):
    """Closest acceleration to the plan's reference inside every scalar certificate."""
    params = world.params
    u_ref = reference_control(veh.traj, world.t) if veh.traj is not None else 0.0
    lo, hi = params.u_min, params.u_max
    lo_tag, hi_tag = "AccelMin", "AccelMax"
    for row in _longitudinal_rows(world, veh):
        side, value = row.bound()
        if side == "upper" and value < hi:
            hi, hi_tag = value, row.tag
        elif side == "lower" and value > lo:
            lo, lo_tag = value, row.tag
    if lo > hi + 1e-12:
        _log(world, veh.vid, "Infeasible", f"{lo_tag} vs {hi_tag}")
        u = min(max(params.u_min, (params.v_min - veh.v) / params.dt), params.u_max)
        return u, ("Fallback",)
    u = min(max(u_ref, lo), hi)
    tags = []
    if abs(u - lo) <= ACTIVE_TOL and lo_tag != "AccelMin" or u == params.u_min:
        tags.append(lo_tag)
    if abs(u - hi) <= ACTIVE_TOL and hi_tag != "AccelMax" or u == params.u_max:
        tags.append(hi_tag)
    return u, tuple(sorted(set(tags)))


def _road_limits(veh):
    """World-axis interval that keeps the rear axle HALF_WIDTH inside the road edges."""
    axis, sign = veh.path.lateral_axis()
    centre = veh.path.entry_point[axis]
    right, left = veh.path.corridor
    a = centre + sign * (right + HALF_WIDTH)
    b = centre + sign * (left - HALF_WIDTH)
    return axis, min(a, b), max(a, b)


def emergency_qp(world, veh, ped):
    """Build the (u1, u2, e, s) QP for a CAV in Emergency or Recovery."""
    params = world.params
    sigma = params.sigma
    state = veh.state
    recovering = veh.mode == RECOVERY
    w_mode = params.weights_recovery if recovering else params.weights_emergency
    weights = np.asarray(w_mode, dtype=float) + params.qp_regularization
    u_ref = reference_control(veh.traj, world.t) if veh.traj is not None else 0.0
    # objective w1 (u2 - u_ref)^2 + w2 u1^2 + w3 e^2 + w4 s^2 over (u1, u2, e, s)
    diag = np.array([weights[1], weights[0], weights[2], weights[3]])
    linear = np.zeros(NVARS)
    linear[U2] = -2.0 * weights[0] * u_ref
    constant = weights[0] * u_ref * u_ref
    lower = np.array([-np.inf, params.u_min, -np.inf, -np.inf])
    upper = np.array([np.inf, params.u_max, np.inf, np.inf])
    rows = [r.embed(U2, NVARS) for r in _longitudinal_rows(world, veh)]
    if ped is not None and pedestrian_on_road(world, ped, veh.path.road):
        ell = build_ellipse(ped, state, veh.ellipse, sigma)
        row = pedestrian_hocbf(state, ell, sigma, params.r_b)
        if row is not None:
            rows.append(row)
    axis, lo, hi = _road_limits(veh)
    rows.extend(road_boundary_conditions(state, axis, lo, hi, sigma))
    rows.extend(steering_limit(state.v, params.delta_max0, params.v_max))
    rows.extend(jerk_bounds(veh.u2_prev, params.dt, params.j_min, params.j_max))
    p, _ = veh.frame
    if w_mode[2] > 0:
        xr, yr = veh.path.point_at(p, 0.0)
        rows.append(lane_recenter_soft(state, xr, yr, sigma))
    else:
        lower[E] = upper[E] = 0.0
    if w_mode[3] > 0:
        rows.append(speed_soft(state.v, params.emergency_speed))
    else:
        lower[S] = upper[S] = 0.0
    if recovering and params.anti_overshoot:
        axis_c, _ = veh.path.lateral_axis()
        centre = veh.path.entry_point[axis_c]
        row = anti_overshoot(state, centre, veh.side, axis_c, sigma, params.anti_overshoot_margin)
        if row is not None:
            rows.append(row)
    return QuadraticProgram(diag, linear, rows, lower, upper, constant)


def _fallback(world, veh):
    params = world.params
    u2 = max(params.u_min, veh.u2_prev + params.j_min * params.dt, (params.v_min - veh.v) / params.dt)
    return ControlInput(0.0, min(u2, params.u_max))


def emergency_step(world, veh, ped):
    """Control of an Emergency/Recovery CAV and the binding hard constraint tags."""
    qp = emergency_qp(world, veh, ped)
    try:
        start = np.clip([0.0, veh.u2_prev, 0.0, 0.0], qp.lower, qp.upper)
        sol = solve(qp, start)
        if not sol.optimal and any(c.tag == "AntiOvershoot" for c in qp.constraints):
            # the smoothing row is optional; drop it before giving up on the step
            qp.constraints = [c for c in qp.constraints if c.tag != "AntiOvershoot"]
            sol = solve(qp, start)
            if sol.optimal:
                _log(world, veh.vid, "AntiOvershootRelaxed")
    except NumericalBreakdown as exc:
        _log(world, veh.vid, "Infeasible", f"breakdown: {exc}")
        return _fallback(world, veh), ("Fallback",)
    if not sol.optimal:
        _log(world, veh.vid, "Infeasible", veh.mode)
        return _fallback(world, veh), ("Fallback",)
    x = sol.x
    tags = sorted({c.tag for c in qp.constraints
                   if c.tag not in SOFT_TAGS and c.margin(x) <= ACTIVE_TOL})
    return ControlInput(float(x[U1]), float(x[U2])), tuple(tags)


# ---------------------------------------------------------------- stepping

def _b5(world, veh, ped):
    if ped is None or not pedestrian_on_road(world, ped, veh.path.road):
        return None
    ell = build_ellipse(ped, veh.state, veh.ellipse, world.params.sigma)
    return b5_value(veh.state, ell, world.params.sigma, world.params.r_b)


def _integrate_longitudinal(world, veh, u2, exact):
    """Advance a lane-following vehicle; ``exact`` samples the cubic instead of Euler."""
    params = world.params
    p, lateral = veh.frame
    t_next = world.t + params.dt
    traj = veh.traj
    if exact:
        if t_next <= traj.tf:
            p_next, v_next = float(traj.position(t_next)), float(traj.speed(t_next))
        else:
            v_next = float(traj.speed(traj.tf))
            p_next = float(traj.position(traj.tf)) + v_next * (t_next - traj.tf)
    else:
        p_next, v_next = p + veh.v * params.dt, veh.v + u2 * params.dt
    x, y = veh.path.point_at(p_next, lateral)
    veh.state = BicycleState(x, y, veh.path.heading, v_next)


def step_world(world):
    """Advance one step; returns False once the run is complete."""
    params = world.params
    t = world.t
    while world.pending and world.pending[0].arrival_time <= t + 1e-9:
        _spawn(world, world.pending.pop(0))
    ped = pedestrian_at(world.config.pedestrian_script, t)
    world.pedestrian = ped
    if world.event_road is None and ped is not None:
        detectors = detect_pedestrian(world, ped)
        if detectors:
            broadcast_and_transition(world, detectors)
    for veh in list(world.vehicles.values()):
        if veh.mode == EMERGENCY:
            end_of_event(world, veh, ped)
        elif veh.mode == RECOVERY:
            if _aligned(world, veh):
                _snap_to_lane_heading(veh)
                _settle(world, veh)
            elif world.t >= veh.replan_at:
                replan(world, veh)
                veh.replan_at = world.t + RECOVERY_REPLAN
    if world.event_road is not None and not pedestrian_on_road(world, ped, world.event_road) \
            and not any(k.mode == EMERGENCY for k in world.vehicles.values()):
        _log(world, None, "EventCleared", world.event_road)
        world.event_road = None
        _enqueue(world, [k for k in world.vehicles.values() if k.mode == FILTERED])
    for veh in world.vehicles.values():
        if veh.mode == NORMAL and not may_be_normal(world, veh):
            _set_mode(world, veh, FILTERED)
            veh.retry_at = t + RETRY_DELAY
    _process_queue(world)
    if not world.queue:
        waiting = [k for k in world.vehicles.values()
                   if k.mode == FILTERED and t >= k.retry_at and may_be_normal(world, k)]
        if waiting:
            _enqueue(world, waiting)

    controls = {}
    for veh in world.vehicles.values():
        if veh.mode == NORMAL:
            controls[veh.vid] = (ControlInput(0.0, reference_control(veh.traj, t)), ())
        elif veh.mode == FILTERED:
            u2, tags = filtered_control(world, veh)
            controls[veh.vid] = (ControlInput(0.0, u2), tags)
        else:
            controls[veh.vid] = emergency_step(world, veh, ped)
    for veh in world.vehicles.values():
        control, tags = controls[veh.vid]
        delta = math.atan(control.u1)
        p, _ = veh.frame
        world.trace.append(TraceRecord(t, veh.vid, veh.mode, p, veh.v, control.u2, veh.state.x,
                                       veh.state.y, veh.state.theta, delta, _b5(world, veh, ped), tags))
    for veh in world.vehicles.values():
        control, _ = controls[veh.vid]
        if veh.mode in (EMERGENCY, RECOVERY):
            veh.state = step_bicycle(veh.state, control, params.sigma, params.dt)
        else:
            _integrate_longitudinal(world, veh, control.u2, exact=veh.mode == NORMAL)
        veh.u2_prev = control.u2
        veh.delta = math.atan(control.u1)
    for vid in [k.vid for k in world.vehicles.values() if k.p >= k.path.length - 1e-9]:
        del world.vehicles[vid]
        world.db.remove(vid)
        _log(world, vid, "Exit")
    world.step += 1
    return not _complete(world)


def _complete(world):
    script = world.config.pedestrian_script
    ped_done = not script or world.t > script[-1].t
    return not world.pending and not world.vehicles and ped_done


@dataclass
class SimResult:
    trace: list
    log: list
    transitions: list
    config: object
    end_time: float


def run(config, seed=None, until=None, anti_overshoot=None):
    """Run to completion, to ``until`` seconds, or to the configured horizon."""
    world = make_world(config, seed, anti_overshoot)
    limit = world.params.horizon if until is None else min(until, world.params.horizon)
    while world.t <= limit + 1e-9:
        if not step_world(world):
            break
    return SimResult(world.trace, world.log, world.transitions, world.config, world.t)
