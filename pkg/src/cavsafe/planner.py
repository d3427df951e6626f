"""Energy-optimal cubic trajectories and the minimum exit-time search.

The unconstrained energy-optimal motion is a cubic in time with zero terminal
acceleration. The upper-level search walks candidate exit times upward from the
fastest feasible one and keeps the first cubic that respects speed, input,
rear-end and lateral constraints against the coordinator's committed plans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InfeasibleEntry, SingularSystem

_TOL = 1e-9


@dataclass(frozen=True)
class CubicTrajectory:
    """p(t) = phi3 t^3 + phi2 t^2 + phi1 t + phi0 on [t0, tf].

    Stored in shifted time ``tau = t - t0`` (``p0 + v0 tau + b tau^2 + a tau^3``)
    so evaluation stays well conditioned late in a run; the absolute-time
    coefficients are exposed as properties.
    """

    t0: float
    tf: float
    p0: float
    v0: float
    a: float
    b: float
    path_id: int = 0

    @property
    def phi3(self):
        return self.a

    @property
    def phi2(self):
        return self.b - 3.0 * self.a * self.t0

    @property
    def phi1(self):
        t0 = self.t0
        return 3.0 * self.a * t0 ** 2 - 2.0 * self.b * t0 + self.v0

    @property
    def phi0(self):
        t0 = self.t0
        return -self.a * t0 ** 3 + self.b * t0 ** 2 - self.v0 * t0 + self.p0

    @property
    def coefficients(self):
        return (self.phi3, self.phi2, self.phi1, self.phi0)

    def position(self, t):
        if isinstance(t, float):
            tau = t - self.t0
            return self.p0 + tau * (self.v0 + tau * (self.b + tau * self.a))
        tau = np.asarray(t, dtype=float) - self.t0
        return self.p0 + tau * (self.v0 + tau * (self.b + tau * self.a))

    def speed(self, t):
        if isinstance(t, float):
            tau = t - self.t0
            return self.v0 + tau * (2.0 * self.b + 3.0 * self.a * tau)
        tau = np.asarray(t, dtype=float) - self.t0
        return self.v0 + tau * (2.0 * self.b + 3.0 * self.a * tau)

    def accel(self, t):
        if isinstance(t, float):
            return 2.0 * self.b + 6.0 * self.a * (t - self.t0)
        tau = np.asarray(t, dtype=float) - self.t0
        return 2.0 * self.b + 6.0 * self.a * tau

    def crossing_time(self, arclength):
        """First time in the window where p(t) = arclength, or None."""
        return _first_crossing(self, arclength)


def _stationary_points(a, b, c, T):
    """Roots of 3a tau^2 + 2b tau + c inside (0, T), ascending."""
    if a == 0.0:
        roots = [] if b == 0.0 else [-c / (2.0 * b)]
    else:
        disc = 4.0 * b * b - 12.0 * a * c
        if disc < 0.0:
            roots = []
        else:
            sq = math.sqrt(disc)
            # numerically stable pair
            q = -0.5 * (2.0 * b + math.copysign(sq, b))
            roots = [q / (3.0 * a)] + ([c / q] if q != 0.0 else [])
    return sorted(r for r in roots if 0.0 < r < T)


@lru_cache(maxsize=8192)
def _first_crossing(traj, arclength):
    if traj.p0 >= arclength:
        return None
    a, b, c = traj.a, traj.b, traj.v0
    d = traj.p0 - arclength
    T = traj.tf - traj.t0
    tol = 1e-12 * max(1.0, abs(arclength))

    def f(tau):
        return d + tau * (c + tau * (b + tau * a))

    lo, f_lo = 0.0, d
    for hi in _stationary_points(a, b, c, T) + [T]:
        f_hi = f(hi)
        if f_hi >= -tol:
            if f_hi <= tol:
                return traj.t0 + hi
            # f is monotone increasing on [lo, hi]: safeguarded Newton
            x = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo)
            for _ in range(100):
                fx = f(x)
                if abs(fx) <= tol or hi - lo <= 1e-15 * max(1.0, T):
                    break
                if fx < 0.0:
                    lo = x
                else:
                    hi = x
                slope = c + x * (2.0 * b + 3.0 * a * x)
                step = x - fx / slope if slope > 0.0 else lo - 1.0
                x = step if lo < step < hi else 0.5 * (lo + hi)
            return traj.t0 + x
        lo, f_lo = hi, f_hi
    return None


@dataclass(frozen=True)
class FeasibleRange:
    """Shortest and longest traversal durations (s) of the remaining distance."""

    t_lower: float
    t_upper: float

    def __post_init__(self):
        if self.t_lower > self.t_upper:
            raise ValueError("t_lower must not exceed t_upper")

    @property
    def length(self):
        return self.t_upper - self.t_lower


@dataclass(frozen=True)
class Violation:
    kind: str  # SpeedMax | SpeedMin | AccelMax | AccelMin | RearEnd | Lateral
    t: float
    other: int | None = None


@dataclass(frozen=True)
class NeedsSafetyFilter:
    """No candidate exit time passed; ``reference`` is the fastest cubic, for a CBF filter."""

    reference: CubicTrajectory
    last_violation: Violation | None = None


def solve_cubic(t0, tf, p0, v0, pf, path_id=0):
    """Cubic meeting p(t0)=p0, v(t0)=v0, p(tf)=pf and u(tf)=0."""
    T = tf - t0
    if T < 1e-9:
        raise SingularSystem(f"window {T} s is too short")
    a = (v0 * T - (pf - p0)) / (2.0 * T ** 3)
    return CubicTrajectory(t0, tf, p0, v0, a, -3.0 * a * T, path_id)


def _traverse(v0, distance, v_target, accel):
    """Time to cover ``distance`` moving to ``v_target`` at rate ``accel`` then cruising."""
    if v_target == v0:
        return distance / v0
    rate = abs(accel) if v_target > v0 else -abs(accel)
    t_ramp = (v_target - v0) / rate
    d_ramp = 0.5 * (v0 + v_target) * t_ramp
    if d_ramp >= distance:
        disc = v0 * v0 + 2.0 * rate * distance
        return (-v0 + math.sqrt(max(disc, 0.0))) / rate
    return t_ramp + (distance - d_ramp) / v_target


def feasible_exit_range(v0, L, params):
    """Bang-then-cruise bounds on the time to cover the remaining distance ``L``.

    Lower: accelerate at u_max to the speed cap, then cruise. Upper: brake at
    u_min to v_min, then crawl.
    """
    cap = params.speed_cap
    if not params.v_min - 1e-9 <= v0 <= params.v_max + 1e-9:
        raise InfeasibleEntry(f"speed {v0} outside [{params.v_min}, {params.v_max}]")
    if L <= 0:
        return FeasibleRange(0.0, 0.0)
    v0 = max(v0, params.v_min)
    fast = _traverse(v0, L, cap, params.u_max if cap > v0 else params.u_min)
    slow = _traverse(v0, L, params.v_min, params.u_min)
    return FeasibleRange(min(fast, slow), max(fast, slow))


def reference_control(traj, t):
    if t > traj.tf:
        return 0.0
    return float(traj.accel(max(t, traj.t0)))


def _sample_times(t0, tf, dt):
    n = int(math.floor((tf - t0) / dt + 1e-9))
    ts = t0 + dt * np.arange(n + 1)
    if tf - ts[-1] > 1e-9:
        ts = np.append(ts, tf)
    return ts


def _bounds_violation(traj, params):
    """Speed and input limits, checked exactly on the quadratic speed and linear input."""
    t0, tf = traj.t0, traj.tf
    cands = [t0, tf]
    if traj.a != 0.0:
        vertex = t0 - traj.b / (3.0 * traj.a)
        if t0 < vertex < tf:
            cands.append(vertex)
    speeds = [traj.speed(float(t)) for t in cands]
    found = []
    v_hi = max(speeds)
    if v_hi > params.speed_cap + _TOL:
        found.append(Violation("SpeedMax", cands[speeds.index(v_hi)]))
    v_lo = min(speeds)
    if v_lo < params.v_min - _TOL:
        found.append(Violation("SpeedMin", cands[speeds.index(v_lo)]))
    for t in (t0, tf):
        u = traj.accel(float(t))
        if u > params.u_max + _TOL:
            found.append(Violation("AccelMax", t))
        elif u < params.u_min - _TOL:
            found.append(Violation("AccelMin", t))
    return found


def _rear_end_violation(traj, pred, params):
    lo = max(traj.t0, pred.t0)
    hi = min(traj.tf, pred.tf)
    if hi < lo:
        return None
    ts = _sample_times(lo, hi, params.dt)
    slack = pred.position(ts) - traj.position(ts) - params.gamma - params.phi * traj.speed(ts)
    bad = np.flatnonzero(slack < -_TOL)
    if bad.size:
        return float(ts[bad[0]])
    return None


def lateral_pair_slack(traj_i, L_i, traj_k, L_k, phi, gamma_tilde):
    """Plan-level lateral slack at t^n = min(t_i^n, t_k^n); None when not applicable."""
    ti = traj_i.crossing_time(L_i)
    tk = traj_k.crossing_time(L_k)
    if ti is None or tk is None:
        return None
    tn = min(ti, tk)
    if not (traj_i.t0 <= tn <= traj_i.tf and traj_k.t0 <= tn <= traj_k.tf):
        return None
    gap = abs(traj_k.position(tn) - traj_i.position(tn))
    later = traj_i if ti >= tk else traj_k
    return tn, gap - phi * later.speed(tn) - gamma_tilde


@dataclass(frozen=True)
class _Context:
    """Committed plans a candidate must respect, gathered once per planning scan."""

    predecessor: tuple | None  # (vehicle id, trajectory)
    crossers: tuple  # ((vehicle id, trajectory, own L, their L, gamma~), ...)


def _context(db, params, path_id, vehicle_id, entry):
    config = db.config
    pred_id = db.predecessor(vehicle_id, path_id, entry)
    pred = None if pred_id is None else (pred_id, db.trajectory(pred_id))
    crossers = []
    for cid, L_i in config.path(path_id).conflict_points:
        for other_path in sorted(config.conflict(cid).paths - {path_id}):
            L_k = dict(config.path(other_path).conflict_points)[cid]
            gamma_tilde = params.gamma + abs(L_i - L_k)
            for kid in db.vehicles_on(other_path):
                if kid != vehicle_id:
                    crossers.append((kid, db.trajectory(kid), L_i, L_k, gamma_tilde))
    return _Context(pred, tuple(crossers))


def _first_violation(traj, ctx, params):
    found = _bounds_violation(traj, params)
    if ctx.predecessor is not None:
        pred_id, pred = ctx.predecessor
        t = _rear_end_violation(traj, pred, params)
        if t is not None:
            found.append(Violation("RearEnd", t, pred_id))
    for kid, other, L_i, L_k, gamma_tilde in ctx.crossers:
        res = lateral_pair_slack(traj, L_i, other, L_k, params.phi, gamma_tilde)
        if res is not None and res[1] < -_TOL:
            found.append(Violation("Lateral", res[0], kid))
    if not found:
        return None
    return min(found, key=lambda v: v.t)


def check_feasible(traj, db, params, vehicle_id=None, entry_time=None):
    """First constraint violation of ``traj`` against committed plans, or None if feasible."""
    entry = traj.t0 if entry_time is None else entry_time
    return _first_violation(traj, _context(db, params, traj.path_id, vehicle_id, entry), params)


def plan_min_time(vehicle_id, path_id, t0, p0, v0, db, params, entry_time=None):
    """Earliest grid exit time whose cubic passes :func:`check_feasible`.

    Candidates are ``t0 + t_lower + k*dt`` up to ``t0 + t_upper``. The terminal
    speed of the cubic falls as the exit time grows, so the scan stops early
    once it drops below v_min: no later candidate can pass.
    """
    length = db.config.path(path_id).length
    L = length - p0
    rng = feasible_exit_range(v0, L, params)
    v0 = max(v0, params.v_min)
    ctx = _context(db, params, path_id, vehicle_id, t0 if entry_time is None else entry_time)
    first = None
    last = None
    k = 0
    while True:
        dur = rng.t_lower + k * params.dt
        if dur > rng.t_upper + 1e-9:
            break
        traj = solve_cubic(t0, t0 + dur, p0, v0, length, path_id)
        if first is None:
            first = traj
        last = _first_violation(traj, ctx, params)
        if last is None:
            return traj
        if traj.speed(traj.tf) < params.v_min - _TOL:
            break
        k += 1
    if first is None:
        first = solve_cubic(t0, t0 + max(rng.t_lower, params.dt), p0, v0, length, path_id)
    return NeedsSafetyFilter(first, last)
