"""Closed-loop harnesses: integrate a plant under a barrier-filtered controller.

Each harness returns the barrier values along one run and whether every filter
step was feasible. The acceleration box defaults to the controller limits;
``limits=None`` lifts it. Inputs are chosen by the package QP solver, so these runs exercise the
barrier rows, the solver and the integrators together.
"""

from __future__ import annotations

import math

import numpy as np

from cavsafe.barriers import PhiParams, lateral_condition, lateral_slack, rear_end_condition, rear_end_slack, \
    speed_conditions
from cavsafe.dynamics import BicycleState, ControlInput, LongitudinalState, step_bicycle, step_double_integrator
from cavsafe.pedestrian import (
    EllipseUnsafeSet, NVARS, U1, U2, b5_value, pedestrian_hocbf, pedestrian_terms, steering_limit,
)
from cavsafe.qpsolve import QuadraticProgram, solve
from cavsafe.scenario import ControllerParams

PARAMS = ControllerParams()
BOX = (PARAMS.u_min, PARAMS.u_max)
OTHER_SPEEDS = (3.0, 20.0)


def filter_acceleration(u_ref, rows, limits=None):
    """Closest acceleration to ``u_ref`` satisfying scalar rows and, if given, the input box.

    Returns (u, feasible). When infeasible the lower limit is applied as the
    best remaining braking effort.
    """
    lo, hi = (None, None) if limits is None else limits
    qp = QuadraticProgram([1.0], [-2.0 * u_ref], list(rows), None if lo is None else [lo],
                          None if hi is None else [hi], u_ref * u_ref)
    sol = solve(qp)
    if not sol.optimal:
        return (PARAMS.u_min if lo is None else lo), False
    return float(sol.x[0]), True


def rear_end_run(rng, steps=400, params=PARAMS, limits=BOX):
    """Follower tracks an aggressive reference behind a leader with random braking."""
    v_k = rng.uniform(4.0, 20.0)
    v_i = rng.uniform(4.0, 20.0)
    gap = params.gamma + params.phi * v_i + rng.uniform(0.0, 15.0)
    lead = LongitudinalState(gap, v_k)
    follow = LongitudinalState(0.0, v_i)
    switch = rng.integers(40, 200, size=4)
    accels = rng.uniform(-3.0, 2.0, size=5)
    values = []
    feasible = True
    for n in range(steps):
        phase = int(np.searchsorted(np.cumsum(switch), n, side="right"))
        u_k = accels[min(phase, 4)]
        if lead.v + u_k * params.dt < params.v_min or lead.v + u_k * params.dt > params.v_max:
            u_k = 0.0
        rows = [rear_end_condition(follow.p, follow.v, lead.p, lead.v, params.phi, params.gamma),
                *speed_conditions(follow.v, params.v_min, params.v_max)]
        u_i, ok = filter_acceleration(params.u_max, rows, limits)
        feasible &= ok
        values.append(rear_end_slack(follow.p, follow.v, lead.p, params.phi, params.gamma))
        follow = step_double_integrator(follow, u_i, params.dt)
        lead = step_double_integrator(lead, u_k, params.dt)
    values.append(rear_end_slack(follow.p, follow.v, lead.p, params.phi, params.gamma))
    return np.array(values), feasible


def lateral_run(rng, params=PARAMS, limits=BOX, max_steps=2000):
    """Later crosser enters while the earlier one is already on its way to the shared point.

    The earlier vehicle is placed so that, at the entry speeds, it reaches the
    conflict at least one headway before the entering vehicle; otherwise the
    crossing order the constraint encodes would be the wrong one.
    """
    L = rng.uniform(60.0, 120.0)
    gamma_tilde = params.gamma + rng.uniform(0.0, 5.0)
    v0 = rng.uniform(5.0, 20.0)
    phi_params = PhiParams(params.phi, gamma_tilde, v0, L)
    me = LongitudinalState(0.0, v0)
    v_k = rng.uniform(*OTHER_SPEEDS)
    closest = max(L - v_k * (L / v0 - params.phi - gamma_tilde / v_k), 0.0)
    # at the entry b equals the other vehicle's position, so every draw starts safe
    other = LongitudinalState(rng.uniform(closest, closest + 0.5 * L), v_k)
    u_other = rng.uniform(-1.5, 1.5)
    values = []
    feasible = True
    while me.p < L and len(values) < max_steps:
        # the earlier crosser keeps moving; one parked short of the conflict blocks any follower with v_min > 0
        u_k = u_other if OTHER_SPEEDS[0] < other.v + u_other * params.dt < OTHER_SPEEDS[1] else 0.0
        rows = list(speed_conditions(me.v, params.v_min, params.v_max))
        row = lateral_condition(me.p, me.v, other.p, other.v, phi_params)
        if row is not None:
            rows.append(row)
        u, ok = filter_acceleration(params.u_max, rows, limits)
        feasible &= ok
        values.append(lateral_slack(me.p, me.v, other.p, phi_params))
        me = step_double_integrator(me, u, params.dt)
        other = step_double_integrator(other, u_k, params.dt)
    return np.array(values), feasible


def pedestrian_start(rng, ell, sigma=PARAMS.sigma, r_b=PARAMS.r_b):
    """Random state outside the enlarged ellipse with a nonnegative first-order margin."""
    while True:
        ang = rng.uniform(-math.pi, math.pi)
        dist = rng.uniform(2.0, 30.0)
        x = ell.center[0] + dist * math.cos(ang)
        y = ell.center[1] + dist * math.sin(ang)
        heading = math.atan2(ell.center[1] - y, ell.center[0] - x) + rng.uniform(-0.4, 0.4)
        state = BicycleState(x, y, heading, rng.uniform(2.0, 12.0))
        t = pedestrian_terms(state, ell, sigma, r_b)
        if t.b >= 0.0 and t.Lf + t.b >= 0.0:
            return state


def pedestrian_run(rng, steps=300, params=PARAMS, limits=BOX):
    """Vehicle driving at a static pedestrian's ellipse, filtered by the second-order barrier."""
    ell = EllipseUnsafeSet((0.0, 0.0), rng.uniform(2.0, 4.0), 0.0, rng.uniform(-math.pi, math.pi))
    ell = ell._replace(B=ell.A / rng.uniform(1.0, 2.0))
    state = pedestrian_start(rng, ell)
    values = []
    u2_ref = rng.uniform(0.0, 2.0)
    lo, hi = (-np.inf, np.inf) if limits is None else limits
    feasible = True
    for _ in range(steps):
        values.append(b5_value(state, ell, params.sigma, params.r_b))
        rows = list(steering_limit(min(state.v, params.v_max), params.delta_max0, params.v_max))
        row = pedestrian_hocbf(state, ell, params.sigma, params.r_b)
        if row is not None:
            rows.append(row)
        rows.extend(r.embed(U2, NVARS) for r in speed_conditions(state.v, params.v_min, params.v_max))
        # minimise u1^2 + (u2 - u2_ref)^2; the two slack slots are pinned to zero
        qp = QuadraticProgram([1.0, 1.0, 1.0, 1.0], [0.0, -2.0 * u2_ref, 0.0, 0.0], rows,
                              [-np.inf, lo, 0.0, 0.0], [np.inf, hi, 0.0, 0.0], u2_ref ** 2)
        sol = solve(qp)
        feasible &= sol.optimal
        control = ControlInput(float(sol.x[U1]), float(sol.x[U2])) if sol.optimal else ControlInput(0.0, params.u_min)
        state = step_bicycle(state, control, params.sigma, params.dt)
        if state.v < params.v_min:
            state = state._replace(v=params.v_min)
    values.append(b5_value(state, ell, params.sigma, params.r_b))
    return np.array(values), feasible
