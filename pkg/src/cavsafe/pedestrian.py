"""Emergency-mode constraints over the decision vector ``(u1, u2, e, s)``.

``u1`` is the transformed steering input, ``u2`` the acceleration, ``e`` the
lane-recentring slack and ``s`` the desired-speed slack.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .barriers import LinearConstraint
from .lie import lie_terms

U1, U2, E, S = 0, 1, 2, 3
NVARS = 4


class PedestrianState(NamedTuple):
    x0: float
    y0: float
    v_ped: float
    xi: float


class EllipseUnsafeSet(NamedTuple):
    center: tuple
    A: float
    B: float
    xi: float


def ellipse_axes(ped, d_i, v_i, params):
    """Semi-axes grow with pedestrian speed, CAV distance and CAV speed."""
    A = params.epsilon + (ped.v_ped / params.k1) * (d_i / params.k2) * (v_i / params.k3)
    return A, A / params.lam


def ellipse_center(ped, A):
    """Centre placed A/2 ahead of the pedestrian along its walking direction."""
    return (ped.x0 + 0.5 * A * math.cos(ped.xi), ped.y0 + 0.5 * A * math.sin(ped.xi))


def barycenter(state, sigma):
    return (state.x + 0.5 * sigma * math.cos(state.theta), state.y + 0.5 * sigma * math.sin(state.theta))


def build_ellipse(ped, state, params, sigma):
    """Unsafe set seen by one CAV; d_i is barycentre-to-pedestrian distance."""
    bx, by = barycenter(state, sigma)
    d = math.hypot(bx - ped.x0, by - ped.y0)
    A, B = ellipse_axes(ped, d, state.v, params)
    return EllipseUnsafeSet(ellipse_center(ped, A), A, B, ped.xi)


def b5_value(state, ell, sigma, r_b):
    q2, q3 = barycenter(state, sigma)
    q2 -= ell.center[0]
    q3 -= ell.center[1]
    c, s = math.cos(ell.xi), math.sin(ell.xi)
    return (q2 * c + q3 * s) ** 2 / ell.A ** 2 + (q2 * s - q3 * c) ** 2 / ell.B ** 2 - 1.0 - r_b


def pedestrian_terms(state, ell, sigma, r_b):
    return lie_terms("pedestrian", state, sigma, ell.center[0], ell.center[1], ell.A, ell.B, ell.xi, r_b)


def _hocbf(terms, tag):
    # Lf2 b + Lg1Lf b u1 + Lg2Lf b u2 + 2 Lf b + b >= 0
    coeffs = (terms.Lg1Lf, terms.Lg2Lf, 0.0, 0.0)
    if coeffs[0] == 0.0 and coeffs[1] == 0.0:
        return None
    return LinearConstraint(coeffs, -(terms.Lf2 + 2.0 * terms.Lf + terms.b), ">=", tag)


def pedestrian_hocbf(state, ell, sigma, r_b):
    """Second-order barrier condition keeping the CAV outside the enlarged ellipse.

    Returns None if neither input appears (v = 0 with the heading tangent to
    the level set); the condition is then ``b5 >= 0`` with nothing to steer.
    """
    return _hocbf(pedestrian_terms(state, ell, sigma, r_b), "Pedestrian")


def _linear_barrier(state, sigma, axis, sign, offset, tag):
    # b = sign * coord + offset
    ax, ay = (sign, 0.0) if axis == 0 else (0.0, sign)
    return _hocbf(lie_terms("linear", state, sigma, ax, ay, offset), tag)


def road_boundary_conditions(state, axis, lower, upper, sigma):
    """Keep world coordinate ``axis`` (0 = x, 1 = y) within ``[lower, upper]``."""
    if not lower < upper:
        raise ValueError("road boundaries must satisfy lower < upper")
    rows = (_linear_barrier(state, sigma, axis, 1.0, -lower, "RoadEdge"),
            _linear_barrier(state, sigma, axis, -1.0, upper, "RoadEdge"))
    return tuple(r for r in rows if r is not None)


def steering_limit(v, delta_max0, v_max):
    bound = math.tan(abs(delta_max0 * (1.0 - v / v_max)))
    return (LinearConstraint((1.0, 0.0, 0.0, 0.0), bound, "<=", "Steering"),
            LinearConstraint((1.0, 0.0, 0.0, 0.0), -bound, ">=", "Steering"))


def jerk_bounds(u2_prev, dt, j_min, j_max):
    return (LinearConstraint((0.0, 1.0, 0.0, 0.0), u2_prev + j_max * dt, "<=", "Jerk"),
            LinearConstraint((0.0, 1.0, 0.0, 0.0), u2_prev + j_min * dt, ">=", "Jerk"))


def lane_recenter_soft(state, x_ref, y_ref, sigma):
    """Lf2 E + Lg1Lf E u1 + Lg2Lf E u2 + 2 Lf E + E <= e."""
    t = lie_terms("lane", state, sigma, x_ref, y_ref)
    return LinearConstraint((t.Lg1Lf, t.Lg2Lf, -1.0, 0.0), -(t.Lf2 + 2.0 * t.Lf + t.b), "<=", "SoftLane")


def speed_soft(v, v_ref):
    """Lf S + Lg2 S u2 + S <= s, first order since u2 enters after one derivative."""
    t = lie_terms("speed", (0.0, 0.0, 0.0, v), 1.0, v_ref)
    return LinearConstraint((0.0, t.Lg2, 0.0, -1.0), -(t.Lf + t.b), "<=", "SoftSpeed")


def anti_overshoot(state, lane_center, deviation_side, axis, sigma, margin=0.05):
    """Barrier stopping a recovering CAV from crossing the lane centre.

    ``deviation_side`` is +1 when the CAV sits on the positive side of
    ``lane_center`` along world ``axis`` and -1 otherwise; the barrier edge is
    the centre pushed ``margin`` past it, away from the deviation side.
    """
    side = 1.0 if deviation_side > 0 else -1.0
    return _linear_barrier(state, sigma, axis, side, -side * lane_center + margin, "AntiOvershoot")
