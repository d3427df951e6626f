"""Double-integrator and kinematic bicycle models with explicit Euler steps."""

from __future__ import annotations

import math
from typing import NamedTuple

from .errors import DomainError


class LongitudinalState(NamedTuple):
    p: float  # arclength from control-zone entry
    v: float


class BicycleState(NamedTuple):
    x: float  # rear-axle midpoint
    y: float
    theta: float
    v: float


class ControlInput(NamedTuple):
    u1: float  # tan(steering angle)
    u2: float  # acceleration


def normalize_angle(theta):
    """Wrap to [-pi, pi)."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped < 0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def step_double_integrator(state, u, dt):
    return LongitudinalState(state.p + state.v * dt, state.v + u * dt)


def step_bicycle(state, control, sigma, dt):
    x, y, theta, v = state
    return BicycleState(
        x + v * math.cos(theta) * dt,
        y + v * math.sin(theta) * dt,
        normalize_angle(theta + (v / sigma) * control.u1 * dt),
        v + control.u2 * dt,
    )


def steering_transform(delta):
    """Steering angle -> transformed input u1 = tan(delta)."""
    if abs(delta) >= math.pi / 2:
        raise DomainError(f"steering angle {delta} outside (-pi/2, pi/2)")
    return math.tan(delta)


def steering_inverse(u1):
    return math.atan(u1)
