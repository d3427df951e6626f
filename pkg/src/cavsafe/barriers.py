"""Longitudinal barrier conditions: rear-end, speed limits and the lateral certificate.

Every builder returns :class:`LinearConstraint` rows affine in the control.
Longitudinal rows act on a scalar acceleration ``u``; :meth:`LinearConstraint.embed`
lifts them into a larger decision vector such as ``(u1, u2, e, s)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TAGS = ("RearEnd", "SpeedMax", "SpeedMin", "Lateral", "Pedestrian", "RoadEdge", "Steering",
        "Jerk", "SoftLane", "SoftSpeed", "AntiOvershoot", "AccelMax", "AccelMin")


@dataclass(frozen=True)
class LinearConstraint:
    """``coeffs . x  (sense)  rhs`` with ``sense`` one of ``">="`` / ``"<="``."""

    coeffs: tuple
    rhs: float
    sense: str
    tag: str

    def __post_init__(self):
        if self.sense not in (">=", "<="):
            raise ValueError(f"bad sense {self.sense!r}")
        if not all(math.isfinite(c) for c in self.coeffs) or not math.isfinite(self.rhs):
            raise ValueError(f"non-finite {self.tag} constraint")
        if not any(c != 0.0 for c in self.coeffs):
            raise ValueError(f"{self.tag} constraint has no nonzero coefficient")

    def lhs(self, x):
        return sum(c * xi for c, xi in zip(self.coeffs, x))

    def margin(self, x):
        """Signed slack; nonnegative iff satisfied."""
        value = self.lhs(x)
        return value - self.rhs if self.sense == ">=" else self.rhs - value

    def as_leq(self):
        """(a, b) with the row written as ``a . x <= b``."""
        if self.sense == "<=":
            return self.coeffs, self.rhs
        return tuple(-c for c in self.coeffs), -self.rhs

    def bound(self):
        """For a one-variable row: ("upper"|"lower", value)."""
        if len(self.coeffs) != 1:
            raise ValueError("bound() needs a scalar constraint")
        a, b = self.as_leq()
        return ("upper", b / a[0]) if a[0] > 0 else ("lower", b / a[0])

    def embed(self, index, size):
        """Lift a scalar row onto variable ``index`` of a ``size``-vector."""
        coeffs = [0.0] * size
        coeffs[index] = self.coeffs[0]
        return LinearConstraint(tuple(coeffs), self.rhs, self.sense, self.tag)


def _row(coeff, constant, tag):
    # coeff * u + constant >= 0
    return LinearConstraint((coeff,), -constant, ">=", tag)


def rear_end_slack(p_i, v_i, p_k, phi, gamma):
    return p_k - p_i - gamma - phi * v_i


def rear_end_condition(p_i, v_i, p_k, v_k, phi, gamma):
    """Follower ``i`` behind predecessor ``k`` on one lane."""
    return _row(-phi, (v_k - v_i) + rear_end_slack(p_i, v_i, p_k, phi, gamma), "RearEnd")


def speed_conditions(v, v_min, v_max):
    return (
        LinearConstraint((1.0,), v_max - v, "<=", "SpeedMax"),
        LinearConstraint((1.0,), v_min - v, ">=", "SpeedMin"),
    )


@dataclass(frozen=True)
class PhiParams:
    phi: float
    gamma_tilde: float
    v0: float  # entry speed of the later-crossing vehicle
    L: float  # its entry-to-conflict distance

    def __post_init__(self):
        if self.v0 <= 0 or self.L <= 0:
            raise ValueError("PhiParams needs v0 > 0 and L > 0")

    @property
    def slope(self):
        return (self.phi + self.gamma_tilde / self.v0) / self.L

    @property
    def offset(self):
        return self.gamma_tilde / self.v0


def phi_lemma1(params, p):
    """Position-dependent reaction time: -gamma~/v0 at the entry, phi at the conflict."""
    frac = p / params.L
    # same affine function as slope*p - offset, arranged to be exact at both ends
    return params.phi * frac - params.offset * (1.0 - frac)


def lateral_slack(p_i, v_i, p_k, params):
    """b4 for the later-crossing ``i`` behind the earlier-crossing ``k``."""
    return p_k - p_i - phi_lemma1(params, p_i) * v_i - params.gamma_tilde


def lateral_condition(p_i, v_i, p_k, v_k, params):
    """Certificate on ``u_i`` keeping b4 nonnegative.

    Returns None at the single position where the control coefficient vanishes;
    the row then carries no control and callers fall back to ``lateral_slack``.
    """
    s = params.slope
    reaction = s * p_i - params.offset
    constant = (v_k - v_i) - s * v_i ** 2 + (p_k - p_i) - reaction * v_i - params.gamma_tilde
    if reaction == 0.0:
        return None
    return _row(-reaction, constant, "Lateral")
