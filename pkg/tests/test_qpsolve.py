import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavsafe.barriers import LinearConstraint
from cavsafe.errors import EmptyFeasibleGrid, NumericalBreakdown
from cavsafe.pedestrian import EllipseUnsafeSet, jerk_bounds, pedestrian_hocbf, speed_soft, steering_limit
from cavsafe.dynamics import BicycleState
from cavsafe.qpsolve import QuadraticProgram, brute_force_oracle, grid_error_bound, kkt_residuals, solve

from oracles import random_qp


def _scalar(rows):
    # (u - 2)^2 = u^2 - 4u + 4
    return QuadraticProgram([1.0], [-4.0], rows, constant=4.0)


def test_clipped_and_free_optimum():
    sol = solve(_scalar([LinearConstraint((1.0,), 1.0, "<=", "SpeedMax")]))
    assert sol.optimal
    assert sol.x[0] == pytest.approx(1.0)
    assert sol.objective == pytest.approx(1.0)
    sol = solve(_scalar([LinearConstraint((1.0,), 3.0, "<=", "SpeedMax")]))
    assert sol.x[0] == pytest.approx(2.0)
    assert sol.objective == pytest.approx(0.0, abs=1e-12)


def test_oracle_on_scalar_example():
    qp = _scalar([LinearConstraint((1.0,), 1.0, "<=", "SpeedMax")])
    qp.lower, qp.upper = np.array([-5.0]), np.array([5.0])
    res = brute_force_oracle(qp, 1e-3)
    assert abs(res.x[0] - 1.0) <= 1e-3


def test_infeasible_pair_agrees_with_oracle():
    rows = [LinearConstraint((1.0,), 0.0, "<=", "SpeedMax"), LinearConstraint((1.0,), 1.0, ">=", "SpeedMin")]
    qp = QuadraticProgram([1.0], [0.0], rows, [-5.0], [5.0])
    assert solve(qp).status == "Infeasible"
    with pytest.raises(EmptyFeasibleGrid):
        brute_force_oracle(qp, 1e-2)


def _emergency_instance(y, u2_prev):
    v = 8.0
    state = BicycleState(1.75, y, np.pi / 2, v)
    ell = EllipseUnsafeSet((0.5, -3.0), 3.0, 1.5, np.pi)
    rows = [pedestrian_hocbf(state, ell, 2.0, 1.0), speed_soft(v, 6.0), *steering_limit(v, 0.6, 25.0)]
    jerk_hi, jerk_lo = jerk_bounds(u2_prev, 0.025, -7.0, 5.0)
    # jerk limits as the box on u2 keeps the grid oracle small
    lower = np.array([-0.5, jerk_lo.rhs, 0.0, -10.0])
    upper = np.array([0.5, jerk_hi.rhs, 0.0, 10.0])
    return QuadraticProgram([0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0], rows, lower, upper)


@pytest.mark.parametrize("y, u2_prev, binding", [(-20.0, -4.0, "Pedestrian"), (-40.0, 0.0, "SoftSpeed")])
def test_emergency_instance_matches_oracle(y, u2_prev, binding):
    qp = _emergency_instance(y, u2_prev)
    sol = solve(qp)
    assert sol.optimal
    assert max(kkt_residuals(qp, sol)) <= 1e-8
    if binding == "Pedestrian":
        # zero objective, so the active pedestrian row only shows up as steering
        assert qp.constraints[0].margin(sol.x) == pytest.approx(0.0, abs=1e-9)
        assert abs(sol.x[0]) > 0.1
    else:
        assert sol.multipliers[1] > 0.0
        assert sol.objective > 1.0
    res = 1e-2
    ref = brute_force_oracle(qp, res)
    assert sol.objective <= ref.objective + 1e-9
    assert ref.objective - sol.objective <= 1e-3 + grid_error_bound(qp, res)


@settings(max_examples=60)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3), m=st.integers(0, 5))
def test_kkt_conditions_hold(seed, n, m):
    qp = random_qp(np.random.default_rng(seed), n, m)
    sol = solve(qp)
    assert sol.optimal
    stat, comp, viol = kkt_residuals(qp, sol)
    assert stat <= 1e-8 and comp <= 1e-8 and viol <= 1e-9
    assert np.all(sol.multipliers >= 0)


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
def test_row_scaling_does_not_change_the_answer(seed, scale):
    qp = random_qp(np.random.default_rng(seed), 3, 4)
    scaled = QuadraticProgram(qp.weights, qp.linear,
                              [LinearConstraint(tuple(scale * c for c in r.coeffs), scale * r.rhs, r.sense, r.tag)
                               for r in qp.constraints], qp.lower, qp.upper)
    assert solve(scaled).x == pytest.approx(solve(qp).x, abs=1e-8)


@settings(max_examples=40)
@given(seed=st.integers(0, 10_000), start=st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_warm_start_does_not_change_the_answer(seed, start):
    qp = random_qp(np.random.default_rng(seed), 3, 4)
    assert solve(qp, np.array(start)).objective == pytest.approx(solve(qp).objective, abs=1e-9)


def test_small_random_instances_against_oracle():
    rng = np.random.default_rng(11)
    for _ in range(15):
        qp = random_qp(rng, 2, 3)
        sol = solve(qp)
        ref = brute_force_oracle(qp, 1e-2)
        assert sol.objective <= ref.objective + 1e-9
        assert ref.objective - sol.objective <= 1e-3 + grid_error_bound(qp, 1e-2)


def test_bad_programs_are_rejected():
    with pytest.raises(ValueError):
        QuadraticProgram([0.0], [1.0])
    with pytest.raises(ValueError):
        QuadraticProgram([-1.0], [0.0])
    with pytest.raises(ValueError):
        QuadraticProgram([1.0, 1.0], [0.0, 0.0], [LinearConstraint((1.0,), 1.0, "<=", "Jerk")])
    with pytest.raises(NumericalBreakdown):
        solve(QuadraticProgram([1e-8, 1e6], [0.0, 0.0]))
