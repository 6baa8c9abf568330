import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_are

from sc3opt.control import (
    ControlMatrices,
    ControlSummary,
    LqrCost,
    info_for_cost,
    lqr_lower_bound,
    riccati_defect,
    solve_riccati,
    summarize,
)
from sc3opt.errors import ConvergenceError, InfeasibleError, ScenarioError


def _random_plant(rng, n):
    A = rng.normal(size=(n, n)) * 0.6 + np.eye(n) * rng.uniform(0.8, 1.3)
    B = rng.normal(size=(n, n))
    Q = np.eye(n) * rng.uniform(0.5, 2.0)
    R = np.eye(n) * rng.uniform(0.05, 1.0)
    return ControlMatrices(A=A, B=B, Q=Q, R=R, Sigma_v=0.01 * np.eye(n))


def test_identity_input_zero_weight_is_exact():
    Q = np.diag([1.0, 2.0, 3.0])
    mats = ControlMatrices(A=np.diag([1.5, 0.7, 2.0]), B=np.eye(3), Q=Q, R=np.zeros((3, 3)), Sigma_v=np.eye(3))
    sol = solve_riccati(mats)
    assert np.array_equal(sol.S, Q)
    assert np.array_equal(sol.M, Q)
    assert sol.residual <= 1e-10


@pytest.mark.parametrize("seed", range(8))
def test_riccati_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    mats = _random_plant(rng, int(rng.integers(2, 6)))
    sol = solve_riccati(mats)
    ref = solve_discrete_are(mats.A, mats.B, mats.Q, mats.R)
    assert sol.residual <= 1e-10
    assert riccati_defect(mats, sol.S, sol.M) <= 1e-10
    assert np.allclose(sol.S, ref, rtol=1e-8, atol=1e-8)


def test_unstabilizable_pair_raises():
    mats = ControlMatrices(A=np.diag([2.0, 0.5]), B=np.diag([0.0, 1.0]), Q=np.eye(2), R=np.eye(2), Sigma_v=np.eye(2))
    with pytest.raises(ConvergenceError):
        solve_riccati(mats, max_iter=500)


def test_summary_of_diagonal_plant():
    mats = ControlMatrices.diagonal(4, log2_det_A=6.0, noise_var=0.01)
    s = summarize(mats)
    assert s.n == 4
    assert s.log2_det_A == pytest.approx(6.0, rel=1e-12)
    assert s.entropy_power == pytest.approx(0.01, rel=1e-12)
    assert s.det_M_nth_root == pytest.approx(1.0, rel=1e-12)
    assert s.trace_sigma_S == pytest.approx(0.04, rel=1e-12)


def test_matrix_validation():
    with pytest.raises(ScenarioError):
        ControlMatrices(A=np.eye(2), B=np.eye(3), Q=np.eye(2), R=np.eye(2), Sigma_v=np.eye(2))
    with pytest.raises(ScenarioError):
        ControlMatrices(A=np.eye(2), B=np.eye(2), Q=-np.eye(2), R=np.eye(2), Sigma_v=np.eye(2))
    with pytest.raises(ScenarioError):
        ControlMatrices(A=np.zeros((2, 2)), B=np.eye(2), Q=np.eye(2), R=np.eye(2), Sigma_v=np.eye(2))


SUMMARY = ControlSummary(n=10, log2_det_A=5.0, entropy_power=0.01, det_M_nth_root=1.0, trace_sigma_S=0.1)


def test_bound_is_infinite_at_or_below_entropy():
    assert lqr_lower_bound(SUMMARY, 5.0) == math.inf
    assert lqr_lower_bound(SUMMARY, 1.0) == math.inf
    assert lqr_lower_bound(SUMMARY, math.inf) == SUMMARY.trace_sigma_S
    with pytest.raises(ValueError):
        lqr_lower_bound(SUMMARY, -1.0)


def test_bound_closed_form_value():
    d = 10.0
    expect = 10 * 0.01 / (2 ** (0.2 * 5.0) - 1) + 0.1
    assert lqr_lower_bound(SUMMARY, d) == pytest.approx(expect, rel=1e-14)


def test_info_for_cost_rejects_unreachable_target():
    with pytest.raises(InfeasibleError):
        info_for_cost(SUMMARY, 0.1)


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 200),
    e=st.floats(0.0, 100.0),
    excess=st.floats(1e-3, 1e3),
)
def test_round_trip(n, e, excess):
    s = ControlSummary(n=n, log2_det_A=e, entropy_power=0.01, det_M_nth_root=1.0, trace_sigma_S=0.01 * n)
    target = s.trace_sigma_S + excess
    d = info_for_cost(s, target)
    assert lqr_lower_bound(s, d) == pytest.approx(target, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(d1=st.floats(5.01, 200.0), d2=st.floats(5.01, 200.0))
def test_bound_decreasing(d1, d2):
    lo, hi = sorted((d1, d2))
    assert lqr_lower_bound(SUMMARY, lo) >= lqr_lower_bound(SUMMARY, hi)


def test_vectorised_cost_and_derivatives():
    summaries = [SUMMARY, ControlSummary(3, 2.0, 0.5, 2.0, 1.0)]
    cost = LqrCost(summaries)
    d = np.array([12.0, 4.5])
    v, d1, d2 = cost.derivatives(d)
    assert np.allclose(v, [lqr_lower_bound(s, x) for s, x in zip(summaries, d)], rtol=1e-13)
    h = 1e-5
    num1 = (cost.value(d + h) - cost.value(d - h)) / (2 * h)
    num2 = (cost.value(d + h) - 2 * cost.value(d) + cost.value(d - h)) / h**2
    assert np.allclose(d1, num1, rtol=1e-6)
    assert np.allclose(d2, num2, rtol=1e-3)
    assert np.all(cost.value(np.array([5.0, 1.0])) == np.inf)
    assert cost.subset([1]).value(np.array([4.5]))[0] == pytest.approx(v[1])


def test_bound_does_not_overflow_for_huge_information():
    s = ControlSummary(n=1, log2_det_A=1.0, entropy_power=1.0, det_M_nth_root=1.0, trace_sigma_S=2.0)
    assert lqr_lower_bound(s, 5000.0) == 2.0
