import dataclasses
import math

import numpy as np
import pytest

from sc3opt.errors import InfeasibleError
from sc3opt.interloop import (
    SCHEMES,
    Objective,
    SolverConfig,
    closed_form_bandwidth,
    closed_form_kkt_residual,
    kkt_residual,
    sca_optimize,
    solve_scheme,
    solve_subproblem,
    theorem2_allocation,
)
from sc3opt.intraloop import closed_loop_info, solve_single_loop, spec_rates
from sc3opt.model import Budget, LinkSpec, LoopSpec
from sc3opt.scenario import builtin, reference_summary, four_loops


def _capacity(loops, b, f):
    return np.array([closed_loop_info(spec_rates(s), bb, ff, s.cycle_time_s) for s, bb, ff in zip(loops, b, f)])


def test_single_loop_collapses_to_closed_form(loops4, budget4):
    sol = sca_optimize(loops4[:1], budget4)
    alloc, cost = solve_single_loop(loops4[0], budget4)
    assert sol.bandwidth[0] == pytest.approx(budget4.total_bandwidth_hz, rel=1e-12)
    assert sol.cpu[0] == pytest.approx(budget4.total_cpu_hz, rel=1e-12)
    assert sol.info[0] == pytest.approx(alloc.d_sc3, rel=1e-12)
    assert sol.total_cost == pytest.approx(cost, rel=1e-12)


def test_identical_loops_share_equally(budget4):
    loop = four_loops()[1]
    sol = sca_optimize([loop] * 3, budget4)
    assert np.allclose(sol.bandwidth_shares(), 1 / 3, rtol=1e-9)
    assert np.allclose(sol.cpu / budget4.total_cpu_hz, 1 / 3, rtol=1e-9)


def test_proposed_history_and_budgets(loops4, budget4):
    sol = sca_optimize(loops4, budget4)
    h = sol.objective_history
    assert len(h) == sol.iterations + 1
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert sol.bandwidth.sum() == pytest.approx(budget4.total_bandwidth_hz, rel=1e-10)
    assert sol.cpu.sum() == pytest.approx(budget4.total_cpu_hz, rel=1e-10)
    assert np.all(sol.bandwidth > 0) and np.all(sol.cpu > 0)
    assert sol.kkt_residual <= 1e-6
    assert sol.dual_bandwidth > 0 and sol.dual_cpu > 0
    # reported information is what the allocation actually delivers
    assert np.allclose(sol.info, _capacity(loops4, sol.bandwidth, sol.cpu), rtol=1e-12)
    for a, s in zip(sol.allocations, loops4):
        assert s.rho * a.d_ul == pytest.approx(a.d_dl, rel=1e-12)


def test_newton_and_dual_agree(loops4, budget4):
    a = sca_optimize(loops4, budget4, SolverConfig(method="newton"))
    b = sca_optimize(loops4, budget4, SolverConfig(method="dual"))
    assert a.iterations == b.iterations
    assert np.allclose(a.bandwidth, b.bandwidth, rtol=1e-6)
    assert a.total_cost == pytest.approx(b.total_cost, rel=1e-9)


def test_achievable_expansion_reaches_same_optimum(loops4, budget4):
    a = sca_optimize(loops4, budget4)
    b = sca_optimize(loops4, budget4, SolverConfig(expansion="achievable"))
    assert b.total_cost == pytest.approx(a.total_cost, rel=1e-3)


def test_scale_invariance(loops4, budget4):
    k = 4.0
    scaled = [
        LoopSpec(s.cycle_time_s, s.rho, s.alpha * k, LinkSpec(s.r_ul / k), LinkSpec(s.r_dl / k), s.control)
        for s in loops4
    ]
    a = sca_optimize(loops4, budget4)
    b = sca_optimize(scaled, Budget(budget4.total_bandwidth_hz * k, budget4.total_cpu_hz * k))
    assert np.allclose(b.info, a.info, rtol=1e-9)
    assert np.allclose(b.bandwidth_shares(), a.bandwidth_shares(), rtol=1e-8)


def test_subproblem_chain_stays_feasible(loops4, budget4):
    d = np.array([s.summary.log2_det_A + 1.0 for s in loops4])
    for _ in range(4):
        b, f, d_new, nu_b, nu_f = solve_subproblem(loops4, budget4, d)
        cap = _capacity(loops4, b, f)
        assert np.all(d_new <= cap * (1 + 1e-9))
        assert b.sum() == pytest.approx(budget4.total_bandwidth_hz, rel=1e-10)
        assert nu_b >= 0 and nu_f >= 0
        d = np.minimum(d_new, cap)


def test_infeasible_budget_reports_loops():
    loops = four_loops()
    with pytest.raises(InfeasibleError) as ex:
        sca_optimize(loops, Budget(1e3, 2e9))
    assert ex.value.loops


@pytest.mark.parametrize("scheme", SCHEMES)
def test_every_scheme_respects_budget(scheme, loops4, budget4):
    sol = solve_scheme(scheme, loops4, budget4)
    assert sol.bandwidth.sum() <= budget4.total_bandwidth_hz * (1 + 1e-9)
    assert sol.cpu.sum() <= budget4.total_cpu_hz * (1 + 1e-9)
    assert len(sol.cost) == 4
    for a, s in zip(sol.allocations, loops4):
        assert a.busy_time <= s.cycle_time_s * (1 + 1e-9)


def test_proposed_beats_every_scheme(loops4, budget4):
    p = solve_scheme("proposed", loops4, budget4).total_cost
    for s in SCHEMES[1:]:
        assert p <= solve_scheme(s, loops4, budget4).total_cost * (1 + 1e-9), s


def test_information_schemes_meet_requirement(loops4, budget4):
    for scheme in ("max-sum", "max-min"):
        sol = solve_scheme(scheme, loops4, budget4)
        assert np.all(sol.cost <= 5.0 * (1 + 1e-6))
        assert sol.kkt_residual <= 1e-6


def test_max_min_equalises_information(loops4):
    sol = sca_optimize(loops4, Budget(2e6, 2e9), objective=Objective.MAX_MIN_INFO, lqr_requirement=5.0)
    d = sol.info
    assert d.min() == pytest.approx(np.sort(d)[1], rel=1e-5)


def test_theorem2_methods_agree_and_fill_budget():
    sc = builtin("adequate-cpu")
    a = closed_form_bandwidth(sc.loops, 1e6, method="direct")
    b = closed_form_bandwidth(sc.loops, 1e6, method="dual")
    assert a.sum() == pytest.approx(1e6, rel=1e-12)
    assert np.allclose(a, b, rtol=1e-9)
    assert closed_form_kkt_residual(sc.loops, a, 1e6) <= 1e-8
    b_hz, f_hz = theorem2_allocation(sc.loops, sc.budget)
    assert np.allclose(f_hz, sc.budget.total_cpu_hz / 4)


def test_theorem2_clamps_starved_loops():
    loops = four_loops(log2_det_A=(1.0, 1.0, 1.0, 200.0))
    b = closed_form_bandwidth(loops, 2e4)
    assert np.all(b >= 0) and b.sum() == pytest.approx(2e4, rel=1e-12)
    assert np.count_nonzero(b) < 4


def test_theorem2_more_entropy_more_bandwidth():
    sc = builtin("fig9-entropy")
    b = closed_form_bandwidth(sc.loops, sc.budget.total_bandwidth_hz)
    assert np.all(np.diff(b) > 0)


def test_kkt_residual_detects_perturbation(loops4, budget4):
    sol = sca_optimize(loops4, budget4)
    ok = kkt_residual(sol, loops4, budget4, SolverConfig())
    assert ok <= 1e-6
    b = sol.bandwidth.copy()
    shift = 0.05 * b[0]
    b[0] += shift
    b[1] -= shift
    bad = dataclasses.replace(sol, bandwidth=b)
    assert kkt_residual(bad, loops4, budget4, SolverConfig()) > 1e3 * max(ok, 1e-12)


def test_hopeless_frozen_link_gets_infinite_cost(loops4):
    sol = solve_scheme("dl-comp", loops4, Budget(0.6e6, 2e9))
    assert math.isinf(sol.total_cost)
