import math

import numpy as np
import pytest

from conftest import random_loop
from sc3opt.errors import InfeasibleError
from sc3opt.intraloop import (
    LoopRates,
    allocate_loop,
    bandwidth_for_cpu,
    closed_loop_info,
    loop_rates,
    optimal_bandwidth_split,
    solve_single_loop,
    spec_rates,
    weak_link_se,
)
from sc3opt.model import Budget


@pytest.mark.parametrize("seed", range(20))
def test_allocation_balances_and_fills_cycle(seed):
    rng = np.random.default_rng(seed)
    s = random_loop(rng)
    b, f = rng.uniform(1e4, 1e7), rng.uniform(1e7, 1e10)
    a = allocate_loop(s, b, f)
    assert s.rho * a.d_ul == pytest.approx(a.d_dl, rel=1e-12)
    assert a.bandwidth == pytest.approx(b, rel=1e-14)
    assert a.busy_time == pytest.approx(s.cycle_time_s, rel=1e-12)
    assert min(a.t_ul, a.t_comp, a.t_dl) > 0
    # the computing stage carries the same task information as the links
    assert s.rho * a.f * a.t_comp / s.alpha == pytest.approx(a.d_dl, rel=1e-10)
    assert a.d_sc3 == pytest.approx(closed_loop_info(spec_rates(s), b, f, s.cycle_time_s), rel=1e-12)


def test_square_root_bandwidth_rule():
    b_ul, b_dl = optimal_bandwidth_split(0.01, 10.0, 10.0, 1e6)
    assert b_ul / b_dl == pytest.approx(math.sqrt(10.0) / math.sqrt(0.1))


def test_closed_loop_se_between_link_rates():
    r = loop_rates(0.01, 100.0, 10.0, 12.0)
    assert 0 < r.r_comm < min(0.01 * 10.0, 12.0)
    assert r.r_comp == pytest.approx(1e-4)
    # series combination of the two pipes
    rc = 1.0 / (math.sqrt(1 / 0.1) + math.sqrt(1 / 12.0)) ** 2
    assert r.r_comm == pytest.approx(rc, rel=1e-13)


def test_weak_link_se():
    assert weak_link_se(0.01, 10.0, 12.0) == pytest.approx(0.1)
    assert weak_link_se(1.0, 10.0, 12.0) == pytest.approx(2.5)


def test_info_edge_cases():
    r = LoopRates(0.1, 1e-4)
    assert closed_loop_info(r, 0.0, 1e9, 0.01) == 0.0
    assert closed_loop_info(r, math.inf, 1e9, 0.01) == pytest.approx(0.01 * 1e9 * 1e-4)
    assert allocate_loop(random_loop(np.random.default_rng(0)), 0.0, 1e9).d_sc3 == 0.0


def test_bandwidth_for_cpu_keeps_information():
    r = LoopRates(5.0, 1e-4)
    db = bandwidth_for_cpu(1e6, 2e9, r, 1e6)
    before = closed_loop_info(r, 1e6, 2e9, 1.0)
    after = closed_loop_info(r, 1e6 + db, 2e9 - 1e6, 1.0)
    assert after == pytest.approx(before, rel=1e-12)
    with pytest.raises(ValueError):
        bandwidth_for_cpu(1e6, 2e9, r, 3e9)


def test_bandwidth_for_cpu_infeasible():
    # CPU-bound working point: no finite bandwidth makes up for lost cycles
    with pytest.raises(InfeasibleError):
        bandwidth_for_cpu(1e6, 1e6, LoopRates(1e3, 1e-4), 0.5e6)


def test_single_loop_uses_whole_budget(loops4):
    alloc, cost = solve_single_loop(loops4[0], Budget(1e6, 2e9))
    assert alloc.f == 2e9 and alloc.bandwidth == pytest.approx(1e6)
    assert math.isfinite(cost)
