import logging
import math

import numpy as np
import pytest

from sc3opt.control import ControlMatrices
from sc3opt.errors import ScenarioError
from sc3opt.scenario import (
    BUILTINS,
    builtin,
    digest,
    dump_scenario,
    load_scenario,
    loads_scenario,
    matrix,
    quantity,
    with_value,
)

BASE = """
budget: {bandwidth: 1 MHz, cpu: 2 GHz}
loops:
  - T: 10 ms
    rho: 0.01
    alpha: 100
    ul: {se: 10.5}
    dl: {se: 12.2}
    control: {n: 100, log2_det_A: 10, entropy_power: 0.01, det_M_nth_root: 1, trace_sigma_S: 1}
"""


def test_units():
    assert quantity("500 kHz", "frequency", "x") == 5e5
    assert quantity("2 GHz", "frequency", "x") == 2e9
    assert quantity("10 ms", "time", "x") == pytest.approx(0.01)
    assert quantity("250us", "time", "x") == pytest.approx(2.5e-4)
    assert quantity(3.0, "time", "x") == 3.0
    with pytest.raises(ScenarioError, match="x"):
        quantity("3 furlongs", "time", "x")


def test_matrix_shorthands():
    assert np.array_equal(matrix("identity(3)", "m"), np.eye(3))
    assert np.array_equal(matrix("diag(0.5, 2)", "m"), 0.5 * np.eye(2))
    assert np.array_equal(matrix("zero(2)", "m"), np.zeros((2, 2)))
    assert np.array_equal(matrix([[1, 2], [3, 4]], "m"), np.array([[1.0, 2.0], [3.0, 4.0]]))


def test_loads_and_defaults():
    sc = loads_scenario(BASE, name="base")
    assert sc.num_loops == 1 and sc.name == "base"
    assert sc.budget.total_bandwidth_hz == 1e6
    assert sc.loops[0].cycle_time_s == pytest.approx(0.01)
    assert sc.solver.method == "newton"


@pytest.mark.parametrize("path", ["four_loops.yaml", "two_loops_matrices.yaml", "three_loops.yaml"])
def test_bundled_files_round_trip(path, tmp_path):
    from pathlib import Path

    sc = load_scenario(Path(__file__).parent.parent / "scenarios" / path)
    again = loads_scenario(dump_scenario(sc), name=sc.name)
    assert digest(again) == digest(sc)
    for a, b in zip(sc.loops, again.loops):
        assert a.summary == b.summary
        assert a.r_ul == b.r_ul and a.r_dl == b.r_dl


def test_four_loops_file_matches_builtin():
    from pathlib import Path

    sc = load_scenario(Path(__file__).parent.parent / "scenarios" / "four_loops.yaml")
    assert digest(sc) == digest(builtin("four-loops"))


def test_matrix_control_summarised():
    sc = loads_scenario(BASE.replace(
        "control: {n: 100, log2_det_A: 10, entropy_power: 0.01, det_M_nth_root: 1, trace_sigma_S: 1}",
        "control: {A: 'diag(2, 2)', B: identity(2), Q: identity(2), R: zero(2), Sigma_v: 'diag(0.01, 2)'}",
    ))
    assert isinstance(sc.loops[0].control, ControlMatrices)
    assert sc.loops[0].summary.log2_det_A == pytest.approx(2.0)


@pytest.mark.parametrize(
    "old,new,field",
    [
        ("rho: 0.01", "rho: 0", "loops[0]"),
        ("ul: {se: 10.5}", "ul: {se: -1}", "loops[0].ul"),
        ("bandwidth: 1 MHz", "bandwidth: 1 parsec", "budget.bandwidth"),
        ("alpha: 100", "alpha: 100\n    bogus: 1", "bogus"),
        ("n: 100", "n: 1.5", "n"),
    ],
)
def test_errors_name_the_field(old, new, field):
    with pytest.raises(ScenarioError, match=field.replace("[", r"\[").replace("]", r"\]")):
        loads_scenario(BASE.replace(old, new))


def test_missing_and_malformed():
    with pytest.raises(ScenarioError, match="budget"):
        loads_scenario("loops: []")
    with pytest.raises(ScenarioError, match="loops"):
        loads_scenario("budget: {bandwidth: 1 MHz, cpu: 1 GHz}\nloops: []")
    with pytest.raises(ScenarioError):
        loads_scenario("budget: [unclosed")
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario("/nonexistent/file.yaml")


def test_se_conflict_warns(caplog):
    text = BASE.replace("ul: {se: 10.5}", "ul: {se: 3.0, channel: {d_km: 1.0, fc_mhz: 2000, target_snr_db: 31.6}}")
    with caplog.at_level(logging.WARNING):
        sc = loads_scenario(text)
    assert sc.loops[0].r_ul == 3.0
    assert any("overrides" in r.message for r in caplog.records)


def test_with_value():
    sc = builtin("four-loops")
    a = with_value(sc, "budget.bandwidth", 2e6)
    assert a.budget.total_bandwidth_hz == 2e6
    b = with_value(sc, "loops.*.alpha", 50.0)
    assert all(s.alpha == 50.0 for s in b.loops)
    c = with_value(sc, "loops.2.rho", 0.5)
    assert c.loops[2].rho == 0.5 and c.loops[1].rho == 0.01
    with pytest.raises(ScenarioError):
        with_value(sc, "loops.9.rho", 0.5)


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_valid(name):
    sc = builtin(name)
    assert sc.num_loops == 4
    assert all(math.isfinite(s.summary.coefficient) for s in sc.loops)
