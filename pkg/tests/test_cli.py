import csv
import json
from pathlib import Path

import pytest

from sc3opt.cli import SOLVE_COLUMNS, SWEEP_COLUMNS, main

SCEN = Path(__file__).parent.parent / "scenarios"


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_solve_writes_csv_and_summary(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["solve", "--scenario", str(SCEN / "four_loops.yaml"), "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("# tool: sc3opt")
    assert "sha256:" in text
    rows = _rows(out)
    assert list(rows[0]) == SOLVE_COLUMNS
    assert [r["loop_id"] for r in rows] == ["0", "1", "2", "3", "TOTAL"]
    summary = json.loads(out.with_suffix(".json").read_text())
    assert float(rows[-1]["lqr_cost"]) == pytest.approx(summary["total_cost"], rel=1e-11)
    assert summary["kkt_residual"] <= 1e-6
    # 12 significant digits
    assert all(len(v.replace(".", "").replace("-", "").lstrip("0").split("e")[0]) <= 12 for v in rows[0].values())


def test_solve_baseline_with_unstable_loops_is_not_an_error(tmp_path):
    out = tmp_path / "eq.csv"
    assert main(["solve", "--scenario", "builtin:four-loops", "--scheme", "equal", "--out", str(out)]) == 0
    assert _rows(out)[-1]["lqr_cost"] == "inf"


def test_missing_scenario_exit_code(tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert main(["solve", "--scenario", str(tmp_path / "none.yaml"), "--out", str(out)]) == 2
    assert not out.exists()
    assert "cannot read" in capsys.readouterr().err


def test_invalid_field_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text((SCEN / "three_loops.yaml").read_text().replace("rho: 0.01", "rho: 7", 1))
    assert main(["solve", "--scenario", str(bad), "--out", str(tmp_path / "o.csv")]) == 2
    assert "loops[" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path):
    sc = tmp_path / "inf.yaml"
    sc.write_text(
        "budget: {bandwidth: 1 kHz, cpu: 2 GHz}\nloops:\n"
        + "".join(
            "  - {T: 10 ms, rho: 0.01, alpha: 1, ul: {se: 1}, dl: {se: 1}, control: "
            "{n: 1, log2_det_A: 30, entropy_power: 1, det_M_nth_root: 1, trace_sigma_S: 1}}\n"
            for _ in range(2)
        )
    )
    out = tmp_path / "i.csv"
    assert main(["solve", "--scenario", str(sc), "--out", str(out)]) == 3
    assert not out.exists()


def test_sweep(tmp_path):
    out = tmp_path / "sw.csv"
    argv = ["sweep", "--scenario", "builtin:four-loops", "--param", "budget.bandwidth", "--from", "8e5",
            "--to", "1.2e6", "--steps", "3", "--scheme", "proposed,max-min", "--out", str(out)]
    assert main(argv) == 0
    rows = _rows(out)
    assert list(rows[0]) == SWEEP_COLUMNS
    totals = [r for r in rows if r["loop_id"] == "TOTAL"]
    assert len(totals) == 6
    p = [float(r["lqr_cost"]) for r in totals if r["scheme"] == "proposed"]
    assert p == sorted(p, reverse=True)
    assert main(argv[:4] + ["budget.nothing"] + argv[5:]) == 2


def test_verify_passes_and_detects_perturbation(tmp_path, monkeypatch):
    sc = str(SCEN / "three_loops.yaml")
    assert main(["verify", "--scenario", sc, "--grid", "32", "--out", str(tmp_path / "v.txt")]) == 0
    assert "FAIL" not in (tmp_path / "v.txt").read_text()
    monkeypatch.setenv("SC3OPT_TEST_PERTURB_B1", "0.01")
    assert main(["verify", "--scenario", sc, "--grid", "32"]) == 5


def test_reproduce_writes_claims(tmp_path):
    assert main(["reproduce", "--figure", "fig5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig5.csv").exists()
    assert "FAIL" not in (tmp_path / "fig5_claims.txt").read_text()


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as ex:
        main(["solve", "--scenario", "x.yaml"])
    assert ex.value.code == 2
