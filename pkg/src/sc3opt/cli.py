"""Command-line entry point: ``sc3opt {solve,sweep,reproduce,verify}``.

Log verbosity comes from the SC3OPT_LOG environment variable (e.g. DEBUG).
Exit codes: 0 ok, 2 bad input, 3 infeasible, 4 no convergence, 5 a check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import experiments
from .control import LqrCost
from .errors import ConvergenceError, InfeasibleError, Sc3Error, ScenarioError, VerificationError
from .interloop import SCHEMES, kkt_residual, solve_scheme
from .intraloop import allocate_loop, solve_single_loop
from .oracle import GridSpec, grid_interloop, grid_intraloop
from .scenario import BUILTINS, Scenario, builtin, canonical_json, digest, load_scenario, with_value

log = logging.getLogger("sc3opt")

SOLVE_COLUMNS = ["loop_id", "b_ul_hz", "b_dl_hz", "t_ul_s", "t_comp_s", "t_dl_s", "f_hz", "d_sc3_bits", "lqr_cost"]
SWEEP_COLUMNS = ["param_value", "scheme", "loop_id", "b_hz", "f_hz", "d_sc3_bits", "lqr_cost", "iterations", "status"]
PERTURB_ENV = "SC3OPT_TEST_PERTURB_B1"  # test hook: fraction of B_max added to loop 0's bandwidth before verification


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def write_csv(path: Path, header: Iterable[str], columns: list[str], rows: Iterable[list]) -> None:
    lines = [f"# {h}" for h in header]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in r) for r in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def provenance(sc: Optional[Scenario], extra: dict) -> list[str]:
    head = [f"tool: sc3opt {tool_version()}"]
    if sc is not None:
        head.append(f"scenario: {sc.name} sha256:{digest(sc)}")
        head.append(f"solver: {canonical_json(sc.solver.to_dict())}")
    head.extend(f"{k}: {v}" for k, v in extra.items())
    return head


def _scenario(arg: str) -> Scenario:
    if arg.startswith("builtin:"):
        return builtin(arg.split(":", 1)[1])
    return load_scenario(arg)


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return fmt(x) if not math.isfinite(x) else float(fmt(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _solve(sc: Scenario, scheme: str):
    if scheme not in SCHEMES:
        raise ScenarioError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    return solve_scheme(scheme, sc.loops, sc.budget, sc.solver)


def cmd_solve(args) -> int:
    sc = _scenario(args.scenario)
    scheme = args.scheme or sc.solver.scheme
    t0 = time.perf_counter()
    sol = _solve(sc, scheme)
    log.info("solved %s in %.3f s", scheme, time.perf_counter() - t0)
    rows = []
    for k, a in enumerate(sol.allocations):
        rows.append([k, a.b_ul, a.b_dl, a.t_ul, a.t_comp, a.t_dl, a.f, a.d_sc3, sol.cost[k]])
    rows.append(["TOTAL", sum(a.b_ul for a in sol.allocations), sum(a.b_dl for a in sol.allocations), "", "", "",
                 float(np.sum(sol.cpu)), float(np.sum(sol.info)), sol.total_cost])
    out = Path(args.out)
    write_csv(out, provenance(sc, {"scheme": scheme}), SOLVE_COLUMNS, rows)
    summary = {
        "tool_version": tool_version(),
        "scenario": sc.name,
        "scenario_digest": digest(sc),
        "scheme": scheme,
        "solver": sc.solver.to_dict(),
        "total_cost": sol.total_cost,
        "bandwidth_hz": sol.bandwidth,
        "cpu_hz": sol.cpu,
        "iterations": sol.iterations,
        "objective_history": sol.objective_history,
        "dual_bandwidth": sol.dual_bandwidth,
        "dual_cpu": sol.dual_cpu,
        "kkt_residual": sol.kkt_residual,
    }
    out.with_suffix(".json").write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    print(f"{scheme}: total cost {fmt(sol.total_cost)} ({sol.iterations} iterations) -> {out}")
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario(args.scenario)
    if args.param is None or args.start is None or args.stop is None:
        raise ScenarioError("sweep needs --param, --from and --to")
    if args.steps < 1:
        raise ScenarioError("--steps must be >= 1")
    values = [args.start] if args.steps == 1 else list(np.linspace(args.start, args.stop, args.steps))
    schemes = args.scheme.split(",") if args.scheme else [sc.solver.scheme]
    for s in schemes:
        if s not in SCHEMES:
            raise ScenarioError(f"unknown scheme {s!r}; expected one of {', '.join(SCHEMES)}")
    points = [with_value(sc, args.param, float(v)) for v in values]
    tasks = [(s, p.loops, p.budget, p.solver) for p in points for s in schemes]
    results = experiments._map(_sweep_task, tasks, args.jobs)
    rows = []
    it = iter(results)
    for v in values:
        for s in schemes:
            sol, status = next(it)
            if sol is None:
                rows.append([v, s, "TOTAL", "", "", "", math.inf, 0, status])
                continue
            for k in range(sol.num_loops):
                rows.append([v, s, k, sol.bandwidth[k], sol.cpu[k], sol.info[k], sol.cost[k], sol.iterations, status])
            rows.append([v, s, "TOTAL", float(np.sum(sol.bandwidth)), float(np.sum(sol.cpu)), float(np.sum(sol.info)),
                         sol.total_cost, sol.iterations, status])
    out = Path(args.out)
    write_csv(out, provenance(sc, {"param": args.param, "schemes": ",".join(schemes)}), SWEEP_COLUMNS, rows)
    print(f"sweep of {args.param} over {len(values)} points x {len(schemes)} schemes -> {out}")
    return 0


def _sweep_task(t):
    scheme, loops, budget, cfg = t
    try:
        return solve_scheme(scheme, loops, budget, cfg), "ok"
    except InfeasibleError:
        return None, "infeasible"
    except ConvergenceError:
        return None, "no-convergence"


def cmd_reproduce(args) -> int:
    figures = experiments.FIGURES if args.figure == "all" else [args.figure]
    out_dir = Path(args.out)
    failed = []
    for fig in figures:
        res = experiments.reproduce(fig, seed=args.seed, jobs=args.jobs)
        head = provenance(None, {"figure": fig, "seed": args.seed})
        for t in res.tables:
            write_csv(out_dir / f"{t.name}.csv", head, t.columns, t.rows)
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.observed}" for c in res.claims]
        (out_dir / f"{fig}_claims.txt").write_text("\n".join(lines) + "\n")
        print(f"[{fig}]")
        for line in lines:
            print("  " + line)
        failed.extend(f"{fig}: {c.name}" for c in res.claims if not c.passed)
    if failed:
        raise VerificationError("claims not reproduced: " + "; ".join(failed))
    return 0


def cmd_verify(args) -> int:
    sc = _scenario(args.scenario)
    grid = GridSpec(points_per_axis=args.grid)
    lines, ok = [], True
    for k, s in enumerate(sc.loops):
        alloc, _ = solve_single_loop(s, sc.budget)
        g = grid_intraloop(s, sc.budget, grid)
        dominates = alloc.d_sc3 >= g.d_sc3 * (1 - 1e-12)
        close = alloc.d_sc3 - g.d_sc3 <= g.resolution
        ok &= dominates and close
        lines.append(
            f"{'PASS' if dominates and close else 'FAIL'}  loop {k} single-loop: closed form {fmt(alloc.d_sc3)} bits, "
            f"grid {fmt(g.d_sc3)} bits, resolution {fmt(g.resolution)}"
        )
    K = len(sc.loops)
    if K <= 3:
        sol = solve_scheme("proposed", sc.loops, sc.budget, sc.solver)
        frac = float(os.environ.get(PERTURB_ENV, "0") or 0)
        if frac:
            sol.bandwidth = sol.bandwidth.copy()
            sol.bandwidth[0] += frac * sc.budget.total_bandwidth_hz
        info = np.array([allocate_loop(s, b, f).d_sc3 for s, b, f in zip(sc.loops, sol.bandwidth, sol.cpu)])
        cost = float(np.sum(LqrCost([s.summary for s in sc.loops]).value(info)))
        g = grid_interloop(sc.loops, sc.budget, grid)
        budget_ok = sol.bandwidth.sum() <= sc.budget.total_bandwidth_hz * (1 + 1e-9) and sol.cpu.sum() <= sc.budget.total_cpu_hz * (1 + 1e-9)
        dom = cost <= g.total_cost + g.resolution
        kkt = kkt_residual(sol, sc.loops, sc.budget, sc.solver) if K > 1 else 0.0
        kkt_ok = not (kkt > 1e-6)
        ok &= budget_ok and dom and kkt_ok
        lines.append(f"{'PASS' if budget_ok else 'FAIL'}  budgets respected: sum b = {fmt(sol.bandwidth.sum())} Hz, sum f = {fmt(sol.cpu.sum())}")
        lines.append(f"{'PASS' if dom else 'FAIL'}  multi-loop: solver cost {fmt(cost)}, grid {fmt(g.total_cost)}, resolution {fmt(g.resolution)}")
        lines.append(f"{'PASS' if kkt_ok else 'FAIL'}  KKT residual {fmt(kkt)} (<= 1e-6)")
    else:
        lines.append(f"SKIP  multi-loop grid check needs at most 3 loops (scenario has {K})")
    for line in lines:
        print(line)
    if args.out:
        head = provenance(sc, {"grid": args.grid})
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join([f"# {h}" for h in head] + lines) + "\n")
    if not ok:
        raise VerificationError("oracle checks failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sc3opt", description="Resource allocation for sensing-computing-control loops.")
    sub = p.add_subparsers(dest="command", required=True)
    scen_help = f"scenario YAML file, or builtin:NAME with NAME in {{{', '.join(BUILTINS)}}}"

    s = sub.add_parser("solve", help="solve one scenario with one scheme")
    s.add_argument("--scenario", required=True, help=scen_help)
    s.add_argument("--scheme", choices=SCHEMES, help="defaults to solver.scheme of the scenario")
    s.add_argument("--out", required=True, help="CSV path; a JSON summary is written next to it")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="sweep one scenario parameter")
    w.add_argument("--scenario", required=True, help=scen_help)
    w.add_argument("--param", required=True, help="dotted path, e.g. budget.bandwidth or loops.*.rho")
    w.add_argument("--from", dest="start", type=float, required=True)
    w.add_argument("--to", dest="stop", type=float, required=True)
    w.add_argument("--steps", type=int, default=10)
    w.add_argument("--scheme", help="comma-separated list of schemes")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("reproduce", help="regenerate a figure's data and check its claims")
    r.add_argument("--figure", required=True, choices=list(experiments.FIGURES) + ["all"])
    r.add_argument("--seed", type=int, default=42)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_reproduce)

    v = sub.add_parser("verify", help="compare closed forms and solver output with grid searches")
    v.add_argument("--scenario", required=True, help=scen_help)
    v.add_argument("--grid", type=int, default=64, help="points per grid axis (>= 16)")
    v.add_argument("--out", help="optional report path")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    level = os.environ.get("SC3OPT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Sc3Error as ex:
        print(f"error: {ex}", file=sys.stderr)
        return ex.exit_code
    except ValueError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return ScenarioError.exit_code


if __name__ == "__main__":
    sys.exit(main())
