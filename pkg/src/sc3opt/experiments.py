"""Figure reproductions: each returns its plot data as tables plus checks of the qualitative claims."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .control import lqr_lower_bound
from .errors import Sc3Error
from .intraloop import LoopRates, bandwidth_for_cpu, closed_loop_info, solve_single_loop
from .interloop import SCHEMES, SolverConfig, solve_scheme
from .interloop.baselines import fixed_split_allocation
from .model import Budget, ChannelGeometry, LinkSpec, LoopSpec
from .scenario import (
    CARRIER_MHZ,
    DL_TARGET_SNR_DB,
    FOUR_LOOPS,
    UL_TARGET_SNR_DB,
    builtin,
    reference_summary,
    four_loops,
)

FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9")
SWEEP_MHZ = tuple(round(0.6 + 0.1 * i, 10) for i in range(15))  # 0.6 ... 2.0 MHz


@dataclass
class Claim:
    name: str
    passed: bool
    observed: str


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class FigureResult:
    figure: str
    tables: list[Table]
    claims: list[Claim]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)


def _map(fn: Callable, items: Sequence, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------


def fig4(seed: int = 42, jobs: int = 1) -> FigureResult:
    """UL/DL configuration of each loop on its own with B = 500 kHz, f = 0.5 GHz."""
    sc = builtin("fig4")
    B, F = sc.budget.total_bandwidth_hz, sc.budget.total_cpu_hz
    table = Table("fig4", ["loop_id", "scheme", "rho_d_ul_bits", "d_dl_bits", "d_sc3_bits", "lqr_cost"])
    balanced, unbalanced, cheapest = [], [], []
    for k, s in enumerate(sc.loops):
        prop, cost = solve_single_loop(s, sc.budget)
        t_dl = SolverConfig().equal_t_dl_fraction * s.cycle_time_s
        eq = fixed_split_allocation(s, B / 2, B / 2, F, t_dl)
        u = 1.0 / (1.0 + s.rho)
        pr = fixed_split_allocation(s, B * u, B * (1 - u), F, t_dl)
        costs = {}
        for name, a in (("proposed", prop), ("equal", eq), ("proportional", pr)):
            c = lqr_lower_bound(s.summary, a.d_sc3)
            costs[name] = c
            table.rows.append([k, name, s.rho * a.d_ul, a.d_dl, a.d_sc3, c])
        balanced.append(abs(s.rho * prop.d_ul - prop.d_dl) / prop.d_dl)
        unbalanced.extend(abs(s.rho * a.d_ul - a.d_dl) / max(a.d_dl, s.rho * a.d_ul) for a in (eq, pr))
        cheapest.append(costs["proposed"] <= min(costs["equal"], costs["proportional"]))
    claims = [
        Claim("proposed: rho*D_ul == D_dl on every loop", max(balanced) <= 1e-12, f"max rel gap {max(balanced):.3g}"),
        Claim("equal/proportional: UL and DL unbalanced", min(unbalanced) > 1e-3, f"min rel gap {min(unbalanced):.3g}"),
        Claim("proposed has the lowest cost on every loop", all(cheapest), f"{sum(cheapest)}/{len(cheapest)} loops"),
    ]
    return FigureResult("fig4", [table], claims)


def fig5(seed: int = 42, jobs: int = 1) -> FigureResult:
    """Bandwidth needed to give up 1 MHz of CPU over working points (B, f, r_comm/r_comp)."""
    table = Table("fig5", ["b_hz", "f_hz", "se_ce_ratio", "delta_b_hz"])
    r_comp = 1e-4
    delta_f = 1e6
    grid_b = [0.5e6, 1e6, 1.5e6, 2e6]
    grid_f = [0.5e9, 1e9, 1.5e9, 2e9]
    grid_r = [1e4, 5e4, 1e5]
    invariance = 0.0
    for r in grid_r:
        rates = LoopRates(r_comm=r * r_comp, r_comp=r_comp)
        for b in grid_b:
            for f in grid_f:
                try:
                    db = bandwidth_for_cpu(b, f, rates, delta_f)
                    before = closed_loop_info(rates, b, f, 1.0)
                    after = closed_loop_info(rates, b + db, f - delta_f, 1.0)
                    invariance = max(invariance, abs(after - before) / before)
                except Sc3Error:
                    db = math.inf
                table.rows.append([b, f, r, db])
    p1 = bandwidth_for_cpu(1e6, 2e9, LoopRates(5e4 * r_comp, r_comp), delta_f)
    p2 = bandwidth_for_cpu(2e6, 1e9, LoopRates(1e5 * r_comp, r_comp), delta_f)
    claims = [
        Claim("(1 MHz, 2 GHz, 5e4): delta B = 12.6 kHz within 2%", abs(p1 / 12.6e3 - 1) <= 0.02, f"{p1:.6g} Hz"),
        Claim("(2 MHz, 1 GHz, 1e5): delta B = 500 kHz within 2%", abs(p2 / 500e3 - 1) <= 0.02, f"{p2:.6g} Hz"),
        Claim("about forty-fold increase between the two points", 35 <= p2 / p1 <= 45, f"ratio {p2 / p1:.4g}"),
        Claim("closed-loop information unchanged by every exchange", invariance <= 1e-9, f"max rel change {invariance:.3g}"),
    ]
    return FigureResult("fig5", [table], claims)


def random_distance_loops(rng: np.random.Generator) -> tuple[list[LoopSpec], np.ndarray, np.ndarray]:
    K = len(FOUR_LOOPS["alpha"])
    du = rng.uniform(0.5, 5.0, K)
    dd = rng.uniform(0.5, 5.0, K)
    loops = [
        LoopSpec(
            FOUR_LOOPS["T"], FOUR_LOOPS["rho"], a,
            LinkSpec.from_geometry(ChannelGeometry(u, CARRIER_MHZ, target_snr_db=UL_TARGET_SNR_DB)),
            LinkSpec.from_geometry(ChannelGeometry(d, CARRIER_MHZ, target_snr_db=DL_TARGET_SNR_DB)),
            reference_summary(FOUR_LOOPS["n"], e),
        )
        for u, d, a, e in zip(du, dd, FOUR_LOOPS["alpha"], FOUR_LOOPS["log2_det_A"])
    ]
    return loops, du, dd


def _fig6_trial(args):
    loops, cfg = args
    try:
        sol = solve_scheme("proposed", loops, Budget(1e6, 2e9), cfg)
    except Sc3Error as ex:
        return None, str(ex)
    return sol, ""


def fig6(seed: int = 42, jobs: int = 1, trials: int = 100, cfg: SolverConfig | None = None) -> FigureResult:
    """Outer-iteration counts of the successive approximation over random link distances."""
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(seed)
    draws = [random_distance_loops(rng) for _ in range(trials)]
    results = _map(_fig6_trial, [(d[0], cfg) for d in draws], jobs)
    table = Table("fig6", ["trial", "d_ul_km", "d_dl_km", "iterations", "total_cost", "monotone", "status"])
    its, mono, ok = [], [], []
    for t, ((loops, du, dd), (sol, err)) in enumerate(zip(draws, results)):
        if sol is None:
            ok.append(False)
            table.rows.append([t, " ".join(f"{x:.12g}" for x in du), " ".join(f"{x:.12g}" for x in dd), 0, math.nan, 0, err])
            continue
        h = sol.objective_history
        m = all(b <= a for a, b in zip(h, h[1:]))
        ok.append(True)
        mono.append(m)
        its.append(sol.iterations)
        table.rows.append(
            [t, " ".join(f"{x:.12g}" for x in du), " ".join(f"{x:.12g}" for x in dd), sol.iterations, sol.total_cost, int(m), "ok"]
        )
    hist = Table("fig6_histogram", ["iterations", "trials"])
    for v in sorted(set(its)):
        hist.rows.append([v, its.count(v)])
    med = float(np.median(its)) if its else math.nan
    claims = [
        Claim("every trial converges", all(ok), f"{sum(ok)}/{trials}"),
        Claim("objective history non-increasing in every trial", bool(mono) and all(mono), f"{sum(mono)}/{len(mono)}"),
        Claim("median outer iterations <= 6", med <= 6, f"median {med:g}, counts {dict(hist.rows)}"),
    ]
    return FigureResult("fig6", [table, hist], claims)


def _sweep_point(args):
    scheme, loops, B, F, cfg = args
    try:
        return solve_scheme(scheme, loops, Budget(B, F), cfg), "ok"
    except Sc3Error as ex:
        return None, type(ex).__name__


def scheme_sweep(loops, cpu_hz, schemes, bandwidths_hz, cfg, jobs=1):
    tasks = [(s, loops, B, cpu_hz, cfg) for B in bandwidths_hz for s in schemes]
    out = _map(_sweep_point, tasks, jobs)
    return {(t[0], t[2]): r for t, r in zip(tasks, out)}


def _cost(res):
    sol, _ = res
    return math.inf if sol is None else sol.total_cost


def fig7(seed: int = 42, jobs: int = 1) -> FigureResult:
    """Total cost of every scheme over the bandwidth budget (the four reference loops, f = 2 GHz)."""
    loops = four_loops()
    Bs = [m * 1e6 for m in SWEEP_MHZ]
    schemes = [s for s in SCHEMES if s != "theorem2"]
    res = scheme_sweep(loops, 2e9, schemes, Bs, SolverConfig(), jobs)
    table = Table("fig7", ["b_max_hz", "scheme", "total_cost", "status"])
    for B in Bs:
        for s in schemes:
            table.rows.append([B, s, _cost(res[s, B]), res[s, B][1]])
    lowest, dl_worst, sum_vs_min = [], [], []
    optimized = ("tdd", "ul-comp", "dl-comp", "uldl")
    limit = Bs[0] + (Bs[-1] - Bs[0]) / 3
    for B in Bs:
        p = _cost(res["proposed", B])
        others = [_cost(res[s, B]) for s in schemes if s != "proposed"]
        lowest.append(all(p <= c for c in others))
        if B <= limit + 1e-6:
            dl = _cost(res["dl-comp", B])
            dl_worst.append(all(dl >= _cost(res[s, B]) for s in optimized))
        if B >= 1e6 - 1e-6:
            sum_vs_min.append(_cost(res["max-sum", B]) >= _cost(res["max-min", B]))
    claims = [
        Claim("proposed cost <= every other scheme at every budget", all(lowest), f"{sum(lowest)}/{len(lowest)} points"),
        Claim("DL&computing worst optimised scheme in the bandwidth-limited third", all(dl_worst), f"{sum(dl_worst)}/{len(dl_worst)} points"),
        Claim("max-sum cost >= max-min cost for B >= 1 MHz", all(sum_vs_min), f"{sum(sum_vs_min)}/{len(sum_vs_min)} points"),
    ]
    return FigureResult("fig7", [table], claims)


def fig8(seed: int = 42, jobs: int = 1) -> FigureResult:
    """Closed-form bandwidth versus the iterative optimum with ample CPU."""
    sc = builtin("adequate-cpu")
    Bs = [m * 1e6 for m in SWEEP_MHZ]
    res = scheme_sweep(sc.loops, sc.budget.total_cpu_hz, ["proposed", "theorem2"], Bs, SolverConfig(), jobs)
    table = Table("fig8", ["b_max_hz", "proposed_cost", "closed_form_cost", "relative_gap", "closed_form_kkt"])
    gaps, kkts = [], []
    for B in Bs:
        p, q = res["proposed", B][0], res["theorem2", B][0]
        gap = q.total_cost / p.total_cost - 1.0
        gaps.append(gap)
        kkts.append(q.kkt_residual)
        table.rows.append([B, p.total_cost, q.total_cost, gap, q.kkt_residual])
    claims = [
        Claim("gap < 5% at the low end", gaps[0] < 0.05, f"{gaps[0]:.4%}"),
        Claim("gap < 1% at the high end", gaps[-1] < 0.01, f"{gaps[-1]:.4%}"),
        Claim("closed form satisfies its own KKT conditions (<= 1e-8)", max(kkts) <= 1e-8, f"max {max(kkts):.3g}"),
    ]
    return FigureResult("fig8", [table], claims)


def _strictly(seq, increasing):
    return all((b > a) if increasing else (b < a) for a, b in zip(seq, seq[1:]))


def _equal(seq):
    return float(np.max(np.abs(np.asarray(seq) / np.mean(seq) - 1.0)))


def fig9(seed: int = 42, jobs: int = 1) -> FigureResult:
    """Bandwidth shares of the goal-oriented and the two rate-oriented schemes."""
    table = Table("fig9", ["panel", "loop_id", "scheme", "bandwidth_share"])
    shares = {}
    for panel in ("fig9-entropy", "fig9-se"):
        sc = builtin(panel)
        for scheme in ("proposed", "max-sum", "max-min"):
            sol = solve_scheme(scheme, sc.loops, sc.budget, SolverConfig())
            sh = sol.bandwidth_shares()
            shares[panel, scheme] = sh
            for k, v in enumerate(sh):
                table.rows.append([panel, k, scheme, v])
    e = "fig9-entropy"
    spread = max(_equal(shares[e, "max-sum"]), _equal(shares[e, "max-min"]))
    claims = [
        Claim("entropy panel: proposed shares increase with intrinsic entropy", _strictly(shares[e, "proposed"], True),
              " ".join(f"{x:.4f}" for x in shares[e, "proposed"])),
        Claim("entropy panel: max-sum and max-min shares equal (1e-6)", spread <= 1e-6, f"max rel spread {spread:.3g}"),
        Claim("SE panel: proposed shares decrease with r_comm", _strictly(shares["fig9-se", "proposed"], False),
              " ".join(f"{x:.4f}" for x in shares["fig9-se", "proposed"])),
        Claim("SE panel: max-min shares decrease with r_comm", _strictly(shares["fig9-se", "max-min"], False),
              " ".join(f"{x:.4f}" for x in shares["fig9-se", "max-min"])),
    ]
    return FigureResult("fig9", [table], claims)


REPRODUCERS = {"fig4": fig4, "fig5": fig5, "fig6": fig6, "fig7": fig7, "fig8": fig8, "fig9": fig9}


def reproduce(figure: str, seed: int = 42, jobs: int = 1) -> FigureResult:
    try:
        fn = REPRODUCERS[figure]
    except KeyError:
        raise ValueError(f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}") from None
    return fn(seed=seed, jobs=jobs)
