"""Successive convex approximation over bandwidth and CPU shares."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..control import LqrCost, info_for_cost
from ..errors import ConvergenceError, InfeasibleError
from ..intraloop import allocate_loop, spec_rates
from ..model import Budget, LoopSpec
from .solution import Objective, SolverConfig, SystemSolution
from .subproblem import (
    LoopModel,
    RoundResult,
    feasible_shares,
    linearized_info,
    objective_value,
    solve_barrier,
    solve_lqr_dual,
    solve_lqr_newton,
)

log = logging.getLogger(__name__)


def proposed_model(loops: Sequence[LoopSpec], budget: Budget) -> LoopModel:
    rates = [spec_rates(s) for s in loops]
    T = np.array([s.cycle_time_s for s in loops])
    return LoopModel(
        a=T * np.array([r.r_comm for r in rates]) * budget.total_bandwidth_hz,
        c=T * np.array([r.r_comp for r in rates]) * budget.total_cpu_hz,
        cost=LqrCost([s.summary for s in loops]),
        bandwidth_pool=budget.total_bandwidth_hz,
        cpu_pool=budget.total_cpu_hz,
    )


def info_floors(loops: Sequence[LoopSpec], requirement) -> np.ndarray:
    """Per-loop information needed to keep the cost bound at or below ``requirement``."""
    req = np.broadcast_to(np.asarray(requirement, dtype=float), (len(loops),))
    return np.array([info_for_cost(s.summary, float(r)) for s, r in zip(loops, req)])


@dataclass
class ScaTrace:
    b: np.ndarray  # final shares
    f: np.ndarray
    d: np.ndarray  # information granted by the last linearised round
    capacity: np.ndarray  # achievable information at the final shares
    history: list[float]
    iterations: int
    nu_b: float  # per share
    nu_f: float
    dbar: np.ndarray  # point of the last linearisation
    rounds: list[RoundResult] = field(default_factory=list)


def solve_round(
    model: LoopModel, objective: Objective, dbar, start_b, start_f, floor, cfg: SolverConfig
) -> RoundResult:
    """One convex round: optimal shares for the constraint linearised at ``dbar``."""
    if objective is Objective.MIN_TOTAL_LQR and not model.has_caps:
        if cfg.method == "dual" and model.free_b and model.free_f:
            return solve_lqr_dual(model, dbar, floor, dual_tol=cfg.dual_tol, scale_hint=_price_hint(model, dbar))
        return solve_lqr_newton(model, dbar, start_b, start_f, floor, tol=cfg.inner_tol, max_iter=cfg.max_inner_iters)
    return solve_barrier(
        model, objective, dbar, start_b, start_f, floor, inner_tol=cfg.inner_tol, max_iter=cfg.max_inner_iters
    )


def _price_hint(model: LoopModel, dbar) -> float:
    # magnitude of -dL/d(share) at the equal split, a starting guess for the price search
    _, L1, _ = model.cost.derivatives(dbar)
    return float(np.mean(np.abs(L1) * dbar)) or 1.0


def run_sca(
    model: LoopModel,
    objective: Objective,
    cfg: SolverConfig,
    info_floor: Optional[np.ndarray] = None,
) -> ScaTrace:
    cost = model.cost
    floor = cost.e + cfg.stability_eps
    if info_floor is not None:
        floor = np.maximum(floor, info_floor)
    if np.any(model.cap <= floor):
        bad = np.flatnonzero(model.cap <= floor)
        raise InfeasibleError(f"frozen links cap loops {bad.tolist()} below their information floor", loops=bad)
    b, f = feasible_shares(model, floor)
    cap0 = model.capacity(b, f)
    if objective is Objective.MIN_TOTAL_LQR:
        dbar = np.minimum(cost.e + cfg.d_init_offset, cap0)
    else:
        # start on the achievable curve so that identical loops stay identical
        dbar = np.minimum(cap0, model.cap)
    dbar = np.maximum(dbar, floor) if objective is not Objective.MIN_TOTAL_LQR else dbar
    history = [objective_value(objective, cost, dbar)]
    sign = 1.0 if objective is Objective.MIN_TOTAL_LQR else -1.0
    rounds = []
    for s in range(1, cfg.max_outer_iters + 1):
        rr = solve_round(model, objective, dbar, b, f, floor, cfg)
        rounds.append(rr)
        b, f = rr.b, rr.f
        d = np.minimum(linearized_info(model, b, f, dbar), model.cap)
        val = objective_value(objective, cost, d)
        prev = history[-1]
        if sign * val > sign * prev:
            # rounding-level backslide; the previous point stays feasible so keep its value
            if abs(val - prev) > 1e-9 * max(1.0, abs(prev)):
                raise ConvergenceError(f"objective moved the wrong way in round {s}: {prev} -> {val}", history=history)
            val = prev
        history.append(val)
        log.debug("round %d: objective %.12g", s, val)
        last_dbar = dbar
        if abs(val - prev) <= cfg.delta * abs(prev):
            return ScaTrace(
                b=b, f=f, d=d, capacity=np.minimum(model.capacity(b, f), model.cap), history=history,
                iterations=s, nu_b=rr.nu_b, nu_f=rr.nu_f, dbar=last_dbar, rounds=rounds,
            )
        dbar = d if cfg.expansion == "previous" else np.minimum(model.capacity(b, f), model.cap)
    raise ConvergenceError(
        f"no convergence within {cfg.max_outer_iters} rounds (last relative change "
        f"{abs(history[-1] - history[-2]) / abs(history[-2]):.3g})",
        residual=abs(history[-1] - history[-2]),
        history=history,
    )


def solve_subproblem(
    loops: Sequence[LoopSpec],
    budget: Budget,
    d_prev,
    objective: Objective = Objective.MIN_TOTAL_LQR,
    info_floor=None,
    cfg: Optional[SolverConfig] = None,
):
    """One linearised round on the full pools.

    Returns (b_hz, f_hz, d_bits, dual_bandwidth, dual_cpu); duals are per Hz
    and per cycle/s.
    """
    cfg = cfg or SolverConfig()
    model = proposed_model(loops, budget)
    d_prev = np.asarray(d_prev, dtype=float)
    if np.any(d_prev <= 0):
        raise ValueError("d_prev must be positive")
    floor = model.cost.e + cfg.stability_eps
    if info_floor is not None:
        floor = np.maximum(floor, info_floor)
    b, f = model.equal_shares()
    lin = linearized_info(model, b, f, d_prev)
    if np.any(lin <= floor):
        # the equal split is not inside this round's feasible set; look for one that is
        req = d_prev**2 / (2 * d_prev - floor)
        if np.any(2 * d_prev <= floor):
            raise InfeasibleError("linearisation point too low to reach the information floor")
        b, f = feasible_shares(model, req)
    rr = solve_round(model, objective, d_prev, b, f, floor, cfg)
    return (
        rr.b * budget.total_bandwidth_hz,
        rr.f * budget.total_cpu_hz,
        rr.d,
        rr.nu_b / budget.total_bandwidth_hz,
        rr.nu_f / budget.total_cpu_hz,
    )


def sca_optimize(
    loops: Sequence[LoopSpec],
    budget: Budget,
    cfg: Optional[SolverConfig] = None,
    objective: Objective = Objective.MIN_TOTAL_LQR,
    lqr_requirement=None,
    scheme_name: str = "proposed",
) -> SystemSolution:
    cfg = cfg or SolverConfig()
    if not loops:
        raise ValueError("need at least one loop")
    objective = Objective(objective)
    floors = None
    if objective is not Objective.MIN_TOTAL_LQR:
        if lqr_requirement is None:
            raise ValueError("information-oriented objectives need an LQR requirement")
        floors = info_floors(loops, lqr_requirement)
    model = proposed_model(loops, budget)
    trace = run_sca(model, objective, cfg, floors)
    from .kkt import kkt_residual_trace

    return finish(
        scheme_name, loops, trace.b * budget.total_bandwidth_hz, trace.f * budget.total_cpu_hz, objective, trace,
        nu_b=trace.nu_b / budget.total_bandwidth_hz, nu_f=trace.nu_f / budget.total_cpu_hz,
        kkt=kkt_residual_trace(model, objective, trace, floors, cfg),
    )


def finish(scheme_name, loops, b_hz, f_hz, objective, trace=None, nu_b=math.nan, nu_f=math.nan, kkt=math.nan, allocs=None):
    """Intra-loop splits, information and cost for given per-loop resources."""
    if allocs is None:
        allocs = [allocate_loop(s, float(b), float(f)) for s, b, f in zip(loops, b_hz, f_hz)]
    info = np.array([a.d_sc3 for a in allocs])
    cost = LqrCost([s.summary for s in loops]).value(info)
    return SystemSolution(
        scheme_name=scheme_name,
        bandwidth=np.asarray(b_hz, dtype=float),
        cpu=np.asarray(f_hz, dtype=float),
        info=info,
        cost=cost,
        allocations=list(allocs),
        objective=objective,
        iterations=trace.iterations if trace else 0,
        objective_history=list(trace.history) if trace else [],
        dual_bandwidth=nu_b,
        dual_cpu=nu_f,
        kkt_residual=kkt,
        linearization_point=None if trace is None else trace.dbar,
    )
