"""Comparison schemes and the common scheme dispatcher."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..control import LqrCost
from ..errors import ScenarioError
from ..intraloop import IntraAllocation, allocate_loop, spec_rates
from ..model import Budget, LoopSpec
from .kkt import closed_form_kkt_residual, kkt_residual_trace
from .sca import finish, info_floors, proposed_model, run_sca, sca_optimize
from .solution import Objective, SolverConfig, SystemSolution
from .subproblem import LoopModel
from .theorem2 import theorem2_allocation

SCHEMES = (
    "proposed",
    "equal",
    "proportional",
    "tdd",
    "ul-comp",
    "dl-comp",
    "uldl",
    "max-sum",
    "max-min",
    "theorem2",
)


def _arr(loops, attr):
    return np.array([getattr(s, attr) for s in loops], dtype=float)


def fixed_split_allocation(spec: LoopSpec, b_ul, b_dl, f, t_dl) -> IntraAllocation:
    """Frozen bandwidth split and DL time; UL time sized so computing just keeps up."""
    T = spec.cycle_time_s
    rest = T - t_dl
    # t_ul + alpha * D_ul / f = rest with D_ul = b_ul t_ul r_ul
    t_ul = rest / (1.0 + spec.alpha * b_ul * spec.r_ul / f)
    d_ul = b_ul * t_ul * spec.r_ul
    d_dl = b_dl * t_dl * spec.r_dl
    return IntraAllocation(
        b_ul=b_ul, b_dl=b_dl, t_ul=t_ul, t_dl=t_dl, t_comp=rest - t_ul, f=f,
        d_ul=d_ul, d_dl=d_dl, d_sc3=min(spec.rho * d_ul, d_dl),
    )


def _fixed_split_scheme(name, loops, budget, cfg, ul_fraction):
    K = len(loops)
    b = np.full(K, budget.total_bandwidth_hz / K)
    f = np.full(K, budget.total_cpu_hz / K)
    allocs = [
        fixed_split_allocation(s, bk * u, bk * (1.0 - u), fk, cfg.equal_t_dl_fraction * s.cycle_time_s)
        for s, bk, fk, u in zip(loops, b, f, ul_fraction)
    ]
    return finish(name, loops, b, f, Objective.MIN_TOTAL_LQR, allocs=allocs)


def _tdd(loops, budget):
    K = len(loops)
    allocs = [
        allocate_loop(s, budget.total_bandwidth_hz, budget.total_cpu_hz, T=s.cycle_time_s / K) for s in loops
    ]
    # each loop owns the full pools for 1/K of the cycle; report time averages
    b = np.full(K, budget.total_bandwidth_hz / K)
    f = np.full(K, budget.total_cpu_hz / K)
    return finish("tdd", loops, b, f, Objective.MIN_TOTAL_LQR, allocs=allocs)


def _frozen_link(loops, budget, cfg, frozen):
    """Model for the schemes that freeze one link at B_max / (2K) for a fixed time."""
    K = len(loops)
    B, F = budget.total_bandwidth_hz, budget.total_cpu_hz
    T = _arr(loops, "cycle_time_s")
    rho = _arr(loops, "rho")
    r_ul, r_dl = _arr(loops, "r_ul"), _arr(loops, "r_dl")
    r_comp = rho / _arr(loops, "alpha")
    b_fixed = cfg.fixed_link_fraction * B / K
    pool = B - K * b_fixed
    if frozen == "dl":
        t_fixed = np.full(K, cfg.ul_comp_t_dl_s)
        cap = b_fixed * t_fixed * r_dl
        r_free = rho * r_ul
    else:
        t_fixed = np.full(K, cfg.dl_comp_t_ul_s)
        cap = rho * b_fixed * t_fixed * r_ul
        r_free = r_dl
    if np.any(t_fixed >= T):
        raise ScenarioError(f"fixed {frozen.upper()} time must be shorter than the cycle time")
    T_rest = T - t_fixed
    model = LoopModel(
        a=T_rest * r_free * pool, c=T_rest * r_comp * F, cost=LqrCost([s.summary for s in loops]),
        bandwidth_pool=pool, cpu_pool=F, cap=cap,
    )
    return model, b_fixed, t_fixed, T_rest


def _frozen_link_allocs(loops, frozen, b_free, f, b_fixed, t_fixed, T_rest):
    allocs = []
    for s, bk, fk, tf, tr in zip(loops, b_free, f, t_fixed, T_rest):
        if bk <= 0 or fk <= 0:
            if frozen == "dl":
                d_dl = b_fixed * tf * s.r_dl
                allocs.append(IntraAllocation(0.0, b_fixed, 0.0, tf, 0.0, fk, 0.0, d_dl, 0.0))
            else:
                d_ul = b_fixed * tf * s.r_ul
                allocs.append(IntraAllocation(b_fixed, 0.0, tf, 0.0, 0.0, fk, d_ul, 0.0, 0.0))
            continue
        comp = 1.0 / (fk * s.rho / s.alpha)  # seconds per task bit through computing
        if frozen == "dl":
            link = 1.0 / (bk * s.rho * s.r_ul)
            t_ul = tr * link / (link + comp)
            d_ul = bk * t_ul * s.r_ul
            d_dl = b_fixed * tf * s.r_dl
            allocs.append(IntraAllocation(bk, b_fixed, t_ul, tf, tr - t_ul, fk, d_ul, d_dl, min(s.rho * d_ul, d_dl)))
        else:
            link = 1.0 / (bk * s.r_dl)
            t_dl = tr * link / (link + comp)
            d_ul = b_fixed * tf * s.r_ul
            d_dl = bk * t_dl * s.r_dl
            allocs.append(IntraAllocation(b_fixed, bk, tf, t_dl, tr - t_dl, fk, d_ul, d_dl, min(s.rho * d_ul, d_dl)))
    return allocs


def _frozen_link_scheme(name, loops, budget, cfg):
    frozen = "dl" if name == "ul-comp" else "ul"
    model, b_fixed, t_fixed, T_rest = _frozen_link(loops, budget, cfg, frozen)
    K = len(loops)
    # a loop whose frozen link cannot carry its intrinsic entropy is lost whatever else it gets
    keep = model.cap > model.cost.e + cfg.stability_eps
    b_free = np.zeros(K)
    f = np.zeros(K)
    trace = None
    kkt = math.nan
    nu_b = nu_f = math.nan
    if keep.any():
        sub = model.subset(keep)
        trace = run_sca(sub, Objective.MIN_TOTAL_LQR, cfg)
        b_free[keep] = trace.b * model.bandwidth_pool
        f[keep] = trace.f * model.cpu_pool
        kkt = kkt_residual_trace(sub, Objective.MIN_TOTAL_LQR, trace, None, cfg)
        nu_b, nu_f = trace.nu_b / model.bandwidth_pool, trace.nu_f / model.cpu_pool
    allocs = _frozen_link_allocs(loops, frozen, b_free, f, b_fixed, t_fixed, T_rest)
    b = b_free + b_fixed
    sol = finish(name, loops, b, f, Objective.MIN_TOTAL_LQR, trace=trace, nu_b=nu_b, nu_f=nu_f, kkt=kkt, allocs=allocs)
    if trace is not None:
        point = np.full(K, np.nan)
        point[keep] = trace.dbar
        sol.linearization_point = point
    return sol


def uldl_model(loops, budget) -> LoopModel:
    model = proposed_model(loops, budget)
    model.f_fixed = np.full(len(loops), 1.0 / len(loops))
    return model


def scheme_model(scheme: str, loops, budget, cfg: SolverConfig):
    """(LoopModel, information floors) of the SCA-based schemes."""
    if scheme == "proposed":
        return proposed_model(loops, budget), None
    if scheme == "uldl":
        return uldl_model(loops, budget), None
    if scheme in ("max-sum", "max-min"):
        return proposed_model(loops, budget), info_floors(loops, cfg.lqr_requirement)
    if scheme in ("ul-comp", "dl-comp"):
        return _frozen_link(loops, budget, cfg, "dl" if scheme == "ul-comp" else "ul")[0], None
    raise ScenarioError(f"scheme {scheme!r} has no linearised model")


def _uldl(loops, budget, cfg):
    model = uldl_model(loops, budget)
    trace = run_sca(model, Objective.MIN_TOTAL_LQR, cfg)
    b = trace.b * budget.total_bandwidth_hz
    f = model.f_fixed * budget.total_cpu_hz
    return finish(
        "uldl", loops, b, f, Objective.MIN_TOTAL_LQR, trace=trace,
        nu_b=trace.nu_b / budget.total_bandwidth_hz,
        kkt=kkt_residual_trace(model, Objective.MIN_TOTAL_LQR, trace, None, cfg),
    )


def _theorem2(loops, budget):
    b, f = theorem2_allocation(loops, budget)
    return finish(
        "theorem2", loops, b, f, Objective.MIN_TOTAL_LQR,
        kkt=closed_form_kkt_residual(loops, b, budget.total_bandwidth_hz),
    )


def baseline(scheme: str, loops: Sequence[LoopSpec], budget: Budget, cfg: Optional[SolverConfig] = None) -> SystemSolution:
    cfg = cfg or SolverConfig()
    if not loops:
        raise ValueError("need at least one loop")
    if scheme == "equal":
        return _fixed_split_scheme("equal", loops, budget, cfg, np.full(len(loops), 0.5))
    if scheme == "proportional":
        return _fixed_split_scheme("proportional", loops, budget, cfg, 1.0 / (1.0 + _arr(loops, "rho")))
    if scheme == "tdd":
        return _tdd(loops, budget)
    if scheme in ("ul-comp", "dl-comp"):
        return _frozen_link_scheme(scheme, loops, budget, cfg)
    if scheme == "uldl":
        return _uldl(loops, budget, cfg)
    if scheme == "max-sum":
        return sca_optimize(loops, budget, cfg, Objective.MAX_SUM_INFO, cfg.lqr_requirement, scheme_name="max-sum")
    if scheme == "max-min":
        return sca_optimize(loops, budget, cfg, Objective.MAX_MIN_INFO, cfg.lqr_requirement, scheme_name="max-min")
    if scheme == "theorem2":
        return _theorem2(loops, budget)
    raise ScenarioError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")


def solve_scheme(scheme: str, loops: Sequence[LoopSpec], budget: Budget, cfg: Optional[SolverConfig] = None) -> SystemSolution:
    cfg = cfg or SolverConfig()
    if scheme == "proposed":
        return sca_optimize(loops, budget, cfg)
    return baseline(scheme, loops, budget, cfg)
