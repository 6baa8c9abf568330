"""Optimality residuals used to check the solvers against their own problems."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from ..model import Budget, LoopSpec
from .solution import Objective, SolverConfig, SystemSolution
from .subproblem import LoopModel, linearized_info

ACTIVE_TOL = 1e-7


def round_kkt_residual(
    model: LoopModel,
    objective: Objective,
    dbar,
    b,
    f,
    floor,
    d: Optional[np.ndarray] = None,
) -> float:
    """Scaled KKT residual of a linearised round at shares (b, f).

    The round is written with explicit information variables d (and the
    max-min level tau). Multipliers are fitted by non-negative least squares
    on the near-active constraints; the residual is the max of the scaled
    stationarity error, primal infeasibility and complementary slackness.
    """
    K = model.K
    ns = model.n_share_vars
    maxmin = objective is Objective.MAX_MIN_INFO
    n = ns + K + int(maxmin)
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    dbar = np.asarray(dbar, dtype=float)
    floor = np.broadcast_to(np.asarray(floor, dtype=float), (K,))
    lin = linearized_info(model, b, f, dbar)
    if d is None:
        d = np.minimum(lin, model.cap)
    cost = model.cost

    g0 = np.zeros(n)
    jd = ns + np.arange(K)
    if objective is Objective.MIN_TOTAL_LQR:
        _, L1, _ = cost.derivatives(d)
        g0[jd] = L1
    elif objective is Objective.MAX_SUM_INFO:
        g0[jd] = -1.0
    else:
        g0[-1] = -1.0
    tau = float(np.min(d))

    gb, gf = model.terms(b, f)
    rows, vals, scales = [], [], []
    idx = np.arange(K)
    for k in idx:
        r = np.zeros(n)
        col = 0
        if model.free_b:
            r[col + k] = -(dbar[k] ** 2) * gb[k] / b[k]
            col += K
        if model.free_f:
            r[col + k] = -(dbar[k] ** 2) * gf[k] / f[k]
        r[jd[k]] = 1.0
        rows.append(r)
        vals.append(d[k] - lin[k])
        scales.append(max(1.0, abs(lin[k])))
    for k in idx:
        r = np.zeros(n)
        r[jd[k]] = -1.0
        rows.append(r)
        vals.append(floor[k] - d[k])
        scales.append(max(1.0, abs(floor[k])))
    for k in np.flatnonzero(np.isfinite(model.cap)):
        r = np.zeros(n)
        r[jd[k]] = 1.0
        rows.append(r)
        vals.append(d[k] - model.cap[k])
        scales.append(max(1.0, abs(model.cap[k])))
    if maxmin:
        for k in idx:
            r = np.zeros(n)
            r[-1] = 1.0
            r[jd[k]] = -1.0
            rows.append(r)
            vals.append(tau - d[k])
            scales.append(max(1.0, abs(d[k])))
    G = np.array(rows)
    c = np.array(vals) / np.array(scales)
    active = c >= -ACTIVE_TOL
    A = model.equality_matrix(extra=K + int(maxmin))
    h = A @ np.concatenate([model.pack(b, f), d, [tau] if maxmin else []]) - 1.0

    Ga = G[active].T
    M = np.hstack([Ga, A.T, -A.T])
    scale = max(1.0, float(np.max(np.abs(g0))))
    coef, _ = nnls(M / scale, -g0 / scale, maxiter=50 * M.shape[1])
    lam = coef[: Ga.shape[1]]
    stat = np.max(np.abs(g0 + M @ coef)) / scale
    primal = max(float(np.max(np.maximum(c, 0.0))), float(np.max(np.abs(h))) if h.size else 0.0)
    comp = float(np.max(np.abs(lam * c[active]))) if lam.size else 0.0
    return float(max(stat, primal, comp))


def kkt_residual_trace(model, objective, trace, floors, cfg: SolverConfig) -> float:
    floor = model.cost.e + cfg.stability_eps
    if floors is not None:
        floor = np.maximum(floor, floors)
    return round_kkt_residual(model, objective, trace.dbar, trace.b, trace.f, floor)


def kkt_residual(
    solution: SystemSolution,
    loops: Sequence[LoopSpec],
    budget: Budget,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """Residual of the final linearised problem (or of the closed-form problem
    for the theorem2 scheme) at the allocation stored in ``solution``."""
    cfg = cfg or SolverConfig()
    if solution.scheme_name == "theorem2":
        return closed_form_kkt_residual(loops, solution.bandwidth, budget.total_bandwidth_hz)
    if solution.linearization_point is None:
        return math.nan
    from .baselines import scheme_model

    model, floors = scheme_model(solution.scheme_name, loops, budget, cfg)
    if not model.free_b and not model.free_f:
        return math.nan
    b = model.b_fixed if not model.free_b else solution.bandwidth / budget.total_bandwidth_hz
    f = model.f_fixed if not model.free_f else solution.cpu / budget.total_cpu_hz
    if solution.scheme_name not in ("proposed", "uldl", "max-sum", "max-min"):
        return math.nan
    floor = model.cost.e + cfg.stability_eps
    if floors is not None:
        floor = np.maximum(floor, floors)
    return round_kkt_residual(model, solution.objective, solution.linearization_point, b, f, floor)


def closed_form_kkt_residual(loops: Sequence[LoopSpec], bandwidth, b_max: float) -> float:
    """KKT residual of the adequate-CPU bandwidth problem

        min sum_k n_k 2^(e_k) 2^(-B_k / w_k)   s.t. sum B_k = B_max, B_k >= 0

    scaled by the bandwidth price."""
    from .theorem2 import closed_form_terms

    w, z = closed_form_terms(loops)
    B = np.asarray(bandwidth, dtype=float)
    # d/dB_k of the objective is exactly -2^(z - B/w)
    grad = -np.exp2(z - B / w)
    pos = B > 1e-12 * b_max
    lam = float(np.mean(-grad[pos]))
    stat = np.abs(grad[pos] + lam) / lam
    dual = np.maximum(-(grad[~pos] + lam) / lam, 0.0)
    primal = abs(B.sum() - b_max) / b_max
    neg = float(np.max(np.maximum(-B / b_max, 0.0)))
    parts = [primal, neg]
    if stat.size:
        parts.append(float(stat.max()))
    if dual.size:
        parts.append(float(dual.max()))
    return float(max(parts))
