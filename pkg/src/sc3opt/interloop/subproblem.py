"""The convex problem solved in each successive-approximation round.

Every loop k holds a bandwidth share b_k and a CPU share f_k of two pools.
Its time to move one bit of task information through the loop is

    g_k(b, f) = 1 / (b a_k) + 1 / (f c_k)

where a_k, c_k are the bits per cycle the loop would get from a whole pool
(T_k r_comm B_pool and T_k r_comp F_pool). The achievable information is
1 / g_k. Round s replaces the non-convex ``d <= 1 / g`` by its tangent at the
previous round's value dbar:

    d <= 2 dbar - dbar^2 g(b, f)

which is concave in (b, f), so the round is a convex program. Three solvers
share this module:

* ``solve_lqr_newton``: for the LQR objective without caps; d is eliminated
  (the tangent binds) and the 2K share variables are found by
  equality-constrained Newton. The multipliers of the two pool constraints
  are the bandwidth and CPU prices.
* ``solve_lqr_dual``: same problem by price decomposition. For fixed prices
  each loop reduces to a monotone scalar equation in d; two nested
  root-finds set the prices so both pools are used up.
* ``solve_barrier``: explicit d variables with log barriers; handles
  information floors, caps from frozen links and the max-sum / max-min
  objectives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..control import LqrCost
from ..errors import ConvergenceError, InfeasibleError
from .newton import barrier_solve, newton_eq
from .solution import Objective


@dataclass
class LoopModel:
    a: np.ndarray  # bits/cycle with the whole bandwidth pool
    c: np.ndarray  # bits/cycle with the whole CPU pool
    cost: LqrCost
    bandwidth_pool: float  # Hz
    cpu_pool: float  # cycles/s
    cap: Optional[np.ndarray] = None  # upper limit on d imposed by a frozen link
    b_fixed: Optional[np.ndarray] = None  # fixed bandwidth shares (bandwidth not optimised)
    f_fixed: Optional[np.ndarray] = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if self.cap is None:
            self.cap = np.full(self.a.size, np.inf)

    @property
    def K(self) -> int:
        return self.a.size

    @property
    def free_b(self) -> bool:
        return self.b_fixed is None

    @property
    def free_f(self) -> bool:
        return self.f_fixed is None

    @property
    def n_share_vars(self) -> int:
        return self.K * (int(self.free_b) + int(self.free_f))

    @property
    def has_caps(self) -> bool:
        return bool(np.any(np.isfinite(self.cap)))

    def split(self, x):
        """Share vectors (b, f) from the leading share variables of ``x``."""
        K, i = self.K, 0
        if self.free_b:
            b, i = x[:K], K
        else:
            b = self.b_fixed
        f = x[i : i + K] if self.free_f else self.f_fixed
        return b, f

    def pack(self, b, f):
        parts = []
        if self.free_b:
            parts.append(b)
        if self.free_f:
            parts.append(f)
        return np.concatenate(parts) if parts else np.zeros(0)

    def equality_matrix(self, extra: int = 0) -> np.ndarray:
        K, rows = self.K, []
        n = self.n_share_vars + extra
        col = 0
        for free in (self.free_b, self.free_f):
            if free:
                r = np.zeros(n)
                r[col : col + K] = 1.0
                rows.append(r)
                col += K
        return np.array(rows).reshape(len(rows), n)

    def equal_shares(self):
        s = np.full(self.K, 1.0 / self.K)
        return s, s.copy()

    def terms(self, b, f):
        """(1/(b a), 1/(f c)); fixed shares contribute constants."""
        with np.errstate(divide="ignore"):
            return 1.0 / (b * self.a), 1.0 / (f * self.c)

    def capacity(self, b, f) -> np.ndarray:
        gb, gf = self.terms(b, f)
        return 1.0 / (gb + gf)

    def stability_floor(self, eps: float) -> np.ndarray:
        return self.cost.e + eps

    def subset(self, keep) -> "LoopModel":
        """Model restricted to the loops in boolean mask ``keep`` (pools unchanged)."""
        keep = np.asarray(keep, dtype=bool)
        cost = self.cost.subset(keep)
        fixed = lambda v: None if v is None else v[keep]
        return LoopModel(
            a=self.a[keep], c=self.c[keep], cost=cost, bandwidth_pool=self.bandwidth_pool,
            cpu_pool=self.cpu_pool, cap=self.cap[keep], b_fixed=fixed(self.b_fixed), f_fixed=fixed(self.f_fixed),
        )


def objective_value(objective: Objective, cost: LqrCost, d) -> float:
    d = np.asarray(d, dtype=float)
    if objective is Objective.MIN_TOTAL_LQR:
        return float(np.sum(cost.value(np.minimum(d, np.inf))))
    if objective is Objective.MAX_SUM_INFO:
        return float(np.sum(d))
    return float(np.min(d))


def linearized_info(model: LoopModel, b, f, dbar) -> np.ndarray:
    gb, gf = model.terms(b, f)
    return 2.0 * dbar - dbar**2 * (gb + gf)


@dataclass
class RoundResult:
    b: np.ndarray  # shares
    f: np.ndarray
    d: np.ndarray  # information granted by the linearised constraint
    nu_b: float  # multiplier of the bandwidth pool (objective units per share)
    nu_f: float
    inner_steps: int


# ---------------------------------------------------------------------------
# LQR objective, d eliminated


def _lqr_elim_fun(model: LoopModel, dbar, floor):
    K, free_b, free_f = model.K, model.free_b, model.free_f
    n = model.n_share_vars
    cost = model.cost

    def fun(x, order):
        b, f = model.split(x)
        if np.any(b <= 0) or np.any(f <= 0):
            return math.inf if order == 0 else (math.inf, None, None)
        gb, gf = model.terms(b, f)
        d = 2.0 * dbar - dbar**2 * (gb + gf)
        if np.any(d <= floor):
            return math.inf if order == 0 else (math.inf, None, None)
        if order == 0:
            return float(np.sum(cost.value(d)))
        L, L1, L2 = cost.derivatives(d)
        grad = np.zeros(n)
        H = np.zeros((n, n))
        db = dbar**2 * gb / b  # dd/db
        df = dbar**2 * gf / f
        idx = np.arange(K)
        ib = idx if free_b else None
        jf = (idx + (K if free_b else 0)) if free_f else None
        if free_b:
            grad[ib] = L1 * db
            H[ib, ib] = L2 * db**2 - L1 * 2.0 * dbar**2 * gb / b**2
        if free_f:
            grad[jf] = L1 * df
            H[jf, jf] = L2 * df**2 - L1 * 2.0 * dbar**2 * gf / f**2
        if free_b and free_f:
            H[ib, jf] = H[jf, ib] = L2 * db * df
        return float(np.sum(L)), grad, H

    return fun


def solve_lqr_newton(model: LoopModel, dbar, start_b, start_f, floor, tol=1e-12, max_iter=200) -> RoundResult:
    x0 = model.pack(start_b, start_f)
    A = model.equality_matrix()
    res = newton_eq(_lqr_elim_fun(model, dbar, floor), x0, A, tol=tol, max_iter=max_iter)
    b, f = model.split(res.x)
    d = linearized_info(model, b, f, dbar)
    nu = list(res.nu)
    nu_b = nu.pop(0) if model.free_b else math.nan
    nu_f = nu.pop(0) if model.free_f else math.nan
    return RoundResult(b=np.array(b), f=np.array(f), d=d, nu_b=nu_b, nu_f=nu_f, inner_steps=res.iterations)


def lqr_round_gradient(model: LoopModel, b, f, dbar):
    """Gradient of the eliminated round objective w.r.t. (b shares, f shares)."""
    gb, gf = model.terms(b, f)
    d = 2.0 * dbar - dbar**2 * (gb + gf)
    _, L1, _ = model.cost.derivatives(d)
    return L1 * dbar**2 * gb / b, L1 * dbar**2 * gf / f


# ---------------------------------------------------------------------------
# LQR objective by price decomposition


def _per_loop_info(model: LoopModel, dbar, floor, price):
    """Root of L'(d) + price * dbar^2 / (2 dbar - d)^2 on (floor, 2 dbar), per loop."""
    lo = np.array(floor, dtype=float)
    hi = 2.0 * dbar
    cost = model.cost
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, L1, _ = cost.derivatives(mid)
        h = L1 + price * dbar**2 / (2.0 * dbar - mid) ** 2
        neg = h < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.abs(hi)):
            break
    return 0.5 * (lo + hi)


def _shares_at_prices(model: LoopModel, dbar, floor, nu_b, nu_f):
    p = nu_b / model.a
    q = nu_f / model.c
    sp, sq = np.sqrt(p), np.sqrt(q)
    d = _per_loop_info(model, dbar, floor, (sp + sq) ** 2)
    gamma = (2.0 * dbar - d) / dbar**2
    u = gamma * sp / (sp + sq)
    w = gamma - u
    return 1.0 / (model.a * u), 1.0 / (model.c * w), d


def _log_root(fn, x0, label):
    """Root of a decreasing function of log-price, bracket grown geometrically."""
    lo = hi = x0
    flo = fhi = fn(x0)
    step = 2.0
    while flo < 0:
        lo -= step
        step *= 2
        flo = fn(lo)
        if step > 4096:
            raise ConvergenceError(f"{label}: could not bracket the price from below")
    step = 2.0
    while fhi > 0:
        hi += step
        step *= 2
        fhi = fn(hi)
        if step > 4096:
            raise ConvergenceError(f"{label}: could not bracket the price from above")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    return brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_lqr_dual(model: LoopModel, dbar, floor, dual_tol=1e-10, scale_hint=1.0) -> RoundResult:
    if not (model.free_b and model.free_f) or model.has_caps:
        raise ValueError("the price-decomposition route needs both pools free and no caps")
    z0 = math.log(max(scale_hint, 1e-300))

    def cpu_gap(lb, lf):
        _, f, _ = _shares_at_prices(model, dbar, floor, math.exp(lb), math.exp(lf))
        return float(np.sum(f) - 1.0)

    def cpu_price(lb):
        return _log_root(lambda lf: cpu_gap(lb, lf), z0, "cpu price")

    def bw_gap(lb):
        lf = cpu_price(lb)
        b, _, _ = _shares_at_prices(model, dbar, floor, math.exp(lb), math.exp(lf))
        return float(np.sum(b) - 1.0)

    lb = _log_root(bw_gap, z0, "bandwidth price")
    lf = cpu_price(lb)
    nu_b, nu_f = math.exp(lb), math.exp(lf)
    b, f, d = _shares_at_prices(model, dbar, floor, nu_b, nu_f)
    gap = max(abs(b.sum() - 1.0), abs(f.sum() - 1.0))
    if gap > dual_tol:
        raise ConvergenceError(
            f"prices leave a budget gap of {gap:.3g} (bandwidth price {nu_b:.6g}, cpu price {nu_f:.6g})",
            residual=gap,
        )
    # the nested root-finds close the gap to rounding; renormalise the last ulps
    b, f = b / b.sum(), f / f.sum()
    return RoundResult(b=b, f=f, d=linearized_info(model, b, f, dbar), nu_b=nu_b, nu_f=nu_f, inner_steps=0)


# ---------------------------------------------------------------------------
# General objective with explicit d variables and log barriers


def solve_barrier(
    model: LoopModel,
    objective: Objective,
    dbar,
    start_b,
    start_f,
    floor,
    start_d=None,
    gap_tol=1e-10,
    inner_tol=1e-12,
    max_iter=200,
) -> RoundResult:
    K = model.K
    ns = model.n_share_vars
    maxmin = objective is Objective.MAX_MIN_INFO
    n = ns + K + int(maxmin)
    cap = model.cap
    capped = np.flatnonzero(np.isfinite(cap))
    floor = np.asarray(floor, dtype=float)
    free_b, free_f = model.free_b, model.free_f
    idx = np.arange(K)
    ib = idx if free_b else None
    jf = (idx + (K if free_b else 0)) if free_f else None
    jd = ns + idx
    jt = ns + K

    lin0 = linearized_info(model, start_b, start_f, dbar)
    hi = np.minimum(lin0, cap)
    if np.any(hi <= floor):
        bad = np.flatnonzero(hi <= floor)
        raise InfeasibleError(f"start point violates the information floor for loops {bad.tolist()}", loops=bad)
    d0 = floor + 0.9 * (hi - floor) if start_d is None else np.clip(start_d, floor + 1e-3 * (hi - floor), hi - 1e-3 * (hi - floor))
    x0 = np.concatenate([model.pack(start_b, start_f), d0])
    if maxmin:
        x0 = np.append(x0, d0.min() - 0.1 * np.min(hi - floor))

    cost = model.cost
    if objective is Objective.MIN_TOTAL_LQR:
        scale = float(np.sum(cost.value(d0)))
    elif objective is Objective.MAX_SUM_INFO:
        scale = float(np.sum(d0))
    else:
        scale = float(np.min(d0))
    scale = abs(scale) if scale else 1.0

    def f0(x, order):
        if objective is Objective.MIN_TOTAL_LQR:
            d = x[jd]
            if np.any(d <= cost.e):
                return math.inf if order == 0 else (math.inf, None, None)
            if order == 0:
                return float(np.sum(cost.value(d))) / scale
            L, L1, L2 = cost.derivatives(d)
            g = np.zeros(n)
            H = np.zeros((n, n))
            g[jd] = L1 / scale
            H[jd, jd] = L2 / scale
            return float(np.sum(L)) / scale, g, H
        g = np.zeros(n)
        if objective is Objective.MAX_SUM_INFO:
            v = -float(np.sum(x[jd])) / scale
            g[jd] = -1.0 / scale
        else:
            v = -float(x[jt]) / scale
            g[jt] = -1.0 / scale
        return v if order == 0 else (v, g, np.zeros((n, n)))

    n_con = 2 * K + capped.size + (K if maxmin else 0)

    def constraints(x):
        b, f = model.split(x)
        d = x[jd]
        c = np.empty(n_con)
        J = np.zeros((n_con, n))
        if np.any(b <= 0) or np.any(f <= 0):
            c[:] = np.inf
            return c, J, None
        gb, gf = model.terms(b, f)
        c[:K] = d - 2.0 * dbar + dbar**2 * (gb + gf)
        rows = idx
        if free_b:
            J[rows, ib] = -(dbar**2) * gb / b
        if free_f:
            J[rows, jf] = -(dbar**2) * gf / f
        J[rows, jd] = 1.0
        c[K : 2 * K] = floor - d
        J[K + idx, jd] = -1.0
        r = 2 * K
        if capped.size:
            c[r : r + capped.size] = d[capped] - cap[capped]
            J[r + np.arange(capped.size), jd[capped]] = 1.0
            r += capped.size
        if maxmin:
            c[r : r + K] = x[jt] - d
            J[r + idx, jt] = 1.0
            J[r + idx, jd] = -1.0

        def hess(w):
            H = np.zeros((n, n))
            wk = w[:K]
            if free_b:
                H[ib, ib] = wk * 2.0 * dbar**2 * gb / b**2
            if free_f:
                H[jf, jf] = wk * 2.0 * dbar**2 * gf / f**2
            return H

        return c, J, hess

    A = model.equality_matrix(extra=K + int(maxmin))
    res = barrier_solve(
        f0, constraints, x0, A, gap_tol=gap_tol, t0=max(1.0, float(n_con)), inner_tol=inner_tol, max_iter=max_iter
    )
    b, f = model.split(res.x)
    nu = list(res.nu * scale)
    nu_b = nu.pop(0) if free_b else math.nan
    nu_f = nu.pop(0) if free_f else math.nan
    return RoundResult(
        b=np.array(b), f=np.array(f), d=np.array(res.x[jd]), nu_b=nu_b, nu_f=nu_f, inner_steps=res.newton_steps
    )


# ---------------------------------------------------------------------------
# Phase I: shares whose achievable information clears given requirements


def feasible_shares(model: LoopModel, required, margin: float = 1e-6):
    """Shares with 1/g_k > required_k for every loop.

    Tries the equal split first, then maximises min_k capacity_k / required_k
    with a barrier method. Raises InfeasibleError naming the binding loops.
    """
    required = np.asarray(required, dtype=float)
    b, f = model.equal_shares()
    if not model.free_b:
        b = model.b_fixed
    if not model.free_f:
        f = model.f_fixed
    ratio = model.capacity(b, f) / required
    if np.all(ratio > 1.0 + margin):
        return b, f
    K, ns = model.K, model.n_share_vars
    if ns == 0:
        bad = np.flatnonzero(ratio <= 1.0 + margin)
        raise InfeasibleError(f"loops {bad.tolist()} cannot reach the required information", loops=bad)
    n = ns + 1
    idx = np.arange(K)
    ib = idx if model.free_b else None
    jf = (idx + (K if model.free_b else 0)) if model.free_f else None

    def f0(x, order):
        g = np.zeros(n)
        g[-1] = -1.0
        return -x[-1] if order == 0 else (-x[-1], g, np.zeros((n, n)))

    def constraints(x):
        # rows: s - capacity_k / required_k <= 0, then -share <= 0 (keeps the
        # path away from the domain edge when one resource is nearly irrelevant)
        bb, ff = model.split(x)
        J = np.zeros((K + ns, n))
        J[K + np.arange(ns), np.arange(ns)] = -1.0
        if np.any(bb <= 0) or np.any(ff <= 0):
            return np.full(K + ns, np.inf), J, None
        gb, gf = model.terms(bb, ff)
        g = gb + gf
        cap = 1.0 / g
        c = x[-1] - cap / required
        # d cap / d share = (term / share) / g^2
        db = gb / bb / g**2 if model.free_b else None
        df = gf / ff / g**2 if model.free_f else None
        if model.free_b:
            J[idx, ib] = -db / required
        if model.free_f:
            J[idx, jf] = -df / required
        J[:K, -1] = 1.0

        def hess(w):
            # hess(-cap) = hess(g)/g^2 - 2 grad(g) grad(g)^T / g^3, grad(g) = -(term/share)
            H = np.zeros((n, n))
            s = w[:K] / required
            if model.free_b:
                H[ib, ib] = s * (2 * gb / bb**2 / g**2 - 2 * (gb / bb) ** 2 / g**3)
            if model.free_f:
                H[jf, jf] = s * (2 * gf / ff**2 / g**2 - 2 * (gf / ff) ** 2 / g**3)
            if model.free_b and model.free_f:
                H[ib, jf] = H[jf, ib] = s * (-2 * (gb / bb) * (gf / ff) / g**3)
            return H

        return np.concatenate([c, -x[:ns]]), J, hess

    x0 = np.append(model.pack(b, f), ratio.min() - 0.5 * abs(ratio.min()))
    A = model.equality_matrix(extra=1)
    res = barrier_solve(
        f0, constraints, x0, A, gap_tol=1e-6, t0=float(K), label="phase I", stop=lambda x: x[-1] > 1.0 + 2 * margin,
        keep_last=True,
    )
    bb, ff = model.split(res.x)
    ratio = model.capacity(bb, ff) / required
    if np.all(ratio > 1.0 + margin):
        return np.array(bb), np.array(ff)
    best = ratio.min()
    bad = np.flatnonzero(ratio <= best * (1 + 1e-6) + margin)
    raise InfeasibleError(
        f"budgets cannot give loops {bad.tolist()} the required information (best ratio {best:.6g})", loops=bad
    )
