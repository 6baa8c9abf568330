"""Dense equality-constrained Newton and log-barrier methods.

The problems solved here are tiny (a few variables per loop), so every
KKT system is assembled densely and solved with numpy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConvergenceError

log = logging.getLogger(__name__)

ARMIJO = 0.25
SHRINK = 0.5


@dataclass
class NewtonResult:
    x: np.ndarray
    nu: np.ndarray  # multipliers of A x = h
    value: float
    iterations: int
    decrement: float


def _kkt_step(H, g, A):
    m, p = H.shape[0], A.shape[0]
    K = np.zeros((m + p, m + p))
    K[:m, :m] = H
    K[:m, m:] = A.T
    K[m:, :m] = A
    rhs = np.concatenate([-g, np.zeros(p)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:m], sol[m:]


def newton_eq(
    fun: Callable,
    x0: np.ndarray,
    A: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 200,
    label: str = "subproblem",
) -> NewtonResult:
    """Minimise a convex ``fun`` subject to A x = A x0 from a feasible ``x0``.

    ``fun(x, order)`` returns the value (order 0, ``inf`` outside the domain)
    or ``(value, grad, hess)`` (order 2). Iteration stops once half the
    squared Newton decrement drops below ``tol * max(1, |value|)``; one extra
    full step polishes the iterate when it does not increase the value.
    """
    x = np.array(x0, dtype=float)
    val, g, H = fun(x, 2)
    if not math.isfinite(val):
        raise ConvergenceError(f"{label}: Newton start point is outside the domain")
    nu = np.zeros(A.shape[0])
    lam2 = math.inf
    for it in range(1, max_iter + 1):
        dx, nu = _kkt_step(H, g, A)
        lam2 = float(-g @ dx)
        if lam2 < 0:
            lam2 = abs(lam2)
        converged = lam2 / 2 <= tol * max(1.0, abs(val))
        if converged:
            xn = x + dx
            vn = fun(xn, 0)
            if math.isfinite(vn) and vn <= val:
                x = xn
                val, g, H = fun(x, 2)
                _, nu = _kkt_step(H, g, A)
            return NewtonResult(x, nu, val, it, lam2)
        s = 1.0
        while True:
            xn = x + s * dx
            vn = fun(xn, 0)
            if math.isfinite(vn) and vn <= val - ARMIJO * s * lam2:
                break
            s *= SHRINK
            if s < 1e-30:
                # no further decrease representable in floating point
                return NewtonResult(x, nu, val, it, lam2)
        x = xn
        val, g, H = fun(x, 2)
    raise ConvergenceError(f"{label}: Newton did not converge in {max_iter} iterations", residual=lam2)


@dataclass
class BarrierResult:
    x: np.ndarray
    nu: np.ndarray  # equality multipliers
    lam: np.ndarray  # inequality multipliers
    t: float
    newton_steps: int


def barrier_solve(
    objective: Callable,
    constraints: Callable,
    x0: np.ndarray,
    A: np.ndarray,
    gap_tol: float = 1e-10,
    t0: float = 1.0,
    mu: float = 20.0,
    inner_tol: float = 1e-12,
    max_iter: int = 200,
    label: str = "subproblem",
    stop: Callable | None = None,
    keep_last: bool = False,
) -> BarrierResult:
    """Log-barrier method for min f0(x) s.t. c(x) <= 0, A x = A x0.

    ``objective(x, order)`` behaves like the Newton callback. ``constraints(x)``
    returns ``(c, J, Hs)``: values (m,), Jacobian (m, n) and a function giving
    sum_i w_i * hess c_i for a weight vector w. ``stop(x)`` may end the
    path early after any centering step (used by phase I). With ``keep_last``
    a centering step that fails after the first one ends the path at the
    previous centre instead of raising.
    """
    x = np.array(x0, dtype=float)
    c, _, _ = constraints(x)
    if np.any(c >= 0):
        raise ConvergenceError(f"{label}: barrier start point is not strictly feasible")
    m = c.size
    t = t0
    steps = 0

    def combined(x, order, t=None):
        c, J, Hs = constraints(x)
        if np.any(c >= 0) or not np.all(np.isfinite(c)):
            return math.inf if order == 0 else (math.inf, None, None)
        out = objective(x, order)
        if order == 0:
            return t * out - np.log(-c).sum() if math.isfinite(out) else math.inf
        v, g, H = out
        if not math.isfinite(v):
            return math.inf, None, None
        w = 1.0 / (-c)
        val = t * v - np.log(-c).sum()
        grad = t * g + J.T @ w
        hess = t * H + (J.T * w**2) @ J + Hs(w)
        return val, grad, hess

    res = None
    while True:
        try:
            res = newton_eq(lambda x, o: combined(x, o, t), x, A, tol=inner_tol, max_iter=max_iter, label=label)
        except ConvergenceError:
            if not (keep_last and res is not None):
                raise
            t /= mu
            log.debug("%s: centering stalled at t=%g; keeping the previous centre", label, t * mu)
            break
        x = res.x
        steps += res.iterations
        if m / t < gap_tol or (stop is not None and stop(x)):
            break
        t *= mu
    c, _, _ = constraints(x)
    return BarrierResult(x=x, nu=res.nu / t, lam=1.0 / (t * (-c)), t=t, newton_steps=steps)
