"""Closed-form bandwidth allocation when computing is not the bottleneck.

With ample CPU and T r_comm B well above the intrinsic entropy, the bound
behaves like n 2^(e_k) 2^(-B_k / w_k) with w_k = n / (2 T r_comm). Setting
each marginal cost equal to a common price lambda gives the water level

    B_k = w_k (z_k - log2 lambda),  z_k = log2(2 ln 2) + e_k + log2(T r_comm)

and lambda follows from sum_k B_k = B_max.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ..intraloop import spec_rates
from ..model import Budget, LoopSpec

log = logging.getLogger(__name__)


def control_parameter(loop: LoopSpec) -> float:
    return loop.summary.control_parameter


def closed_form_terms(loops: Sequence[LoopSpec]) -> tuple[np.ndarray, np.ndarray]:
    """(w_k, z_k) of the water level; w in Hz per bit of exponent."""
    tr = np.array([s.cycle_time_s * spec_rates(s).r_comm for s in loops])
    n = np.array([s.summary.n for s in loops], dtype=float)
    e = np.array([control_parameter(s) for s in loops])
    return n / (2.0 * tr), math.log2(2.0 * math.log(2.0)) + e + np.log2(tr)


def _water_level(w, z, b_max, active):
    return (np.sum(w[active] * z[active]) - b_max) / np.sum(w[active])


def closed_form_bandwidth(loops: Sequence[LoopSpec], b_max: float, method: str = "direct") -> np.ndarray:
    """Per-loop bandwidth (Hz) from the water level.

    ``method="direct"`` evaluates the explicit level and, if some loops come
    out negative, drops them and re-solves on the rest. ``method="dual"``
    finds the price by a root search on the budget map, which gives the same
    clamped answer.
    """
    w, z = closed_form_terms(loops)
    if method == "dual":
        def gap(t):
            return float(np.sum(np.maximum(w * (z - t), 0.0)) - b_max)

        lo = float(np.min(z) - b_max / np.min(w)) - 1.0
        hi = float(np.max(z))
        t = brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        out = np.maximum(w * (z - t), 0.0)
        if np.any(out == 0):
            log.warning("closed-form bandwidth is zero for loops %s", np.flatnonzero(out == 0).tolist())
        # remove the root-finder's residual so the budget is met to rounding
        return out * (b_max / out.sum())
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    active = np.ones(w.size, dtype=bool)
    while True:
        t = _water_level(w, z, b_max, active)
        out = np.where(active, w * (z - t), 0.0)
        neg = active & (out < 0)
        if not neg.any():
            break
        log.warning("closed-form bandwidth negative for loops %s; clamping to zero", np.flatnonzero(neg).tolist())
        active &= ~neg
    return out


def theorem2_allocation(loops: Sequence[LoopSpec], budget: Budget, method: str = "direct"):
    """Closed-form bandwidth with the CPU split equally."""
    b = closed_form_bandwidth(loops, budget.total_bandwidth_hz, method=method)
    f = np.full(len(loops), budget.total_cpu_hz / len(loops))
    return b, f
