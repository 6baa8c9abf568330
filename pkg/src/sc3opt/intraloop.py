"""Closed-form resource split inside a single loop.

Within one cycle the uplink and computing form one "pipe" and the downlink
another; at the optimum both carry the same amount of task information
(rho * D_ul == D_dl), the cycle time is used completely and the bandwidth
split is a square-root rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .control import lqr_lower_bound
from .errors import InfeasibleError
from .model import Budget, LoopSpec

DOMINANCE_FACTOR = 100.0


@dataclass(frozen=True)
class IntraAllocation:
    b_ul: float
    b_dl: float
    t_ul: float
    t_dl: float
    t_comp: float
    f: float
    d_ul: float
    d_dl: float
    d_sc3: float

    @property
    def bandwidth(self) -> float:
        return self.b_ul + self.b_dl

    @property
    def busy_time(self) -> float:
        return self.t_ul + self.t_comp + self.t_dl

    @classmethod
    def empty(cls, f: float = 0.0) -> "IntraAllocation":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, f, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class LoopRates:
    r_comm: float  # closed-loop SE, bits/s/Hz
    r_comp: float  # computing efficiency, bits/cycle

    def __post_init__(self):
        if not (self.r_comm > 0 and self.r_comp > 0):
            raise ValueError("loop rates must be positive")


def optimal_bandwidth_split(rho: float, r_ul: float, r_dl: float, b_total: float) -> tuple[float, float]:
    su, sd = math.sqrt(rho * r_ul), math.sqrt(r_dl)
    b_ul = sd * b_total / (su + sd)
    return b_ul, b_total - b_ul


def optimal_time_split(rho, alpha, r_ul, r_dl, b_ul, b_dl, f, T) -> tuple[float, float, float]:
    """Returns (t_ul, t_comp, t_dl) balancing rho * D_ul against D_dl."""
    ul = 1.0 / (rho * b_ul * r_ul)
    comp = alpha / (rho * f)
    dl = 1.0 / (b_dl * r_dl)
    den = ul + comp + dl
    t_ul = T * ul / den
    t_dl = T * dl / den
    return t_ul, T - t_ul - t_dl, t_dl


def loop_rates(rho: float, alpha: float, r_ul: float, r_dl: float) -> LoopRates:
    r_comm = rho * r_ul * r_dl / (math.sqrt(rho * r_ul) + math.sqrt(r_dl)) ** 2
    return LoopRates(r_comm=r_comm, r_comp=rho / alpha)


def spec_rates(spec: LoopSpec) -> LoopRates:
    return loop_rates(spec.rho, spec.alpha, spec.r_ul, spec.r_dl)


def closed_loop_info(rates: LoopRates, b: float, f: float, T: float) -> float:
    """Bits per cycle delivered with bandwidth ``b`` and CPU ``f`` (either may be inf)."""
    if b <= 0 or f <= 0 or T <= 0:
        return 0.0
    return T / (1.0 / (b * rates.r_comm) + 1.0 / (f * rates.r_comp))


def weak_link_se(rho: float, r_ul: float, r_dl: float, dominance: float = DOMINANCE_FACTOR) -> float:
    """Reporting approximation of the closed-loop SE: the weaker task-level link,
    or a quarter of it when both links are comparable."""
    up, down = rho * r_ul, r_dl
    if max(up, down) >= dominance * min(up, down):
        return min(up, down)
    return 0.25 * up


def bandwidth_for_cpu(b: float, f: float, rates: LoopRates, delta_f: float) -> float:
    """Extra bandwidth that keeps the closed-loop information unchanged when
    ``delta_f`` of CPU frequency is given up.

    Raises InfeasibleError when no finite amount of bandwidth compensates.
    """
    if not 0 < delta_f < f:
        raise ValueError("delta_f must lie in (0, f)")
    ratio = rates.r_comp / rates.r_comm
    den = ratio * (f * f / (delta_f * b) - f / b) - 1.0
    if den <= 0:
        raise InfeasibleError(
            f"giving up {delta_f:g} cycles/s cannot be compensated by bandwidth at B={b:g}, f={f:g}"
        )
    return b / den


def allocate_loop(spec: LoopSpec, b: float, f: float, T: float | None = None) -> IntraAllocation:
    """Optimal intra-loop split for a loop holding bandwidth ``b`` and CPU ``f``."""
    T = spec.cycle_time_s if T is None else T
    if b <= 0 or f <= 0 or T <= 0:
        return IntraAllocation.empty(f=max(f, 0.0))
    b_ul, b_dl = optimal_bandwidth_split(spec.rho, spec.r_ul, spec.r_dl, b)
    t_ul, t_comp, t_dl = optimal_time_split(spec.rho, spec.alpha, spec.r_ul, spec.r_dl, b_ul, b_dl, f, T)
    d_ul = b_ul * t_ul * spec.r_ul
    d_dl = b_dl * t_dl * spec.r_dl
    return IntraAllocation(
        b_ul=b_ul,
        b_dl=b_dl,
        t_ul=t_ul,
        t_dl=t_dl,
        t_comp=t_comp,
        f=f,
        d_ul=d_ul,
        d_dl=d_dl,
        d_sc3=min(spec.rho * d_ul, d_dl),
    )


def solve_single_loop(spec: LoopSpec, budget: Budget) -> tuple[IntraAllocation, float]:
    """Whole budget to one loop: f = f_max, square-root bandwidth split, balanced times."""
    alloc = allocate_loop(spec, budget.total_bandwidth_hz, budget.total_cpu_hz)
    return alloc, lqr_lower_bound(spec.summary, alloc.d_sc3)
