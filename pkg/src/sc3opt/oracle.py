"""Brute-force checks: exhaustive grids over allocations and a random midpoint-convexity probe."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .control import LqrCost
from .errors import ScenarioError
from .intraloop import IntraAllocation, spec_rates
from .model import Budget, LoopSpec

MIN_POINTS = 16
MAX_GRID_LOOPS = 3
CHUNK = 1 << 20


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 64
    axes: tuple = ()  # ((name, lower, upper), ...); empty means the unit cube

    def __post_init__(self):
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < MIN_POINTS:
            raise ScenarioError(f"points_per_axis must be an integer >= {MIN_POINTS}, got {self.points_per_axis}")
        for name, lo, hi in self.axes:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ScenarioError(f"grid axis {name!r}: need finite bounds with lower < upper")

    def axis(self, name: str, lower: float = 0.0, upper: float = 1.0) -> np.ndarray:
        for n, lo, hi in self.axes:
            if n == name:
                lower, upper = lo, hi
        return np.linspace(lower, upper, self.points_per_axis)


@dataclass
class IntraGridResult:
    allocation: IntraAllocation
    d_sc3: float
    resolution: float  # bound on how far the true optimum can lie above the best grid value
    evaluated: int


def _intra_values(spec: LoopSpec, budget: Budget, x, u, v):
    B, F, T = budget.total_bandwidth_hz, budget.total_cpu_hz, spec.cycle_time_s
    up = spec.rho * x * B * u * T * spec.r_ul
    down = (1.0 - x) * B * v * T * spec.r_dl
    slack = 1.0 - u - v
    comp = spec.rho * F * slack * T / spec.alpha
    d = np.minimum(np.minimum(up, down), comp)
    return np.where(slack >= 0, d, -np.inf)


def grid_intraloop(spec: LoopSpec, budget: Budget, grid: Optional[GridSpec] = None) -> IntraGridResult:
    """Best closed-loop information over (UL bandwidth fraction, UL time fraction, DL time fraction).

    The CPU runs at the full budget; computing processes at most f t_comp / alpha
    raw bits, and the remaining cycle time after both transmissions is the
    computing time (points with t_ul + t_dl > T are discarded).
    """
    grid = grid or GridSpec()
    x = grid.axis("b_ul")
    u = grid.axis("t_ul")
    v = grid.axis("t_dl")
    X, U, V = np.meshgrid(x, u, v, indexing="ij")
    D = _intra_values(spec, budget, X, U, V)
    flat = int(np.argmax(D))
    i, j, k = np.unravel_index(flat, D.shape)
    # slope estimate from the neighbours of the best point, times the cell diagonal
    best = np.array([i, j, k])
    steps = []
    for ax in range(3):
        worst = 0.0
        for off in (-1, 1):
            nb = best.copy()
            nb[ax] += off
            if 0 <= nb[ax] < D.shape[ax] and np.isfinite(D[tuple(nb)]):
                worst = max(worst, abs(float(D[tuple(nb)] - D[i, j, k])))
        steps.append(worst)
    resolution = float(np.linalg.norm(steps))

    B, F, T = budget.total_bandwidth_hz, budget.total_cpu_hz, spec.cycle_time_s
    b_ul, t_ul, t_dl = x[i] * B, u[j] * T, v[k] * T
    d_ul = b_ul * t_ul * spec.r_ul
    d_dl = (B - b_ul) * t_dl * spec.r_dl
    alloc = IntraAllocation(
        b_ul=b_ul, b_dl=B - b_ul, t_ul=t_ul, t_dl=t_dl, t_comp=T - t_ul - t_dl, f=F,
        d_ul=d_ul, d_dl=d_dl, d_sc3=float(D[i, j, k]),
    )
    return IntraGridResult(allocation=alloc, d_sc3=float(D[i, j, k]), resolution=resolution, evaluated=D.size)


@dataclass
class InterGridResult:
    bandwidth: np.ndarray  # Hz
    cpu: np.ndarray  # cycles/s
    total_cost: float
    resolution: float
    evaluated: int


def _simplex_points(K: int, N: int) -> np.ndarray:
    """All share vectors on the simplex with coordinates in {0, 1/(N-1), ..., 1}."""
    m = N - 1
    if K == 1:
        return np.ones((1, 1))
    grids = np.meshgrid(*([np.arange(N)] * (K - 1)), indexing="ij")
    head = np.stack([g.ravel() for g in grids], axis=1)
    head = head[head.sum(axis=1) <= m]
    last = m - head.sum(axis=1, keepdims=True)
    return np.hstack([head, last]) / m


def _inter_cost(loops, budget, cost, bs, fs):
    T = np.array([s.cycle_time_s for s in loops])
    rates = [spec_rates(s) for s in loops]
    rc = np.array([r.r_comm for r in rates])
    rp = np.array([r.r_comp for r in rates])
    with np.errstate(divide="ignore"):
        g = 1.0 / (bs * budget.total_bandwidth_hz * rc) + 1.0 / (fs * budget.total_cpu_hz * rp)
        d = T / g
    return cost.value(d).sum(axis=-1)


def grid_interloop(loops: Sequence[LoopSpec], budget: Budget, grid: Optional[GridSpec] = None) -> InterGridResult:
    """Exhaustive search over bandwidth and CPU shares on the two simplices (K <= 3)."""
    grid = grid or GridSpec()
    K = len(loops)
    if K > MAX_GRID_LOOPS:
        raise ScenarioError(
            f"grid search over {K} loops is too large; use at most {MAX_GRID_LOOPS} loops (e.g. a subset of the scenario)"
        )
    N = grid.points_per_axis
    P = _simplex_points(K, N)
    cost = LqrCost([s.summary for s in loops])
    best, best_i, best_j = math.inf, 0, 0
    for start in range(0, P.shape[0], max(1, CHUNK // P.shape[0])):
        bs = P[start : start + max(1, CHUNK // P.shape[0])]
        vals = _inter_cost(loops, budget, cost, bs[:, None, :], P[None, :, :])
        flat = int(np.argmin(vals))
        i, j = np.unravel_index(flat, vals.shape)
        if vals[i, j] < best:
            best, best_i, best_j = float(vals[i, j]), start + i, j
    b, f = P[best_i], P[best_j]
    # local resolution: neighbouring grid moves (one share step from loop p to loop q in either pool)
    h = 1.0 / (N - 1)
    worst = 0.0
    if K > 1 and math.isfinite(best):
        for p in range(K):
            for q in range(K):
                if p == q:
                    continue
                for which in (0, 1):
                    bb, ff = b.copy(), f.copy()
                    tgt = bb if which == 0 else ff
                    if tgt[q] < h - 1e-15:
                        continue
                    tgt[p] += h
                    tgt[q] -= h
                    v = float(_inter_cost(loops, budget, cost, bb, ff))
                    if math.isfinite(v):
                        worst = max(worst, abs(v - best))
    return InterGridResult(
        bandwidth=b * budget.total_bandwidth_hz,
        cpu=f * budget.total_cpu_hz,
        total_cost=best,
        resolution=worst * math.sqrt(2 * max(1, K - 1)),  # local slope x cell diagonal
        evaluated=P.shape[0] ** 2,
    )


@dataclass
class ConvexityReport:
    samples: int
    violations: int
    worst_gap: float  # largest f(mid) - (f(x) + f(y)) / 2 seen, relative to the scale of the values

    @property
    def convex(self) -> bool:
        return self.violations == 0


def convexity_probe(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Sequence[tuple[float, float]],
    samples: int = 100_000,
    seed: int = 0,
    rtol: float = 1e-10,
) -> ConvexityReport:
    """Count midpoint-convexity violations of a vectorised ``f`` over a box.

    ``f`` maps an (m, dim) array to m values. A sample pair (x, y) violates
    convexity when f((x+y)/2) exceeds the chord midpoint by more than
    ``rtol`` times the magnitude of the values involved.
    """
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in domain], dtype=float)
    hi = np.array([b for _, b in domain], dtype=float)
    x = lo + (hi - lo) * rng.random((samples, lo.size))
    y = lo + (hi - lo) * rng.random((samples, lo.size))
    fx, fy, fm = (np.asarray(f(z), dtype=float) for z in (x, y, 0.5 * (x + y)))
    chord = 0.5 * (fx + fy)
    scale = np.maximum.reduce([np.abs(fx), np.abs(fy), np.abs(fm), np.ones_like(fm)])
    with np.errstate(invalid="ignore"):
        gap = (fm - chord) / scale
    ok = np.isfinite(gap)
    bad = ok & (gap > rtol)
    return ConvexityReport(samples=int(ok.sum()), violations=int(bad.sum()), worst_gap=float(np.max(gap[ok])) if ok.any() else 0.0)
