from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from ..errors import ScenarioError
from ..intraloop import IntraAllocation


class Objective(str, enum.Enum):
    MIN_TOTAL_LQR = "min-total-lqr"
    MAX_SUM_INFO = "max-sum-info"
    MAX_MIN_INFO = "max-min-info"


@dataclass(frozen=True)
class SolverConfig:
    """Solver knobs plus the fixed parameters of the comparison schemes."""

    scheme: str = "proposed"
    delta: float = 1e-3  # relative change of the objective that ends the outer loop
    max_outer_iters: int = 100
    dual_tol: float = 1e-10
    inner_tol: float = 1e-12
    max_inner_iters: int = 200
    d_init_offset: float = 1.0
    stability_eps: float = 1e-6
    method: str = "newton"  # "newton" (primal KKT) or "dual" (price decomposition)
    expansion: str = "previous"  # re-linearise at the previous D ("previous") or at its achievable value
    lqr_requirement: float = 5.0  # per-loop cost target of the information-oriented schemes
    equal_t_dl_fraction: float = 1.0 / 3.0
    ul_comp_t_dl_s: float = 1e-3
    dl_comp_t_ul_s: float = 4e-3
    fixed_link_fraction: float = 0.5  # a frozen link gets fraction * B_max / K
    dominance_factor: float = 100.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and not v > 0:
                raise ScenarioError(f"solver.{f.name} must be positive, got {v}")
        if self.method not in ("newton", "dual"):
            raise ScenarioError(f"solver.method must be 'newton' or 'dual', got {self.method!r}")
        if self.expansion not in ("previous", "achievable"):
            raise ScenarioError(f"solver.expansion must be 'previous' or 'achievable', got {self.expansion!r}")

    def replace(self, **kw) -> "SolverConfig":
        return SolverConfig(**{**asdict(self), **kw})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SystemSolution:
    scheme_name: str
    bandwidth: np.ndarray  # b_k, Hz
    cpu: np.ndarray  # f_k, cycles/s
    info: np.ndarray  # d_k, bits per cycle
    cost: np.ndarray  # l_k, math.inf when unstable
    allocations: list[IntraAllocation]
    objective: Objective = Objective.MIN_TOTAL_LQR
    iterations: int = 0
    objective_history: list[float] = field(default_factory=list)
    dual_bandwidth: float = math.nan  # price per Hz
    dual_cpu: float = math.nan  # price per cycle/s
    kkt_residual: float = math.nan
    linearization_point: Optional[np.ndarray] = None

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.cost))

    @property
    def num_loops(self) -> int:
        return len(self.allocations)

    def bandwidth_shares(self) -> np.ndarray:
        return self.bandwidth / self.bandwidth.sum()
