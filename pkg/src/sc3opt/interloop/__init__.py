"""Resource allocation across several loops."""

from .baselines import SCHEMES, baseline, scheme_model, solve_scheme
from .kkt import closed_form_kkt_residual, kkt_residual
from .sca import info_floors, proposed_model, run_sca, sca_optimize, solve_subproblem
from .solution import Objective, SolverConfig, SystemSolution
from .theorem2 import closed_form_bandwidth, closed_form_terms, control_parameter, theorem2_allocation

__all__ = [
    "SCHEMES",
    "Objective",
    "SolverConfig",
    "SystemSolution",
    "baseline",
    "closed_form_bandwidth",
    "closed_form_kkt_residual",
    "closed_form_terms",
    "control_parameter",
    "info_floors",
    "kkt_residual",
    "proposed_model",
    "run_sca",
    "sca_optimize",
    "scheme_model",
    "solve_scheme",
    "solve_subproblem",
    "theorem2_allocation",
]
