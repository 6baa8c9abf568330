"""Control-theoretic constants of a loop and the LQR cost bound.

The cost of a loop that receives ``d`` bits of closed-loop information per
cycle is bounded below by

    n * N(v) * |det M|^(1/n) / (2^((2/n) (d - log2|det A|)) - 1) + tr(Sigma_v S)

with ``S`` and ``M`` the fixed point of the coupled Riccati recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InfeasibleError, ScenarioError

RICCATI_TOL = 1e-10
RICCATI_MAX_ITER = 10_000


def _square(name, m, n=None):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ScenarioError(f"{name} must be a square matrix, got shape {m.shape}")
    if n is not None and m.shape[0] != n:
        raise ScenarioError(f"{name} must be {n}x{n}, got {m.shape[0]}x{m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ScenarioError(f"{name} has non-finite entries")
    return m


def _check_psd(name, m, tol=1e-10):
    if not np.allclose(m, m.T, atol=tol * max(1.0, np.abs(m).max())):
        raise ScenarioError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    if w.size and w.min() < -tol * max(1.0, np.abs(w).max()):
        raise ScenarioError(f"{name} must be positive semidefinite (min eigenvalue {w.min():.3g})")


@dataclass(frozen=True, eq=False)
class ControlMatrices:
    """Plant and weighting matrices of one loop (Gaussian process noise)."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma_v: np.ndarray
    noise_model: str = "gaussian"

    def __post_init__(self):
        A = _square("A", self.A)
        n = A.shape[0]
        mats = {"A": A}
        for name in ("B", "Q", "R", "Sigma_v"):
            mats[name] = _square(name, getattr(self, name), n)
        for name in ("Q", "R", "Sigma_v"):
            _check_psd(name, mats[name])
        if self.noise_model != "gaussian":
            raise ScenarioError(f"unsupported noise model {self.noise_model!r}")
        sign, logdet = np.linalg.slogdet(A)
        if sign == 0 or not np.isfinite(logdet):
            raise ScenarioError("log2|det A| must be finite (A is singular)")
        for name, m in mats.items():
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ControlMatrices):
            return NotImplemented
        return self.noise_model == other.noise_model and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("A", "B", "Q", "R", "Sigma_v")
        )

    @classmethod
    def diagonal(cls, n: int, log2_det_A: float, noise_var: float = 1.0, r: float = 0.0) -> "ControlMatrices":
        """A = 2^(e/n) I, B = Q = I, R = r I, Sigma_v = noise_var I."""
        eye = np.eye(n)
        return cls(A=2.0 ** (log2_det_A / n) * eye, B=eye, Q=eye, R=r * eye, Sigma_v=noise_var * eye)


@dataclass(frozen=True)
class ControlSummary:
    """Scalar constants that fully determine the cost bound of a loop."""

    n: int
    log2_det_A: float
    entropy_power: float
    det_M_nth_root: float
    trace_sigma_S: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ScenarioError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("log2_det_A", "entropy_power", "det_M_nth_root", "trace_sigma_S"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ScenarioError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.entropy_power < 0:
            raise ScenarioError("entropy_power must be >= 0")
        if self.det_M_nth_root < 0:
            raise ScenarioError("det_M_nth_root must be >= 0")
        if self.trace_sigma_S < 0:
            raise ScenarioError("trace_sigma_S must be >= 0")

    @property
    def coefficient(self) -> float:
        """n * N(v) * |det M|^(1/n), the numerator of the bound."""
        return self.n * self.entropy_power * self.det_M_nth_root

    @property
    def control_parameter(self) -> float:
        """log2(N(v) |det M|^(1/n)) + (2/n) log2|det A|, used by the inter-loop closed form."""
        return math.log2(self.entropy_power * self.det_M_nth_root) + 2.0 * self.log2_det_A / self.n


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    S: np.ndarray
    M: np.ndarray
    residual: float
    iterations: int = field(default=0)


def _gain_term(S, B, R):
    # M = S B (R + B^T S B)^-1 B^T S
    inner = R + B.T @ S @ B
    try:
        X = np.linalg.solve(inner, B.T @ S)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(X)):
        return None
    M = S @ B @ X
    return 0.5 * (M + M.T)


def riccati_defect(mats: ControlMatrices, S, M) -> float:
    """Max-norm of the two Riccati defect matrices."""
    A, B, Q, R = mats.A, mats.B, mats.Q, mats.R
    d1 = S - Q - A.T @ (S - M) @ A
    inner = R + B.T @ S @ B
    d2 = M - S @ B @ np.linalg.solve(inner, B.T @ S)
    return float(max(np.abs(d1).max(), np.abs(d2).max()))


def solve_riccati(mats: ControlMatrices, tol: float = RICCATI_TOL, max_iter: int = RICCATI_MAX_ITER) -> RiccatiSolution:
    """Fixed-point iteration S <- Q + A^T (S - M(S)) A started at S = Q.

    Raises ConvergenceError if the defect does not drop below ``tol`` within
    ``max_iter`` sweeps (unstabilizable pairs end up here) or if the inner
    matrix R + B^T S B becomes singular.
    """
    A, B, Q, R = mats.A, mats.B, mats.Q, mats.R
    S = Q.copy()
    residual = math.inf
    for it in range(max_iter + 1):
        M = _gain_term(S, B, R)
        if M is None:
            raise ConvergenceError(f"R + B^T S B is singular at Riccati iterate {it}", residual=residual)
        residual = riccati_defect(mats, S, M)
        if residual <= tol:
            return RiccatiSolution(S=S, M=M, residual=residual, iterations=it)
        if not np.isfinite(residual):
            break
        S = Q + A.T @ (S - M) @ A
        S = 0.5 * (S + S.T)
    raise ConvergenceError(f"Riccati iteration did not converge in {max_iter} iterations", residual=residual)


def entropy_power(cov) -> float:
    """Entropy power of a zero-mean Gaussian vector: det(cov)^(1/n)."""
    cov = _square("covariance", cov)
    _check_psd("covariance", cov)
    n = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        return 0.0
    return float(np.exp(logdet / n))


def summarize(mats: ControlMatrices, tol: float = RICCATI_TOL, max_iter: int = RICCATI_MAX_ITER) -> ControlSummary:
    sol = solve_riccati(mats, tol=tol, max_iter=max_iter)
    n = mats.n
    _, logdet_a = np.linalg.slogdet(mats.A)
    sign_m, logdet_m = np.linalg.slogdet(sol.M)
    det_m_root = float(np.exp(logdet_m / n)) if sign_m != 0 else 0.0
    return ControlSummary(
        n=n,
        log2_det_A=float(logdet_a / math.log(2.0)),
        entropy_power=entropy_power(mats.Sigma_v),
        det_M_nth_root=det_m_root,
        trace_sigma_S=float(np.trace(mats.Sigma_v @ sol.S)),
    )


def lqr_lower_bound(summary: ControlSummary, d_sc3: float) -> float:
    """Cost bound for ``d_sc3`` bits per cycle; ``math.inf`` when unstable."""
    if d_sc3 < 0:
        raise ValueError("d_sc3 must be >= 0")
    if d_sc3 <= summary.log2_det_A:
        return math.inf
    if math.isinf(d_sc3):
        return summary.trace_sigma_S
    x = (2.0 / summary.n) * (d_sc3 - summary.log2_det_A) * math.log(2.0)
    if x > 700.0:  # first term underflows relative to any representable trace
        return summary.coefficient * math.exp(-x) + summary.trace_sigma_S
    return summary.coefficient / math.expm1(x) + summary.trace_sigma_S


def info_for_cost(summary: ControlSummary, target_cost: float) -> float:
    """Smallest closed-loop information whose cost bound equals ``target_cost``."""
    excess = target_cost - summary.trace_sigma_S
    if not excess > 0:
        raise InfeasibleError(
            f"target cost {target_cost:g} is not above tr(Sigma_v S) = {summary.trace_sigma_S:g}"
        )
    return 0.5 * summary.n * math.log2(summary.coefficient / excess + 1.0) + summary.log2_det_A


class LqrCost:
    """Vectorised bound and its first two derivatives in ``d`` for many loops."""

    def __init__(self, summaries):
        self.n = np.array([s.n for s in summaries], dtype=float)
        self.e = np.array([s.log2_det_A for s in summaries], dtype=float)
        self.coef = np.array([s.coefficient for s in summaries], dtype=float)
        self.tr = np.array([s.trace_sigma_S for s in summaries], dtype=float)
        self.k = 2.0 * math.log(2.0) / self.n

    def subset(self, keep) -> "LqrCost":
        out = LqrCost.__new__(LqrCost)
        for name in ("n", "e", "coef", "tr"):
            setattr(out, name, getattr(self, name)[keep])
        out.k = 2.0 * math.log(2.0) / out.n
        return out

    def _x(self, d):
        return self.k * (np.asarray(d, dtype=float) - self.e)

    def value(self, d):
        x = self._x(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.coef / np.expm1(x) + self.tr
        return np.where(x > 0, v, np.inf)

    def derivatives(self, d):
        """(L, L', L'') at ``d``; only meaningful where d > log2|det A|."""
        x = self._x(d)
        em = np.expm1(x)
        en = -np.expm1(-x)  # 1 - e^-x
        v = self.coef / em + self.tr
        d1 = -self.coef * self.k / (em * en)
        d2 = self.coef * self.k**2 * (2.0 - en) / (en**2 * em)
        return v, d1, d2
