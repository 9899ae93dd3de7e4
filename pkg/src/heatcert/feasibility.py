"""Strict feasibility of the stability LMIs by margin maximization.

The strict system ``Phi_N(w) > 0, Psi_N(w) < 0, alpha > 0, beta > 0`` is
homogeneous in ``w``, so it is decided through::

    maximize t  s.t.  Phi_N(w) >= t I,  -Psi_N(w) >= t I,  alpha >= t,  beta >= t,
                      |w_i| <= R

and declared feasible when the optimal ``t`` exceeds a threshold. The conic
program goes to Clarabel directly (or to any cvxpy solver). Every returned
witness is re-checked with a fresh symmetric eigendecomposition.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import clarabel
import cvxpy as cp
import numpy as np
from scipy import sparse

from .lmi import AffineMatrixExpression, DecisionLayout, LMIProblem, SystemData

logger = logging.getLogger(__name__)


class SolverStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_TROUBLE = "NumericalTrouble"


class EquilibriumError(ValueError):
    """``A + BC`` is singular, so the origin is not the unique equilibrium."""


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 500
    margin_threshold: float = 1e-7
    norm_box: float = 1e6
    verbosity: int = 0
    solver: str = "CLARABEL"
    scale_states: bool = True
    retry: bool = True
    backend: str = "direct"

    def __post_init__(self):
        if self.backend not in ("direct", "cvxpy"):
            raise ValueError(f"backend must be 'direct' or 'cvxpy', got {self.backend!r}")
        if self.backend == "direct" and self.solver.upper() != "CLARABEL":
            raise ValueError("the direct backend drives Clarabel only; use backend 'cvxpy' for other solvers")
        if self.max_iterations < 1 or self.norm_box <= 0 or self.margin_threshold < 0:
            raise ValueError("max_iterations, norm_box and margin_threshold must be positive")

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> SolverOptions:
        d = dict(d or {})
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown solver option(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class Witness:
    """Decision values ``(P, Q, T, alpha, beta)`` together with the achieved margin."""

    P: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    alpha: float
    beta: float
    margin: float
    solver_status: SolverStatus = SolverStatus.OPTIMAL

    @property
    def order(self) -> int:
        return self.T.shape[0] - 1

    def to_vector(self) -> np.ndarray:
        return DecisionLayout(self.P.shape[0], self.order).pack(
            self.P, self.Q, self.T, self.alpha, self.beta
        )

    @classmethod
    def from_vector(cls, layout: DecisionLayout, w, margin: float = float("nan"), status=SolverStatus.OPTIMAL):
        P, Q, T, alpha, beta = layout.unpack(w)
        return cls(P, Q, T, alpha, beta, margin, status)

    def scaled(self, c: float) -> Witness:
        return Witness(c * self.P, c * self.Q, c * self.T, c * self.alpha, c * self.beta, c * self.margin, self.solver_status)

    def to_dict(self) -> dict:
        return {
            "P": self.P.tolist(),
            "Q": self.Q.tolist(),
            "T": self.T.tolist(),
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "margin": float(self.margin),
            "solver_status": self.solver_status.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Witness:
        return cls(
            P=np.atleast_2d(np.asarray(d["P"], dtype=float)),
            Q=np.atleast_2d(np.asarray(d["Q"], dtype=float)),
            T=np.atleast_2d(np.asarray(d["T"], dtype=float)),
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            margin=float(d.get("margin", float("nan"))),
            solver_status=SolverStatus(d.get("solver_status", "Optimal")),
        )


@dataclass
class FeasibilityReport:
    feasible: bool
    witness: Optional[Witness]
    order: int
    wall_time: float
    solver_iterations: int
    status: SolverStatus
    margin: float = float("nan")
    message: str = ""


@dataclass
class ValidationRecord:
    phi_min_eig: float
    psi_max_eig: float
    alpha: float
    beta: float
    passed: bool
    reasons: list[str] = field(default_factory=list)

    @property
    def margin(self) -> float:
        """Smallest of the four validated strict-inequality gaps."""
        return min(self.phi_min_eig, -self.psi_max_eig, self.alpha, self.beta)

    def to_dict(self) -> dict:
        return {
            "phi_min_eig": self.phi_min_eig,
            "psi_max_eig": self.psi_max_eig,
            "alpha": self.alpha,
            "beta": self.beta,
            "margin": self.margin,
            "passed": self.passed,
            "reasons": list(self.reasons),
        }


def check_equilibrium(sys: SystemData, cond_limit: float = 1e12) -> bool:
    """True when ``A + BC`` is nonsingular (condition number below ``cond_limit``)."""
    s = np.linalg.svd(sys.A + sys.B @ sys.C, compute_uv=False)
    if s[0] == 0.0:
        return False
    return bool(s[-1] > 0.0 and s[0] / s[-1] < cond_limit)


def validate_witness(sys: SystemData, N: int, w: Witness, tol: float = 1e-6) -> ValidationRecord:
    """Re-check a witness with ``numpy.linalg.eigvalsh``, independently of the solver.

    The witness passes when ``lambda_min(Phi) > 0``, ``lambda_max(Psi) < 0``,
    ``alpha > 0`` and ``beta > 0``. When ``w.margin`` is finite, each of the four
    gaps must also reach ``w.margin - tol * (1 + max|w|)``, so a stored margin
    that overstates the certificate is caught.
    """
    problem = LMIProblem(sys, N)
    vec = w.to_vector()
    if vec.shape != (problem.layout.total_dim,):
        raise ValueError("witness dimensions do not match the system and order")
    if not np.all(np.isfinite(vec)):
        nan = float("nan")
        return ValidationRecord(nan, nan, float(w.alpha), float(w.beta), False, ["non-finite entries"])
    phi_min = float(np.linalg.eigvalsh(problem.phi.evaluate(vec))[0])
    psi_max = float(np.linalg.eigvalsh(problem.psi.evaluate(vec))[-1])
    gaps = {
        "Phi not positive definite": phi_min,
        "Psi not negative definite": -psi_max,
        "alpha nonpositive": float(w.alpha),
        "beta nonpositive": float(w.beta),
    }
    reasons = [name for name, g in gaps.items() if not g > 0]
    if not reasons and np.isfinite(w.margin):
        floor = w.margin - tol * (1.0 + np.abs(vec).max())
        if min(gaps.values()) < floor:
            reasons.append(f"validated margin {min(gaps.values()):.6g} below recorded {w.margin:.6g}")
    return ValidationRecord(phi_min, psi_max, float(w.alpha), float(w.beta), not reasons, reasons)


def svec(M: np.ndarray) -> np.ndarray:
    """Upper triangle of a symmetric matrix, column-major, off-diagonals times sqrt(2)."""
    d = M.shape[-1]
    rows, cols = np.triu_indices(d)
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return M[..., rows, cols] * scale


def _clarabel_data(phi: AffineMatrixExpression, psi: AffineMatrixExpression, layout: DecisionLayout, R: float):
    """Conic data for ``min -t`` over ``x = (w, t)`` in Clarabel's ``A x + s = b`` form."""
    k = layout.total_dim
    blocks_A, blocks_b, cones = [], [], []
    for expr, sign in ((phi, 1.0), (psi, -1.0)):
        d = expr.dim
        # s = svec(sign * F(w) - t I)
        cols = -sign * svec(expr.coefficients).T
        blocks_A.append(np.hstack([cols, svec(np.eye(d))[:, None]]))
        blocks_b.append(sign * svec(expr.constant))
        cones.append(clarabel.PSDTriangleConeT(d))
    lin = np.zeros((2 + 2 * k, k + 1))
    lin[0, layout.alpha_index], lin[0, k] = -1.0, 1.0
    lin[1, layout.beta_index], lin[1, k] = -1.0, 1.0
    lin[2 : 2 + k, :k] = np.eye(k)
    lin[2 + k :, :k] = -np.eye(k)
    blocks_A.append(lin)
    blocks_b.append(np.r_[0.0, 0.0, np.full(2 * k, R)])
    cones.append(clarabel.NonnegativeConeT(2 + 2 * k))
    A = sparse.csc_matrix(np.vstack(blocks_A))
    A.eliminate_zeros()
    b = np.concatenate(blocks_b)
    q = np.zeros(k + 1)
    q[k] = -1.0
    P = sparse.csc_matrix((k + 1, k + 1))
    return P, q, A, b, cones


def state_scaling(sys: SystemData) -> np.ndarray:
    """Diagonal ``s`` with ``X = diag(s) z`` putting each state's share of ``C X`` at most O(1)."""
    return 1.0 / np.maximum(1.0, np.abs(sys.C[0]))


def _scaled_problem(problem: LMIProblem, s: np.ndarray):
    """Congruence of both LMIs under ``X = diag(s) z``.

    Returns the transformed ``(phi, psi)`` and the matrix mapping the scaled
    decision vector back to the original one. Strict feasibility is unchanged.
    """
    layout = problem.layout
    k, n, N = layout.total_dim, layout.n, layout.N
    si = 1.0 / s
    back = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = 1.0
        P, Q, T, alpha, beta = layout.unpack(e)
        back[:, j] = layout.pack(si[:, None] * P * si[None, :], si[:, None] * Q, T, alpha, beta)

    def congruence(expr: AffineMatrixExpression, diag: np.ndarray) -> AffineMatrixExpression:
        F = np.tensordot(back.T, expr.coefficients, axes=1)
        outer = diag[:, None] * diag[None, :]
        return AffineMatrixExpression(expr.constant * outer, F * outer)

    ones_phi = np.ones(N + 1)
    ones_psi = np.ones(N + 3)
    phi = congruence(problem.phi, np.r_[s, ones_phi])
    psi = congruence(problem.psi, np.r_[s, ones_psi])
    return phi, psi, back


_CONVERGED = {"Solved", "AlmostSolved"}

# Margin of the unit-box scaled program below which a converged solve that
# yields no validated certificate counts as infeasible rather than as trouble.
SCALED_MARGIN_FLOOR = 1e-9


def _solve_clarabel(phi, psi, layout: DecisionLayout, opts: SolverOptions):
    P, q, A, b, cones = _clarabel_data(phi, psi, layout, 1.0)
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbosity > 1
    settings.max_iter = opts.max_iterations
    solution = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    x = np.asarray(solution.x)
    status = str(solution.status)
    gap = abs(solution.obj_val - solution.obj_val_dual)
    converged = status in _CONVERGED or (
        # the optimum t = 0 at w = 0 of an infeasible instance has no attained
        # dual; Clarabel then stops short with a closed gap
        status == "InsufficientProgress" and gap <= 1e-6 * (1.0 + abs(solution.obj_val))
    )
    return x[:-1], float(x[-1]), converged, int(solution.iterations), status


def _solve_cvxpy(phi, psi, layout: DecisionLayout, opts: SolverOptions):
    k = layout.total_dim
    w = cp.Variable(k)
    t = cp.Variable()

    def affine(expr):
        d = expr.dim
        M = cp.reshape(expr.coefficients.reshape(k, d * d).T @ w, (d, d), order="C") + expr.constant
        return 0.5 * (M + M.T)

    constraints = [
        affine(phi) - t * np.eye(phi.dim) >> 0,
        -affine(psi) - t * np.eye(psi.dim) >> 0,
        w[layout.alpha_index] >= t,
        w[layout.beta_index] >= t,
        cp.abs(w) <= 1.0,
    ]
    prob = cp.Problem(cp.Maximize(t), constraints)
    kwargs = {"max_iters": opts.max_iterations} if opts.solver.upper() == "CVXOPT" else {}
    try:
        prob.solve(solver=opts.solver, verbose=opts.verbosity > 1, **kwargs)
    except cp.error.SolverError as exc:
        return None, float("nan"), False, 0, f"solver error: {exc}"
    iterations = int(getattr(prob.solver_stats, "num_iters", 0) or 0)
    if w.value is None:
        return None, float("nan"), False, iterations, prob.status
    converged = prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    return np.asarray(w.value), float(t.value), converged, iterations, prob.status


def _ruiz(coefficients: np.ndarray, iterations: int = 10) -> np.ndarray:
    """Diagonal ``e`` that equilibrates the rows of all ``diag(e) F_i diag(e)``."""
    e = np.ones(coefficients.shape[1])
    G = coefficients
    for _ in range(iterations):
        r = np.abs(G).max(axis=(0, 2))
        r[r == 0] = 1.0
        f = 1.0 / np.sqrt(r)
        e *= f
        G = G * f[None, :, None] * f[None, None, :]
    return e


def _conditioned(phi, psi, back, ruiz: bool, column_scale: bool):
    """Equivalent program under per-LMI congruences and a diagonal change of variables.

    ``E Psi E < 0`` iff ``Psi < 0`` for any positive diagonal ``E``, and each
    LMI gets its own ``E``; variables are rescaled so every coefficient has unit
    largest entry. Returns the new ``(phi, psi, back)``.
    """
    Fphi, Fpsi = phi.coefficients, psi.coefficients
    c_phi, c_psi = phi.constant, psi.constant
    if ruiz:
        e1, e2 = np.outer(*(2 * [_ruiz(Fphi)])), np.outer(*(2 * [_ruiz(Fpsi)]))
        Fphi, c_phi = Fphi * e1, c_phi * e1
        Fpsi, c_psi = Fpsi * e2, c_psi * e2
    c = np.ones(Fphi.shape[0])
    if column_scale:
        big = np.maximum(np.abs(Fphi).max(axis=(1, 2)), np.abs(Fpsi).max(axis=(1, 2)))
        c = 1.0 / np.where(big > 0, big, 1.0)
    Fphi = Fphi * c[:, None, None]
    Fpsi = Fpsi * c[:, None, None]
    phi = AffineMatrixExpression(c_phi, Fphi)
    psi = AffineMatrixExpression(c_psi, Fpsi)
    return phi, psi, back * c[None, :]


# Conditionings tried in turn until one yields a validated certificate.
_LADDER = ((False, False), (True, True), (False, True))


def solve_feasibility(sys: SystemData, N: int, opts: Optional[SolverOptions] = None) -> FeasibilityReport:
    """Search for a strictly feasible witness of order ``N``.

    The witness returned by the solver is always re-validated; a report is
    feasible only when the validated margin exceeds ``opts.margin_threshold``.
    When a solve yields no certificate, equivalent rescaled programs are tried
    before concluding. The verdict is infeasible only if some solve converged
    cleanly to a non-positive margin; otherwise it is numerical trouble.
    Raises :class:`EquilibriumError` when ``A + BC`` is singular.
    """
    opts = opts or SolverOptions()
    if N < 0:
        raise ValueError("order must be non-negative")
    if not check_equilibrium(sys):
        raise EquilibriumError("A + BC is singular; the equilibrium is not unique")

    t0 = time.perf_counter()
    problem = LMIProblem(sys, N)
    s = state_scaling(sys) if opts.scale_states else np.ones(sys.n)
    phi0, psi0, back0 = _scaled_problem(problem, s)
    solve = _solve_clarabel if opts.backend == "direct" else _solve_cvxpy
    ladder = _LADDER if opts.retry else _LADDER[:1]

    iterations = 0
    certified_infeasible = False
    best_t = -np.inf
    notes = []
    witness, record = None, None
    for ruiz, column_scale in ladder:
        phi, psi, back = _conditioned(phi0, psi0, back0, ruiz, column_scale)
        wz, t_opt, converged, its, raw = solve(phi, psi, problem.layout, opts)
        iterations += its
        if wz is None or not np.all(np.isfinite(wz)):
            notes.append(f"{raw}")
            continue
        best_t = max(best_t, t_opt)
        certified_infeasible |= converged and t_opt <= SCALED_MARGIN_FLOOR
        if not np.any(wz):
            notes.append(f"{raw} at w = 0")
            continue
        # homogeneity: any witness may be rescaled onto the face of the norm box
        w = back @ wz
        w *= opts.norm_box / np.abs(w).max()
        cand = Witness.from_vector(problem.layout, w)
        rec = validate_witness(sys, N, cand)
        notes.append(f"{raw}; solver margin {t_opt:.3g}, validated {rec.margin:.3g}")
        if rec.margin > opts.margin_threshold:
            witness, record = cand, rec
            break
    wall = time.perf_counter() - t0

    if witness is not None:
        status = SolverStatus.OPTIMAL
        witness.margin = record.margin
        witness.solver_status = status
    elif certified_infeasible:
        status = SolverStatus.INFEASIBLE
    else:
        status = SolverStatus.NUMERICAL_TROUBLE
    message = " | ".join(notes)
    logger.log(logging.INFO if opts.verbosity else logging.DEBUG, "N=%d %s (%s) in %.2fs", N, status.value, message, wall)
    return FeasibilityReport(
        witness is not None,
        witness,
        N,
        wall,
        iterations,
        status,
        margin=record.margin if witness is not None else float(best_t),
        message=message,
    )
