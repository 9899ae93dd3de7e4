"""Stability LMIs for an ODE coupled to a heat equation through its boundary.

The coupled system is::

    X'(t)     = A X(t) + B u(1, t)
    u_t(x, t) = gamma * u_xx(x, t),   x in (0, 1)
    u(0, t)   = C X(t),   u_x(1, t) = 0

A quadratic Lyapunov functional on ``(X, U_N)`` (``U_N`` the Legendre moments
of ``u`` up to order ``N``), augmented by ``alpha ||u||^2 + beta ||u_x||^2``,
yields two LMIs in ``w = (P, Q, T, alpha, beta)``::

    Phi_N(w) = [[P, Q], [Q^T, T]]                                   > 0
    Psi_N(w) = Psi~_N(w) - alpha*gamma*Psi_2 - 2*beta*gamma*Psi_3   < 0

``Psi`` acts on the augmented state ``xi = [X; u(1); u_x(0); U_N]``.
Both are linear in ``w``; they are stored as :class:`AffineMatrixExpression`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .legendre import LegendreOperators, build_operators


def he(M: np.ndarray) -> np.ndarray:
    return M + M.T


@dataclass(frozen=True)
class SystemData:
    """The data ``(A, B, C, gamma)`` of the coupled system."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    gamma: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, -1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape[0]}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape[1]}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self) -> int:
        return self.A.shape[0]


def paper_example(K: float, gamma: float) -> SystemData:
    """Four-state benchmark with gain ``K`` (the delayed-system example with ``A_d = BC``)."""
    A = np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-10.0 - K, 10.0, 0.0, 0.0],
            [5.0, -15.0, 0.0, -0.25],
        ]
    )
    B = np.array([[0.0], [0.0], [1.0], [0.0]])
    C = np.array([[K, 0.0, 0.0, 0.0]])
    return SystemData(A, B, C, gamma)


@dataclass(frozen=True)
class DecisionLayout:
    """Packing of ``(P, Q, T, alpha, beta)`` into a flat vector.

    ``P`` and ``T`` are stored by their upper triangles (row-major), ``Q`` in
    full (row-major), then ``alpha`` and ``beta``.
    """

    n: int
    N: int

    @property
    def p_size(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def q_size(self) -> int:
        return self.n * (self.N + 1)

    @property
    def t_size(self) -> int:
        return (self.N + 1) * (self.N + 2) // 2

    @property
    def p_offset(self) -> int:
        return 0

    @property
    def q_offset(self) -> int:
        return self.p_size

    @property
    def t_offset(self) -> int:
        return self.q_offset + self.q_size

    @property
    def alpha_index(self) -> int:
        return self.t_offset + self.t_size

    @property
    def beta_index(self) -> int:
        return self.alpha_index + 1

    @property
    def total_dim(self) -> int:
        return self.beta_index + 1

    def blocks(self) -> dict[str, slice]:
        return {
            "P": slice(self.p_offset, self.q_offset),
            "Q": slice(self.q_offset, self.t_offset),
            "T": slice(self.t_offset, self.alpha_index),
            "alpha": slice(self.alpha_index, self.alpha_index + 1),
            "beta": slice(self.beta_index, self.beta_index + 1),
        }

    def unpack(self, w):
        """Split ``w`` into ``(P, Q, T, alpha, beta)``."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.total_dim,):
            raise ValueError(f"decision vector must have length {self.total_dim}, got {w.shape}")
        b = self.blocks()
        P = _sym_from_triu(w[b["P"]], self.n)
        Q = w[b["Q"]].reshape(self.n, self.N + 1)
        T = _sym_from_triu(w[b["T"]], self.N + 1)
        return P, Q, T, float(w[self.alpha_index]), float(w[self.beta_index])

    def pack(self, P, Q, T, alpha, beta) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float).reshape(self.n, self.N + 1)
        T = np.asarray(T, dtype=float)
        iu_p = np.triu_indices(self.n)
        iu_t = np.triu_indices(self.N + 1)
        return np.concatenate(
            [P[iu_p], Q.ravel(), T[iu_t], [float(alpha), float(beta)]]
        )


def _sym_from_triu(v: np.ndarray, m: int) -> np.ndarray:
    S = np.zeros((m, m))
    S[np.triu_indices(m)] = v
    return S + np.triu(S, 1).T


@dataclass(frozen=True)
class AffineMatrixExpression:
    """Symmetric matrix ``F0 + sum_i w_i F_i``.

    ``coefficients`` has shape ``(k, d, d)``; small dense storage is enough for
    the sizes met here (``d <= n + N + 3``).
    """

    constant: np.ndarray
    coefficients: np.ndarray

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    @property
    def num_vars(self) -> int:
        return self.coefficients.shape[0]

    def evaluate(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.num_vars,):
            raise ValueError(f"decision vector must have length {self.num_vars}, got {w.shape}")
        M = self.constant + np.tensordot(w, self.coefficients, axes=1)
        return 0.5 * (M + M.T)

    def __add__(self, other: AffineMatrixExpression) -> AffineMatrixExpression:
        return AffineMatrixExpression(
            self.constant + other.constant, self.coefficients + other.coefficients
        )

    def __neg__(self) -> AffineMatrixExpression:
        return AffineMatrixExpression(-self.constant, -self.coefficients)

    def asymmetry(self) -> float:
        """Largest entry of ``|F - F^T|`` over the constant and all coefficients."""
        c = np.abs(self.constant - self.constant.T).max(initial=0.0)
        f = np.abs(self.coefficients - self.coefficients.transpose(0, 2, 1)).max(initial=0.0)
        return float(max(c, f))

    @classmethod
    def from_linear_map(cls, layout: DecisionLayout, fn) -> AffineMatrixExpression:
        """Tabulate a linear ``fn(P, Q, T, alpha, beta) -> matrix`` on the unit vectors."""
        k = layout.total_dim
        zero = fn(*layout.unpack(np.zeros(k)))
        coeffs = np.empty((k,) + zero.shape)
        for i in range(k):
            e = np.zeros(k)
            e[i] = 1.0
            coeffs[i] = fn(*layout.unpack(e)) - zero
        return cls(zero, coeffs)


def phi_matrix(P, Q, T) -> np.ndarray:
    return np.block([[P, Q], [Q.T, T]])


def psi_tilde_matrix(sys: SystemData, ops: LegendreOperators, P, Q, T, alpha, beta) -> np.ndarray:
    """Dense ``Psi~_N`` for given decision values, ordered as ``[X; u(1); u_x(0); U_N]``."""
    A, B, C, g = sys.A, sys.B, sys.C, sys.gamma
    n, N = sys.n, ops.order
    L, L_sq = ops.L, ops.L_sq
    one = ops.ones[:, None]
    alt = ops.alt_ones[:, None]

    d = n + N + 3
    iX, i1, i0, iU = slice(0, n), n, n + 1, slice(n + 2, d)
    up = np.zeros((d, d))
    up[iX, i1] = (P @ B - g * Q @ L @ one)[:, 0]
    up[iX, i0] = (-g * Q @ alt - alpha * g * C.T - beta * A.T @ C.T)[:, 0]
    up[iX, iU] = A.T @ Q + g * C.T @ alt.T @ L.T @ T + g * Q @ L_sq
    up[i1, i0] = (-beta * B.T @ C.T).item()
    up[i1, iU] = (B.T @ Q - g * one.T @ L.T @ T)[0]
    up[i0, iU] = (-g * alt.T @ T)[0]
    M = up + up.T
    M[iX, iX] = he(P @ A + g * Q @ L @ alt @ C)
    M[iU, iU] = he(g * L_sq.T @ T)
    return M


def psi2_factor(sys: SystemData, N: int) -> np.ndarray:
    """Factor ``G`` with ``Psi_2 = G I_{N+1} G^T``, shape ``(n+N+3, N+2)``."""
    ops = build_operators(N + 1)
    n = sys.n
    G = np.zeros((n + N + 3, N + 2))
    G[:n] = -sys.C.T @ ops.alt_ones[None, :]
    G[n] = ops.ones
    G[n + 2 :] = -ops.L1.T
    return G


def psi3_factor(sys: SystemData, N: int) -> np.ndarray:
    """Factor ``H`` with ``Psi_3 = H I_{N+2} H^T``, shape ``(n+N+3, N+3)``."""
    ops = build_operators(N + 2)
    n = sys.n
    H = np.zeros((n + N + 3, N + 3))
    H[:n] = sys.C.T @ ops.alt_ones[None, :] @ ops.L.T
    H[n] = -ops.ones @ ops.L.T
    H[n + 1] = -ops.alt_ones
    H[n + 2 :] = ops.L2.T
    return H


def build_psi2(sys: SystemData, N: int) -> np.ndarray:
    G = psi2_factor(sys, N)
    M = G @ build_operators(N + 1).I_diag @ G.T
    return 0.5 * (M + M.T)


def build_psi3(sys: SystemData, N: int) -> np.ndarray:
    H = psi3_factor(sys, N)
    M = H @ build_operators(N + 2).I_diag @ H.T
    return 0.5 * (M + M.T)


def build_phi(n: int, N: int) -> AffineMatrixExpression:
    layout = DecisionLayout(n, N)
    return AffineMatrixExpression.from_linear_map(
        layout, lambda P, Q, T, alpha, beta: phi_matrix(P, Q, T)
    )


def build_psi_tilde(sys: SystemData, N: int) -> AffineMatrixExpression:
    ops = build_operators(N)
    return AffineMatrixExpression.from_linear_map(
        DecisionLayout(sys.n, N),
        lambda P, Q, T, alpha, beta: psi_tilde_matrix(sys, ops, P, Q, T, alpha, beta),
    )


def assemble_psi(sys: SystemData, N: int) -> AffineMatrixExpression:
    """``Psi_N(gamma)`` as an expression linear in the decision vector."""
    layout = DecisionLayout(sys.n, N)
    tilde = build_psi_tilde(sys, N)
    coeffs = tilde.coefficients.copy()
    coeffs[layout.alpha_index] -= sys.gamma * build_psi2(sys, N)
    coeffs[layout.beta_index] -= 2.0 * sys.gamma * build_psi3(sys, N)
    return AffineMatrixExpression(tilde.constant.copy(), coeffs)


@dataclass(frozen=True)
class LMIProblem:
    """The pair ``(Phi_N, Psi_N)`` for one system and one order."""

    sys: SystemData
    N: int

    @cached_property
    def layout(self) -> DecisionLayout:
        return DecisionLayout(self.sys.n, self.N)

    @cached_property
    def phi(self) -> AffineMatrixExpression:
        return build_phi(self.sys.n, self.N)

    @cached_property
    def psi(self) -> AffineMatrixExpression:
        return assemble_psi(self.sys, self.N)
