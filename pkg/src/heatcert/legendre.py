"""Shifted Legendre polynomials on [0, 1] and the projection operators built on them.

The polynomials satisfy ``<L_j, L_k> = delta_jk / (2k + 1)``, ``L_k(0) = (-1)**k``
and ``L_k(1) = 1``. Their derivatives expand back onto lower orders through the
coefficients returned by :func:`ell_coeff`, which gives the strictly lower
triangular derivation matrix stored in :class:`LegendreOperators`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

DOMAIN_TOL = 1e-12


class ResolutionError(ValueError):
    """Raised when a grid is too coarse to project onto the requested order."""


def eval_legendre(k: int, x):
    """Evaluate the shifted Legendre polynomial of degree ``k`` at ``x``.

    Uses the three-term recurrence
    ``(j+1) L_{j+1} = (2j+1)(2x-1) L_j - j L_{j-1}``.

    Parameters
    ----------
    k : int
        Degree, ``k >= 0``.
    x : float or ndarray
        Point(s) in [0, 1].

    Returns
    -------
    float or ndarray
        Same shape as ``x``.
    """
    if k < 0:
        raise ValueError(f"degree must be non-negative, got {k}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -DOMAIN_TOL) or np.any(xa > 1.0 + DOMAIN_TOL):
        raise ValueError("shifted Legendre polynomials are defined on [0, 1]")
    s = 2.0 * xa - 1.0
    prev = np.ones_like(s)
    if k == 0:
        return prev if xa.ndim else float(prev)
    cur = s.copy()
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1) * s * cur - j * prev) / (j + 1)
    return cur if xa.ndim else float(cur)


def legendre_table(N: int, x) -> np.ndarray:
    """Values of ``L_0 .. L_N`` at the points ``x``, shape ``(N+1, len(x))``."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa < -DOMAIN_TOL) or np.any(xa > 1.0 + DOMAIN_TOL):
        raise ValueError("shifted Legendre polynomials are defined on [0, 1]")
    s = 2.0 * xa - 1.0
    out = np.empty((N + 1, xa.size))
    out[0] = 1.0
    if N >= 1:
        out[1] = s
    for j in range(1, N):
        out[j + 1] = ((2 * j + 1) * s * out[j] - j * out[j - 1]) / (j + 1)
    return out


def legendre_norm_sq(k: int) -> float:
    """Squared L2(0, 1) norm of ``L_k``, i.e. ``1 / (2k + 1)``."""
    return 1.0 / (2 * k + 1)


def ell_coeff(k: int, j: int) -> float:
    """Coefficient of ``L_j`` in the expansion of ``L_k'``.

    Equal to ``(2j+1)(1 - (-1)**(k+j))`` for ``j <= k-1`` and zero otherwise.
    """
    if j >= k:
        return 0.0
    return float((2 * j + 1) * (1 - (-1) ** (k + j)))


@dataclass(frozen=True)
class LegendreOperators:
    """Constant matrices and vectors attached to truncation order ``N``.

    Attributes
    ----------
    order : int
    L : ndarray, (N+1, N+1)
        Derivation matrix, strictly lower triangular.
    L_sq : ndarray, (N+1, N+1)
        ``L @ L``.
    L1 : ndarray, (N+1, N)
        ``L`` without its (zero) last column.
    L2 : ndarray, (N+1, N-1)
        ``L_sq`` without its two (zero) last columns; has zero columns for N < 2.
    ones, alt_ones : ndarray, (N+1,)
        All ones, and ``(-1)**k``.
    I_diag : ndarray, (N+1, N+1)
        ``diag(1, 3, ..., 2N+1)``.
    """

    order: int
    L: np.ndarray
    L_sq: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    ones: np.ndarray
    alt_ones: np.ndarray
    I_diag: np.ndarray


def build_operators(N: int) -> LegendreOperators:
    if N < 0:
        raise ValueError(f"order must be non-negative, got {N}")
    k = np.arange(N + 1)
    L = np.array([[ell_coeff(i, j) for j in k] for i in k]).reshape(N + 1, N + 1)
    L_sq = L @ L
    arrays = dict(
        L=L,
        L_sq=L_sq,
        L1=L[:, :N].copy(),
        L2=L_sq[:, : max(N - 1, 0)].copy(),
        ones=np.ones(N + 1),
        alt_ones=(-1.0) ** k,
        I_diag=np.diag(2.0 * k + 1.0),
    )
    for a in arrays.values():
        a.setflags(write=False)
    return LegendreOperators(order=N, **arrays)


def _check_grid(u_grid, N: int) -> np.ndarray:
    u = np.asarray(u_grid, dtype=float)
    if u.ndim != 1:
        raise ValueError("grid function must be one-dimensional")
    if u.size < 2 * N + 3:
        raise ResolutionError(
            f"{u.size} grid points cannot resolve order {N} (need at least {2 * N + 3})"
        )
    return u


def project(u_grid, N: int) -> np.ndarray:
    """Inner products ``<u, L_k>`` for ``k = 0..N``.

    ``u_grid`` holds samples on the uniform grid ``linspace(0, 1, len(u_grid))``;
    integrals use composite Simpson quadrature on that grid.
    """
    u = _check_grid(u_grid, N)
    x = np.linspace(0.0, 1.0, u.size)
    return simpson(legendre_table(N, x) * u, x=x, axis=1)


def l2_norm_sq(u_grid) -> float:
    """Simpson approximation of the squared L2(0, 1) norm of a uniform-grid function."""
    u = np.asarray(u_grid, dtype=float)
    x = np.linspace(0.0, 1.0, u.size)
    return float(simpson(u * u, x=x))


def bessel_lower_bound(u_grid, N: int) -> float:
    """``U^T I_N U``, the truncated Bessel lower bound on ``||u||^2``."""
    U = project(u_grid, N)
    return float(np.sum((2.0 * np.arange(N + 1) + 1.0) * U * U))
