"""Time-domain simulation of the ODE / heat-equation loop.

The heat equation is advanced with explicit forward-time central-space steps on
``x_i = i / M``: Dirichlet value ``C X`` at ``x = 0`` and a mirrored ghost point
``u_{M+1} = u_{M-1}`` for the Neumann condition at ``x = 1``. The ODE is
advanced with classical RK4 while ``u(1)`` is frozen over the step.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import simpson

from .legendre import project
from .lmi import SystemData

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12

GridInit = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


class IncompatibleInitialData(ValueError):
    """Initial data violate ``u0(0) = C X0`` or ``u0'(1) = 0``."""


@dataclass(frozen=True)
class SimConfig:
    """Discretization and sampling parameters.

    The largest admissible step is ``safety * dx**2 / (2 * gamma)`` with
    ``dx = 1 / M``; :meth:`steps` shortens it slightly so that an integer
    number of steps lands exactly on ``T_final``.
    """

    M: int = 20
    safety: float = 0.9
    T_final: float = 10.0
    sample_stride: int = 10

    def __post_init__(self):
        if self.M < 4:
            raise ValueError(f"need at least 4 spatial intervals, got M={self.M}")
        if not 0.0 < self.safety <= 1.0:
            raise ValueError(f"safety factor must lie in (0, 1], got {self.safety}")
        if self.T_final <= 0:
            raise ValueError("T_final must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    @property
    def dx(self) -> float:
        return 1.0 / self.M

    def dt(self, gamma: float) -> float:
        return self.safety * self.dx**2 / (2.0 * gamma)

    def steps(self, gamma: float) -> tuple[int, float]:
        """``(n_steps, dt)`` with ``n_steps * dt == T_final`` and ``dt <= self.dt(gamma)``."""
        n = int(np.ceil(self.T_final / self.dt(gamma) - 1e-9))
        return n, self.T_final / n

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    X: np.ndarray  # (samples, n)
    u: np.ndarray  # (samples, M + 1)
    energy: np.ndarray
    u_at_1: np.ndarray
    ux_at_0: np.ndarray
    diverged: bool = False
    dt: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.u.shape[1])

    def __len__(self):
        return self.times.size


def _dx_grid(u: np.ndarray, dx: float) -> np.ndarray:
    # second order everywhere: central inside, one-sided at both ends
    return np.gradient(u, dx, axis=-1, edge_order=2)


def energy(X, u_grid) -> float:
    """``|X|^2 + ||u||^2 + ||u_x||^2`` with Simpson quadrature on the uniform grid."""
    u = np.asarray(u_grid, dtype=float)
    x = np.linspace(0.0, 1.0, u.size)
    ux = _dx_grid(u, x[1] - x[0])
    return float(np.dot(X, X) + simpson(u * u, x=x) + simpson(ux * ux, x=x))


def paper_initial_state(sys: SystemData, X0=None):
    """``X0 = (0, 1, -1, 0)`` and ``u0(x) = C X0 - 20 x (x - 2) + 10 (1 - cos 8 pi x)``.

    Another ``X0`` may be passed; ``u0`` then uses its ``C X0``.
    """
    X0 = np.array([0.0, 1.0, -1.0, 0.0]) if X0 is None else np.asarray(X0, dtype=float)
    if X0.shape != (sys.n,):
        raise ValueError(f"X0 must have length {sys.n}")
    c = float(sys.C[0] @ X0)

    def u0(x):
        x = np.asarray(x, dtype=float)
        return c - 20.0 * x * (x - 2.0) + 10.0 * (1.0 - np.cos(8.0 * np.pi * x))

    return X0, u0


def _initial_grid(sys: SystemData, X0: np.ndarray, u0: GridInit, cfg: SimConfig) -> np.ndarray:
    x = cfg.grid
    cx0 = float(sys.C[0] @ X0)
    if callable(u0):
        u = np.asarray(u0(x), dtype=float)
        h = cfg.dx
        neumann = float((u0(1.0 + h) - u0(1.0 - h)) / (2.0 * h))
    else:
        u = np.asarray(u0, dtype=float)
        if u.shape != x.shape:
            raise ValueError(f"initial grid must have {x.size} values, got {u.shape}")
        # samples only: the ghost-point step enforces the Neumann condition from step one
        neumann = 0.0
    if abs(u[0] - cx0) > 1e-9:
        raise IncompatibleInitialData(f"u0(0) = {u[0]:.6g} differs from C X0 = {cx0:.6g}")
    if abs(neumann) > 1e-6:
        raise IncompatibleInitialData(f"discrete Neumann residual at x=1 is {neumann:.3g}")
    return u.copy()


def simulate(sys: SystemData, X0, u0: GridInit, cfg: SimConfig) -> Trajectory:
    """Integrate the coupled system from ``(X0, u0)`` up to ``cfg.T_final``.

    ``u0`` is either a callable on [0, 1] or its samples on ``cfg.grid``.
    Integration stops early, with ``diverged`` set, as soon as a state entry is
    non-finite or exceeds ``DIVERGENCE_THRESHOLD`` in magnitude.
    """
    A, B, C, gamma = sys.A, sys.B[:, 0], sys.C[0], sys.gamma
    X = np.asarray(X0, dtype=float).copy()
    if X.shape != (sys.n,):
        raise ValueError(f"X0 must have length {sys.n}")
    u = _initial_grid(sys, X, u0, cfg)

    dx = cfg.dx
    n_steps, dt = cfg.steps(gamma)
    r = gamma * dt / dx**2
    assert r <= 0.5 + 1e-12, "CFL bound violated"

    times, Xs, us = [0.0], [X.copy()], [u.copy()]
    diverged = False
    lap = np.empty_like(u)
    for step in range(1, n_steps + 1):
        u1 = u[-1]

        lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
        lap[-1] = 2.0 * (u[-2] - u[-1])
        u[1:] += r * lap[1:]

        def f(Y):
            return A @ Y + B * u1

        k1 = f(X)
        k2 = f(X + 0.5 * dt * k1)
        k3 = f(X + 0.5 * dt * k2)
        k4 = f(X + dt * k3)
        X = X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u[0] = C @ X

        bad = not (np.all(np.isfinite(X)) and np.all(np.isfinite(u)))
        bad = bad or max(np.abs(X).max(), np.abs(u).max()) > DIVERGENCE_THRESHOLD
        if bad or step % cfg.sample_stride == 0 or step == n_steps:
            times.append(step * dt)
            Xs.append(X.copy())
            us.append(u.copy())
        if bad:
            diverged = True
            logger.info("divergence detected at t=%.4g", step * dt)
            break

    Xs = np.array(Xs)
    us = np.array(us)
    with np.errstate(over="ignore", invalid="ignore"):
        E = np.array([energy(x, v) for x, v in zip(Xs, us)])
        ux0 = _dx_grid(us, dx)[:, 0]
    return Trajectory(
        times=np.array(times),
        X=Xs,
        u=us,
        energy=E,
        u_at_1=us[:, -1].copy(),
        ux_at_0=ux0,
        diverged=diverged,
        dt=dt,
        meta={"M": cfg.M, "safety": cfg.safety, "T_final": cfg.T_final, "gamma": gamma},
    )


def lyapunov_value(w, X, u_grid, N: int) -> float:
    """``[X; U]^T Phi [X; U] + alpha ||u||^2 + beta ||u_x||^2`` for a witness ``w``.

    ``w`` is any object with ``P, Q, T, alpha, beta`` attributes.
    """
    u = np.asarray(u_grid, dtype=float)
    X = np.asarray(X, dtype=float)
    U = project(u, N)
    x = np.linspace(0.0, 1.0, u.size)
    ux = _dx_grid(u, x[1] - x[0])
    quad = X @ w.P @ X + 2.0 * X @ w.Q @ U + U @ w.T @ U
    return float(quad + w.alpha * simpson(u * u, x=x) + w.beta * simpson(ux * ux, x=x))


def fitted_decay_rate(times, E) -> float:
    """Rate ``r`` of the least-squares fit ``E(t) ~ c * exp(-r t)``; ``nan`` if undefined."""
    times = np.asarray(times, dtype=float)
    E = np.asarray(E, dtype=float)
    ok = np.isfinite(E) & (E > 0)
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(times[ok], np.log(E[ok]), 1)[0]
    return float(-slope)


@dataclass
class DecayReport:
    V: np.ndarray
    monotone_fraction: float
    ratio_min: float
    ratio_max: float
    decay_rate: float
    sobolev_violation: float

    def as_dict(self) -> dict:
        return {
            "monotone_fraction": self.monotone_fraction,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "decay_rate": self.decay_rate,
            "sobolev_violation": self.sobolev_violation,
        }


def decay_check(traj: Trajectory, w, N: int, rel_tol: float = 1e-6, allowance: float = 1e-3) -> DecayReport:
    """Evaluate ``V_N`` along ``traj`` and summarize its decay.

    A sample pair counts as non-increasing when
    ``V[i+1] <= V[i] + rel_tol * |V[i]| + allowance * |V[i]|``. The sandwich
    ratios ``V/E`` skip samples with zero energy. ``sobolev_violation`` is the
    largest excess of ``||u||^2`` over ``2 u(1)^2 + 2 ||u_x||^2``.
    """
    V = np.array([lyapunov_value(w, x, u, N) for x, u in zip(traj.X, traj.u)])
    if V.size < 2:
        frac = 1.0
    else:
        slack = (rel_tol + allowance) * np.abs(V[:-1])
        frac = float(np.mean(V[1:] <= V[:-1] + slack))
    nz = traj.energy > 0
    if nz.any():
        ratio = V[nz] / traj.energy[nz]
        rmin, rmax = float(ratio.min()), float(ratio.max())
    else:
        rmin = rmax = float("nan")

    x = traj.grid
    dx = x[1] - x[0]
    u_sq = simpson(traj.u**2, x=x, axis=1)
    ux_sq = simpson(_dx_grid(traj.u, dx) ** 2, x=x, axis=1)
    excess = u_sq - 2.0 * traj.u_at_1**2 - 2.0 * ux_sq
    return DecayReport(
        V=V,
        monotone_fraction=frac,
        ratio_min=rmin,
        ratio_max=rmax,
        decay_rate=fitted_decay_rate(traj.times, traj.energy),
        sobolev_violation=float(max(excess.max(initial=0.0), 0.0)),
    )


def write_trajectory_csv(path, traj: Trajectory, V: Optional[np.ndarray] = None) -> None:
    """Columns ``t, X_1..X_n, E, V_N, u_at_1, ux_at_0``; ``V_N`` empty without a witness."""
    n = traj.X.shape[1]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"X_{i + 1}" for i in range(n)] + ["E", "V_N", "u_at_1", "ux_at_0"])
        for i, t in enumerate(traj.times):
            v = "" if V is None else _fmt(V[i])
            wr.writerow(
                [_fmt(t)]
                + [_fmt(x) for x in traj.X[i]]
                + [_fmt(traj.energy[i]), v, _fmt(traj.u_at_1[i]), _fmt(traj.ux_at_0[i])]
            )


def write_field_csv(path, traj: Trajectory) -> None:
    """Long-format ``t, x, u`` table of the full field."""
    x = traj.grid
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "x", "u"])
        for t, row in zip(traj.times, traj.u):
            for xi, ui in zip(x, row):
                wr.writerow([_fmt(t), _fmt(xi), _fmt(ui)])


def _fmt(v: float) -> str:
    return repr(float(v))
