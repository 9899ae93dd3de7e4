"""Scans over the truncation order and over (K, gamma) parameter grids."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .feasibility import (
    EquilibriumError,
    FeasibilityReport,
    SolverOptions,
    SolverStatus,
    check_equilibrium,
    solve_feasibility,
)
from .lmi import SystemData

logger = logging.getLogger(__name__)

NO_CERTIFICATE = -1

Family = Callable[[float, float], SystemData]


@dataclass
class OrderScan:
    """Per-order reports of one system, in increasing order."""

    reports: list[FeasibilityReport]

    @property
    def min_order(self) -> Optional[int]:
        for r in self.reports:
            if r.feasible:
                return r.order
        return None

    @property
    def trouble_orders(self) -> list[int]:
        return [r.order for r in self.reports if r.status is SolverStatus.NUMERICAL_TROUBLE]

    def feasible_orders(self) -> list[int]:
        return [r.order for r in self.reports if r.feasible]

    def nesting_violations(self) -> list[tuple[int, int]]:
        """Pairs ``(N, N')`` with ``N < N'`` where ``N`` is certified and ``N'`` is not."""
        feas = {r.order: r.feasible for r in self.reports}
        out = []
        for lo in sorted(feas):
            if feas[lo]:
                out.extend((lo, hi) for hi in sorted(feas) if hi > lo and not feas[hi])
        return out


def scan_orders(
    sys: SystemData, N_max: int, opts: Optional[SolverOptions] = None, full_scan: bool = False
) -> OrderScan:
    """Solve orders ``0..N_max``, stopping at the first certificate unless ``full_scan``."""
    if not check_equilibrium(sys):
        raise EquilibriumError("A + BC is singular; the equilibrium is not unique")
    reports = []
    for N in range(N_max + 1):
        r = solve_feasibility(sys, N, opts)
        reports.append(r)
        if r.status is SolverStatus.NUMERICAL_TROUBLE:
            logger.warning("numerical trouble at N=%d: %s", N, r.message)
        if r.feasible and not full_scan:
            break
    return OrderScan(reports)


def min_feasible_order(sys: SystemData, N_max: int, opts: Optional[SolverOptions] = None) -> Optional[int]:
    """Smallest order ``N <= N_max`` with a validated certificate, or ``None``."""
    return scan_orders(sys, N_max, opts).min_order


@dataclass
class StabilityMap:
    """Smallest certifying order over a ``K x gamma`` grid.

    ``min_order[i, j]`` belongs to ``(K_grid[i], gamma_grid[j])`` and is
    ``NO_CERTIFICATE`` (-1) when no order up to ``N_max`` certifies the cell,
    including cells whose evaluation failed (those carry a message in ``errors``).
    ``feasible`` is filled in full-scan mode only: ``feasible[i, j, N]``.
    """

    K_grid: np.ndarray
    gamma_grid: np.ndarray
    min_order: np.ndarray
    N_max: int
    wall_ms: np.ndarray
    errors: dict[tuple[int, int], str] = field(default_factory=dict)
    feasible: Optional[np.ndarray] = None

    def cells(self):
        """Row-major iteration: ``(i, j, K, gamma)``."""
        for i, K in enumerate(self.K_grid):
            for j, g in enumerate(self.gamma_grid):
                yield i, j, float(K), float(g)

    def counts(self) -> dict[str, int]:
        vals, cnt = np.unique(self.min_order, return_counts=True)
        return {str(int(v)): int(c) for v, c in zip(vals, cnt)}

    def nesting_violations(self) -> list[tuple[int, int, int, int]]:
        """``(i, j, N, N')`` where order ``N`` certifies a cell and a higher ``N'`` does not."""
        if self.feasible is None:
            return []
        out = []
        for i, j, _, _ in self.cells():
            f = self.feasible[i, j]
            for lo in np.flatnonzero(f):
                out.extend((i, j, int(lo), int(hi)) for hi in range(lo + 1, self.N_max + 1) if not f[hi])
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["K", "gamma", "min_order", "wall_ms"])
            for i, j, K, g in self.cells():
                wr.writerow([repr(K), repr(g), int(self.min_order[i, j]), f"{self.wall_ms[i, j]:.3f}"])


def log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    if num < 1:
        raise ValueError("grid needs at least one point")
    if num == 1:
        return np.array([float(lo)])
    if not 0 < lo < hi:
        raise ValueError("log grid bounds must satisfy 0 < lo < hi")
    return np.geomspace(lo, hi, num)


def _cell(args):
    family, K, g, N_max, opts, full_scan = args
    t0 = time.perf_counter()
    try:
        scan = scan_orders(family(K, g), N_max, opts, full_scan=full_scan)
    except Exception as exc:  # recorded per cell, never aborts the sweep
        return NO_CERTIFICATE, (time.perf_counter() - t0) * 1e3, f"{type(exc).__name__}: {exc}", None
    m = scan.min_order
    feas = np.zeros(N_max + 1, dtype=bool)
    for r in scan.reports:
        feas[r.order] = r.feasible
    return (NO_CERTIFICATE if m is None else m), (time.perf_counter() - t0) * 1e3, None, feas


def sweep(
    family: Family,
    K_grid,
    gamma_grid,
    N_max: int,
    opts: Optional[SolverOptions] = None,
    jobs: int = 1,
    full_scan: bool = False,
) -> StabilityMap:
    """Fill a stability map cell by cell.

    With ``jobs > 1`` cells run in a process pool; ``family`` must then be
    picklable (a module-level function such as :func:`heatcert.lmi.paper_example`).
    """
    K_grid = np.asarray(K_grid, dtype=float)
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    if K_grid.size == 0 or gamma_grid.size == 0:
        raise ValueError("sweep grids must be nonempty")
    for name, grid in (("K", K_grid), ("gamma", gamma_grid)):
        if np.any(np.diff(grid) <= 0):
            raise ValueError(f"{name} grid must be strictly increasing")
    shape = (K_grid.size, gamma_grid.size)
    smap = StabilityMap(
        K_grid,
        gamma_grid,
        np.full(shape, NO_CERTIFICATE, dtype=int),
        N_max,
        np.zeros(shape),
        feasible=np.zeros(shape + (N_max + 1,), dtype=bool) if full_scan else None,
    )
    index = [(i, j) for i, j, _, _ in smap.cells()]
    tasks = [(family, K, g, N_max, opts, full_scan) for _, _, K, g in smap.cells()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    for (i, j), (m, ms, err, feas) in zip(index, results):
        smap.min_order[i, j] = m
        smap.wall_ms[i, j] = ms
        if err is not None:
            smap.errors[(i, j)] = err
        elif full_scan:
            smap.feasible[i, j] = feas
    return smap
