"""Command-line front end.

Every subcommand reads one JSON config and prints a JSON summary to stdout.
Exit codes: 0 certificate found (or command completed), 1 no certificate,
2 input error, 3 numerical trouble.

Config layout::

    {
      "system": {"family": "paper_example", "K": 100, "gamma": 1}
                | {"A": [[...]], "B": [[...]], "C": [[...]], "gamma": 1},
      "solver": {"max_iterations": 500, "margin_threshold": 1e-7, "norm_box": 1e6, "verbosity": 0},
      "sweep": {"K": {"min": 1, "max": 1000, "num": 6} | [...], "gamma": ..., "N_max": 6},
      "simulation": {"M": 20, "safety": 0.9, "T_final": 10, "sample_stride": 10,
                     "X0": [...], "u0": "paper" | [grid values]},
      "output": {"report": "...", "map_csv": "...", "trajectory_csv": "...", "field_csv": "..."}
    }
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .feasibility import (
    EquilibriumError,
    SolverOptions,
    SolverStatus,
    Witness,
    solve_feasibility,
    validate_witness,
)
from .hierarchy import log_grid, scan_orders, sweep
from .lmi import SystemData, paper_example
from .simulator import (
    IncompatibleInitialData,
    SimConfig,
    decay_check,
    fitted_decay_rate,
    paper_initial_state,
    simulate,
    write_field_csv,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_NO_CERTIFICATE = 1
EXIT_INPUT = 2
EXIT_TROUBLE = 3

FAMILIES = {"paper_example": paper_example}

logger = logging.getLogger("heatcert")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


@dataclass
class ProblemConfig:
    system: SystemData
    family: Optional[str]
    solver: SolverOptions
    raw: dict

    def section(self, name: str) -> dict:
        sec = self.raw.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"'{name}' must be an object")
        return sec

    def output(self, key: str) -> Optional[str]:
        return self.section("output").get(key)


def _matrix(value, field: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"'{field}' must be a rectangular array of numbers") from None
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2 or M.size == 0 or not np.all(np.isfinite(M)):
        raise ConfigError(f"'{field}' must be a nonempty rectangular array of finite numbers")
    return M


def _number(d: dict, key: str, where: str) -> float:
    if key not in d:
        raise ConfigError(f"missing field '{where}.{key}'")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"'{where}.{key}' must be a finite number")
    return float(v)


def parse_system(d: Any) -> tuple[SystemData, Optional[str]]:
    if not isinstance(d, dict):
        raise ConfigError("'system' must be an object")
    explicit = [k for k in ("A", "B", "C") if k in d]
    if "family" in d and explicit:
        raise ConfigError(f"'system' gives both 'family' and explicit matrices ({', '.join(explicit)})")
    if "family" in d:
        name = d["family"]
        if name not in FAMILIES:
            raise ConfigError(f"'system.family' must be one of {sorted(FAMILIES)}, got {name!r}")
        K = _number(d, "K", "system")
        gamma = _number(d, "gamma", "system")
        if gamma <= 0:
            raise ConfigError("'system.gamma' must be positive")
        return FAMILIES[name](K, gamma), name
    missing = [k for k in ("A", "B", "C", "gamma") if k not in d]
    if missing:
        raise ConfigError(f"'system' needs either 'family' or all of A, B, C, gamma (missing {', '.join(missing)})")
    A = _matrix(d["A"], "system.A")
    B = _matrix(d["B"], "system.B")
    C = _matrix(d["C"], "system.C")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ConfigError(f"'system.A' must be square, got {A.shape[0]}x{A.shape[1]}")
    if B.shape == (1, n) and n > 1:
        B = B.T
    if B.shape != (n, 1):
        raise ConfigError(f"'system.B' must be {n}x1, got {B.shape[0]}x{B.shape[1]}")
    if C.shape != (1, n):
        raise ConfigError(f"'system.C' must be 1x{n}, got {C.shape[0]}x{C.shape[1]}")
    gamma = _number(d, "gamma", "system")
    if gamma <= 0:
        raise ConfigError("'system.gamma' must be positive")
    return SystemData(A, B, C, gamma), None


def load_config(path) -> ProblemConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "system" not in raw:
        raise ConfigError("missing field 'system'")
    system, family = parse_system(raw["system"])
    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ConfigError("'solver' must be an object")
    try:
        solver = SolverOptions.from_dict(solver_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'solver': {exc}") from None
    return ProblemConfig(system, family, solver, raw)


def _clean(obj):
    """Replace non-finite floats by ``None`` and numpy values by Python ones."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips exactly (at most 17 digits)
    return json.dumps(_clean(obj), indent=2, allow_nan=False)


def _emit(obj, path: Optional[str] = None) -> None:
    text = dumps(obj)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _report_dict(report, sys_: SystemData) -> dict:
    out = {
        "feasible": report.feasible,
        "status": report.status.value,
        "margin": report.margin,
        "N": report.order,
        "wall_time": report.wall_time,
        "solver_iterations": report.solver_iterations,
        "message": report.message,
    }
    if report.witness is not None:
        out["witness"] = report.witness.to_dict()
        out["validation"] = validate_witness(sys_, report.order, report.witness).to_dict()
    return out


def _status_exit(status: SolverStatus) -> int:
    return {
        SolverStatus.OPTIMAL: EXIT_OK,
        SolverStatus.INFEASIBLE: EXIT_NO_CERTIFICATE,
        SolverStatus.NUMERICAL_TROUBLE: EXIT_TROUBLE,
    }[status]


def _require_order(N: int, flag: str) -> None:
    if N < 0:
        raise ConfigError(f"'{flag}' must be a non-negative integer")


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    _require_order(args.order, "--order")
    report = solve_feasibility(cfg.system, args.order, cfg.solver)
    _emit(_report_dict(report, cfg.system), cfg.output("report"))
    return _status_exit(report.status)


def cmd_hierarchy(args) -> int:
    cfg = load_config(args.config)
    _require_order(args.max_order, "--max-order")
    scan = scan_orders(cfg.system, args.max_order, cfg.solver, full_scan=args.full_scan)
    out = {
        "min_order": scan.min_order,
        "N_max": args.max_order,
        "orders": [
            {"N": r.order, "feasible": r.feasible, "status": r.status.value, "margin": r.margin, "wall_time": r.wall_time}
            for r in scan.reports
        ],
        "trouble_orders": scan.trouble_orders,
    }
    if scan.min_order is not None:
        out["witness"] = next(r for r in scan.reports if r.feasible).witness.to_dict()
    _emit(out, cfg.output("report"))
    if scan.min_order is not None:
        return EXIT_OK
    return EXIT_TROUBLE if scan.trouble_orders else EXIT_NO_CERTIFICATE


def _grid(spec, field: str) -> np.ndarray:
    if isinstance(spec, list):
        try:
            grid = np.array(spec, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"'{field}' must be a list of numbers") from None
    elif isinstance(spec, dict):
        num = spec.get("num")
        if isinstance(num, bool) or not isinstance(num, int):
            raise ConfigError(f"'{field}.num' must be an integer")
        lo = _number(spec, "min", field)
        hi = _number(spec, "max", field)
        try:
            grid = log_grid(lo, hi, num) if num > 0 else np.array([])
        except ValueError as exc:
            raise ConfigError(f"'{field}': {exc}") from None
    else:
        raise ConfigError(f"'{field}' must be a list or a {{min, max, num}} object")
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError(f"'{field}' is empty")
    if not np.all(np.isfinite(grid)) or np.any(np.diff(grid) <= 0):
        raise ConfigError(f"'{field}' must be finite and strictly increasing")
    return grid


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    sw = cfg.section("sweep")
    family = sw.get("family", cfg.family)
    if family not in FAMILIES:
        raise ConfigError(f"'sweep.family' must be one of {sorted(FAMILIES)} (or set 'system.family')")
    for key in ("K", "gamma"):
        if key not in sw:
            raise ConfigError(f"missing field 'sweep.{key}'")
    K_grid = _grid(sw["K"], "sweep.K")
    g_grid = _grid(sw["gamma"], "sweep.gamma")
    if np.any(g_grid <= 0):
        raise ConfigError("'sweep.gamma' must be positive")
    N_max = sw.get("N_max", 6)
    if isinstance(N_max, bool) or not isinstance(N_max, int) or N_max < 0:
        raise ConfigError("'sweep.N_max' must be a non-negative integer")
    if args.jobs < 1:
        raise ConfigError("'--jobs' must be at least 1")

    smap = sweep(FAMILIES[family], K_grid, g_grid, N_max, cfg.solver, jobs=args.jobs, full_scan=args.full_scan)
    csv_path = cfg.output("map_csv") or "stability_map.csv"
    smap.write_csv(csv_path)
    out = {
        "map_csv": csv_path,
        "cells": int(smap.min_order.size),
        "counts": smap.counts(),
        "N_max": N_max,
        "errors": {f"{i},{j}": msg for (i, j), msg in smap.errors.items()},
    }
    if args.full_scan:
        out["nesting_violations"] = [list(v) for v in smap.nesting_violations()]
    _emit(out, cfg.output("report"))
    return EXIT_OK


def _load_witness(path) -> tuple[Witness, Optional[int]]:
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"witness file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"witness is not valid JSON: {exc}") from None
    order = None
    if isinstance(d, dict) and "witness" in d:
        order = d.get("N")
        d = d["witness"]
    if not isinstance(d, dict):
        raise ConfigError("witness file holds no witness object")
    try:
        w = Witness.from_dict(d)
    except KeyError as exc:
        raise ConfigError(f"witness is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed witness: {exc}") from None
    return w, order


def _witness_order(w: Witness, sys_: SystemData, requested: Optional[int]) -> int:
    N = w.order if requested is None else requested
    if w.P.shape != (sys_.n, sys_.n) or w.Q.shape != (sys_.n, N + 1) or w.T.shape != (N + 1, N + 1):
        raise ConfigError(f"witness dimensions do not match n={sys_.n}, N={N}")
    return N


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    _require_order(args.order, "--order")
    w, _ = _load_witness(args.witness)
    N = _witness_order(w, cfg.system, args.order)
    rec = validate_witness(cfg.system, N, w)
    _emit({"N": N, "validation": rec.to_dict()}, cfg.output("report"))
    return EXIT_OK if rec.passed else EXIT_NO_CERTIFICATE


def _sim_config(sec: dict) -> SimConfig:
    kwargs = {}
    for key, kind in (("M", int), ("safety", float), ("T_final", float), ("sample_stride", int)):
        if key in sec:
            v = sec[key]
            ok = isinstance(v, int) if kind is int else isinstance(v, (int, float))
            if isinstance(v, bool) or not ok:
                raise ConfigError(f"'simulation.{key}' must be {'an integer' if kind is int else 'a number'}")
            kwargs[key] = kind(v)
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"'simulation': {exc}") from None


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sec = cfg.section("simulation")
    sim = _sim_config(sec)
    sys_ = cfg.system
    X0 = sec.get("X0")
    if X0 is not None:
        X0 = np.asarray(X0, dtype=float)
        if X0.shape != (sys_.n,):
            raise ConfigError(f"'simulation.X0' must have {sys_.n} entries")
    u0_spec = sec.get("u0", "paper")
    if u0_spec == "paper":
        if X0 is None and sys_.n != 4:
            raise ConfigError("'simulation.X0' is required unless n = 4")
        X0, u0 = paper_initial_state(sys_, X0)
    else:
        if X0 is None:
            raise ConfigError("'simulation.X0' is required with explicit 'simulation.u0'")
        u0 = np.asarray(u0_spec, dtype=float)
        if u0.shape != (sim.M + 1,):
            raise ConfigError(f"'simulation.u0' must have M + 1 = {sim.M + 1} values")

    traj = simulate(sys_, X0, u0, sim)
    ratio = traj.energy[-1] / traj.energy[0] if traj.energy[0] > 0 else float("nan")
    out = {
        "diverged": traj.diverged,
        "t_final": traj.times[-1],
        "E_initial": traj.energy[0],
        "E_final": traj.energy[-1],
        "E_ratio": ratio,
        "decay_rate": fitted_decay_rate(traj.times, traj.energy),
        "dt": traj.dt,
        "samples": len(traj),
    }
    V = None
    if args.witness:
        w, stored_order = _load_witness(args.witness)
        N = _witness_order(w, sys_, args.order if args.order is not None else stored_order)
        rep = decay_check(traj, w, N)
        V = rep.V
        out["order"] = N
        out.update({k: v for k, v in rep.as_dict().items() if k != "decay_rate"})
    write_trajectory_csv(cfg.output("trajectory_csv") or "trajectory.csv", traj, V)
    if cfg.output("field_csv"):
        write_field_csv(cfg.output("field_csv"), traj)
    _emit(out, cfg.output("report"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatcert", description="Stability certificates for ODE / heat-equation loops.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="solve the LMIs at one order")
    c.add_argument("--config", required=True)
    c.add_argument("--order", type=int, required=True)
    c.set_defaults(func=cmd_check)

    h = sub.add_parser("hierarchy", help="smallest certifying order")
    h.add_argument("--config", required=True)
    h.add_argument("--max-order", type=int, required=True)
    h.add_argument("--full-scan", action="store_true")
    h.set_defaults(func=cmd_hierarchy)

    s = sub.add_parser("sweep", help="stability map over a (K, gamma) grid")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--full-scan", action="store_true")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="time-domain simulation")
    m.add_argument("--config", required=True)
    m.add_argument("--witness")
    m.add_argument("--order", type=int)
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="re-check a stored witness")
    v.add_argument("--config", required=True)
    v.add_argument("--witness", required=True)
    v.add_argument("--order", type=int, required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, matching the input-error code
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, EquilibriumError, IncompatibleInitialData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
