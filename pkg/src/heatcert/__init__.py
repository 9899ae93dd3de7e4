"""Stability certificates for an ODE coupled to a heat equation.

Legendre projections of the heat state give a hierarchy of LMIs indexed by
the truncation order ``N``; a strictly feasible point certifies exponential
stability. Certificates are cross-checked against a time-domain simulator.
"""

from .feasibility import (
    EquilibriumError,
    FeasibilityReport,
    SolverOptions,
    SolverStatus,
    ValidationRecord,
    Witness,
    check_equilibrium,
    solve_feasibility,
    validate_witness,
)
from .hierarchy import NO_CERTIFICATE, StabilityMap, log_grid, min_feasible_order, scan_orders, sweep
from .legendre import (
    LegendreOperators,
    ResolutionError,
    build_operators,
    ell_coeff,
    eval_legendre,
    legendre_norm_sq,
    project,
)
from .lmi import (
    AffineMatrixExpression,
    DecisionLayout,
    LMIProblem,
    SystemData,
    assemble_psi,
    build_phi,
    build_psi2,
    build_psi3,
    build_psi_tilde,
    paper_example,
)
from .simulator import (
    DecayReport,
    IncompatibleInitialData,
    SimConfig,
    Trajectory,
    decay_check,
    energy,
    fitted_decay_rate,
    lyapunov_value,
    paper_initial_state,
    simulate,
)

__version__ = "0.1.0"
