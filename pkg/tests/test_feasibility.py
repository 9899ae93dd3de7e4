import json

import numpy as np
import pytest

from heatcert.feasibility import (
    EquilibriumError,
    SolverOptions,
    SolverStatus,
    Witness,
    check_equilibrium,
    solve_feasibility,
    svec,
    validate_witness,
)
from heatcert.lmi import DecisionLayout, SystemData, paper_example


def _feasible_instances(count, seed=0):
    """Random small loops that are strongly damped, hence certified at low order."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(1, 4))
        A = -np.diag(rng.uniform(1.0, 3.0, n)) + 0.2 * rng.normal(size=(n, n))
        B = 0.3 * rng.normal(size=(n, 1))
        C = 0.3 * rng.normal(size=(1, n))
        sys = SystemData(A, B, C, rng.uniform(0.5, 3.0))
        rep = solve_feasibility(sys, int(rng.integers(0, 3)))
        if rep.feasible:
            out.append((sys, rep))
    return out


@pytest.fixture(scope="module")
def feasible_instances():
    return _feasible_instances(20)


class TestEquilibrium:
    def test_examples(self):
        assert check_equilibrium(SystemData(-np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), 1.0))
        assert not check_equilibrium(SystemData([[1.0]], [[1.0]], [[-1.0]], 1.0))
        assert check_equilibrium(paper_example(100, 1))

    def test_near_singular(self):
        A = np.diag([1.0, 1e-14])
        assert not check_equilibrium(SystemData(A, np.zeros((2, 1)), np.zeros((1, 2)), 1.0))

    def test_solve_refuses_singular(self):
        with pytest.raises(EquilibriumError):
            solve_feasibility(SystemData([[1.0]], [[1.0]], [[-1.0]], 1.0), 0)

    def test_negative_order(self):
        with pytest.raises(ValueError):
            solve_feasibility(paper_example(100, 1), -1)


class TestValidation:
    def _witness(self, n, N, **kw):
        base = dict(P=np.eye(n), Q=np.zeros((n, N + 1)), T=np.eye(N + 1), alpha=1.0, beta=1.0, margin=float("nan"))
        base.update(kw)
        return Witness(**base)

    def test_negative_alpha(self):
        rec = validate_witness(paper_example(100, 1), 0, self._witness(4, 0, alpha=-1.0))
        assert not rec.passed
        assert "alpha nonpositive" in rec.reasons

    def test_zero_witness(self):
        w = self._witness(4, 1, P=np.zeros((4, 4)), T=np.zeros((2, 2)), alpha=0.0, beta=0.0)
        rec = validate_witness(paper_example(100, 1), 1, w)
        assert not rec.passed
        assert "Phi not positive definite" in rec.reasons

    def test_non_finite(self):
        w = self._witness(4, 0, alpha=float("nan"))
        rec = validate_witness(paper_example(100, 1), 0, w)
        assert not rec.passed

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            validate_witness(paper_example(100, 1), 2, self._witness(4, 1))

    def test_overstated_margin_caught(self):
        rep = solve_feasibility(paper_example(100, 1), 1)
        w = rep.witness
        assert validate_witness(paper_example(100, 1), 1, w).passed
        fake = Witness(w.P, w.Q, w.T, w.alpha, w.beta, margin=10 * w.margin + 1.0)
        rec = validate_witness(paper_example(100, 1), 1, fake)
        assert not rec.passed


class TestPaperCases:
    def test_case_a_order_one_feasible(self):
        rep = solve_feasibility(paper_example(100, 1), 1)
        assert rep.feasible and rep.status is SolverStatus.OPTIMAL
        assert rep.margin > 1e-7
        assert rep.witness.margin == rep.margin

    def test_case_a_order_zero_threshold(self):
        # the order-0 test certifies K=100 only above gamma ~ 1.15
        assert not solve_feasibility(paper_example(100, 1.0), 0).feasible
        assert solve_feasibility(paper_example(100, 1.3), 0).feasible

    @pytest.mark.parametrize("N", [0, 4, 8, 12])
    def test_case_b_infeasible(self, N):
        rep = solve_feasibility(paper_example(100, 0.2), N)
        assert not rep.feasible
        assert rep.status is SolverStatus.INFEASIBLE
        assert rep.witness is None

    def test_case_c_low_order_infeasible(self):
        assert solve_feasibility(paper_example(100, 0.05), 4).status is SolverStatus.INFEASIBLE


def test_round_trip_every_optimal_witness(feasible_instances):
    for sys, rep in feasible_instances:
        assert rep.status is SolverStatus.OPTIMAL
        assert np.abs(rep.witness.to_vector()).max() == pytest.approx(1e6)
        assert validate_witness(sys, rep.order, rep.witness, tol=1e-6).passed


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_homogeneous_scaling(feasible_instances, c):
    for sys, rep in feasible_instances:
        w = rep.witness.scaled(c)
        rec = validate_witness(sys, rep.order, w)
        assert rec.passed
        assert rec.margin == pytest.approx(c * rep.witness.margin, rel=1e-6)


def test_witness_invariant_tolerance(feasible_instances):
    for sys, rep in feasible_instances:
        w = rep.witness
        tol = 1e-7 * (1 + np.abs(w.to_vector()).max())
        rec = validate_witness(sys, rep.order, w)
        assert rec.phi_min_eig >= w.margin - tol
        assert rec.psi_max_eig <= -w.margin + tol
        assert min(w.alpha, w.beta) >= w.margin - tol


def test_deterministic():
    sys = paper_example(100, 0.05)
    for N in (7, 8):
        a, b = solve_feasibility(sys, N), solve_feasibility(sys, N)
        assert a.feasible == b.feasible


def test_witness_dict_round_trip():
    rep = solve_feasibility(paper_example(100, 1), 1)
    d = json.loads(json.dumps(rep.witness.to_dict()))
    w = Witness.from_dict(d)
    assert np.array_equal(w.to_vector(), rep.witness.to_vector())
    assert w.margin == rep.witness.margin
    assert validate_witness(paper_example(100, 1), 1, w).passed


def test_from_vector_layout():
    lay = DecisionLayout(2, 1)
    w = Witness.from_vector(lay, np.arange(lay.total_dim, dtype=float))
    assert w.order == 1
    assert np.array_equal(w.to_vector(), np.arange(lay.total_dim))


def test_solver_options_from_dict():
    opts = SolverOptions.from_dict({"max_iterations": 50, "norm_box": 10.0})
    assert opts.max_iterations == 50 and opts.norm_box == 10.0
    with pytest.raises(ValueError, match="bogus"):
        SolverOptions.from_dict({"bogus": 1})


def test_iteration_cap_reports_trouble():
    rep = solve_feasibility(paper_example(100, 0.05), 8, SolverOptions(max_iterations=2))
    assert rep.status is SolverStatus.NUMERICAL_TROUBLE
    assert not rep.feasible


def test_cvxpy_backend_agrees():
    sys = paper_example(100, 1)
    for N in (0, 1):
        direct = solve_feasibility(sys, N)
        via_cvxpy = solve_feasibility(sys, N, SolverOptions(backend="cvxpy"))
        assert direct.feasible == via_cvxpy.feasible


def test_direct_backend_only_clarabel():
    with pytest.raises(ValueError):
        SolverOptions(solver="SCS")
    SolverOptions(solver="SCS", backend="cvxpy")


def test_svec_inner_product():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 5))
    Y = rng.normal(size=(5, 5))
    X, Y = X + X.T, Y + Y.T
    assert svec(X) @ svec(Y) == pytest.approx(np.trace(X @ Y))
