import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serls.errors import InvalidInputError
from serls.qp import (
    DEGENERATE,
    INFEASIBLE,
    OPTIMAL,
    QpSolution,
    QuadraticProgram,
    kkt_residual,
    solve_qp,
)


def make_qp(h, f, a_ineq=None, b_ineq=None, a_eq=None, b_eq=None, lower=None, upper=None):
    h = np.asarray(h, dtype=float)
    dim = h.shape[0]
    return QuadraticProgram(
        h=h,
        f=np.asarray(f, dtype=float),
        a_ineq=np.zeros((0, dim)) if a_ineq is None else np.asarray(a_ineq, dtype=float),
        b_ineq=np.zeros(0) if b_ineq is None else np.asarray(b_ineq, dtype=float),
        a_eq=np.zeros((0, dim)) if a_eq is None else np.asarray(a_eq, dtype=float),
        b_eq=np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float),
        lower=lower,
        upper=upper,
    )


def kkt_linear_solve(h, f, a_eq, b_eq):
    """Oracle: equality-constrained QP via the direct KKT linear system."""
    me = a_eq.shape[0]
    dim = h.shape[0]
    kkt = np.block([[h, a_eq.T], [a_eq, np.zeros((me, me))]])
    rhs = np.concatenate([-f, b_eq])
    z = np.linalg.solve(kkt, rhs)
    return z[:dim], z[dim:]


def random_convex_qp(rng, dim, me):
    m = rng.normal(size=(dim, dim))
    h = m.T @ m + (0.5 + rng.uniform()) * np.eye(dim)
    f = rng.normal(size=dim)
    a_eq = rng.normal(size=(me, dim))
    b_eq = rng.normal(size=me)
    return h, f, a_eq, b_eq


class TestSolveQpExamples:
    def test_unconstrained_scalar(self):
        # minimize beta^2 - 2 beta
        sol = solve_qp(make_qp([[2.0]], [-2.0]))
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.beta, [1.0], atol=1e-12)

    def test_active_bound_at_constrained_optimum(self):
        sol = solve_qp(make_qp([[2.0]], [-2.0], a_ineq=[[1.0]], b_ineq=[0.0]))
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.beta, [0.0], atol=1e-12)
        np.testing.assert_allclose(sol.ineq_multipliers, [2.0], atol=1e-10)

    def test_equality_constrained_matches_kkt_oracle(self):
        h = 2.0 * np.eye(2)
        f = np.array([-2.0, -4.0])
        a_eq = np.array([[1.0, 1.0]])
        b_eq = np.array([1.0])
        beta_oracle, nu_oracle = kkt_linear_solve(h, f, a_eq, b_eq)
        np.testing.assert_allclose(beta_oracle, [0.0, 1.0], atol=1e-12)
        sol = solve_qp(make_qp(h, f, a_eq=a_eq, b_eq=b_eq))
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.beta, beta_oracle, atol=1e-10)
        np.testing.assert_allclose(sol.eq_multipliers, nu_oracle, atol=1e-10)


class TestKktResidual:
    def test_optimal_point_small_residual(self):
        qp = make_qp([[2.0]], [-2.0])
        sol = solve_qp(qp)
        assert kkt_residual(qp, sol) <= 1e-10

    def test_perturbed_point_large_residual(self):
        qp = make_qp([[2.0]], [-2.0])
        sol = solve_qp(qp)
        perturbed = QpSolution(
            beta=sol.beta + 1.0,
            status=sol.status,
            eq_multipliers=sol.eq_multipliers,
            ineq_multipliers=sol.ineq_multipliers,
            kkt_residual=0.0,
            iterations=sol.iterations,
        )
        assert kkt_residual(qp, perturbed) >= 1.0

    def test_equality_example_with_oracle_multipliers(self):
        h = 2.0 * np.eye(2)
        f = np.array([-2.0, -4.0])
        a_eq = np.array([[1.0, 1.0]])
        b_eq = np.array([1.0])
        beta, nu = kkt_linear_solve(h, f, a_eq, b_eq)
        qp = make_qp(h, f, a_eq=a_eq, b_eq=b_eq)
        sol = QpSolution(
            beta=beta,
            status=OPTIMAL,
            eq_multipliers=nu,
            ineq_multipliers=np.zeros(0),
            kkt_residual=0.0,
            iterations=0,
        )
        assert kkt_residual(qp, sol) <= 1e-8

    def test_dimension_mismatch(self):
        qp = make_qp([[2.0]], [-2.0])
        bad = QpSolution(
            beta=np.zeros(2),
            status=OPTIMAL,
            eq_multipliers=np.zeros(0),
            ineq_multipliers=np.zeros(0),
            kkt_residual=0.0,
            iterations=0,
        )
        with pytest.raises(InvalidInputError):
            kkt_residual(qp, bad)


class TestSolveQpProperties:
    def test_random_equality_only_matches_kkt_oracle(self):
        rng = np.random.default_rng(20240501)
        for _ in range(60):
            dim = int(rng.integers(1, 12))
            me = int(rng.integers(0, max(1, dim // 2) + 1))
            h, f, a_eq, b_eq = random_convex_qp(rng, dim, me)
            beta_oracle, _ = kkt_linear_solve(h, f, a_eq, b_eq)
            sol = solve_qp(make_qp(h, f, a_eq=a_eq, b_eq=b_eq))
            assert sol.status == OPTIMAL
            denom = max(1.0, float(np.max(np.abs(beta_oracle))))
            assert float(np.max(np.abs(sol.beta - beta_oracle))) / denom <= 1e-8

    def test_inactive_inequality_changes_nothing(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            dim = int(rng.integers(1, 8))
            h, f, _, _ = random_convex_qp(rng, dim, 0)
            base = solve_qp(make_qp(h, f))
            row = rng.normal(size=(1, dim))
            slack_rhs = row @ base.beta + 1.0 + rng.uniform()
            sol = solve_qp(make_qp(h, f, a_ineq=row, b_ineq=slack_rhs))
            assert sol.status == OPTIMAL
            np.testing.assert_allclose(sol.beta, base.beta, atol=1e-8)

    def test_optimum_beats_random_feasible_points(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            dim = int(rng.integers(2, 6))
            h, f, _, _ = random_convex_qp(rng, dim, 0)
            a = rng.normal(size=(3, dim))
            interior = rng.normal(size=dim)
            b = a @ interior + rng.uniform(0.5, 2.0, size=3)
            qp = make_qp(h, f, a_ineq=a, b_ineq=b)
            sol = solve_qp(qp)
            assert sol.status == OPTIMAL
            opt_val = qp.objective(sol.beta)
            found = 0
            while found < 100:
                probe = interior + rng.normal(scale=2.0, size=dim)
                if np.all(a @ probe <= b):
                    found += 1
                    assert opt_val <= qp.objective(probe) + 1e-9

    def test_dual_feasibility(self):
        rng = np.random.default_rng(1234)
        for _ in range(30):
            dim = int(rng.integers(2, 7))
            h, f, _, _ = random_convex_qp(rng, dim, 0)
            a = rng.normal(size=(int(rng.integers(1, 5)), dim))
            interior = rng.normal(size=dim)
            b = a @ interior + rng.uniform(0.0, 1.0, size=a.shape[0])
            sol = solve_qp(make_qp(h, f, a_ineq=a, b_ineq=b))
            assert sol.status == OPTIMAL
            if sol.ineq_multipliers.size:
                assert float(np.min(sol.ineq_multipliers)) >= -1e-10

    @given(
        st.integers(min_value=1, max_value=8),
        st.integers(min_value=0, max_value=6),
        st.integers(min_value=0, max_value=2),
        st.integers(min_value=0, max_value=10**6),
    )
    @settings(max_examples=60, deadline=None)
    def test_fuzzed_instances_certify(self, dim, mi, me, seed):
        me = min(me, dim - 1) if dim > 1 else 0
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(dim, dim))
        h = m.T @ m + (0.1 + rng.uniform()) * np.eye(dim)
        f = rng.normal(size=dim)
        a_eq = rng.normal(size=(me, dim))
        interior = rng.normal(size=dim)
        b_eq = a_eq @ interior
        a = rng.normal(size=(mi, dim))
        b = a @ interior + rng.uniform(0.0, 2.0, size=mi)
        qp = make_qp(h, f, a_ineq=a, b_ineq=b, a_eq=a_eq, b_eq=b_eq)
        sol = solve_qp(qp)
        assert sol.status == OPTIMAL
        assert kkt_residual(qp, sol) <= 1e-8
        if sol.ineq_multipliers.size:
            assert float(np.min(sol.ineq_multipliers)) >= -1e-10

    def test_mixed_constraints_certified_by_kkt(self):
        rng = np.random.default_rng(5150)
        for _ in range(30):
            dim = int(rng.integers(2, 9))
            me = int(rng.integers(0, 2))
            h, f, a_eq, b_eq = random_convex_qp(rng, dim, me)
            interior = np.linalg.lstsq(a_eq, b_eq, rcond=None)[0] if me else rng.normal(size=dim)
            a = rng.normal(size=(int(rng.integers(1, 6)), dim))
            b = a @ interior + rng.uniform(0.0, 1.5, size=a.shape[0])
            qp = make_qp(h, f, a_ineq=a, b_ineq=b, a_eq=a_eq if me else None, b_eq=b_eq if me else None)
            sol = solve_qp(qp)
            assert sol.status == OPTIMAL
            assert sol.kkt_residual <= 1e-9
            assert kkt_residual(qp, sol) <= 1e-9


class TestSolveQpEdges:
    def test_infeasible_inequalities_report_certificate_row(self):
        # x <= 0 and -x <= -1 cannot both hold.
        qp = make_qp([[2.0]], [0.0], a_ineq=[[1.0], [-1.0]], b_ineq=[0.0, -1.0])
        sol = solve_qp(qp)
        assert sol.status == INFEASIBLE
        assert sol.infeasible_row is not None

    def test_inconsistent_equalities_report_row(self):
        qp = make_qp([[2.0]], [0.0], a_eq=[[1.0], [1.0]], b_eq=[0.0, 1.0])
        sol = solve_qp(qp)
        assert sol.status == INFEASIBLE
        assert sol.infeasible_row in (0, 1)

    def test_infeasibility_propagates_as_error_from_fits(self):
        from serls.engineered import solve_engineered_qp
        from serls.errors import InfeasibleError

        qp = make_qp([[2.0]], [0.0], a_ineq=[[1.0], [-1.0]], b_ineq=[0.0, -1.0])
        with pytest.raises(InfeasibleError) as excinfo:
            solve_engineered_qp(qp)
        assert excinfo.value.row is not None

    def test_bounds_folded_into_inequalities(self):
        # minimize (x-2)^2 with x <= 1: bound is active, multiplier is 2.
        sol = solve_qp(
            make_qp([[2.0]], [-4.0], lower=np.array([-np.inf]), upper=np.array([1.0]))
        )
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.beta, [1.0], atol=1e-10)
        np.testing.assert_allclose(sol.ineq_multipliers, [2.0], atol=1e-9)

    def test_infinite_bounds_are_no_ops(self):
        base = solve_qp(make_qp([[2.0]], [-2.0]))
        bounded = solve_qp(
            make_qp(
                [[2.0]],
                [-2.0],
                lower=np.array([-np.inf]),
                upper=np.array([np.inf]),
            )
        )
        np.testing.assert_array_equal(base.beta, bounded.beta)

    def test_rank_deficient_hessian_takes_degenerate_path(self):
        # Singular H, consistent objective: minimum-norm solution expected.
        h = np.array([[2.0, 2.0], [2.0, 2.0]])
        f = np.array([-2.0, -2.0])
        sol = solve_qp(make_qp(h, f))
        assert sol.status == DEGENERATE
        # Stationarity H x = -f collapses to x1 + x2 = 1; any such point is optimal.
        assert abs(sol.beta[0] + sol.beta[1] - 1.0) <= 1e-8

    def test_asymmetric_h_rejected(self):
        with pytest.raises(InvalidInputError):
            make_qp([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0])

    def test_nonpositive_tol_rejected(self):
        with pytest.raises(InvalidInputError):
            solve_qp(make_qp([[2.0]], [0.0]), tol=0.0)

    def test_equality_pinned_variable(self):
        # Pin one coordinate; the other coordinate solves freely.
        h = np.diag([2.0, 4.0])
        f = np.array([-2.0, -8.0])
        sol = solve_qp(make_qp(h, f, a_eq=[[1.0, 0.0]], b_eq=[5.0]))
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.beta, [5.0, 2.0], atol=1e-10)

    def test_vertex_optimum_activates_every_constraint(self):
        # Optimum at the origin with all coordinate constraints active.
        rng = np.random.default_rng(6)
        dim = 20
        c = rng.uniform(0.5, 2.0, size=dim)
        sol = solve_qp(
            make_qp(2 * np.eye(dim), -2 * c, a_ineq=np.eye(dim), b_ineq=np.zeros(dim))
        )
        assert sol.status == OPTIMAL
        assert float(np.max(np.abs(sol.beta))) <= 1e-9
        np.testing.assert_allclose(sol.ineq_multipliers, 2 * c, atol=1e-8)

    def test_duplicated_constraint_rows(self):
        # Exact duplicates force rank-deficient working sets; the fallback
        # KKT solve must still certify the optimum.
        rng = np.random.default_rng(16)
        dim = 30
        m = rng.normal(size=(dim, dim))
        h = m.T @ m + np.eye(dim)
        f = rng.normal(size=dim)
        a1 = rng.normal(size=(10, dim))
        interior = rng.normal(size=dim)
        b1 = a1 @ interior + 0.001
        qp = make_qp(h, f, a_ineq=np.vstack([a1, a1]), b_ineq=np.concatenate([b1, b1]))
        sol = solve_qp(qp)
        assert kkt_residual(qp, sol) <= 1e-8

    def test_moderate_scale_mixed_problem(self):
        rng = np.random.default_rng(23)
        dim, mi, me = 100, 60, 10
        m = rng.normal(size=(dim, dim))
        h = m.T @ m + np.eye(dim)
        f = rng.normal(size=dim)
        a_eq = rng.normal(size=(me, dim))
        interior = rng.normal(size=dim)
        b_eq = a_eq @ interior
        a = rng.normal(size=(mi, dim))
        b = a @ interior + rng.uniform(0.01, 1.0, size=mi)
        qp = make_qp(h, f, a_ineq=a, b_ineq=b, a_eq=a_eq, b_eq=b_eq)
        sol = solve_qp(qp)
        assert sol.status == OPTIMAL
        assert kkt_residual(qp, sol) <= 1e-9

    def test_iteration_cap_reports_exhaustion(self):
        from serls.qp import MAX_ITERATIONS

        rng = np.random.default_rng(4)
        dim = 6
        h, f, _, _ = random_convex_qp(rng, dim, 0)
        interior = rng.normal(size=dim)
        a = rng.normal(size=(8, dim))
        b = a @ interior + 0.01
        sol = solve_qp(make_qp(h, f, a_ineq=a, b_ineq=b), max_iter=1)
        assert sol.status == MAX_ITERATIONS
        assert sol.iterations == 1
        # Best iterate is still feasible.
        assert float(np.max(a @ sol.beta - b)) <= 1e-9
