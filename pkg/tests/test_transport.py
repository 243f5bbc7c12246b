"""
Tests for the cost matrix, assignment, exact OT, Sinkhorn and 1-D W2.
"""

import itertools

import numpy as np
import pytest

from core.errors import InvalidArgumentError, PlanInvariantError
from core.schema import CostMatrix, PointCloud, TransportPlan
from solvers.transport import (
    assignment_plan,
    check_plan,
    cost_matrix,
    sinkhorn,
    solve_assignment,
    solve_discrete_ot,
    transport_plan,
    w2_1d,
    wasserstein2,
)


def random_cost(rng, rows, cols):
    return CostMatrix(entries=rng.random((rows, cols)))


class TestCostMatrix:
    def test_zero_diagonal(self, random_cloud):
        C = cost_matrix(random_cloud, random_cloud)
        np.testing.assert_allclose(np.diag(C.entries), 0.0, atol=1e-12)

    def test_scalar(self):
        C = cost_matrix(PointCloud(points=[[0.0]]), PointCloud(points=[[1.0]]))
        assert C.entries[0, 0] == 1.0

    def test_double_loop(self, rng):
        A, B = rng.random((6, 3)), rng.random((4, 3))
        C = cost_matrix(PointCloud(points=A), PointCloud(points=B)).entries
        for i in range(6):
            for j in range(4):
                assert C[i, j] == pytest.approx(np.sum((A[i] - B[j]) ** 2))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            cost_matrix(PointCloud(points=[[0.0]]), PointCloud(points=[[0.0, 1.0]]))


class TestAssignment:
    def test_identity(self):
        perm, total = solve_assignment(CostMatrix(entries=[[0.0, 1.0], [1.0, 0.0]]))
        assert perm.tolist() == [0, 1] and total == 0.0

    def test_brute_force_small(self, rng):
        for _ in range(100):
            N = int(rng.integers(1, 8))
            C = rng.random((N, N))
            perms = np.array(list(itertools.permutations(range(N))))
            best = C[np.arange(N), perms].sum(axis=1).min()
            _, total = solve_assignment(CostMatrix(entries=C))
            assert total == pytest.approx(best, abs=1e-12)

    def test_non_square(self, rng):
        with pytest.raises(InvalidArgumentError):
            solve_assignment(random_cost(rng, 3, 4))

    def test_plan_form(self, rng):
        plan = assignment_plan(random_cost(rng, 5, 5))
        assert plan.method == "assignment"
        np.testing.assert_allclose(plan.mass.sum(axis=0), 0.2)


class TestDiscreteOT:
    def test_diagonal_plan(self, random_cloud):
        plan = solve_discrete_ot(None, None, cost_matrix(random_cloud, random_cloud))
        assert plan.total_cost == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(np.diag(plan.mass), 1.0 / 50)

    def test_matches_assignment(self, rng):
        for N in range(2, 8):
            C = random_cost(rng, N, N)
            _, total = solve_assignment(C)
            assert solve_discrete_ot(None, None, C).total_cost == pytest.approx(total / N, abs=1e-9)

    def test_symmetry(self, rng):
        C = random_cost(rng, 6, 9)
        mu, nu = rng.random(6), rng.random(9)
        mu, nu = mu / mu.sum(), nu / nu.sum()
        forward = solve_discrete_ot(mu, nu, C).total_cost
        backward = solve_discrete_ot(nu, mu, C.T).total_cost
        assert forward == pytest.approx(backward, abs=1e-9)

    def test_scaling(self, rng):
        for _ in range(50):
            C = random_cost(rng, 5, 5)
            base = solve_discrete_ot(None, None, C)
            scaled = solve_discrete_ot(None, None, CostMatrix(entries=3.0 * C.entries))
            assert scaled.total_cost == pytest.approx(3.0 * base.total_cost, rel=1e-9, abs=1e-12)

    def test_unbalanced(self, rng):
        with pytest.raises(InvalidArgumentError):
            solve_discrete_ot([0.5, 0.5], [0.5, 0.6], random_cost(rng, 2, 2))

    def test_negative_weights(self, rng):
        with pytest.raises(InvalidArgumentError):
            solve_discrete_ot([1.5, -0.5], [0.5, 0.5], random_cost(rng, 2, 2))


class TestSinkhorn:
    def test_close_to_exact(self, rng):
        A, B = rng.random((64, 2)), rng.random((64, 2))
        C = cost_matrix(PointCloud(points=A), PointCloud(points=B))
        exact = solve_discrete_ot(None, None, C).total_cost
        eps = 1e-3 * float(np.median(C.entries))
        plan = sinkhorn(None, None, C, eps)
        assert plan.total_cost == pytest.approx(exact, rel=0.01)
        assert plan.method in ("sinkhorn", "sinkhorn_log")

    def test_product_coupling_for_huge_epsilon(self, rng):
        C = random_cost(rng, 4, 5)
        mu, nu = np.full(4, 0.25), np.full(5, 0.2)
        plan = sinkhorn(mu, nu, C, 1e6)
        np.testing.assert_allclose(plan.mass, np.outer(mu, nu), atol=1e-6)
        assert plan.converged

    def test_rejects_nonpositive_epsilon(self, rng):
        with pytest.raises(InvalidArgumentError):
            sinkhorn(None, None, random_cost(rng, 3, 3), 0.0)


class TestW2OneDimensional:
    def test_identical(self):
        assert w2_1d([0.0, 1.0, 5.0], [0.0, 1.0, 5.0], [0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_point_masses(self):
        assert w2_1d([0.0], [1.0]) == pytest.approx(1.0)

    def test_shift(self):
        assert w2_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_matches_exact_solver(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            n, m = int(rng.integers(1, 65)), int(rng.integers(1, 65))
            a, b = rng.standard_normal(n), rng.standard_normal(m) + 0.5
            mu, nu = rng.random(n) + 0.1, rng.random(m) + 0.1
            mu, nu = mu / mu.sum(), nu / nu.sum()
            C = cost_matrix(PointCloud(points=a[:, None]), PointCloud(points=b[:, None]))
            exact = solve_discrete_ot(mu, nu, C).total_cost
            assert w2_1d(a, b, mu, nu) ** 2 == pytest.approx(exact, abs=1e-9)

    def test_unbalanced(self):
        with pytest.raises(InvalidArgumentError):
            w2_1d([0.0], [1.0], [1.0], [2.0])


class TestPlanChecks:
    def test_rejects_bad_marginal(self):
        C = CostMatrix(entries=[[0.0, 1.0], [1.0, 0.0]])
        plan = TransportPlan(mass=[[0.5, 0.0], [0.0, 0.4]], source_marginal=[0.5, 0.5],
                             target_marginal=[0.5, 0.5], total_cost=0.0)
        with pytest.raises(PlanInvariantError):
            check_plan(plan, C)

    def test_rejects_inconsistent_cost(self):
        C = CostMatrix(entries=[[0.0, 1.0], [1.0, 0.0]])
        plan = TransportPlan(mass=[[0.0, 0.5], [0.5, 0.0]], source_marginal=[0.5, 0.5],
                             target_marginal=[0.5, 0.5], total_cost=0.0)
        with pytest.raises(PlanInvariantError):
            check_plan(plan, C)


class TestWasserstein2:
    def test_triangle_inequality(self, rng):
        for _ in range(20):
            A, B, C = (PointCloud(points=rng.standard_normal((int(rng.integers(3, 25)), 2)) + rng.random(2))
                       for _ in range(3))
            assert wasserstein2(A, C) <= wasserstein2(A, B) + wasserstein2(B, C) + 1e-9

    def test_symmetric_and_zero_on_itself(self, random_cloud, rng):
        other = PointCloud(points=rng.random((17, 3)))
        assert wasserstein2(random_cloud, random_cloud) == pytest.approx(0.0, abs=1e-9)
        assert wasserstein2(random_cloud, other) == pytest.approx(wasserstein2(other, random_cloud), abs=1e-9)


class TestTransportPlan:
    def test_routes_to_assignment(self, rng):
        A, B = PointCloud(points=rng.random((10, 2))), PointCloud(points=rng.random((10, 2)))
        assert transport_plan(A, B).method == "assignment"

    def test_routes_to_simplex(self, rng):
        A, B = PointCloud(points=rng.random((10, 2))), PointCloud(points=rng.random((7, 2)))
        assert transport_plan(A, B).method == "network-simplex"

    def test_falls_back_to_sinkhorn(self, rng):
        A, B = PointCloud(points=rng.random((30, 2))), PointCloud(points=rng.random((30, 2)))
        exact = wasserstein2(A, B)
        plan = transport_plan(A, B, exact_limit=10, epsilon_factor=0.01)
        assert plan.method in ("sinkhorn", "sinkhorn_log")
        assert plan.epsilon is not None
        assert plan.w2 == pytest.approx(exact, rel=0.1)

    def test_all_zero_costs(self):
        A = PointCloud(points=np.zeros((12, 2)))
        plan = transport_plan(A, A, exact_limit=4)
        assert plan.method == "trivial" and plan.total_cost == 0.0
