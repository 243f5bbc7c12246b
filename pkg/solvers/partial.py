import cvxpy as cp
import numpy as np
import logging

from config import settings
from core.errors import CapacityError, InvalidArgumentError, NumericFailureError
from core.schema import CostMatrix, TransportPlan
from solvers.transport import as_weights, check_plan

logger = logging.getLogger(__name__)


class PartialTransportSolver:
    """
    Optimal partial transport as a dense LP in CVXPY.
    Objective: Minimize sum(P * C).
    Constraints:
    1. Dominated marginals (P 1 <= f, P^T 1 <= g)
    2. Nonnegative mass (P >= 0)
    3. Transported mass (sum P = M)
    """

    def __init__(self, limit: int = None, tol: float = None):
        self.limit = settings.PARTIAL_OT_LIMIT if limit is None else limit
        self.tol = settings.LP_TOL if tol is None else tol

    def solve(self, f_weights, g_weights, cost: CostMatrix, M: float) -> TransportPlan:
        f = as_weights(f_weights, cost.rows, "f_weights")
        g = as_weights(g_weights, cost.cols, "g_weights")
        if cost.rows > self.limit or cost.cols > self.limit:
            size = max(cost.rows, cost.cols)
            raise CapacityError(f"Partial OT LP of {cost.rows}x{cost.cols} exceeds {self.limit} atoms per side",
                                size=size, limit=self.limit)
        cap = min(f.sum(), g.sum())
        if M < 0 or M > cap * (1.0 + 1e-12):
            raise InvalidArgumentError(f"Transported mass M={M} must lie in [0, {cap:.17g}]")
        M = min(float(M), float(cap))

        if M == 0:
            plan = TransportPlan(mass=np.zeros(cost.entries.shape), source_marginal=f, target_marginal=g,
                                 total_cost=0.0, method="partial-lp")
            check_plan(plan, cost, partial=True, tol=self.tol)
            return plan

        logger.info(f"Setting up partial OT LP: {cost.rows}x{cost.cols} atoms, M={M:.6g}")

        # Variables
        P = cp.Variable(cost.entries.shape, nonneg=True)

        objective = cp.Minimize(cp.sum(cp.multiply(cost.entries, P)))
        constraints = [
            cp.sum(P, axis=1) <= f,
            cp.sum(P, axis=0) <= g,
            cp.sum(P) == M,
        ]
        prob = cp.Problem(objective, constraints)

        try:
            prob.solve()
        except cp.error.SolverError as e:
            logger.error(f"Partial OT LP crashed: {e}")
            raise NumericFailureError(f"Partial OT LP solver failed: {e}") from e

        if prob.status not in [cp.OPTIMAL, cp.OPTIMAL_INACCURATE]:
            logger.error(f"Partial OT LP failed with status: {prob.status}")
            raise NumericFailureError(f"Partial OT LP status {prob.status}")
        if P.value is None:
            raise NumericFailureError("Partial OT LP returned no solution")

        # Interior-point round-off
        mass = np.maximum(np.asarray(P.value, dtype=np.float64), 0.0)
        moved = float(mass.sum())
        if abs(moved - M) > self.tol * max(1.0, M):
            raise NumericFailureError(f"Partial plan moves {moved:.10g}, expected {M:.10g}",
                                      achieved_tolerance=abs(moved - M))

        plan = TransportPlan(mass=mass, source_marginal=f, target_marginal=g,
                             total_cost=float(np.sum(mass * cost.entries)), method="partial-lp",
                             converged=prob.status == cp.OPTIMAL)
        check_plan(plan, cost, partial=True, tol=self.tol)
        return plan


def solve_partial_ot(f_weights, g_weights, cost: CostMatrix, M: float,
                     limit: int = None, tol: float = None) -> TransportPlan:
    """
    Cheapest plan moving total mass M with row sums <= f and column sums <= g.
    Desk scale only: at most `limit` atoms per side.
    """
    return PartialTransportSolver(limit=limit, tol=tol).solve(f_weights, g_weights, cost, M)
