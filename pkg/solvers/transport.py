import logging
import warnings
from typing import Tuple

import numpy as np
import ot
from scipy.optimize import linear_sum_assignment

from config import settings
from core.errors import InvalidArgumentError, NumericFailureError, PlanInvariantError
from core.geometry import pairwise_sq_distances
from core.schema import CostMatrix, PointCloud, TransportPlan

logger = logging.getLogger(__name__)

# Sinkhorn plans are "converged" once both marginals are this close.
SINKHORN_MARGINAL_TOL = 1e-6


def cost_matrix(A: PointCloud, B: PointCloud) -> CostMatrix:
    """Squared Euclidean ground cost c_ij = ||a_i - b_j||^2."""
    if A.dim != B.dim:
        raise InvalidArgumentError(f"Cannot compare clouds of dimension {A.dim} and {B.dim}")
    return CostMatrix(entries=pairwise_sq_distances(A.points, B.points))


def as_weights(w, size: int, name: str) -> np.ndarray:
    if w is None:
        return np.full(size, 1.0 / size)
    arr = np.asarray(w, dtype=np.float64).reshape(-1)
    if arr.size != size:
        raise InvalidArgumentError(f"{name} has {arr.size} weights for {size} support points")
    if arr.size == 0:
        raise InvalidArgumentError(f"{name} is empty")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgumentError(f"{name} must be finite and nonnegative")
    return arr


def _check_balanced(mu: np.ndarray, nu: np.ndarray, tol: float = 1e-9):
    diff = abs(mu.sum() - nu.sum())
    if diff > tol * max(1.0, mu.sum()):
        raise InvalidArgumentError(f"Unbalanced masses: {mu.sum():.17g} vs {nu.sum():.17g}")
    if mu.sum() <= 0:
        raise InvalidArgumentError("Total mass must be positive")


def check_plan(plan: TransportPlan, cost: CostMatrix, partial: bool = False, tol: float = None):
    """
    Post-hoc plan invariants: nonnegative mass of the cost's shape, marginals equal to (or,
    for partial plans, dominated by) the declared ones, and total_cost = sum(mass * cost).
    Raises PlanInvariantError with the worst violation found.
    """
    tol = settings.PLAN_TOL if tol is None else tol
    mass = plan.mass
    if mass.shape != cost.entries.shape:
        raise PlanInvariantError(f"Plan shape {mass.shape} does not match cost shape {cost.entries.shape}")
    scale = max(1.0, float(plan.source_marginal.sum()))
    violations = {"negative mass": max(0.0, -float(mass.min()))}
    rows = mass.sum(axis=1) - plan.source_marginal
    cols = mass.sum(axis=0) - plan.target_marginal
    if partial:
        violations["row excess"] = max(0.0, float(rows.max()))
        violations["column excess"] = max(0.0, float(cols.max()))
    else:
        violations["row marginal"] = float(np.abs(rows).max())
        violations["column marginal"] = float(np.abs(cols).max())
    recomputed = float(np.sum(mass * cost.entries))
    cost_tol = tol * max(1.0, abs(recomputed))
    for name, value in violations.items():
        if value > tol * scale:
            logger.error(f"Plan check failed ({plan.method}): {name} off by {value:.3g}")
            raise PlanInvariantError(f"Plan {name} off by {value:.3g} > {tol:.3g}", achieved_tolerance=value)
    if abs(recomputed - plan.total_cost) > cost_tol:
        raise PlanInvariantError(
            f"total_cost {plan.total_cost:.17g} disagrees with sum(mass*cost) {recomputed:.17g}",
            achieved_tolerance=abs(recomputed - plan.total_cost),
        )


def solve_assignment(cost: CostMatrix) -> Tuple[np.ndarray, float]:
    """
    Minimum-cost perfect matching (scipy's shortest augmenting path).
    Returns perm with row i matched to column perm[i], and the summed cost.
    """
    if cost.rows != cost.cols:
        raise InvalidArgumentError(f"Assignment needs a square cost matrix, got {cost.rows}x{cost.cols}")
    rows, cols = linear_sum_assignment(cost.entries)
    perm = np.empty(cost.rows, dtype=np.intp)
    perm[rows] = cols
    total = float(cost.entries[rows, cols].sum())
    return perm, total


def assignment_plan(cost: CostMatrix) -> TransportPlan:
    """The assignment as a uniform-marginal TransportPlan (mass 1/N per matched pair)."""
    perm, total = solve_assignment(cost)
    size = cost.rows
    mass = np.zeros((size, size))
    mass[np.arange(size), perm] = 1.0 / size
    uniform = np.full(size, 1.0 / size)
    plan = TransportPlan(mass=mass, source_marginal=uniform, target_marginal=uniform,
                         total_cost=float(np.sum(mass * cost.entries)), method="assignment")
    check_plan(plan, cost)
    return plan


def solve_discrete_ot(mu, nu, cost: CostMatrix, max_iter: int = 1_000_000, tol: float = None) -> TransportPlan:
    """
    Exact discrete OT through POT's network simplex (ot.emd).
    Masses may differ by up to 1e-9; nu is rescaled onto mu's total before solving.
    """
    mu = as_weights(mu, cost.rows, "mu")
    nu = as_weights(nu, cost.cols, "nu")
    _check_balanced(mu, nu)
    nu = nu * (mu.sum() / nu.sum())

    mass, log = ot.emd(mu, nu, cost.entries, numItermax=max_iter, log=True)
    if log.get("warning"):
        logger.error(f"Network simplex stopped early: {log['warning']}")
        raise NumericFailureError(f"Network simplex did not reach optimality: {log['warning']}")
    mass = np.maximum(np.asarray(mass, dtype=np.float64), 0.0)
    plan = TransportPlan(mass=mass, source_marginal=mu, target_marginal=nu,
                         total_cost=float(np.sum(mass * cost.entries)), method="network-simplex")
    check_plan(plan, cost, tol=tol)
    return plan


def _run_sinkhorn(mu, nu, C, epsilon, max_iter, method):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mass, log = ot.sinkhorn(mu, nu, C, epsilon, method=method, numItermax=max_iter,
                                stopThr=1e-10, log=True)
    mass = np.asarray(mass, dtype=np.float64)
    numerical = any("numerical error" in str(w.message).lower() or issubclass(w.category, RuntimeWarning)
                    for w in caught)
    underflow = numerical or not np.all(np.isfinite(mass)) or mass.sum() <= 0
    return mass, log, underflow


def sinkhorn(mu, nu, cost: CostMatrix, epsilon: float, max_iter: int = None) -> TransportPlan:
    """
    Entropic OT plan. Runs the standard Sinkhorn-Knopp scaling first and retries in the
    log domain when the kernel underflows. The plan reports its marginal error and whether
    it reached SINKHORN_MARGINAL_TOL within max_iter; total_cost excludes the entropy term.
    """
    max_iter = settings.SINKHORN_MAX_ITER if max_iter is None else max_iter
    if epsilon <= 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    mu = as_weights(mu, cost.rows, "mu")
    nu = as_weights(nu, cost.cols, "nu")
    _check_balanced(mu, nu)
    nu = nu * (mu.sum() / nu.sum())

    method = "sinkhorn"
    mass, log, underflow = _run_sinkhorn(mu, nu, cost.entries, epsilon, max_iter, method)
    if underflow:
        logger.warning(f"Sinkhorn underflow at epsilon={epsilon:.3g}, retrying in the log domain")
        method = "sinkhorn_log"
        mass, log, underflow = _run_sinkhorn(mu, nu, cost.entries, epsilon, max_iter, method)
        if underflow:
            logger.error(f"Log-domain Sinkhorn failed at epsilon={epsilon:.3g}")
            raise NumericFailureError(f"Sinkhorn failed after log-domain retry (epsilon={epsilon:.3g})")

    marginal_error = float(max(np.abs(mass.sum(axis=1) - mu).max(), np.abs(mass.sum(axis=0) - nu).max()))
    converged = marginal_error <= SINKHORN_MARGINAL_TOL
    if not converged:
        logger.warning(f"Sinkhorn hit max_iter={max_iter} with marginal error {marginal_error:.3g}")
    plan = TransportPlan(mass=mass, source_marginal=mu, target_marginal=nu,
                         total_cost=float(np.sum(mass * cost.entries)), method=method,
                         converged=converged, marginal_error=marginal_error,
                         iterations=log.get("niter"), epsilon=float(epsilon))
    check_plan(plan, cost, tol=max(SINKHORN_MARGINAL_TOL, marginal_error) * (1.0 + 1e-9))
    return plan


def w2_1d(a, b, mu=None, nu=None) -> float:
    """
    W2 between weighted atoms on the line via the quantile formula: both cumulative weight
    ladders are merged and each constant piece contributes width * (F^-1 - G^-1)^2.
    Atoms are sorted first (stable), so unsorted input is accepted.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("w2_1d needs non-empty supports")
    mu = as_weights(mu, a.size, "mu")
    nu = as_weights(nu, b.size, "nu")
    _check_balanced(mu, nu)

    oa, ob = np.argsort(a, kind="stable"), np.argsort(b, kind="stable")
    a, mu = a[oa], mu[oa]
    b, nu = b[ob], nu[ob]
    ca, cb = np.cumsum(mu), np.cumsum(nu)
    total = ca[-1]
    cb = cb * (total / cb[-1])
    cb[-1] = total

    levels = np.unique(np.concatenate([ca, cb]))
    levels = levels[levels <= total]
    widths = np.diff(levels, prepend=0.0)
    keep = widths > 0
    levels, widths = levels[keep], widths[keep]
    mids = levels - 0.5 * widths
    ia = np.minimum(np.searchsorted(ca, mids, side="left"), a.size - 1)
    ib = np.minimum(np.searchsorted(cb, mids, side="left"), b.size - 1)
    cost = float(np.sum(widths * (a[ia] - b[ib]) ** 2))
    return float(np.sqrt(max(cost, 0.0)))


def transport_plan(A: PointCloud, B: PointCloud, mu=None, nu=None,
                   exact_limit: int = None, epsilon_factor: float = None) -> TransportPlan:
    """
    Routes a cloud-to-cloud OT problem to the cheapest exact method that applies:
    assignment for equal-size uniform clouds, network simplex up to exact_limit points
    per side, and Sinkhorn above it with epsilon = epsilon_factor * median nonzero cost.
    """
    exact_limit = settings.EXACT_SOLVER_LIMIT if exact_limit is None else exact_limit
    epsilon_factor = settings.SINKHORN_EPSILON_FACTOR if epsilon_factor is None else epsilon_factor
    cost = cost_matrix(A, B)
    size = max(cost.rows, cost.cols)
    uniform = mu is None and nu is None and cost.rows == cost.cols

    if size <= exact_limit:
        if uniform:
            return assignment_plan(cost)
        return solve_discrete_ot(mu, nu, cost)

    positive = cost.entries[cost.entries > 0]
    if positive.size == 0:
        mu_w, nu_w = as_weights(mu, cost.rows, "mu"), as_weights(nu, cost.cols, "nu")
        _check_balanced(mu_w, nu_w)
        return TransportPlan(mass=np.outer(mu_w, nu_w) / mu_w.sum(), source_marginal=mu_w,
                             target_marginal=nu_w, total_cost=0.0, method="trivial")
    epsilon = epsilon_factor * float(np.median(positive))
    logger.warning(f"{size} support points exceed the exact limit {exact_limit}; "
                   f"using Sinkhorn with epsilon={epsilon:.4g}")
    return sinkhorn(mu, nu, cost, epsilon)


def wasserstein2(A: PointCloud, B: PointCloud, mu=None, nu=None, exact_limit: int = None) -> float:
    """W2 between two clouds (uniform weights unless given); sqrt of the plan's squared-distance cost."""
    plan = transport_plan(A, B, mu, nu, exact_limit=exact_limit)
    logger.debug(f"W2 via {plan.method}: {plan.w2:.6g}")
    return plan.w2
