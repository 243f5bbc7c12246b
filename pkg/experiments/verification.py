import itertools
import logging
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from analytics.bounds import (
    ball_to_ball_w2,
    concentric_ball_w2,
    default_delta,
    optimal_rv,
    precision_bound_avg,
    precision_bound_worst,
)
from analytics.measures import discrete_precision, precision_recall_sweep
from core.errors import CapacityError, InvalidArgumentError
from core.geometry import sample_uniform_ball
from core.schema import AvgCaseParams, BoundParams, CostMatrix, PointCloud, VerificationResult
from config import settings
from data.synthetic import calibrate_r_u, coordinate_projection, project
from solvers.partial import solve_partial_ot
from solvers.transport import cost_matrix, solve_assignment, solve_discrete_ot

logger = logging.getLogger(__name__)

# Dense assignment on sampled balls stays exact up to this many points per side.
MAX_ASSIGNMENT_POINTS = 5000
CONCENTRIC_REL_TOL = 0.05
DISPLACEMENT_TOL = 0.15


def _noise_floor(n: int, r: float, N: int) -> float:
    # empirical W2 between two N-samples of one ball shrinks like N^(-1/max(n, 2))
    return 3.0 * r * N ** (-1.0 / max(n, 2))


def _matched_w2(A: np.ndarray, B: np.ndarray) -> Tuple[float, np.ndarray]:
    N = A.shape[0]
    if N > MAX_ASSIGNMENT_POINTS:
        raise CapacityError(f"{N} points per side exceed the assignment limit {MAX_ASSIGNMENT_POINTS}",
                            size=N, limit=MAX_ASSIGNMENT_POINTS)
    perm, total = solve_assignment(cost_matrix(PointCloud(points=A), PointCloud(points=B)))
    return math.sqrt(max(total, 0.0) / N), perm


def verify_concentric_ball(n: int, r1: float, r2: float, N: int, seed: int) -> VerificationResult:
    """
    Empirical W2 between N uniform samples of B_r2 and of B_r1 (independent seeds) against
    sqrt(n/(n+2)) (r2 - r1). The optimal matching must also stay close to the scaling map
    x -> (r1/r2) x: its mean displacement from that map, relative to the mean scaling shift,
    is held to DISPLACEMENT_TOL.
    """
    start = time.perf_counter()
    if not 0 <= r1 <= r2 or r2 <= 0:
        raise InvalidArgumentError(f"Need 0 <= r1 <= r2 and r2 > 0, got r1={r1}, r2={r2}")
    if N < 1:
        raise InvalidArgumentError(f"N must be positive, got {N}")
    logger.info(f"Concentric-ball check: n={n}, r1={r1}, r2={r2}, N={N}")

    A = sample_uniform_ball(n, r2, N, seed).points
    B = np.zeros_like(A) if r1 == 0 else sample_uniform_ball(n, r1, N, seed + 1).points
    observed, perm = _matched_w2(A, B)
    expected = concentric_ball_w2(n, r1, r2)

    conditions: Dict[str, bool] = {}
    details: Dict[str, float] = {"n": n, "N": N, "r1": r1, "r2": r2}
    scaled = (r1 / r2) * A
    shift = np.linalg.norm(scaled - A, axis=1).mean()
    if shift > 0:
        details["displacement_error"] = float(np.linalg.norm(B[perm] - scaled, axis=1).mean() / shift)
        conditions["displacement_within_tolerance"] = details["displacement_error"] <= DISPLACEMENT_TOL

    if r1 == r2:
        tolerance, kind = _noise_floor(n, r2, N), "upper"
    else:
        tolerance, kind = CONCENTRIC_REL_TOL, "relative"
    return VerificationResult.judge("concentric_ball", observed, expected, tolerance, kind,
                                    runtime_seconds=time.perf_counter() - start, details=details,
                                    conditions=conditions)


def verify_monotonicity(n: int, r_small: float, radii: Sequence[float], N: int, seed: int) -> VerificationResult:
    """
    W2 from uniform balls of growing radius to a fixed smaller ball: each empirical value
    must track ball_to_ball_w2 (within 5% or the sampling noise floor) and the sequence must
    not drop by more than the noise floor. The large balls share one unit sample rescaled
    per radius. observed is the worst violation ratio; 1.0 is the limit.
    """
    start = time.perf_counter()
    radii = np.asarray(list(radii), dtype=np.float64)
    if radii.size == 0 or np.any(np.diff(radii) <= 0) or radii[0] < r_small or r_small <= 0:
        raise InvalidArgumentError("radii must be increasing and at least r_small > 0")
    unit = sample_uniform_ball(n, 1.0, N, seed).points
    small = sample_uniform_ball(n, r_small, N, seed + 1).points

    empirical, closed = [], []
    for r in radii:
        w2, _ = _matched_w2(r * unit, small)
        empirical.append(w2)
        closed.append(ball_to_ball_w2(n, r, r_small))
    empirical, closed = np.array(empirical), np.array(closed)

    floor = _noise_floor(n, float(radii[-1]), N)
    allowed = np.maximum(CONCENTRIC_REL_TOL * closed, floor)
    error_ratio = float(np.max(np.abs(empirical - closed) / allowed))
    drops = np.maximum(empirical[:-1] - empirical[1:], 0.0) if radii.size > 1 else np.zeros(1)
    drop_ratio = float(drops.max() / floor)
    observed = max(error_ratio, drop_ratio)
    details = {f"w2_r{idx}": float(v) for idx, v in enumerate(empirical)}
    details.update({"max_error_ratio": error_ratio, "max_drop_ratio": drop_ratio, "noise_floor": floor})
    return VerificationResult.judge("monotonicity", observed, 0.0, 1.0, "upper",
                                    runtime_seconds=time.perf_counter() - start, details=details)


def _disc_grid(grid_side: int) -> np.ndarray:
    h = 2.0 / grid_side
    centers = -1.0 + h * (np.arange(grid_side) + 0.5)
    xx, yy = np.meshgrid(centers, centers, indexing="ij")
    cells = np.column_stack([xx.ravel(), yy.ravel()])
    return cells[np.linalg.norm(cells, axis=1) < 1.0]


def _nearest_cells(cells: np.ndarray, count: int, keys: Optional[np.ndarray] = None) -> np.ndarray:
    """Indices of the `count` cells closest to the origin, ties broken by index."""
    keys = np.sum(cells ** 2, axis=1) if keys is None else keys
    order = np.lexsort((np.arange(cells.shape[0]), keys))
    return np.sort(order[:count])


def _uniform_w2(A: np.ndarray, B: np.ndarray) -> float:
    plan = solve_discrete_ot(None, None, cost_matrix(PointCloud(points=A), PointCloud(points=B)))
    return plan.w2


def verify_iso_wasserstein(grid_side: int = 32, inner_radius_cells: float = 4.0, subset_cells: Optional[int] = None,
                           trials: int = 200, seed: int = 0) -> VerificationResult:
    """
    On a grid discretization of the unit disc, the concentric set of subset_cells cells
    must be at least as close (in W2) to the inner ball as every random subset of the same size.
    subset_cells defaults to twice the inner ball's cell count and is clamped to the exact OT limit.
    """
    start = time.perf_counter()
    cells = _disc_grid(grid_side)
    h = 2.0 / grid_side
    inner = cells[np.linalg.norm(cells, axis=1) < inner_radius_cells * h]
    if inner.shape[0] == 0:
        raise InvalidArgumentError(f"inner_radius_cells={inner_radius_cells} selects no cells")
    subset_cells = 2 * inner.shape[0] if subset_cells is None else subset_cells
    if not 1 <= subset_cells <= cells.shape[0]:
        raise InvalidArgumentError(f"subset_cells={subset_cells} must lie in [1, {cells.shape[0]}]")
    limit = settings.EXACT_SOLVER_LIMIT
    if subset_cells > limit:
        logger.warning(f"subset_cells={subset_cells} exceeds the exact OT limit; using {limit} cells")
        subset_cells = limit
    logger.info(f"Iso-Wasserstein check: {cells.shape[0]} disc cells, inner {inner.shape[0]}, "
                f"subsets of {subset_cells}, {trials} trials")

    concentric = _uniform_w2(cells[_nearest_cells(cells, subset_cells)], inner)
    rng = np.random.default_rng(seed)
    random_w2 = []
    for _ in range(trials):
        chosen = rng.choice(cells.shape[0], size=subset_cells, replace=False)
        random_w2.append(_uniform_w2(cells[np.sort(chosen)], inner))
    best_random = min(random_w2) if random_w2 else concentric
    wins = int(sum(concentric <= w + 1e-12 for w in random_w2))
    details = {"concentric_w2": concentric, "wins": wins, "trials": trials, "subset_cells": subset_cells,
               "mean_random_w2": float(np.mean(random_w2)) if random_w2 else concentric}
    return VerificationResult.judge("iso_wasserstein", concentric, best_random, 1e-12, "upper",
                                    runtime_seconds=time.perf_counter() - start, details=details)


def square_grid(grid_side: int) -> np.ndarray:
    """Cell centers of a grid_side x grid_side grid over [-1, 1]^2, row-major."""
    h = 2.0 / grid_side
    centers = -1.0 + h * (np.arange(grid_side) + 0.5)
    xx, yy = np.meshgrid(centers, centers, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def partial_support(mass: np.ndarray, cell_mass: float) -> np.ndarray:
    """Source cells carrying at least half their capacity in a partial plan."""
    return np.flatnonzero(mass.sum(axis=1) > 0.5 * cell_mass)


def exhaustive_partial_support(cost: np.ndarray, target_weights: np.ndarray, support_cells: int) -> Tuple[np.ndarray, float]:
    """
    Brute-force optimal partial transport when every source cell holds 1/support_cells and
    the target carries total mass 1: the plan saturates exactly support_cells cells, so the
    optimum is the cheapest balanced OT over all subsets of that size.
    """
    rows = cost.shape[0]
    weights = np.full(support_cells, 1.0 / support_cells)
    best_cost, best = math.inf, None
    for subset in itertools.combinations(range(rows), support_cells):
        idx = np.array(subset)
        value = solve_discrete_ot(weights, target_weights, CostMatrix(entries=cost[idx])).total_cost
        if value < best_cost - 1e-15:
            best_cost, best = value, idx
    return best, best_cost


def partial_ot_problem(grid_side: int, ball_cells: int, support_cells: int, seed: int):
    """
    The grid partial-transport instance: source cells each holding 1/support_cells, target
    uniform on the ball_cells cells nearest the center. A seeded per-cell jitter far below
    the ring spacing breaks ties between equidistant cells, for the target and the prediction alike.
    Returns (cells, cost, f, g, predicted support).
    """
    cells = square_grid(grid_side)
    h = 2.0 / grid_side
    rng = np.random.default_rng(seed)
    jitter = 1e-3 * h * h * rng.random(cells.shape[0])
    keys = np.sum(cells ** 2, axis=1) + jitter
    target_idx = _nearest_cells(cells, ball_cells, keys=keys)
    cost = cost_matrix(PointCloud(points=cells), PointCloud(points=cells[target_idx])).entries + jitter[:, None]
    f = np.full(cells.shape[0], 1.0 / support_cells)
    g = np.full(ball_cells, 1.0 / ball_cells)
    predicted = _nearest_cells(cells, support_cells, keys=keys)
    return cells, cost, f, g, predicted


def verify_partial_ot_marginal(grid_side: int = 20, ball_cells: int = 16, seed: int = 0,
                               support_cells: Optional[int] = None) -> VerificationResult:
    """
    Partial OT from a domain-filling source of capacity 1/support_cells per cell to a
    uniform inner ball, moving the full target mass. The cells the plan draws from must
    form (up to 10% symmetric difference) the support_cells cells nearest the center.
    support_cells defaults to twice ball_cells; support_cells = ball_cells forces the ball itself.
    """
    start = time.perf_counter()
    total = grid_side * grid_side
    support_cells = 2 * ball_cells if support_cells is None else support_cells
    if not 1 <= ball_cells <= support_cells <= total:
        raise InvalidArgumentError(f"Need 1 <= ball_cells <= support_cells <= {total}, "
                                   f"got {ball_cells}, {support_cells}")
    logger.info(f"Partial-OT check: {grid_side}x{grid_side} grid, ball {ball_cells} cells, support {support_cells}")

    cells, cost, f, g, predicted = partial_ot_problem(grid_side, ball_cells, support_cells, seed)
    plan = solve_partial_ot(f, g, CostMatrix(entries=cost), 1.0)
    active = partial_support(plan.mass, 1.0 / support_cells)
    sym_diff = len(set(active.tolist()) ^ set(predicted.tolist()))
    observed = sym_diff / support_cells
    details = {"active_cells": float(active.size), "predicted_cells": float(predicted.size),
               "symmetric_difference": float(sym_diff), "lp_cost": plan.total_cost}
    return VerificationResult.judge("partial_ot_marginal", observed, 0.0, 0.10, "upper",
                                    runtime_seconds=time.perf_counter() - start, details=details)


def precision_bound_checks(n: int = 10, m: int = 2, N: int = 10000, r_u: Optional[float] = None,
                           r_v: Optional[float] = None, seed: int = 0,
                           k_target: Optional[int] = None) -> List[VerificationResult]:
    """
    Empirical side of the precision bounds on a coordinate projection of B^n_1:
    (a) the query nearest the origin of the image (largest fiber) has precision at most the
        worst-case bound plus a binomial margin;
    (b) the fraction of queries at or below the average-case bound is at least q2 - 3 sigma.
    r_U defaults to the 500-per-10000 neighbor rule and r_V to optimal_rv. r_V is capped at
    the image radius L R inside the bounds, where the retrieval ball leaves the image.
    """
    X = sample_uniform_ball(n, 1.0, N, seed)
    if r_u is None:
        r_u = calibrate_r_u(X, k_target or max(1, round(500 * N / 10000)))
    linear_map = coordinate_projection(n, m)
    pair = project(X, linear_map)
    if r_v is None:
        r_v = optimal_rv(n, m, 1.0, r_u, linear_map.lipschitz)
    r_v_bound = min(r_v, linear_map.lipschitz * 1.0)
    params = BoundParams(n=n, m=m, R=1.0, r_u=r_u, r_v=r_v_bound, L=linear_map.lipschitz)

    start = time.perf_counter()
    waist = int(np.argmin(np.linalg.norm(pair.Y.points, axis=1)))
    precision = discrete_precision(pair, waist, r_u, r_v)
    worst = precision_bound_worst(params)
    retrieved = max(1, int(np.sum(np.linalg.norm(pair.Y.points - pair.Y.points[waist], axis=1) < r_v)) - 1)
    margin = 3.0 * math.sqrt(min(worst, 1.0) * max(1.0 - worst, 0.0) / retrieved) + 1.0 / retrieved
    worst_check = VerificationResult.judge(
        "precision_bound_worst", precision if precision is not None else 0.0, worst, margin, "upper",
        runtime_seconds=time.perf_counter() - start,
        details={"query": waist, "retrieved": retrieved, "r_u": r_u, "r_v": r_v},
    )

    start = time.perf_counter()
    avg_params = AvgCaseParams(base=params, delta=default_delta(1.0, r_u))
    avg_bound, q2 = precision_bound_avg(avg_params)
    precisions, _ = precision_recall_sweep(pair, r_u, [r_v])
    defined = precisions[~np.isnan(precisions[:, 0]), 0]
    fraction = float(np.mean(defined <= avg_bound)) if defined.size else 0.0
    sigma = math.sqrt(q2 * (1.0 - q2) / max(defined.size, 1))
    avg_check = VerificationResult.judge(
        "precision_bound_avg", fraction, q2, 3.0 * sigma, "lower",
        runtime_seconds=time.perf_counter() - start,
        details={"avg_bound": avg_bound, "defined_queries": float(defined.size), "delta": avg_params.delta},
    )
    return [worst_check, avg_check]


def verify_precision_bound(n: int = 10, m: int = 2, N: int = 10000, r_u: Optional[float] = None,
                           r_v: Optional[float] = None, seed: int = 0) -> VerificationResult:
    """Both precision-bound checks folded into one result: observed counts the failing checks."""
    start = time.perf_counter()
    checks = precision_bound_checks(n=n, m=m, N=N, r_u=r_u, r_v=r_v, seed=seed)
    details: Dict[str, float] = {}
    for check in checks:
        details[f"{check.name}_observed"] = check.observed
        details[f"{check.name}_expected"] = check.expected
        details[f"{check.name}_tolerance"] = check.tolerance
    failures = sum(not c.passed for c in checks)
    return VerificationResult.judge("precision_bound", failures, 0.0, 0.0, "upper",
                                    runtime_seconds=time.perf_counter() - start, details=details)


CHECKS = ("concentric", "iso", "partial", "bound", "monotonicity")


def run_verifications(checks: Sequence[str] = ("all",), seed: int = 0) -> List[VerificationResult]:
    """Desk-scale run of the selected checks, in CHECKS order."""
    selected = CHECKS if "all" in checks else tuple(c for c in CHECKS if c in checks)
    unknown = set(checks) - set(CHECKS) - {"all"}
    if unknown:
        raise InvalidArgumentError(f"Unknown checks {sorted(unknown)}; choose from {CHECKS + ('all',)}")
    results = []
    for name in selected:
        logger.info(f"Running verification '{name}'")
        if name == "concentric":
            results.append(verify_concentric_ball(2, 0.5, 1.0, 2000, seed))
        elif name == "iso":
            results.append(verify_iso_wasserstein(32, 4.0, None, 200, seed))
        elif name == "partial":
            results.append(verify_partial_ot_marginal(20, 16, seed))
        elif name == "bound":
            results.append(verify_precision_bound(10, 2, 10000, seed=seed))
        elif name == "monotonicity":
            results.append(verify_monotonicity(2, 0.25, [0.25, 0.5, 0.75, 1.0], 1000, seed))
        status = "PASS" if results[-1].passed else "FAIL"
        logger.info(f"{name}: {status} (observed {results[-1].observed:.6g}, expected {results[-1].expected:.6g})")
    return results
