import logging
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from config import settings
from core.errors import CapacityError, InvalidArgumentError
from core.neighbors import NeighborIndex
from core.schema import CostMatrix, EmbeddingPair
from core.geometry import pairwise_sq_distances
from solvers.transport import solve_assignment

logger = logging.getLogger(__name__)

# Rows of the distance matrix computed per block in the sweeps.
BLOCK_ROWS = 256


def _check_query(pair: EmbeddingPair, i: int) -> int:
    if isinstance(i, bool) or int(i) != i or not 0 <= i < pair.count:
        raise InvalidArgumentError(f"Index {i!r} out of range for {pair.count} points")
    return int(i)


def _row_distances(points: np.ndarray, i: int) -> np.ndarray:
    return cdist(points[i:i + 1], points)[0]


def _counts(pair: EmbeddingPair, i: int, r_u: float, r_v: float) -> Tuple[int, int, int]:
    dx = _row_distances(pair.X.points, i)
    dy = _row_distances(pair.Y.points, i)
    others = np.arange(pair.count) != i
    relevant = others & (dx < r_u)
    retrieved = others & (dy < r_v)
    return int(np.sum(relevant & retrieved)), int(retrieved.sum()), int(relevant.sum())


def discrete_precision(pair: EmbeddingPair, i: int, r_u: float, r_v: float) -> Optional[float]:
    """
    Fraction of the points retrieved within r_v of y_i whose preimages lie within r_u of x_i.
    The query is excluded; None when nothing is retrieved.
    """
    i = _check_query(pair, i)
    both, retrieved, _ = _counts(pair, i, r_u, r_v)
    return both / retrieved if retrieved else None


def discrete_recall(pair: EmbeddingPair, i: int, r_u: float, r_v: float) -> Optional[float]:
    """Fraction of the relevant points (within r_u of x_i) that get retrieved; None when none are relevant."""
    i = _check_query(pair, i)
    both, _, relevant = _counts(pair, i, r_u, r_v)
    return both / relevant if relevant else None


def f_beta(precision: float, recall: float, beta: float) -> float:
    """(1 + beta^2) P R / (beta^2 P + R); 0 when P = R = 0."""
    if beta <= 0:
        raise InvalidArgumentError(f"beta must be positive, got {beta}")
    denom = beta ** 2 * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + beta ** 2) * precision * recall / denom


def count_sweep(pair: EmbeddingPair, r_u: float, rv_grid: Iterable[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Neighborhood counts behind the precision/recall sweep, query excluded:
    hits (count, G) relevant points retrieved at each radius, retrieved (count, G), relevant (count,).
    """
    grid = np.asarray(list(rv_grid), dtype=np.float64)
    if grid.size == 0 or np.any(grid < 0):
        raise InvalidArgumentError("rv_grid must be non-empty and nonnegative")
    N = pair.count
    X, Y = pair.X.points, pair.Y.points
    self_hit = (grid > 0).astype(np.int64)
    hits = np.zeros((N, grid.size), dtype=np.int64)
    retrieved = np.zeros((N, grid.size), dtype=np.int64)
    relevant = np.zeros(N, dtype=np.int64)

    for start in range(0, N, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, N)
        dx = cdist(X[start:stop], X)
        dy = cdist(Y[start:stop], Y)
        for row, i in enumerate(range(start, stop)):
            mask = dx[row] < r_u
            mask[i] = False
            relevant[i] = mask.sum()
            # dy[i] == 0 always lands in the count for positive radii
            retrieved[i] = np.searchsorted(np.sort(dy[row]), grid, side="left") - self_hit
            hits[i] = np.searchsorted(np.sort(dy[row][mask]), grid, side="left")
    return hits, retrieved, relevant


def precision_recall_sweep(pair: EmbeddingPair, r_u: float, rv_grid: Iterable[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Discrete precision and recall of every query at every retrieval radius in one pass.
    Returns two (count, len(rv_grid)) arrays, NaN where a measure is undefined.
    """
    hits, retrieved, relevant = count_sweep(pair, r_u, rv_grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(retrieved > 0, hits / np.maximum(retrieved, 1), np.nan)
        recall = np.where(relevant[:, None] > 0, hits / np.maximum(relevant, 1)[:, None], np.nan)
    return precision, recall


def _check_k(pair: EmbeddingPair, k: int):
    if isinstance(k, bool) or int(k) != k or not 1 <= k < pair.count:
        raise InvalidArgumentError(f"k={k!r} must be an integer in [1, {pair.count - 1}]")


def assignment_w2(A: np.ndarray, B: np.ndarray, index: Optional[int] = None, limit: int = None) -> float:
    """sqrt(assignment cost / k) between two equal-size uniform point sets."""
    limit = settings.EXACT_SOLVER_LIMIT if limit is None else limit
    k = A.shape[0]
    if k > limit:
        raise CapacityError(f"Neighborhood of {k} points exceeds the exact assignment limit {limit}",
                            size=k, limit=limit, index=index)
    _, total = solve_assignment(CostMatrix(entries=pairwise_sq_distances(A, B)))
    return float(np.sqrt(max(total, 0.0) / k))


def w2_many_to_one(pair: EmbeddingPair, i: int, k: int,
                   x_index: Optional[NeighborIndex] = None, y_index: Optional[NeighborIndex] = None) -> float:
    """
    W2 in X-space between the k nearest neighbors of x_i and the points whose images are
    the k nearest neighbors of y_i. Large when f glues distant inputs together.
    """
    i = _check_query(pair, i)
    _check_k(pair, k)
    x_index = x_index or NeighborIndex(pair.X)
    y_index = y_index or NeighborIndex(pair.Y)
    U, V = x_index.knn(i, k), y_index.knn(i, k)
    X = pair.X.points
    return assignment_w2(X[U], X[V], index=i)


def w2_discontinuity(pair: EmbeddingPair, i: int, k: int,
                     x_index: Optional[NeighborIndex] = None, y_index: Optional[NeighborIndex] = None) -> float:
    """
    W2 in Y-space between the images of x_i's k nearest neighbors and y_i's k nearest
    neighbors. Large when f tears a neighborhood apart.
    """
    i = _check_query(pair, i)
    _check_k(pair, k)
    x_index = x_index or NeighborIndex(pair.X)
    y_index = y_index or NeighborIndex(pair.Y)
    U, V = x_index.knn(i, k), y_index.knn(i, k)
    Y = pair.Y.points
    return assignment_w2(Y[U], Y[V], index=i)


def mean_w2_measures(pair: EmbeddingPair, k: int) -> Tuple[float, float]:
    """Mean many-to-one and mean discontinuity W2 over every query, one kNN pass per side."""
    _check_k(pair, k)
    x_knn = NeighborIndex(pair.X).knn_all(k)
    y_knn = NeighborIndex(pair.Y).knn_all(k)
    X, Y = pair.X.points, pair.Y.points
    many_to_one = [assignment_w2(X[U], X[V], index=i) for i, (U, V) in enumerate(zip(x_knn, y_knn))]
    discontinuity = [assignment_w2(Y[U], Y[V], index=i) for i, (U, V) in enumerate(zip(x_knn, y_knn))]
    return float(np.mean(many_to_one)), float(np.mean(discontinuity))
