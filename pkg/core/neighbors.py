import logging
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from core.errors import InvalidArgumentError
from core.schema import Neighborhood, PointCloud

logger = logging.getLogger(__name__)

# Below this many points a linear scan beats building a tree.
TREE_THRESHOLD = 256


class NeighborIndex:
    """
    Exact neighbor search over one PointCloud.

    Radius queries are strict (distance < r) and knn ties are broken by the smaller index,
    so results match an exhaustive scan. A kd-tree is only used to shortlist candidates;
    membership is always decided on distances recomputed here.
    """

    def __init__(self, cloud: PointCloud, use_tree: Optional[bool] = None):
        self.cloud = cloud
        self.points = cloud.points
        self.count = cloud.count
        if use_tree is None:
            use_tree = self.count > TREE_THRESHOLD
        self.tree = cKDTree(self.points) if use_tree else None

    def _check_index(self, i: int) -> int:
        if isinstance(i, bool) or int(i) != i or not 0 <= i < self.count:
            raise InvalidArgumentError(f"Index {i!r} out of range for a cloud of {self.count} points")
        return int(i)

    def distances_from(self, i: int, candidates: Optional[np.ndarray] = None) -> np.ndarray:
        if candidates is None:
            return np.linalg.norm(self.points - self.points[i], axis=1)
        return np.linalg.norm(self.points[candidates] - self.points[i], axis=1)

    def within(self, i: int, r: float) -> np.ndarray:
        """Sorted indices j != i with ||x_j - x_i|| < r."""
        i = self._check_index(i)
        if r < 0:
            raise InvalidArgumentError(f"Radius must be nonnegative, got {r}")
        if r == 0:
            return np.empty(0, dtype=np.intp)
        if self.tree is not None:
            candidates = np.asarray(self.tree.query_ball_point(self.points[i], r), dtype=np.intp)
            candidates.sort()
        else:
            candidates = np.arange(self.count, dtype=np.intp)
        d = self.distances_from(i, candidates)
        members = candidates[(d < r) & (candidates != i)]
        return members

    def knn(self, i: int, k: int) -> np.ndarray:
        """The k nearest j != i ordered by (distance, index)."""
        i = self._check_index(i)
        if isinstance(k, bool) or int(k) != k or k < 1:
            raise InvalidArgumentError(f"k must be a positive integer, got {k!r}")
        if k >= self.count:
            raise InvalidArgumentError(f"k={k} must be below the cloud size {self.count}")
        if self.tree is not None:
            kth = self.tree.query(self.points[i], k=k + 1)[0][-1]
            # inflate slightly so points tied with the k-th distance are all shortlisted
            radius = kth * (1.0 + 1e-9) + 1e-12
            candidates = np.asarray(self.tree.query_ball_point(self.points[i], radius), dtype=np.intp)
        else:
            candidates = np.arange(self.count, dtype=np.intp)
        candidates = candidates[candidates != i]
        d = self.distances_from(i, candidates)
        order = np.lexsort((candidates, d))
        return candidates[order[:k]]

    def knn_all(self, k: int) -> np.ndarray:
        """(count, k) array whose row i equals knn(i, k)."""
        if k >= self.count:
            raise InvalidArgumentError(f"k={k} must be below the cloud size {self.count}")
        out = np.empty((self.count, k), dtype=np.intp)
        if self.tree is None:
            for i in range(self.count):
                out[i] = self.knn(i, k)
            return out
        _, idx = self.tree.query(self.points, k=min(k + 2, self.count))
        fallbacks = 0
        for i in range(self.count):
            j = idx[i][idx[i] != i][:k + 1]
            if len(j) < k + 1:
                out[i] = self.knn(i, k)
                fallbacks += 1
                continue
            d = self.distances_from(i, j)
            order = np.lexsort((j, d))
            j, d = j[order], d[order]
            # a near tie at the k-th place may hide an unlisted point with a smaller index
            if d[k] <= d[k - 1] * (1.0 + 1e-9) + 1e-12:
                out[i] = self.knn(i, k)
                fallbacks += 1
                continue
            out[i] = j[:k]
        if fallbacks:
            logger.debug(f"knn_all: {fallbacks} queries resolved by exact tie-breaking")
        return out

    def mean_neighbor_count(self, r: float) -> float:
        """Mean over points of the number of other points strictly within r (kd-tree pair count)."""
        if r <= 0:
            return 0.0
        tree = self.tree if self.tree is not None else cKDTree(self.points)
        # count_neighbors is inclusive; step just below r for the open ball
        pairs = tree.count_neighbors(tree, np.nextafter(r, 0.0))
        return float(pairs - self.count) / self.count


def neighbors_within(cloud: PointCloud, i: int, r: float, index: Optional[NeighborIndex] = None) -> Neighborhood:
    """
    All j != i with ||x_j - x_i|| < r, in increasing index order.
    """
    index = index or NeighborIndex(cloud)
    members = index.within(i, r)
    return Neighborhood(center_index=int(i), member_indices=members.tolist(), radius=float(r))


def k_nearest(cloud: PointCloud, i: int, k: int, index: Optional[NeighborIndex] = None) -> Neighborhood:
    """
    The k nearest points to x_i by Euclidean distance, ties broken by smaller index.
    """
    index = index or NeighborIndex(cloud)
    members = index.knn(i, k)
    return Neighborhood(center_index=int(i), member_indices=members.tolist(), k=int(k))
