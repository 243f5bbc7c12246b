"""
Tests for strict radius neighborhoods and index-tie-broken kNN.
"""

import numpy as np
import pytest

from core.errors import InvalidArgumentError
from core.neighbors import NeighborIndex, k_nearest, neighbors_within
from core.schema import PointCloud


def brute_within(points, i, r):
    d = np.linalg.norm(points - points[i], axis=1)
    return [j for j in range(len(points)) if j != i and d[j] < r]


def brute_knn(points, i, k):
    d = np.linalg.norm(points - points[i], axis=1)
    order = sorted((d[j], j) for j in range(len(points)) if j != i)
    return [j for _, j in order[:k]]


class TestNeighborsWithin:
    def test_coincident_points(self):
        cloud = PointCloud(points=[[0.0, 0.0], [0.0, 0.0]])
        assert neighbors_within(cloud, 0, 0.1).member_indices == [1]
        assert neighbors_within(cloud, 1, 0.1).member_indices == [0]

    def test_zero_radius_is_empty(self):
        cloud = PointCloud(points=[[0.0, 0.0], [0.0, 0.0]])
        assert neighbors_within(cloud, 0, 0.0).member_indices == []

    def test_boundary_is_excluded(self):
        cloud = PointCloud(points=[[0.0], [1.0], [2.0]])
        assert neighbors_within(cloud, 0, 1.0).member_indices == []

    def test_matches_scan(self, rng):
        points = rng.random((50, 2))
        cloud = PointCloud(points=points)
        for i in range(50):
            assert neighbors_within(cloud, i, 0.2).member_indices == brute_within(points, i, 0.2)

    @pytest.mark.parametrize("use_tree", [True, False])
    def test_random_instances(self, use_tree):
        rng = np.random.default_rng(7)
        for _ in range(20):
            N = int(rng.integers(5, 200))
            points = rng.random((N, 3))
            index = NeighborIndex(PointCloud(points=points), use_tree=use_tree)
            i, r = int(rng.integers(N)), float(rng.uniform(0.05, 0.6))
            assert index.within(i, r).tolist() == brute_within(points, i, r)

    def test_out_of_range_index(self, random_cloud):
        with pytest.raises(InvalidArgumentError):
            neighbors_within(random_cloud, 50, 1.0)


class TestKNearest:
    def test_all_others(self, random_cloud):
        members = k_nearest(random_cloud, 3, 49).member_indices
        assert sorted(members) == [j for j in range(50) if j != 3]

    def test_collinear(self):
        cloud = PointCloud(points=[[0.0], [1.0], [2.0], [3.0]])
        assert k_nearest(cloud, 0, 2).member_indices == [1, 2]

    def test_ties_prefer_smaller_index(self):
        cloud = PointCloud(points=[[0.0], [1.0], [-1.0], [2.0]])
        assert k_nearest(cloud, 0, 1).member_indices == [1]

    def test_k_too_large(self, random_cloud):
        with pytest.raises(InvalidArgumentError):
            k_nearest(random_cloud, 0, 50)

    @pytest.mark.parametrize("use_tree", [True, False])
    def test_knn_all_matches_sort(self, use_tree):
        rng = np.random.default_rng(8)
        points = np.round(rng.random((300, 2)), 2)
        index = NeighborIndex(PointCloud(points=points), use_tree=use_tree)
        table = index.knn_all(7)
        for i in range(0, 300, 13):
            assert table[i].tolist() == brute_knn(points, i, 7)


class TestMeanNeighborCount:
    def test_strict_count(self):
        cloud = PointCloud(points=[[0.0], [1.0], [3.0]])
        index = NeighborIndex(cloud)
        assert index.mean_neighbor_count(1.0) == 0.0
        assert index.mean_neighbor_count(1.5) == pytest.approx(2.0 / 3.0)
        assert index.mean_neighbor_count(0.0) == 0.0
