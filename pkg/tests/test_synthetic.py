"""
Tests for the DR maps under audit, the r_U calibration rule and the manifold datasets.
"""

import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from core.errors import InvalidArgumentError, RankDeficiencyError
from core.geometry import sample_uniform_ball
from core.schema import LinearMap, PointCloud
from data.synthetic import (
    calibrate_r_u,
    coordinate_projection,
    explained_variance_ratio,
    lipschitz_of,
    pca_projection,
    project,
    random_projection,
    s_curve,
    swiss_roll,
)


class TestRandomProjection:
    def test_orthonormal_rows(self):
        M = random_projection(10, 4, seed=2).matrix
        np.testing.assert_allclose(M @ M.T, np.eye(4), atol=1e-10)

    def test_deterministic(self):
        np.testing.assert_array_equal(random_projection(6, 2, seed=9).matrix, random_projection(6, 2, seed=9).matrix)

    def test_rejects_square(self):
        with pytest.raises(InvalidArgumentError):
            random_projection(5, 5, seed=0)

    def test_never_stretches(self, rng):
        X = PointCloud(points=rng.standard_normal((200, 8)))
        pair = project(X, random_projection(8, 3, seed=1))
        assert np.all(pdist(pair.Y.points) <= pdist(X.points) * (1 + 1e-12) + 1e-12)

    def test_gaussian_variant_reports_norm(self):
        linear_map = random_projection(6, 2, seed=3, orthonormal=False)
        assert linear_map.lipschitz == pytest.approx(np.linalg.norm(linear_map.matrix, 2))


class TestCoordinateProjection:
    def test_first_coordinates(self):
        Y = coordinate_projection(3, 2).apply(PointCloud(points=[[1.0, 2.0, 3.0]]))
        assert Y.points.tolist() == [[1.0, 2.0]]
        assert coordinate_projection(3, 2).lipschitz == 1.0

    def test_rotation_preserves_fiber_statistics(self):
        X = sample_uniform_ball(4, 1.0, 4000, seed=6)
        Q, _ = np.linalg.qr(np.random.default_rng(6).standard_normal((4, 4)))
        rotated = LinearMap(matrix=coordinate_projection(4, 2).matrix @ Q, lipschitz=1.0)
        plain = np.linalg.norm(coordinate_projection(4, 2).apply(X).points, axis=1)
        turned = np.linalg.norm(rotated.apply(X).points, axis=1)
        assert plain.mean() == pytest.approx(turned.mean(), abs=0.02)
        assert np.mean(plain < 0.5) == pytest.approx(np.mean(turned < 0.5), abs=0.03)


class TestPCA:
    def test_line_direction(self, rng):
        direction = np.array([1.0, 2.0, 2.0]) / 3.0
        X = PointCloud(points=rng.standard_normal(100)[:, None] * direction)
        linear_map = pca_projection(X, 1)
        np.testing.assert_allclose(np.abs(linear_map.matrix[0]), direction, atol=1e-10)
        assert linear_map.matrix[0][np.argmax(np.abs(linear_map.matrix[0]))] > 0

    def test_rank_deficiency(self, rng):
        X = PointCloud(points=np.column_stack([rng.standard_normal(50), np.zeros(50), np.zeros(50)]))
        with pytest.raises(RankDeficiencyError) as info:
            pca_projection(X, 2)
        assert info.value.achieved_rank == 1

    def test_isotropic_variance(self):
        X = PointCloud(points=np.random.default_rng(0).standard_normal((10000, 5)))
        assert explained_variance_ratio(X)[:2].sum() == pytest.approx(2.0 / 5.0, abs=0.03)

    def test_idempotent_on_projected_data(self, rng):
        X = PointCloud(points=rng.standard_normal((80, 4)))
        linear_map = pca_projection(X, 2)
        Y = linear_map.apply(X).points
        back = PointCloud(points=Y @ linear_map.matrix)
        np.testing.assert_allclose(linear_map.apply(back).points, Y, atol=1e-10)

    def test_deterministic(self, rng):
        X = PointCloud(points=rng.standard_normal((60, 5)))
        np.testing.assert_array_equal(pca_projection(X, 3).matrix, pca_projection(X, 3).matrix)


class TestLipschitz:
    def test_orthonormal(self):
        assert lipschitz_of(random_projection(7, 3, seed=0)) == pytest.approx(1.0, rel=1e-8)

    def test_diagonal(self):
        linear_map = LinearMap(matrix=[[3.0, 0.0, 0.0], [0.0, 1.0, 0.0]], lipschitz=3.0)
        assert lipschitz_of(linear_map) == pytest.approx(3.0, rel=1e-8)

    def test_matches_svd(self, rng):
        linear_map = random_projection(9, 4, seed=5, orthonormal=False)
        top = np.linalg.svd(linear_map.matrix, compute_uv=False)[0]
        assert lipschitz_of(linear_map) == pytest.approx(top, rel=1e-6)


class TestCalibrateRU:
    def test_two_points(self):
        X = PointCloud(points=[[0.0, 0.0], [0.0, 1.0]])
        r = calibrate_r_u(X, 1)
        assert r > 1.0

    def test_uniform_interval(self):
        X = PointCloud(points=np.random.default_rng(4).random((2000, 1)))
        r = calibrate_r_u(X, 1000)
        d = np.abs(X.points - X.points.T)
        mean = (np.sum(d < r) - 2000) / 2000
        assert abs(mean - 1000) <= 1.0
        assert r == pytest.approx(0.29, abs=0.02)

    def test_monotone_in_target(self):
        X = sample_uniform_ball(3, 1.0, 800, seed=1)
        radii = [calibrate_r_u(X, k) for k in (10, 50, 200, 400)]
        assert radii == sorted(radii)

    def test_reproducible(self):
        X = sample_uniform_ball(10, 1.0, 1000, seed=2)
        assert calibrate_r_u(X, 50) == calibrate_r_u(X, 50)

    def test_unreachable(self):
        with pytest.raises(InvalidArgumentError):
            calibrate_r_u(PointCloud(points=[[0.0], [1.0]]), 2)


class TestManifolds:
    def test_s_curve_parametrization(self):
        cloud, t = s_curve(500, 0.0, seed=0, return_params=True)
        x, y, z = cloud.points.T
        np.testing.assert_allclose(x, np.sin(t), atol=1e-12)
        np.testing.assert_allclose(z, np.sign(t) * (np.cos(t) - 1), atol=1e-12)
        assert y.min() >= 0.0 and y.max() <= 2.0

    def test_swiss_roll_radial_range(self):
        cloud, t = swiss_roll(5000, 0.0, seed=0, return_params=True)
        x, _, z = cloud.points.T
        radius = np.hypot(x, z)
        np.testing.assert_allclose(radius, t, atol=1e-9)
        assert radius.min() >= 1.5 * math.pi - 1e-9 and radius.max() <= 4.5 * math.pi + 1e-9

    def test_seeded(self):
        np.testing.assert_array_equal(swiss_roll(100, 0.1, seed=3).points, swiss_roll(100, 0.1, seed=3).points)

    def test_rejects_negative_noise(self):
        with pytest.raises(InvalidArgumentError):
            s_curve(10, -1.0)
