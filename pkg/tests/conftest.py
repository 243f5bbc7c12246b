import numpy as np
import pytest

from core.schema import EmbeddingPair, PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def planar_pair(rng):
    """X in R^3 on the z = 0 plane and Y its first two coordinates: an isometry onto its span."""
    xy = rng.random((60, 2))
    X = PointCloud(points=np.column_stack([xy, np.zeros(len(xy))]))
    Y = PointCloud(points=xy)
    return EmbeddingPair(X=X, Y=Y)


@pytest.fixture
def random_cloud(rng):
    return PointCloud(points=rng.standard_normal((50, 3)))
