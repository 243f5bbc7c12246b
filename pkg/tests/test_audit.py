"""
Tests for the per-query audit, its aggregates and the embedding comparison.
"""

import numpy as np
import pytest

from analytics.audit import AuditEngine, audit, compare_embeddings, report_frame
from core.errors import CapacityError, InvalidArgumentError
from core.schema import AuditConfig, EmbeddingPair, PointCloud


@pytest.fixture
def config():
    return AuditConfig(k=8, r_u=0.2, r_v=0.2, beta=0.3)


class TestAuditEngine:
    def test_identity_pair(self, planar_pair, config):
        report = audit(planar_pair, config)
        assert len(report.per_query) == planar_pair.count
        for row in report.per_query:
            assert row.w2_many_to_one == 0.0 and row.w2_discontinuity == 0.0 and row.w2_cost == 0.0
            if row.precision is not None:
                assert row.precision == 1.0 and row.recall == 1.0
        assert report.aggregates["w2_cost"]["mean"] == 0.0
        assert report.k_used == 8

    def test_single_point(self, config):
        pair = EmbeddingPair(X=PointCloud(points=[[0.0, 1.0]]), Y=PointCloud(points=[[0.0]]))
        report = audit(pair, config)
        assert report.skipped == [0]
        assert report.per_query[0].precision is None and report.per_query[0].w2_cost is None
        assert report.aggregates["precision"]["count"] == 0.0

    def test_skipped_queries_are_undefined(self, rng):
        X = rng.random((40, 3)) * 10.0
        pair = EmbeddingPair(X=PointCloud(points=X), Y=PointCloud(points=X[:, :2]))
        report = audit(pair, AuditConfig(k=3, r_u=0.5, r_v=0.5))
        for i in report.skipped:
            row = report.per_query[i]
            assert row.precision is None or row.recall is None
        defined = [r.precision for r in report.per_query if r.precision is not None]
        assert report.aggregates["precision"]["count"] == float(len(defined))

    def test_k_is_clamped(self, rng):
        X = rng.random((6, 3))
        report = audit(EmbeddingPair(X=PointCloud(points=X), Y=PointCloud(points=X[:, :2])),
                       AuditConfig(k=30, r_u=0.5, r_v=0.5))
        assert report.k_used == 5

    def test_permutation_equivariance(self, rng, config):
        X = rng.random((50, 3))
        Y = X[:, :2] + 0.1 * X[:, 2:]
        base = audit(EmbeddingPair(X=PointCloud(points=X), Y=PointCloud(points=Y)), config)
        perm = rng.permutation(50)
        shuffled = audit(EmbeddingPair(X=PointCloud(points=X[perm]), Y=PointCloud(points=Y[perm])), config)
        for new_i, old_i in enumerate(perm):
            a, b = shuffled.per_query[new_i], base.per_query[old_i]
            assert a.precision == b.precision and a.recall == b.recall
            assert a.w2_cost == pytest.approx(b.w2_cost, abs=1e-12)
        assert shuffled.aggregates["w2_cost"]["mean"] == pytest.approx(base.aggregates["w2_cost"]["mean"])

    def test_capacity_error_carries_index(self, planar_pair):
        engine = AuditEngine(AuditConfig(k=8, r_u=0.2, r_v=0.2), exact_limit=4)
        with pytest.raises(CapacityError) as info:
            engine.audit(planar_pair)
        assert info.value.index == 0

    def test_report_frame(self, planar_pair, config):
        df = report_frame(audit(planar_pair, config))
        assert list(df["index"]) == list(range(planar_pair.count))
        assert {"precision", "recall", "f_beta", "w2_cost"} <= set(df.columns)


class TestCompare:
    def test_ranks_by_cost(self, planar_pair, rng, config):
        X = planar_pair.X
        scrambled = PointCloud(points=rng.permutation(planar_pair.Y.points))
        table = compare_embeddings(X, {"noise": scrambled, "exact": planar_pair.Y}, config)
        assert table["name"].tolist() == ["exact", "noise"]
        assert table["rank"].tolist() == [1, 2]

    def test_empty(self, planar_pair, config):
        with pytest.raises(InvalidArgumentError):
            compare_embeddings(planar_pair.X, {}, config)


@pytest.mark.slow
class TestIdentityAtScale:
    def test_identity_embedding(self, rng):
        xy = rng.random((500, 2))
        pair = EmbeddingPair(X=PointCloud(points=np.column_stack([xy, np.zeros(500)])), Y=PointCloud(points=xy))
        report = audit(pair, AuditConfig(k=30, r_u=0.1, r_v=0.1))
        assert report.k_used == 30
        for row in report.per_query:
            assert row.w2_many_to_one == 0.0 and row.w2_discontinuity == 0.0
            if row.precision is not None:
                assert row.precision == 1.0 and row.recall == 1.0
        assert report.aggregates["w2_cost"]["mean"] == 0.0
        assert report.aggregates["precision"]["count"] > 400
