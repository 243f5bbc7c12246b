import numpy as np
import pytest
from fastapi.testclient import TestClient

from api.app import app

client = TestClient(app)


class TestAPI:
    def test_health(self):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_bounds(self):
        response = client.post("/bounds", json={
            "params": {"n": 10, "m": 2, "R": 1.0, "r_u": 0.3, "r_v": 0.3},
            "delta": 0.3,
        })
        assert response.status_code == 200
        assert response.json()["precision_avg"] == pytest.approx(0.0125)

    def test_bounds_rejects_bad_params(self):
        response = client.post("/bounds", json={"params": {"n": 2, "m": 2, "R": 1.0, "r_u": 0.3, "r_v": 0.3}})
        assert response.status_code == 422

    def test_audit_identity(self):
        xy = np.random.default_rng(0).random((25, 2))
        X = np.column_stack([xy, np.zeros(25)]).tolist()
        response = client.post("/audit", json={"X": X, "Y": xy.tolist(),
                                               "config": {"k": 4, "r_u": 0.3, "r_v": 0.3}})
        assert response.status_code == 200
        body = response.json()
        assert len(body["per_query"]) == 25
        assert body["aggregates"]["w2_cost"]["mean"] == 0.0

    def test_audit_misaligned(self):
        response = client.post("/audit", json={"X": [[0.0, 0.0], [1.0, 1.0]], "Y": [[0.0]],
                                               "config": {"k": 1, "r_u": 0.3, "r_v": 0.3}})
        assert response.status_code == 422
