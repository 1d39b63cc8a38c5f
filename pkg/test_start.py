import pytest
from fastapi.testclient import TestClient

from start import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy", "version": "1.0.0"}


def test_filters_endpoint(client):
    data = client.get("/api/filters/2").json()
    assert data["success"] and data["K"] == 2
    assert len(data["h"]) == 4
    assert client.get("/api/filters/5").status_code == 400


def test_table_endpoint(client):
    data = client.get("/api/conn/gamma", params={"K": 3}).json()
    assert data["count"] == 9
    assert data["derivs"] == [0, 1]
    assert client.get("/api/conn/nope").status_code == 400
    assert client.get("/api/conn/pair", params={"K": 2}).status_code == 400


def test_verify_endpoint(client):
    data = client.get("/api/conn/verify").json()
    assert data["success"]
    assert [c["table"] for c in data["checks"]] == ["pair", "gamma", "triple"]
    assert all("within tolerance" in c["summary"] for c in data["checks"])


def test_dwt_endpoint(client):
    data = client.post("/api/dwt/analyze", json={"signal": [1.0] * 16, "K": 2, "levels": 2}).json()
    assert data["success"]
    assert data["approx"] == pytest.approx([2.0] * 4)
    assert data["energy"] == pytest.approx(16.0)
    assert client.post("/api/dwt/analyze", json={"signal": [1.0] * 7, "K": 2}).status_code == 400
    assert client.post("/api/dwt/analyze", json={"signal": [1.0] * 8, "levels": 0}).status_code == 422


def test_spectrum_and_gamma_endpoints(client):
    data = client.get("/api/ham/spectrum", params={"mu": 1.0, "N": 10}).json()
    assert data["max_deviation"] < 1e-10
    assert len(data["eigenvalues"]) == 10

    data = client.get("/api/ham/gamma", params={"mu": 2.0}).json()
    assert data["success"] and data["discriminant"] <= 1e-9
    assert client.get("/api/ham/gamma", params={"mu": 0.0}).status_code == 400
    assert client.get("/api/ham/gamma", params={"element": "ridgelet"}).status_code == 400


def test_diagnostics_lists_warm_engines(client):
    client.get("/api/conn/gamma")
    services = client.get("/diagnostics").json()["services"]
    assert services["engine_3"]["status"] == "ready"
    assert "gamma_pair" in services["engine_3"]["tables"]
