import pytest
from fastapi.testclient import TestClient

from geocluster.api import build_app
from geocluster.config import load_config
from geocluster.demo import write_demo_inputs


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    target = tmp_path_factory.mktemp("api-demo")
    config_path = write_demo_inputs(target, seed=7)
    app = build_app(load_config(config_path))
    with TestClient(app) as c:
        yield c


def submit(client, **overrides):
    body = {"dataset": "demography", "algorithm": "kmeans", "k": 3,
            "n_components": 2, "seed": 7}
    body.update(overrides)
    return client.post("/runs", json=body)


def test_datasets_listing(client):
    r = client.get("/datasets")
    assert r.status_code == 200
    by_name = {d["name"]: d for d in r.json()}
    assert set(by_name) == {"demography", "loans", "sectors", "sentiment"}
    assert by_name["demography"]["entities"] == 33
    assert by_name["demography"]["dimension"] == "deaths"
    assert by_name["demography"]["years"][0] == 2004
    assert len(by_name["demography"]["features"]) == 18


def test_run_submission_is_deterministic(client):
    first = submit(client)
    second = submit(client)
    assert first.status_code == second.status_code == 200
    assert first.json()["run_id"] == second.json()["run_id"]
    run_id = first.json()["run_id"]
    a = client.get(f"/runs/{run_id}")
    b = client.get(f"/runs/{run_id}")
    assert a.json() == b.json()
    # created timestamp comes from the first execution and never changes
    assert first.json()["created"] == second.json()["created"]


def test_run_body_carries_labels_quality_intensity(client):
    run_id = submit(client).json()["run_id"]
    body = client.get(f"/runs/{run_id}").json()
    assert body["status"] == "done"
    assert len(body["labels"]) == 33
    assert set(body["quality"]) == {"silhouette", "davies_bouldin",
                                    "n_clusters_scored", "n_points_scored",
                                    "noise_excluded"}
    westminster = body["intensity"]["E09000033"]
    assert westminster["name"] == "High"
    assert westminster["color"] == "Red"


def test_run_geojson(client):
    run_id = submit(client).json()["run_id"]
    payload = client.get(f"/runs/{run_id}/geojson").json()
    assert payload["type"] == "FeatureCollection"
    assert len(payload["features"]) == 33
    feature = payload["features"][0]
    assert feature["geometry"]["type"] == "Point"
    assert "fill" in feature["properties"]


def test_unknown_run_404_with_code(client):
    r = client.get("/runs/ffffffffffffffff")
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "not_found"


def test_unknown_dataset_404(client):
    r = submit(client, dataset="nope")
    assert r.status_code == 404


def test_invalid_params_400_names_field(client):
    r = submit(client, eps=0)
    assert r.status_code == 400
    assert "eps" in r.json()["error"]["message"]
    r = submit(client, algorithm="optics")
    assert r.status_code == 400


def test_engine_data_error_422(client):
    r = submit(client, k=1)
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "data_error"


def test_compare_flags_planted_trio(client):
    runs = [
        submit(client).json()["run_id"],
        submit(client, dataset="loans", n_components=None).json()["run_id"],
        submit(client, dataset="sectors", n_components=1).json()["run_id"],
    ]
    r = client.get("/compare", params={"runs": ",".join(runs), "threshold": 2})
    assert r.status_code == 200
    flagged = {f["area"]: f["gap"] for f in r.json()["flagged"]}
    assert flagged == {"E09000015": 2, "E09000026": 2, "E09000033": -2}
    r1 = client.get("/compare", params={"runs": ",".join(runs), "threshold": 1})
    assert set(flagged) < {f["area"] for f in r1.json()["flagged"]}


def test_compare_rejects_duplicate_dimensions(client):
    a = submit(client).json()["run_id"]
    b = submit(client, k=2).json()["run_id"]
    r = client.get("/compare", params={"runs": f"{a},{b}"})
    assert r.status_code == 400


def test_timeseries_net_growth(client):
    r = client.get("/timeseries", params={"kind": "net_growth",
                                          "area": "E09000033"})
    assert r.status_code == 200
    series = r.json()["series"]["E09000033"]
    years = [p[0] for p in series]
    assert years == sorted(years)
    assert len(series) == 16


def test_timeseries_sector_and_sentiment(client):
    r = client.get("/timeseries", params={"kind": "sector", "area": "E09000001"})
    assert r.status_code == 200
    assert len(r.json()["series"]) == 17
    r = client.get("/timeseries", params={"kind": "sentiment",
                                          "sector": "Retail"})
    assert r.status_code == 200
    assert len(r.json()["series"]["Retail"]) == 17


def test_timeseries_unknown_area_422(client):
    r = client.get("/timeseries", params={"kind": "net_growth", "area": "X1"})
    assert r.status_code == 422


def test_timeseries_unknown_kind_400(client):
    r = client.get("/timeseries", params={"kind": "seasonal"})
    assert r.status_code == 400


def test_distribution_endpoint(client):
    r = client.get("/datasets/demography/distribution",
                   params={"feature": "avg_deaths"})
    assert r.status_code == 200
    body = r.json()
    assert body["feature"] == "avg_deaths"
    assert body["min"] <= body["q1"] <= body["median"] <= body["q3"] <= body["max"]
    assert body["n"] == 33
    # Westminster's planted level sits far above the borough IQR fence
    assert any(code == "E09000033" for code, _ in body["outliers"])
    assert client.get("/datasets/nope/distribution",
                      params={"feature": "x"}).status_code == 404
    assert client.get("/datasets/demography/distribution",
                      params={"feature": "zzz"}).status_code == 400


def test_agglomerative_and_dbscan_runs(client):
    r = submit(client, algorithm="agglomerative", linkage="average")
    assert r.status_code == 200
    r = submit(client, algorithm="dbscan", eps=1.0, min_samples=2)
    # either scores fine (>=2 clusters) or reports a clean engine error
    assert r.status_code in (200, 422)
