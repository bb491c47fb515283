import json

import pytest
from fastapi.testclient import TestClient

from dpm.hmm import (
    TrainConfig,
    decode,
    model_from_json,
    model_to_dict,
    train,
)
from dpm.ingest import IngestConfig, dataset_to_json, parse_dataset
from dpm.query import parse_query, evaluate
from dpm.service import create_app
from dpm.summarize import (
    feature_matrix,
    kde,
    outcome_ages,
    transition_summary,
    waterfall_points,
)

CSV_TEXT = """subject_id,age_months,IAA,GADA,smoker,dx
a,6,0,0,0,0
a,12,1,0,,0
a,18,1,1,0,1
b,3,0,0,1,0
b,9,0,1,1,0
b,15,1,1,,1
c,6,0,0,0,0
c,12,0,0,0,0
d,4,1,1,1,1
d,10,1,1,1,1
e,5,0,1,0,0
e,11,1,,1,1
f,7,0,0,0,0
f,13,0,1,0,1
"""

CONFIG = {
    "subject_col": "subject_id",
    "age_col": "age_months",
    "model_vars": ["IAA", "GADA"],
    "extra_vars": ["smoker"],
    "outcome_cols": ["dx"],
}

TRAIN_BODY = {"n_states": 2, "seed": 11, "max_iter": 200, "n_restarts": 3}


def fixture_dataset():
    return parse_dataset(CSV_TEXT, IngestConfig.from_dict(CONFIG))


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    data_dir = tmp_path_factory.mktemp("workspace")
    client = TestClient(create_app(str(data_dir)))
    uploaded = client.post("/api/datasets",
                           json={"csv": CSV_TEXT, "config": CONFIG}).json()
    trained = client.post(
        "/api/models",
        json={"dataset_id": uploaded["dataset_id"], **TRAIN_BODY}).json()
    return {"client": client, "data_dir": data_dir,
            "dataset_id": uploaded["dataset_id"],
            "model_id": trained["model_id"]}


def library_model():
    return train(fixture_dataset(),
                 TrainConfig(n_states=2, seed=11, max_iter=200, n_restarts=3))


class TestDatasets:
    def test_upload_json_body(self, ws):
        resp = ws["client"].post("/api/datasets",
                                 json={"csv": CSV_TEXT, "config": CONFIG})
        assert resp.status_code == 200
        body = resp.json()
        assert body["dataset_id"] == ws["dataset_id"]
        assert body["n_subjects"] == 6
        assert body["n_visits"] == 14

    def test_upload_multipart(self, ws):
        resp = ws["client"].post(
            "/api/datasets",
            files={"csv": ("panel.csv", CSV_TEXT.encode())},
            data={"config": json.dumps(CONFIG)})
        assert resp.status_code == 200
        assert resp.json()["dataset_id"] == ws["dataset_id"]

    def test_persisted_file_is_canonical(self, ws):
        path = ws["data_dir"] / "datasets" / f"{ws['dataset_id']}.json"
        assert path.read_text() == dataset_to_json(fixture_dataset())

    def test_malformed_csv_reports_row(self, ws):
        bad = "subject_id,age_months,IAA,GADA,smoker,dx\na,6,0\n"
        resp = ws["client"].post("/api/datasets",
                                 json={"csv": bad, "config": CONFIG})
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "ValidationError"
        assert body["detail"]["kind"] == "MalformedCsv"
        assert body["detail"]["row"] == 2

    def test_missing_parts(self, ws):
        resp = ws["client"].post("/api/datasets", json={"csv": CSV_TEXT})
        assert resp.status_code == 400
        assert resp.json()["code"] == "ValidationError"


class TestModels:
    def test_train_response(self, ws):
        model = library_model()
        resp = ws["client"].post(
            "/api/models",
            json={"dataset_id": ws["dataset_id"], **TRAIN_BODY})
        assert resp.status_code == 200
        body = resp.json()
        assert body["model_id"] == ws["model_id"]
        assert body["log_likelihood"] == model.log_likelihood
        assert body["n_iterations_run"] == model.n_iterations_run

    def test_get_model_matches_library(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}")
        assert resp.status_code == 200
        body = resp.json()
        expected = model_to_dict(library_model())
        for key in ("n_states", "initial", "transition", "emission",
                    "log_likelihood", "trained_on", "seed"):
            assert body[key] == expected[key]
        assert body["dataset"]["dataset_id"] == ws["dataset_id"]
        assert body["dataset"]["model_variables"] == ["IAA", "GADA"]
        assert body["dataset"]["extra_variables"] == ["smoker"]
        assert body["dataset"]["outcome_names"] == ["dx"]

    def test_model_file_untouched_by_reads(self, ws):
        path = ws["data_dir"] / "models" / f"{ws['model_id']}.json"
        before = path.read_bytes()
        ws["client"].get(f"/api/models/{ws['model_id']}")
        assert path.read_bytes() == before

    def test_unknown_model(self, ws):
        resp = ws["client"].get("/api/models/ffffffffffff")
        assert resp.status_code == 404
        body = resp.json()
        assert body["code"] == "NotFound"
        assert body["detail"]["kind"] == "NotFound"

    def test_unknown_dataset(self, ws):
        resp = ws["client"].post(
            "/api/models", json={"dataset_id": "nope", "n_states": 2})
        assert resp.status_code == 404

    def test_busy_gate(self, ws):
        lock = ws["client"].app.state.workspace.train_lock
        assert lock.acquire(blocking=False)
        try:
            resp = ws["client"].post(
                "/api/models",
                json={"dataset_id": ws["dataset_id"], "n_states": 2})
        finally:
            lock.release()
        assert resp.status_code == 503
        assert resp.json()["code"] == "TrainingBusy"


class TestSummaries:
    def test_feature_matrix_parity(self, ws):
        resp = ws["client"].get(
            f"/api/models/{ws['model_id']}/feature-matrix",
            params={"vars": "IAA,GADA,smoker"})
        assert resp.status_code == 200
        model = library_model()
        dataset = fixture_dataset()
        decodings = decode(model, dataset)
        expected = feature_matrix(model, decodings, dataset,
                                  ["IAA", "GADA", "smoker"]).to_dict()
        assert resp.json() == json.loads(json.dumps(expected))

    def test_feature_matrix_k1_closed_form(self, tmp_path):
        client = TestClient(create_app(str(tmp_path)))
        did = client.post("/api/datasets",
                          json={"csv": CSV_TEXT, "config": CONFIG}
                          ).json()["dataset_id"]
        mid = client.post("/api/models",
                          json={"dataset_id": did, "n_states": 1, "seed": 0}
                          ).json()["model_id"]
        body = client.get(f"/api/models/{mid}/feature-matrix",
                          params={"vars": "IAA,smoker"}).json()
        # observed means: IAA 6 ones over 14 cells, smoker 5 over 12
        assert body["rows"]["IAA"][0] == pytest.approx(6 / 14, abs=1e-9)
        assert body["rows"]["smoker"][0] == pytest.approx(5 / 12, abs=1e-12)
        assert body["source"] == {"IAA": "model", "smoker": "empirical"}

    def test_waterfall_parity(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}/waterfall")
        model = library_model()
        dataset = fixture_dataset()
        expected = waterfall_points(decode(model, dataset), dataset)
        assert resp.json() == json.loads(json.dumps(expected))

    def test_transitions_parity(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}/transitions")
        model = library_model()
        dataset = fixture_dataset()
        expected = transition_summary(decode(model, dataset), dataset).to_dict()
        assert resp.json() == json.loads(json.dumps(expected))
        total = sum(sum(row) for row in resp.json()["counts"])
        assert total == dataset.n_visits - dataset.n_subjects

    def test_density_parity(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}/density",
                                params={"outcome": "dx"})
        assert resp.status_code == 200
        dataset = fixture_dataset()
        expected = kde(outcome_ages(dataset, "dx"), name="dx").to_dict()
        assert resp.json() == json.loads(json.dumps(expected))

    def test_density_unknown_outcome(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}/density",
                                params={"outcome": "nope"})
        assert resp.status_code == 404

    def test_density_requires_outcome_param(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}/density")
        assert resp.status_code == 400
        assert resp.json()["code"] == "ValidationError"

    def test_subject_detail(self, ws):
        resp = ws["client"].get(
            f"/api/models/{ws['model_id']}/subjects/a")
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["visits"]) == 3
        first = body["visits"][0]
        assert first["age_months"] == 6.0
        assert first["observations"] == {"IAA": 0, "GADA": 0, "smoker": 0}
        assert len(first["posterior"]) == 2
        assert sum(first["posterior"]) == pytest.approx(1.0, abs=1e-9)
        assert len(body["viterbi_path"]) == 3
        # second visit has a missing smoker cell; key must be absent
        assert "smoker" not in body["visits"][1]["observations"]

    def test_subject_not_found(self, ws):
        resp = ws["client"].get(f"/api/models/{ws['model_id']}/subjects/zz")
        assert resp.status_code == 404

    def test_repeated_reads_identical(self, ws):
        url = f"/api/models/{ws['model_id']}/waterfall"
        assert ws["client"].get(url).content == ws["client"].get(url).content

    def test_decoding_cache_persisted(self, ws):
        cache = ws["data_dir"] / "models" / \
            f"{ws['model_id']}.decodings.json"
        assert cache.exists()
        # a fresh process must serve identical bodies from the cache
        fresh = TestClient(create_app(str(ws["data_dir"])))
        url = f"/api/models/{ws['model_id']}/transitions"
        assert fresh.get(url).content == ws["client"].get(url).content


class TestCohorts:
    def test_end_to_end_matches_library(self, ws):
        resp = ws["client"].post("/api/cohorts", json={
            "model_id": ws["model_id"], "name": "progressors",
            "query": "S0 ~> S1"})
        assert resp.status_code == 200
        body = resp.json()
        model = library_model()
        dataset = fixture_dataset()
        expected = evaluate(parse_query("S0 ~> S1"),
                            decode(model, dataset), dataset)
        assert set(body["member_ids"]) == expected
        assert body["query_text"] == "S0 ~> S1"
        assert body["created_from_model"] == ws["model_id"]
        listed = ws["client"].get("/api/cohorts").json()
        assert body["cohort_id"] in [c["cohort_id"] for c in listed]

    def test_cohort_scopes_summaries(self, ws):
        created = ws["client"].post("/api/cohorts", json={
            "model_id": ws["model_id"], "name": "s", "query": "S0"}).json()
        resp = ws["client"].get(
            f"/api/models/{ws['model_id']}/waterfall",
            params={"cohort_id": created["cohort_id"]})
        assert resp.status_code == 200
        sids = {p["subject_id"] for p in resp.json()}
        assert sids == set(created["member_ids"])

    def test_delete(self, ws):
        created = ws["client"].post("/api/cohorts", json={
            "model_id": ws["model_id"], "name": "tmp", "query": "S0"}).json()
        resp = ws["client"].delete(f"/api/cohorts/{created['cohort_id']}")
        assert resp.status_code == 204
        listed = ws["client"].get("/api/cohorts").json()
        assert created["cohort_id"] not in [c["cohort_id"] for c in listed]
        assert ws["client"].delete(
            f"/api/cohorts/{created['cohort_id']}").status_code == 404

    def test_bad_query_reports_offset(self, ws):
        resp = ws["client"].post("/api/cohorts", json={
            "model_id": ws["model_id"], "name": "x", "query": "S1 -> -> S2"})
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "QueryParseError"
        assert body["detail"]["offset"] == 6
        assert body["detail"]["kind"] == "QuerySyntaxError"

    def test_unknown_model(self, ws):
        resp = ws["client"].post("/api/cohorts", json={
            "model_id": "nope", "name": "x", "query": "S0"})
        assert resp.status_code == 404

    def test_unknown_cohort_in_summary(self, ws):
        resp = ws["client"].get(
            f"/api/models/{ws['model_id']}/waterfall",
            params={"cohort_id": "nope"})
        assert resp.status_code == 404


class TestRestart:
    def test_artifacts_survive_byte_identically(self, tmp_path):
        client = TestClient(create_app(str(tmp_path)))
        did = client.post("/api/datasets",
                          json={"csv": CSV_TEXT, "config": CONFIG}
                          ).json()["dataset_id"]
        mid = client.post(
            "/api/models",
            json={"dataset_id": did, **TRAIN_BODY}).json()["model_id"]
        cohort = client.post("/api/cohorts", json={
            "model_id": mid, "name": "kept", "query": "S1"}).json()
        files = {p: p.read_bytes()
                 for p in tmp_path.rglob("*.json")}
        assert len(files) >= 3

        fresh = TestClient(create_app(str(tmp_path)))
        assert fresh.get(f"/api/models/{mid}").content == \
            client.get(f"/api/models/{mid}").content
        assert fresh.get("/api/cohorts").json() == [cohort]
        for path, before in files.items():
            assert path.read_bytes() == before

    def test_retrain_is_byte_identical(self, tmp_path):
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        ids = []
        for d in (dir_a, dir_b):
            client = TestClient(create_app(str(d)))
            did = client.post("/api/datasets",
                              json={"csv": CSV_TEXT, "config": CONFIG}
                              ).json()["dataset_id"]
            ids.append(client.post(
                "/api/models",
                json={"dataset_id": did, **TRAIN_BODY}).json()["model_id"])
        assert ids[0] == ids[1]
        file_a = (dir_a / "models" / f"{ids[0]}.json").read_bytes()
        file_b = (dir_b / "models" / f"{ids[1]}.json").read_bytes()
        assert file_a == file_b
