"""HTTP API over the workspace: dataset upload, model training, decodings,
summaries, queries, and cohorts, persisted as plain JSON files under a data
directory so everything survives a restart byte for byte.

Build the app with :func:`create_app`; the data directory comes from the
``data_dir`` argument or the ``DPM_DATA_DIR`` environment variable
(default ``./data``).
"""

from __future__ import annotations

import json
import os
import threading

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import DpmError, NotFound, TrainingBusy
from .hmm import (
    Decoding,
    HmmModel,
    TrainConfig,
    decode,
    decodings_from_dict,
    decodings_to_json,
    model_from_json,
    model_fingerprint,
    model_to_dict,
    model_to_json,
    train,
)
from .ingest import (
    Dataset,
    IngestConfig,
    dataset_fingerprint,
    dataset_from_json,
    dataset_to_json,
    parse_dataset,
)
from .query import CohortStore, evaluate, parse_query
from .summarize import (
    feature_matrix,
    kde,
    outcome_ages,
    transition_summary,
    waterfall_points,
)

DEFAULT_DATA_DIR = "./data"
DEFAULT_BIND = "127.0.0.1:8080"

_HTTP_STATUS = {"NotFound": 404, "QueryParseError": 400, "TrainingBusy": 503}


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


class Workspace:
    """File-backed state: datasets/, models/ (with decoding caches), and
    cohorts/ under one data directory. Loaded objects are memoized; the
    files on disk stay the source of truth."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self.datasets_dir = os.path.join(data_dir, "datasets")
        self.models_dir = os.path.join(data_dir, "models")
        os.makedirs(self.datasets_dir, exist_ok=True)
        os.makedirs(self.models_dir, exist_ok=True)
        self.cohorts = CohortStore(data_dir)
        self._datasets: dict[str, Dataset] = {}
        self._models: dict[str, HmmModel] = {}
        self._decodings: dict[str, dict[str, Decoding]] = {}
        self.write_lock = threading.Lock()
        self.train_lock = threading.Lock()

    # -- datasets --

    def _dataset_path(self, dataset_id: str) -> str:
        return os.path.join(self.datasets_dir, f"{dataset_id}.json")

    def save_dataset(self, dataset: Dataset) -> str:
        dataset_id = dataset_fingerprint(dataset)
        with self.write_lock:
            _write_atomic(self._dataset_path(dataset_id),
                          dataset_to_json(dataset))
        self._datasets[dataset_id] = dataset
        return dataset_id

    def dataset(self, dataset_id: str) -> Dataset:
        if dataset_id not in self._datasets:
            try:
                with open(self._dataset_path(dataset_id),
                          encoding="utf-8") as f:
                    self._datasets[dataset_id] = dataset_from_json(f.read())
            except FileNotFoundError:
                raise NotFound("dataset", dataset_id) from None
        return self._datasets[dataset_id]

    # -- models --

    def _model_path(self, model_id: str) -> str:
        return os.path.join(self.models_dir, f"{model_id}.json")

    def save_model(self, model: HmmModel) -> str:
        model_id = model_fingerprint(model)
        with self.write_lock:
            _write_atomic(self._model_path(model_id), model_to_json(model))
        self._models[model_id] = model
        return model_id

    def model(self, model_id: str) -> HmmModel:
        if model_id not in self._models:
            try:
                with open(self._model_path(model_id), encoding="utf-8") as f:
                    self._models[model_id] = model_from_json(f.read())
            except FileNotFoundError:
                raise NotFound("model", model_id) from None
        return self._models[model_id]

    def dataset_id_for(self, model: HmmModel) -> str:
        trained_on = model.trained_on
        return trained_on.removeprefix("sha256:")

    def decodings_for(self, model_id: str):
        """(decodings, dataset) for a model, computing and persisting the
        decoding cache next to the model file on first use."""
        model = self.model(model_id)
        dataset = self.dataset(self.dataset_id_for(model))
        if model_id not in self._decodings:
            cache_path = os.path.join(self.models_dir,
                                      f"{model_id}.decodings.json")
            if os.path.exists(cache_path):
                with open(cache_path, encoding="utf-8") as f:
                    self._decodings[model_id] = decodings_from_dict(
                        json.load(f))
            else:
                decodings = decode(model, dataset)
                with self.write_lock:
                    _write_atomic(cache_path, decodings_to_json(
                        decodings, dataset, model_id, model.n_states))
                self._decodings[model_id] = decodings
        return self._decodings[model_id], dataset


def _cohort_members(workspace: Workspace, cohort_id: str | None):
    if not cohort_id:
        return None
    return set(workspace.cohorts.get(cohort_id).member_ids)


async def _dataset_upload_parts(request: Request):
    """Accept multipart form fields (csv, config) or a JSON body
    {"csv": ..., "config": ...}; returns (csv_text, config_dict)."""
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        if "csv" not in form or "config" not in form:
            raise DpmError("multipart upload needs 'csv' and 'config' parts")
        csv_part = form["csv"]
        csv_text = (await csv_part.read()).decode("utf-8") \
            if hasattr(csv_part, "read") else str(csv_part)
        config_part = form["config"]
        config_text = (await config_part.read()).decode("utf-8") \
            if hasattr(config_part, "read") else str(config_part)
        try:
            config = json.loads(config_text)
        except json.JSONDecodeError as exc:
            raise DpmError(f"config part is not valid JSON: {exc}") from None
        return csv_text, config
    try:
        body = await request.json()
    except json.JSONDecodeError as exc:
        raise DpmError(f"request body is not valid JSON: {exc}") from None
    if not isinstance(body, dict) or "csv" not in body or "config" not in body:
        raise DpmError("JSON upload needs 'csv' and 'config' fields")
    return body["csv"], body["config"]


def create_app(data_dir: str | None = None) -> FastAPI:
    if data_dir is None:
        data_dir = os.environ.get("DPM_DATA_DIR", DEFAULT_DATA_DIR)
    app = FastAPI(title="dpm", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    workspace = Workspace(data_dir)
    app.state.workspace = workspace

    @app.exception_handler(DpmError)
    async def _on_dpm_error(request: Request, exc: DpmError):
        return JSONResponse(status_code=_HTTP_STATUS.get(exc.code, 400),
                            content=exc.to_payload())

    @app.exception_handler(RequestValidationError)
    async def _on_request_error(request: Request,
                                exc: RequestValidationError):
        errors = [{"loc": [str(part) for part in e.get("loc", ())],
                   "msg": str(e.get("msg", "")),
                   "type": str(e.get("type", ""))}
                  for e in exc.errors()]
        return JSONResponse(
            status_code=400,
            content={"code": "ValidationError",
                     "message": "invalid request",
                     "detail": {"kind": "RequestValidationError",
                                "errors": errors}})

    @app.post("/api/datasets")
    async def upload_dataset(request: Request):
        csv_text, config_dict = await _dataset_upload_parts(request)
        config = IngestConfig.from_dict(config_dict)
        dataset = parse_dataset(csv_text, config)
        dataset_id = workspace.save_dataset(dataset)
        return {"dataset_id": dataset_id,
                "n_subjects": dataset.n_subjects,
                "n_visits": dataset.n_visits}

    @app.post("/api/models")
    async def train_model(request: Request):
        body = await request.json()
        dataset = workspace.dataset(str(body["dataset_id"]))
        config = TrainConfig(
            n_states=int(body["n_states"]),
            seed=int(body.get("seed", 0)),
            max_iter=int(body.get("max_iter", TrainConfig.max_iter)),
            n_restarts=int(body.get("n_restarts", TrainConfig.n_restarts)))
        if not workspace.train_lock.acquire(blocking=False):
            raise TrainingBusy()
        try:
            model = train(dataset, config)
        finally:
            workspace.train_lock.release()
        model_id = workspace.save_model(model)
        return {"model_id": model_id,
                "log_likelihood": model.log_likelihood,
                "n_iterations_run": model.n_iterations_run}

    @app.get("/api/models/{model_id}")
    async def get_model(model_id: str):
        model = workspace.model(model_id)
        dataset_id = workspace.dataset_id_for(model)
        dataset = workspace.dataset(dataset_id)
        payload = model_to_dict(model)
        payload["model_id"] = model_id
        payload["dataset"] = {
            "dataset_id": dataset_id,
            "n_subjects": dataset.n_subjects,
            "n_visits": dataset.n_visits,
            "model_variables": list(dataset.model_variables),
            "extra_variables": list(dataset.extra_variables),
            "outcome_names": list(dataset.outcome_names),
        }
        return payload

    @app.get("/api/models/{model_id}/feature-matrix")
    async def get_feature_matrix(model_id: str, vars: str = ""):
        decodings, dataset = workspace.decodings_for(model_id)
        model = workspace.model(model_id)
        if vars:
            variables = [v.strip() for v in vars.split(",") if v.strip()]
        else:
            variables = list(dataset.model_variables) + \
                list(dataset.extra_variables)
        return feature_matrix(model, decodings, dataset, variables).to_dict()

    @app.get("/api/models/{model_id}/waterfall")
    async def get_waterfall(model_id: str, cohort_id: str = ""):
        decodings, dataset = workspace.decodings_for(model_id)
        cohort = _cohort_members(workspace, cohort_id)
        return waterfall_points(decodings, dataset, cohort=cohort)

    @app.get("/api/models/{model_id}/transitions")
    async def get_transitions(model_id: str, cohort_id: str = ""):
        decodings, dataset = workspace.decodings_for(model_id)
        cohort = _cohort_members(workspace, cohort_id)
        return transition_summary(decodings, dataset, cohort=cohort).to_dict()

    @app.get("/api/models/{model_id}/density")
    async def get_density(model_id: str, outcome: str, cohort_id: str = ""):
        _decodings, dataset = workspace.decodings_for(model_id)
        cohort = _cohort_members(workspace, cohort_id)
        ages = outcome_ages(dataset, outcome, cohort=cohort)
        return kde(ages, name=outcome).to_dict()

    @app.get("/api/models/{model_id}/subjects/{subject_id}")
    async def get_subject(model_id: str, subject_id: str):
        decodings, dataset = workspace.decodings_for(model_id)
        if subject_id not in dataset.subjects:
            raise NotFound("subject", subject_id)
        dec = decodings[subject_id]
        visits = []
        for t, visit in enumerate(dataset.subjects[subject_id].visits):
            visits.append({
                "age_months": visit.age_months,
                "observations": dict(visit.observations),
                "state": dec.states[t],
                "posterior": [float(p) for p in dec.posteriors[t]],
            })
        return {"visits": visits, "viterbi_path": list(dec.viterbi_path)}

    @app.post("/api/cohorts")
    async def create_cohort(request: Request):
        body = await request.json()
        model_id = str(body["model_id"])
        query = parse_query(str(body["query"]))
        decodings, dataset = workspace.decodings_for(model_id)
        members = evaluate(query, decodings, dataset)
        cohort = workspace.cohorts.save_cohort(
            str(body.get("name", "")), str(body["query"]), members, model_id)
        return cohort.to_dict()

    @app.get("/api/cohorts")
    async def list_cohorts():
        return [c.to_dict() for c in workspace.cohorts.list_cohorts()]

    @app.delete("/api/cohorts/{cohort_id}")
    async def delete_cohort(cohort_id: str):
        workspace.cohorts.delete_cohort(cohort_id)
        return Response(status_code=204)

    static_dir = os.environ.get("DPM_STATIC", "")
    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app
