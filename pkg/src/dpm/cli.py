"""Command-line driver: file-based ingest/train/decode/query/summary plus
the HTTP server. Every artifact a command writes is byte-identical to the
library serialization, so files can be handed between commands, diffed,
and checked into fixtures.

Exit codes: 0 success, 1 validation/data error (JSON object on stderr),
2 usage error.
"""

from __future__ import annotations

import functools
import json
import sys

import click
import uvicorn

from .errors import DpmError
from .hmm import (
    TrainConfig,
    decode,
    decodings_to_json,
    model_from_json,
    model_fingerprint,
    model_to_json,
    train,
)
from .ingest import (
    IngestConfig,
    dataset_from_json,
    dataset_to_json,
    dataset_fingerprint,
    parse_dataset,
)
from .query import CohortStore, collapse_runs, match_subject, parse_query
from .service import DEFAULT_BIND, DEFAULT_DATA_DIR, create_app
from .summarize import (
    feature_matrix,
    kde,
    outcome_ages,
    transition_summary,
)


def _fail(payload: dict) -> None:
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(1)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DpmError as exc:
            _fail(exc.to_payload())
        except FileNotFoundError as exc:
            _fail({"code": "ValidationError",
                   "message": f"file not found: {exc.filename}",
                   "detail": {"kind": "FileNotFoundError"}})
    return wrapper


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


@click.group()
def main():
    """Longitudinal disease-progression modeling toolkit."""


@main.command()
@click.argument("csv_path", metavar="<csv>")
@click.option("--config", "config_path", required=True, metavar="<json>",
              help="Column-mapping document.")
@click.option("--out", "out_path", required=True, metavar="<dataset.json>")
@_guarded
def ingest(csv_path, config_path, out_path):
    """Validate a CSV panel and write the dataset artifact."""
    config = IngestConfig.from_json(_read(config_path))
    dataset = parse_dataset(_read(csv_path), config)
    _write(out_path, dataset_to_json(dataset))
    click.echo(f"wrote {out_path}: {dataset.n_subjects} subjects, "
               f"{dataset.n_visits} visits "
               f"(id {dataset_fingerprint(dataset)})", err=True)


@main.command(name="train")
@click.argument("dataset_path", metavar="<dataset.json>")
@click.option("--states", required=True, type=int, help="Number of states.")
@click.option("--seed", required=True, type=int)
@click.option("--max-iter", type=int, default=TrainConfig.max_iter,
              show_default=True)
@click.option("--restarts", type=int, default=TrainConfig.n_restarts,
              show_default=True)
@click.option("--out", "out_path", required=True, metavar="<model.json>")
@_guarded
def train_cmd(dataset_path, states, seed, max_iter, restarts, out_path):
    """Fit a model; identical inputs give byte-identical output files."""
    dataset = dataset_from_json(_read(dataset_path))
    config = TrainConfig(n_states=states, seed=seed, max_iter=max_iter,
                         n_restarts=restarts)
    model = train(dataset, config)
    _write(out_path, model_to_json(model))
    click.echo(f"wrote {out_path}: log_likelihood={model.log_likelihood!r} "
               f"after {model.n_iterations_run} iterations", err=True)


@main.command(name="decode")
@click.argument("model_path", metavar="<model.json>")
@click.argument("dataset_path", metavar="<dataset.json>")
@click.option("--out", "out_path", required=True, metavar="<decoding.json>")
@_guarded
def decode_cmd(model_path, dataset_path, out_path):
    """Infer per-visit states and posteriors for every subject."""
    model = model_from_json(_read(model_path))
    dataset = dataset_from_json(_read(dataset_path))
    decodings = decode(model, dataset)
    _write(out_path, decodings_to_json(decodings, dataset,
                                       model_fingerprint(model),
                                       model.n_states))
    click.echo(f"wrote {out_path}: {len(decodings)} subjects", err=True)


@main.command(name="query")
@click.argument("decoding_path", metavar="<decoding.json>")
@click.argument("query_text", metavar="<query>")
@click.option("--save", "save_name", default=None, metavar="<name>",
              help="Persist the matched set as a cohort.")
@click.option("--data-dir", envvar="DPM_DATA_DIR", default=DEFAULT_DATA_DIR,
              show_default=True, help="Cohort storage for --save.")
@_guarded
def query_cmd(decoding_path, query_text, save_name, data_dir):
    """Match a state-sequence query; prints subject ids one per line."""
    artifact = json.loads(_read(decoding_path))
    query = parse_query(query_text)
    n_states = int(artifact["n_states"])
    matched = []
    for sid in sorted(artifact["subjects"]):
        entry = artifact["subjects"][sid]
        runs = collapse_runs(entry["states"], entry["ages"])
        if match_subject(query, runs, n_states=n_states):
            matched.append(sid)
    for sid in matched:
        click.echo(sid)
    if save_name is not None:
        cohort = CohortStore(data_dir).save_cohort(
            save_name, query_text, matched, str(artifact["model_id"]))
        click.echo(f"saved cohort {cohort.cohort_id} "
                   f"({len(matched)} members)", err=True)


@main.command(name="summary")
@click.argument("model_path", metavar="<model.json>")
@click.argument("dataset_path", metavar="<dataset.json>")
@click.option("--feature-matrix", "want_features", is_flag=True)
@click.option("--transitions", "want_transitions", is_flag=True)
@click.option("--density", "density_outcome", default=None,
              metavar="<outcome>")
@_guarded
def summary_cmd(model_path, dataset_path, want_features, want_transitions,
                density_outcome):
    """Print one summary document (choose exactly one kind) as JSON."""
    chosen = [want_features, want_transitions, density_outcome is not None]
    if sum(chosen) != 1:
        raise click.UsageError(
            "choose exactly one of --feature-matrix, --transitions, "
            "--density <outcome>")
    model = model_from_json(_read(model_path))
    dataset = dataset_from_json(_read(dataset_path))
    decodings = decode(model, dataset)
    if want_features:
        variables = list(dataset.model_variables) + \
            list(dataset.extra_variables)
        doc = feature_matrix(model, decodings, dataset, variables).to_dict()
    elif want_transitions:
        doc = transition_summary(decodings, dataset).to_dict()
    else:
        ages = outcome_ages(dataset, density_outcome)
        doc = kde(ages, name=density_outcome).to_dict()
    click.echo(_canonical(doc), nl=False)


@main.command(name="serve")
@click.option("--data-dir", envvar="DPM_DATA_DIR", default=DEFAULT_DATA_DIR,
              show_default=True)
@click.option("--bind", envvar="DPM_BIND", default=DEFAULT_BIND,
              show_default=True, metavar="<host:port>")
def serve_cmd(data_dir, bind):
    """Run the HTTP API."""
    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--bind must look like host:port, got {bind!r}")
    uvicorn.run(create_app(data_dir), host=host, port=int(port_text))
