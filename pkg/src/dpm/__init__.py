"""Toolkit for HMM-based analysis of longitudinal binary health data:
ingest, training, decoding, state-sequence queries, summaries, and an
HTTP service backing the interactive views."""

from .errors import DpmError
from .hmm import (
    Decoding,
    HmmModel,
    TrainConfig,
    decode,
    forward_backward,
    model_from_json,
    model_to_json,
    sample,
    train,
    viterbi,
)
from .ingest import (
    Dataset,
    IngestConfig,
    Subject,
    Visit,
    dataset_from_json,
    dataset_to_json,
    export_dataset,
    parse_dataset,
)
from .query import (
    Cohort,
    CohortStore,
    StateQuery,
    collapse_runs,
    evaluate,
    match_subject,
    parse_query,
    render_query,
)
from .service import create_app
from .summarize import (
    feature_matrix,
    fraction_before,
    kde,
    outcome_ages,
    transition_summary,
    waterfall_points,
)

__all__ = [
    "Cohort",
    "CohortStore",
    "Dataset",
    "Decoding",
    "DpmError",
    "HmmModel",
    "IngestConfig",
    "StateQuery",
    "Subject",
    "TrainConfig",
    "Visit",
    "collapse_runs",
    "create_app",
    "dataset_from_json",
    "dataset_to_json",
    "decode",
    "evaluate",
    "export_dataset",
    "feature_matrix",
    "forward_backward",
    "fraction_before",
    "kde",
    "match_subject",
    "model_from_json",
    "model_to_json",
    "outcome_ages",
    "parse_dataset",
    "parse_query",
    "render_query",
    "sample",
    "train",
    "transition_summary",
    "viterbi",
    "waterfall_points",
]
