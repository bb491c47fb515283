"""CSV ingest, validation, and the internal longitudinal dataset model."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

from .errors import (DuplicateVisit, InvalidConfig, MalformedCsv, NegativeAge,
                     NonBinaryValue, UnknownColumn)

CANONICAL_SUBJECT_COL = "subject_id"
CANONICAL_AGE_COL = "age_months"


@dataclass(frozen=True)
class Visit:
    """One clinic visit: binary observations plus outcome-event flags.

    ``observations`` holds only the variables observed at this visit; a
    missing cell is an absent key, never an imputed value.
    """

    subject_id: str
    age_months: float
    observations: dict[str, int]
    outcomes: dict[str, bool]


@dataclass(frozen=True)
class Subject:
    subject_id: str
    visits: list[Visit]  # strictly ascending age_months, never empty


@dataclass(frozen=True)
class Dataset:
    subjects: dict[str, Subject]
    model_variables: list[str]
    extra_variables: list[str]
    outcome_names: list[str]

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_visits(self) -> int:
        return sum(len(s.visits) for s in self.subjects.values())


@dataclass(frozen=True)
class IngestConfig:
    """Column mapping for :func:`parse_dataset`.

    The split between ``model_vars`` (fed to the HMM) and ``extra_vars``
    (summarized only) is a user decision, so it lives in an explicit
    document instead of being inferred from headers.
    """

    subject_col: str
    age_col: str
    model_vars: list[str] = field(default_factory=list)
    extra_vars: list[str] = field(default_factory=list)
    outcome_cols: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict) -> "IngestConfig":
        try:
            cfg = cls(
                subject_col=str(raw["subject_col"]),
                age_col=str(raw["age_col"]),
                model_vars=[str(v) for v in raw.get("model_vars", [])],
                extra_vars=[str(v) for v in raw.get("extra_vars", [])],
                outcome_cols=[str(v) for v in raw.get("outcome_cols", [])],
            )
        except KeyError as exc:
            raise InvalidConfig(f"ingest config is missing field {exc.args[0]!r}")
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "IngestConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"ingest config is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise InvalidConfig("ingest config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "subject_col": self.subject_col,
            "age_col": self.age_col,
            "model_vars": list(self.model_vars),
            "extra_vars": list(self.extra_vars),
            "outcome_cols": list(self.outcome_cols),
        }

    def validate(self) -> None:
        overlap = set(self.model_vars) & set(self.extra_vars)
        if overlap:
            raise InvalidConfig(
                f"variables listed as both model and extra: {sorted(overlap)}")
        names = [self.subject_col, self.age_col, *self.model_vars,
                 *self.extra_vars, *self.outcome_cols]
        seen, dup = set(), set()
        for n in names:
            if n in seen:
                dup.add(n)
            seen.add(n)
        if dup:
            raise InvalidConfig(f"column(s) referenced twice: {sorted(dup)}")


def _parse_binary_cell(cell: str, row: int, column: str) -> int | None:
    cell = cell.strip()
    if cell == "":
        return None
    if cell == "0":
        return 0
    if cell == "1":
        return 1
    raise NonBinaryValue(row, column, cell)


def parse_dataset(csv_text: str, config: IngestConfig) -> Dataset:
    """Parse longitudinal visit rows into a validated :class:`Dataset`.

    Rows are grouped by subject and sorted by age; empty observation cells
    become missing values. Columns the config does not reference are
    ignored. Every malformed input raises a classified :class:`IngestError`;
    a partially built dataset is never returned.
    """
    config.validate()
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedCsv("empty input: a header row is required", row=0)
    if len(set(header)) != len(header):
        dup = sorted({c for c in header if header.count(c) > 1})
        raise MalformedCsv(f"duplicate header column(s): {dup}", row=1)

    col = {name: i for i, name in enumerate(header)}
    needed = [config.subject_col, config.age_col, *config.model_vars,
              *config.extra_vars, *config.outcome_cols]
    missing = [c for c in needed if c not in col]
    if missing:
        raise UnknownColumn(missing)

    obs_cols = [*config.model_vars, *config.extra_vars]
    by_subject: dict[str, list[Visit]] = {}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise MalformedCsv(
                f"row {lineno}: expected {len(header)} cells, got {len(row)}",
                row=lineno)
        subject_id = row[col[config.subject_col]].strip()
        if not subject_id:
            raise MalformedCsv(f"row {lineno}: empty subject id", row=lineno)
        age_cell = row[col[config.age_col]].strip()
        try:
            age = float(age_cell)
        except ValueError:
            raise MalformedCsv(
                f"row {lineno}: age {age_cell!r} is not a decimal number",
                row=lineno)
        if not age >= 0.0:  # also rejects NaN
            raise NegativeAge(lineno, age)

        observations = {}
        for name in obs_cols:
            value = _parse_binary_cell(row[col[name]], lineno, name)
            if value is not None:
                observations[name] = value
        outcomes = {}
        for name in config.outcome_cols:
            value = _parse_binary_cell(row[col[name]], lineno, name)
            outcomes[name] = value == 1

        by_subject.setdefault(subject_id, []).append(
            Visit(subject_id, age, observations, outcomes))

    subjects = {}
    for subject_id, visits in by_subject.items():
        visits.sort(key=lambda v: v.age_months)
        for a, b in zip(visits, visits[1:]):
            if a.age_months == b.age_months:
                raise DuplicateVisit(subject_id, a.age_months)
        subjects[subject_id] = Subject(subject_id, visits)

    return Dataset(
        subjects=subjects,
        model_variables=list(config.model_vars),
        extra_variables=list(config.extra_vars),
        outcome_names=list(config.outcome_cols),
    )


def canonical_config(dataset: Dataset) -> IngestConfig:
    """Config that re-parses the output of :func:`export_dataset`."""
    return IngestConfig(
        subject_col=CANONICAL_SUBJECT_COL,
        age_col=CANONICAL_AGE_COL,
        model_vars=list(dataset.model_variables),
        extra_vars=list(dataset.extra_variables),
        outcome_cols=list(dataset.outcome_names),
    )


def export_dataset(dataset: Dataset) -> str:
    """Serialize to canonical CSV: subjects in lexicographic id order,
    visits in age order, missing observations as empty cells.

    ``parse_dataset(export_dataset(d), canonical_config(d))`` reproduces
    ``d`` exactly (ages are written with full round-trip precision).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    obs_cols = [*dataset.model_variables, *dataset.extra_variables]
    writer.writerow([CANONICAL_SUBJECT_COL, CANONICAL_AGE_COL, *obs_cols,
                     *dataset.outcome_names])
    for subject_id in sorted(dataset.subjects):
        for visit in dataset.subjects[subject_id].visits:
            row = [subject_id, repr(visit.age_months)]
            for name in obs_cols:
                value = visit.observations.get(name)
                row.append("" if value is None else str(value))
            for name in dataset.outcome_names:
                row.append("1" if visit.outcomes.get(name, False) else "0")
            writer.writerow(row)
    return buf.getvalue()


# --- JSON artifact (CLI handoff) -------------------------------------------

def dataset_to_dict(dataset: Dataset) -> dict:
    return {
        "model_variables": list(dataset.model_variables),
        "extra_variables": list(dataset.extra_variables),
        "outcome_names": list(dataset.outcome_names),
        "subjects": {
            sid: [
                {
                    "age_months": v.age_months,
                    "observations": v.observations,
                    "outcomes": v.outcomes,
                }
                for v in subject.visits
            ]
            for sid, subject in sorted(dataset.subjects.items())
        },
    }


def dataset_from_dict(raw: dict) -> Dataset:
    subjects = {}
    for sid, visits in raw["subjects"].items():
        subjects[sid] = Subject(sid, [
            Visit(sid, float(v["age_months"]),
                  {k: int(x) for k, x in v["observations"].items()},
                  {k: bool(x) for k, x in v["outcomes"].items()})
            for v in visits
        ])
    return Dataset(
        subjects=subjects,
        model_variables=list(raw["model_variables"]),
        extra_variables=list(raw["extra_variables"]),
        outcome_names=list(raw["outcome_names"]),
    )


def dataset_to_json(dataset: Dataset) -> str:
    return json.dumps(dataset_to_dict(dataset), sort_keys=True,
                      separators=(",", ":")) + "\n"


def dataset_from_json(text: str) -> Dataset:
    return dataset_from_dict(json.loads(text))


def dataset_fingerprint(dataset: Dataset) -> str:
    """Short content hash; stable across parse/export round-trips."""
    digest = hashlib.sha256(dataset_to_json(dataset).encode()).hexdigest()
    return digest[:12]
