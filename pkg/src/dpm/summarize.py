"""Cohort analytics behind the views: per-state feature probabilities,
transition statistics over age, and outcome-age density estimates.

All functions are pure; subjects are always processed in lexicographic id
order so cohort-restricted results match results on an equivalent
sub-dataset exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySamples, UnknownOutcome, UnknownVariable
from .hmm import Decoding, HmmModel
from .ingest import Dataset


@dataclass
class FeatureMatrix:
    """Per-state probability table. Model variables reproduce the trained
    emission probabilities verbatim; extra variables are decoded-visit
    frequencies, left undefined (None) where a state has no observations."""

    states: list[int]
    rows: dict[str, list[float | None]]
    source: dict[str, str]               # variable -> "model" | "empirical"

    def to_dict(self) -> dict:
        return {"states": list(self.states),
                "rows": {v: list(row) for v, row in self.rows.items()},
                "source": dict(self.source)}


@dataclass
class TransitionSummary:
    n_states: int
    counts: np.ndarray                   # (K, K) observed consecutive pairs
    transition_ages: dict[tuple[int, int], list[float]]

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "counts": [[int(c) for c in row] for row in self.counts],
            "transition_ages": [
                {"from_state": f, "to_state": t, "ages": list(ages)}
                for (f, t), ages in sorted(self.transition_ages.items())
            ],
        }


@dataclass
class DensityEstimate:
    outcome: str
    sample_ages: list[float]
    bandwidth: float
    grid: list[tuple[float, float]]

    def to_dict(self) -> dict:
        return {"outcome": self.outcome,
                "sample_ages": list(self.sample_ages),
                "bandwidth": self.bandwidth,
                "grid": [[x, y] for x, y in self.grid]}


def _cohort_ids(dataset: Dataset, cohort) -> list[str]:
    ids = sorted(dataset.subjects)
    if cohort is None:
        return ids
    members = set(cohort)
    return [sid for sid in ids if sid in members]


def feature_matrix(model: HmmModel, decodings: dict[str, Decoding],
                   dataset: Dataset, variables: list[str]) -> FeatureMatrix:
    k = model.n_states
    rows: dict[str, list[float | None]] = {}
    source: dict[str, str] = {}
    for v in variables:
        if v in model.emission:
            rows[v] = [float(p) for p in model.emission[v]]
            source[v] = "model"
        elif v in dataset.extra_variables:
            ones = np.zeros(k)
            seen = np.zeros(k)
            for sid in sorted(dataset.subjects):
                dec = decodings[sid]
                for t, visit in enumerate(dataset.subjects[sid].visits):
                    value = visit.observations.get(v)
                    if value is not None:
                        state = dec.states[t]
                        seen[state] += 1
                        ones[state] += value
            rows[v] = [float(ones[s] / seen[s]) if seen[s] > 0 else None
                       for s in range(k)]
            source[v] = "empirical"
        else:
            raise UnknownVariable([v])
    return FeatureMatrix(states=list(range(k)), rows=rows, source=source)


def transition_summary(decodings: dict[str, Decoding], dataset: Dataset,
                       cohort=None) -> TransitionSummary:
    """Consecutive-visit decoded transition counts (diagonal included) and,
    for each off-diagonal pair, the ages of the destination visits."""
    some = next(iter(decodings.values()))
    k = some.posteriors.shape[1]
    counts = np.zeros((k, k), dtype=int)
    ages: dict[tuple[int, int], list[float]] = {}
    for sid in _cohort_ids(dataset, cohort):
        dec = decodings[sid]
        visits = dataset.subjects[sid].visits
        for t in range(1, len(visits)):
            src, dst = dec.states[t - 1], dec.states[t]
            counts[src, dst] += 1
            if src != dst:
                ages.setdefault((src, dst), []).append(visits[t].age_months)
    return TransitionSummary(n_states=k, counts=counts, transition_ages=ages)


def fraction_before(summary: TransitionSummary, age_cutoff: float,
                    from_state: int, to_state: int) -> float | None:
    """Share of (from, to) transitions whose destination age is below the
    cutoff; None when that transition never occurs."""
    ages = summary.transition_ages.get((from_state, to_state))
    if not ages:
        return None
    return sum(1 for a in ages if a < age_cutoff) / len(ages)


def waterfall_points(decodings: dict[str, Decoding], dataset: Dataset,
                     cohort=None) -> list[dict]:
    """One record per visit: the raw material for the per-state beeswarm
    lanes. Layout (jitter) is a client concern and not computed here."""
    points = []
    for sid in _cohort_ids(dataset, cohort):
        dec = decodings[sid]
        for t, visit in enumerate(dataset.subjects[sid].visits):
            points.append({
                "subject_id": sid,
                "age_months": visit.age_months,
                "state": dec.states[t],
                "posterior_max": float(dec.posteriors[t].max()),
            })
    return points


def outcome_ages(dataset: Dataset, outcome: str, cohort=None) -> list[float]:
    """Age at the first visit flagging the outcome, per cohort subject;
    subjects that never flag it are omitted."""
    if outcome not in dataset.outcome_names:
        raise UnknownOutcome(outcome)
    ages = []
    for sid in _cohort_ids(dataset, cohort):
        for visit in dataset.subjects[sid].visits:
            if visit.outcomes.get(outcome, False):
                ages.append(visit.age_months)
                break
    return ages


def silverman_bandwidth(samples: list[float]) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5), with a fallback of 1.0 for
    degenerate inputs (fewer than two samples, or zero spread)."""
    n = len(samples)
    if n < 2:
        return 1.0
    arr = np.asarray(samples, dtype=float)
    sd = float(arr.std())
    q75, q25 = np.percentile(arr, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread == 0.0:
        return 1.0
    return 0.9 * spread * n ** (-0.2)


def density_value(samples, bandwidth: float, x: float) -> float:
    """Gaussian-kernel density at a single point."""
    arr = np.asarray(samples, dtype=float)
    z = (x - arr) / bandwidth
    return float(np.exp(-0.5 * z * z).sum()
                 / (len(arr) * bandwidth * math.sqrt(2.0 * math.pi)))


def kde(samples: list[float], grid_points: int = 256,
        name: str = "") -> DensityEstimate:
    """Gaussian KDE with Silverman bandwidth on a grid spanning the samples
    plus four bandwidths on each side."""
    if not samples:
        raise EmptySamples()
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    h = silverman_bandwidth(samples)
    arr = np.asarray(samples, dtype=float)
    lo = arr.min() - 4.0 * h
    hi = arr.max() + 4.0 * h
    xs = np.linspace(lo, hi, grid_points)
    z = (xs[:, None] - arr[None, :]) / h
    ys = np.exp(-0.5 * z * z).sum(axis=1) / (len(arr) * h * math.sqrt(2.0 * math.pi))
    return DensityEstimate(
        outcome=name,
        sample_ages=[float(x) for x in arr],
        bandwidth=h,
        grid=[(float(x), float(y)) for x, y in zip(xs, ys)],
    )
