"""Discrete-time hidden Markov models with per-variable Bernoulli emissions.

Time is visit order; age gaps between visits are ignored here and only
resurface in the summary statistics. Missing observations are marginalized
out of both inference and re-estimation. All sequence computations run in
log space with per-step scaling, so likelihoods stay finite for long
records.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, UnknownVariable
from .ingest import Dataset, Subject, Visit, dataset_fingerprint

#: Bernoulli emission probabilities are kept inside [floor, 1 - floor]
#: (applied after every M-step) so no observation has zero likelihood.
EMISSION_FLOOR = 1e-6

_PROB_TOL = 1e-9


@dataclass
class HmmModel:
    """K-state model: initial distribution, transition matrix, and one
    Bernoulli success-probability vector per observed variable."""

    n_states: int
    initial: np.ndarray                  # (K,)
    transition: np.ndarray               # (K, K), row-stochastic
    emission: dict[str, np.ndarray]      # variable -> (K,) P(v=1 | state k)
    trained_on: str = ""
    log_likelihood: float = math.nan
    seed: int = 0
    n_iterations_run: int = 0

    @property
    def variables(self) -> list[str]:
        return list(self.emission)

    def check(self) -> None:
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        pi = np.asarray(self.initial, dtype=float)
        a = np.asarray(self.transition, dtype=float)
        if pi.shape != (self.n_states,) or a.shape != (self.n_states, self.n_states):
            raise ValueError("initial/transition shape does not match n_states")
        if abs(pi.sum() - 1.0) > _PROB_TOL:
            raise ValueError("initial distribution does not sum to 1")
        if np.any(pi < 0.0) or np.any(pi > 1.0) or np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("probabilities outside [0, 1]")
        if np.any(np.abs(a.sum(axis=1) - 1.0) > _PROB_TOL):
            raise ValueError("transition rows do not sum to 1")
        for v, b in self.emission.items():
            b = np.asarray(b, dtype=float)
            if b.shape != (self.n_states,):
                raise ValueError(f"emission vector for {v!r} has wrong length")
            if np.any(b < EMISSION_FLOOR) or np.any(b > 1.0 - EMISSION_FLOOR):
                raise ValueError(
                    f"emission probabilities for {v!r} outside "
                    f"[{EMISSION_FLOOR}, 1 - {EMISSION_FLOOR}]")


@dataclass
class Decoding:
    """Per-subject inference output: posterior-argmax states, full
    per-visit posteriors, the Viterbi path, and the sequence likelihood."""

    states: list[int]
    posteriors: np.ndarray               # (T, K), rows sum to 1
    viterbi_path: list[int]
    subject_log_likelihood: float


@dataclass(frozen=True)
class TrainConfig:
    n_states: int
    max_iter: int = 500
    rel_tol: float = 1e-6
    n_restarts: int = 5
    seed: int = 0

    def check(self) -> None:
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")


# --- emission terms ---------------------------------------------------------

def emission_loglik(model: HmmModel, visit: Visit, k: int) -> float:
    """Log probability of the visit's observed variables given state ``k``.

    Missing variables contribute nothing, so a fully missing visit scores
    exactly 0. Raises UnknownVariable if the visit carries an observation
    the model has no emission vector for.
    """
    if not 0 <= k < model.n_states:
        raise ValueError(f"state index {k} out of range")
    unknown = [v for v in visit.observations if v not in model.emission]
    if unknown:
        raise UnknownVariable(sorted(unknown))
    total = 0.0
    for v, value in visit.observations.items():
        p = float(model.emission[v][k])
        total += math.log(p) if value == 1 else math.log(1.0 - p)
    return total


def _emission_matrix(model: HmmModel) -> np.ndarray:
    """(V, K) matrix of P(v=1 | k) in ``model.variables`` order."""
    return np.array([np.asarray(model.emission[v], dtype=float)
                     for v in model.variables])


def _observation_tensors(subjects: list[Subject], variables: list[str]):
    """Stack equal-length subjects into value/mask tensors (N, T, V).

    The mask is 1 where the variable was observed; masked-out values are 0
    and never enter any sum.
    """
    n = len(subjects)
    t = len(subjects[0].visits)
    v = len(variables)
    values = np.zeros((n, t, v))
    mask = np.zeros((n, t, v))
    for i, subject in enumerate(subjects):
        for j, visit in enumerate(subject.visits):
            for vi, name in enumerate(variables):
                obs = visit.observations.get(name)
                if obs is not None:
                    values[i, j, vi] = obs
                    mask[i, j, vi] = 1.0
    return values, mask


def _log_emission_tensor(values, mask, b_matrix) -> np.ndarray:
    """(N, T, K) log emission terms with missing values marginalized."""
    log_b = np.log(b_matrix)
    log_1mb = np.log1p(-b_matrix)
    return (np.einsum("ntv,vk->ntk", mask * values, log_b)
            + np.einsum("ntv,vk->ntk", mask * (1.0 - values), log_1mb))


# --- inference --------------------------------------------------------------

def _forward_backward_batch(initial, transition, log_e, with_xi=False):
    """Scaled forward-backward over a batch of equal-length sequences.

    Emissions are rescaled per visit by their row maximum (the log-space
    guard), then the classic per-step normalization runs in linear space.
    Returns (gamma (N,T,K), log_lik (N,), xi_sum (K,K) or None); xi_sum is
    the expected transition count summed over the whole batch.
    """
    n, t_len, k = log_e.shape
    offsets = log_e.max(axis=2)
    e_scaled = np.exp(log_e - offsets[:, :, None])

    alpha = np.empty((n, t_len, k))
    scale = np.empty((n, t_len))
    f = initial[None, :] * e_scaled[:, 0]
    scale[:, 0] = f.sum(axis=1)
    alpha[:, 0] = f / scale[:, 0, None]
    for t in range(1, t_len):
        f = (alpha[:, t - 1] @ transition) * e_scaled[:, t]
        scale[:, t] = f.sum(axis=1)
        alpha[:, t] = f / scale[:, t, None]
    log_lik = np.log(scale).sum(axis=1) + offsets.sum(axis=1)

    beta = np.empty_like(alpha)
    beta[:, t_len - 1] = 1.0
    for t in range(t_len - 2, -1, -1):
        beta[:, t] = ((e_scaled[:, t + 1] * beta[:, t + 1]) @ transition.T) \
            / scale[:, t + 1, None]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=2, keepdims=True)

    xi_sum = None
    if with_xi:
        xi_sum = np.zeros((k, k))
        for t in range(t_len - 1):
            right = e_scaled[:, t + 1] * beta[:, t + 1] / scale[:, t + 1, None]
            xi_sum += transition * (alpha[:, t].T @ right)
    return gamma, log_lik, xi_sum


def forward_backward(model: HmmModel, subject: Subject):
    """Posterior state distribution per visit plus the total log-likelihood."""
    values, mask = _observation_tensors([subject], model.variables)
    log_e = _log_emission_tensor(values, mask, _emission_matrix(model))
    gamma, log_lik, _ = _forward_backward_batch(
        np.asarray(model.initial, dtype=float),
        np.asarray(model.transition, dtype=float), log_e)
    return gamma[0], float(log_lik[0])


def viterbi(model: HmmModel, subject: Subject) -> list[int]:
    """Most probable state path; ties resolve to the lower state index at
    every backtrack step (including the final-state choice)."""
    values, mask = _observation_tensors([subject], model.variables)
    log_e = _log_emission_tensor(values, mask, _emission_matrix(model))[0]
    t_len, k = log_e.shape
    with np.errstate(divide="ignore"):
        log_pi = np.log(np.asarray(model.initial, dtype=float))
        log_a = np.log(np.asarray(model.transition, dtype=float))

    delta = log_pi + log_e[0]
    back = np.zeros((t_len, k), dtype=np.intp)
    for t in range(1, t_len):
        scores = delta[:, None] + log_a          # (from, to)
        back[t] = scores.argmax(axis=0)          # argmax -> first (lowest) index
        delta = scores[back[t], np.arange(k)] + log_e[t]

    path = [int(delta.argmax())]
    for t in range(t_len - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path


def _group_by_length(subject_ids: list[str], dataset: Dataset):
    groups: dict[int, list[str]] = {}
    for sid in subject_ids:
        groups.setdefault(len(dataset.subjects[sid].visits), []).append(sid)
    return groups


def _check_variables(model: HmmModel, dataset: Dataset) -> None:
    stray = [v for v in model.variables if v not in dataset.model_variables]
    if stray:
        raise UnknownVariable(sorted(stray))
    observed = set()
    for subject in dataset.subjects.values():
        for visit in subject.visits:
            observed.update(visit.observations)
    unmodeled = [v for v in observed
                 if v in dataset.model_variables and v not in model.emission]
    if unmodeled:
        raise UnknownVariable(sorted(unmodeled))


def decode(model: HmmModel, dataset: Dataset) -> dict[str, Decoding]:
    """Run forward-backward and Viterbi for every subject.

    The inferred state per visit is the posterior argmax (lowest index on
    ties); the Viterbi path is computed alongside for comparison.
    """
    _check_variables(model, dataset)
    pi = np.asarray(model.initial, dtype=float)
    a = np.asarray(model.transition, dtype=float)
    b_matrix = _emission_matrix(model)

    decodings: dict[str, Decoding] = {}
    subject_ids = list(dataset.subjects)
    for _t_len, sids in _group_by_length(subject_ids, dataset).items():
        subjects = [dataset.subjects[sid] for sid in sids]
        values, mask = _observation_tensors(subjects, model.variables)
        log_e = _log_emission_tensor(values, mask, b_matrix)
        gamma, log_lik, _ = _forward_backward_batch(pi, a, log_e)
        for i, sid in enumerate(sids):
            posteriors = gamma[i]
            decodings[sid] = Decoding(
                states=[int(s) for s in posteriors.argmax(axis=1)],
                posteriors=posteriors,
                viterbi_path=viterbi(model, subjects[i]),
                subject_log_likelihood=float(log_lik[i]),
            )
    return decodings


# --- training ---------------------------------------------------------------

class _ZeroOccupancy(Exception):
    def __init__(self, state: int):
        self.state = state


def _draw_initial_params(rng, n_states: int, n_vars: int):
    pi = rng.dirichlet(np.ones(n_states))
    a = rng.dirichlet(np.ones(n_states), size=n_states)
    b = rng.uniform(0.2, 0.8, size=(n_vars, n_states))
    return pi, a, b


def _e_step(pi, a, b_matrix, batches):
    """One EM expectation pass over all length-grouped batches.

    Accumulation order is fixed (batches in first-encounter order of
    sequence length), so results do not depend on scheduling.
    """
    k = len(pi)
    n_vars = b_matrix.shape[0]
    total_ll = 0.0
    n_subjects = 0
    pi_num = np.zeros(k)
    xi_sum = np.zeros((k, k))
    b_num = np.zeros((n_vars, k))
    b_den = np.zeros((n_vars, k))
    occupancy = np.zeros(k)
    for values, mask in batches:
        log_e = _log_emission_tensor(values, mask, b_matrix)
        gamma, log_lik, xi = _forward_backward_batch(pi, a, log_e, with_xi=True)
        total_ll += float(log_lik.sum())
        n_subjects += values.shape[0]
        pi_num += gamma[:, 0, :].sum(axis=0)
        xi_sum += xi
        b_num += np.einsum("ntk,ntv->vk", gamma, mask * values)
        b_den += np.einsum("ntk,ntv->vk", gamma, mask)
        occupancy += gamma.sum(axis=(0, 1))
    return total_ll, n_subjects, pi_num, xi_sum, b_num, b_den, occupancy


def _m_step(stats, old_a, old_b):
    _ll, n_subjects, pi_num, xi_sum, b_num, b_den, occupancy = stats
    for k in range(len(occupancy)):
        if occupancy[k] == 0.0:
            raise _ZeroOccupancy(k)

    pi = pi_num / n_subjects
    pi = pi / pi.sum()

    a = old_a.copy()
    row_totals = xi_sum.sum(axis=1)
    nonzero = row_totals > 0.0
    a[nonzero] = xi_sum[nonzero] / row_totals[nonzero, None]

    b = old_b.copy()
    observed = b_den > 0.0
    b[observed] = b_num[observed] / b_den[observed]
    np.clip(b, EMISSION_FLOOR, 1.0 - EMISSION_FLOOR, out=b)
    return pi, a, b


def _run_em(pi, a, b_matrix, batches, config, restart, iter_callback):
    lls: list[float] = []
    for iteration in range(1, config.max_iter + 1):
        stats = _e_step(pi, a, b_matrix, batches)
        ll = stats[0]
        lls.append(ll)
        if iter_callback is not None:
            iter_callback(restart, iteration, ll)
        converged = (
            len(lls) >= 2
            and abs(lls[-1] - lls[-2]) / (abs(lls[-1]) + 1.0) < config.rel_tol)
        if converged or iteration == config.max_iter:
            return pi, a, b_matrix, ll, iteration
        pi, a, b_matrix = _m_step(stats, a, b_matrix)
    raise AssertionError("unreachable")


def train(dataset: Dataset, config: TrainConfig, dataset_id: str | None = None,
          iter_callback=None) -> HmmModel:
    """Baum-Welch fit with multiple seeded restarts.

    Each restart draws its own initialization (initial/transition rows from
    a flat Dirichlet, emissions uniform on [0.2, 0.8]); the restart with
    the highest final log-likelihood wins. A restart whose expected state
    occupancy collapses to zero is re-drawn once, then reported as
    DegenerateData. Identical (dataset, config) inputs give bit-identical
    models.

    ``iter_callback(restart, iteration, log_likelihood)``, when given, is
    invoked after every E-step.
    """
    config.check()
    if not dataset.subjects:
        raise ValueError("cannot train on an empty dataset")
    variables = list(dataset.model_variables)

    groups = _group_by_length(list(dataset.subjects), dataset)
    batches = []
    for sids in groups.values():
        batches.append(_observation_tensors(
            [dataset.subjects[sid] for sid in sids], variables))

    best = None
    for restart in range(config.n_restarts):
        attempt = 0
        while True:
            rng = np.random.default_rng([config.seed, restart, attempt])
            pi, a, b_matrix = _draw_initial_params(rng, config.n_states,
                                                   len(variables))
            try:
                result = _run_em(pi, a, b_matrix, batches, config, restart,
                                 iter_callback)
                break
            except _ZeroOccupancy as exc:
                attempt += 1
                if attempt > 1:
                    raise DegenerateData(restart, exc.state)
        if best is None or result[3] > best[3]:
            best = result

    pi, a, b_matrix, ll, n_iterations = best
    if dataset_id is None:
        dataset_id = _default_dataset_id(dataset)
    model = HmmModel(
        n_states=config.n_states,
        initial=pi,
        transition=a,
        emission={v: b_matrix[i].copy() for i, v in enumerate(variables)},
        trained_on=dataset_id,
        log_likelihood=ll,
        seed=config.seed,
        n_iterations_run=n_iterations,
    )
    model.check()
    return model


def _default_dataset_id(dataset: Dataset) -> str:
    return "sha256:" + dataset_fingerprint(dataset)


# --- sampling ---------------------------------------------------------------

def _draw_index(rng, probs) -> int:
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def sample_with_states(model: HmmModel, n_subjects: int, n_visits: int,
                       seed: int):
    """Ancestral sampling; returns (dataset, states per subject).

    Visits sit on a 3-month grid starting at age 0. Fully deterministic
    given the seed.
    """
    if n_subjects < 1 or n_visits < 1:
        raise ValueError("n_subjects and n_visits must be >= 1")
    rng = np.random.default_rng(seed)
    variables = model.variables
    b_matrix = _emission_matrix(model)
    width = max(5, len(str(n_subjects - 1)))

    subjects = {}
    state_paths = {}
    for i in range(n_subjects):
        sid = f"subj{i:0{width}d}"
        states = []
        visits = []
        k = _draw_index(rng, model.initial)
        for t in range(n_visits):
            states.append(k)
            observations = {
                v: int(rng.random() < b_matrix[vi, k])
                for vi, v in enumerate(variables)
            }
            visits.append(Visit(sid, 3.0 * t, observations, {}))
            if t < n_visits - 1:
                k = _draw_index(rng, model.transition[k])
        subjects[sid] = Subject(sid, visits)
        state_paths[sid] = states

    dataset = Dataset(subjects=subjects, model_variables=list(variables),
                      extra_variables=[], outcome_names=[])
    return dataset, state_paths


def sample(model: HmmModel, n_subjects: int, n_visits: int, seed: int) -> Dataset:
    """Sample a synthetic dataset from the model (fixture generator)."""
    dataset, _states = sample_with_states(model, n_subjects, n_visits, seed)
    return dataset


# --- persistence ------------------------------------------------------------

def model_to_dict(model: HmmModel) -> dict:
    return {
        "n_states": model.n_states,
        "initial": [float(x) for x in model.initial],
        "transition": [[float(x) for x in row] for row in model.transition],
        # variable order normalized so serialized form does not depend on
        # whether the model came from training or from disk
        "emission": {v: [float(x) for x in model.emission[v]]
                     for v in sorted(model.emission)},
        "trained_on": model.trained_on,
        "log_likelihood": float(model.log_likelihood),
        "seed": model.seed,
        "n_iterations_run": model.n_iterations_run,
    }


def model_from_dict(raw: dict) -> HmmModel:
    model = HmmModel(
        n_states=int(raw["n_states"]),
        initial=np.array(raw["initial"], dtype=float),
        transition=np.array(raw["transition"], dtype=float),
        emission={v: np.array(b, dtype=float)
                  for v, b in raw["emission"].items()},
        trained_on=str(raw.get("trained_on", "")),
        log_likelihood=float(raw.get("log_likelihood", math.nan)),
        seed=int(raw.get("seed", 0)),
        n_iterations_run=int(raw.get("n_iterations_run", 0)),
    )
    model.check()
    return model


def model_to_json(model: HmmModel) -> str:
    """Canonical JSON; float repr keeps full round-trip precision, so the
    bytes are stable for identical models."""
    return json.dumps(model_to_dict(model), sort_keys=True,
                      separators=(",", ":")) + "\n"


def model_from_json(text: str) -> HmmModel:
    return model_from_dict(json.loads(text))


def model_fingerprint(model: HmmModel) -> str:
    return hashlib.sha256(model_to_json(model).encode()).hexdigest()[:12]


# --- decoding artifact ------------------------------------------------------

def decodings_to_dict(decodings: dict[str, Decoding], dataset: Dataset,
                      model_id: str, n_states: int) -> dict:
    """JSON-friendly decoding bundle; carries visit ages so downstream
    query evaluation does not need the dataset again."""
    return {
        "model_id": model_id,
        "n_states": n_states,
        "subjects": {
            sid: {
                "ages": [v.age_months for v in dataset.subjects[sid].visits],
                "states": list(dec.states),
                "posteriors": [[float(p) for p in row] for row in dec.posteriors],
                "viterbi_path": list(dec.viterbi_path),
                "subject_log_likelihood": float(dec.subject_log_likelihood),
            }
            for sid, dec in sorted(decodings.items())
        },
    }


def decodings_from_dict(raw: dict) -> dict[str, Decoding]:
    return {
        sid: Decoding(
            states=[int(s) for s in entry["states"]],
            posteriors=np.array(entry["posteriors"], dtype=float),
            viterbi_path=[int(s) for s in entry["viterbi_path"]],
            subject_log_likelihood=float(entry["subject_log_likelihood"]),
        )
        for sid, entry in raw["subjects"].items()
    }


def decodings_to_json(decodings, dataset, model_id, n_states) -> str:
    return json.dumps(decodings_to_dict(decodings, dataset, model_id, n_states),
                      sort_keys=True, separators=(",", ":")) + "\n"
