import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dpm.hmm import HmmModel
from dpm.ingest import Dataset, Subject, Visit

# Fixed 3-state / 3-variable generator used by the training tests: strongly
# self-persistent states with well-separated autoantibody profiles.
GENERATOR_PI = np.array([0.6, 0.3, 0.1])
GENERATOR_A = np.array([
    [0.85, 0.10, 0.05],
    [0.05, 0.85, 0.10],
    [0.10, 0.05, 0.85],
])
GENERATOR_B = {
    "IAA": np.array([0.05, 0.90, 0.85]),
    "IA2A": np.array([0.10, 0.15, 0.80]),
    "GADA": np.array([0.08, 0.30, 0.90]),
}


@pytest.fixture
def generator_model():
    return HmmModel(
        n_states=3,
        initial=GENERATOR_PI.copy(),
        transition=GENERATOR_A.copy(),
        emission={v: b.copy() for v, b in GENERATOR_B.items()},
    )


def random_model(rng, n_states, variables):
    return HmmModel(
        n_states=n_states,
        initial=rng.dirichlet(np.ones(n_states)),
        transition=rng.dirichlet(np.ones(n_states), size=n_states),
        emission={v: rng.uniform(0.05, 0.95, size=n_states) for v in variables},
    )


def random_subject(rng, sid, n_visits, variables, missing_rate=0.25):
    visits = []
    for t in range(n_visits):
        obs = {v: int(rng.random() < 0.5) for v in variables
               if rng.random() >= missing_rate}
        visits.append(Visit(sid, 3.0 * t, obs, {}))
    return Subject(sid, visits)


def single_subject_dataset(subject, variables):
    return Dataset({subject.subject_id: subject}, list(variables), [], [])
