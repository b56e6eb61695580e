#  Copyright (c) 2024. multisource-tta developers. See the LICENSE


import numpy as np
import pytest

from multisource_tta.data_classes import RunRecord, StepRecord
from multisource_tta.environment import DomainProfile, TaskBatch
from multisource_tta.harness import ExperimentConfig, PolicyKind, run_experiment


SMALL_SKILLS = (0.6, 0.5, 0.55, 0.4, 0.3)


def small_config(policy: PolicyKind = PolicyKind.CO_UCB, **kwargs) -> ExperimentConfig:
    """A config small enough to run in well under a second."""
    profile = kwargs.pop(
        "profile",
        DomainProfile(initial_skills=SMALL_SKILLS, stream_length=320, batch_size=16, seed=7),
    )
    settings = dict(probe_size=50, probe_interval=64, preference_samples=2000)
    settings.update(kwargs)
    return ExperimentConfig(policy=policy, profile=profile, **settings)


@pytest.fixture
def make_config():
    """Factory for small experiment configs."""
    return small_config


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)


@pytest.fixture
def interior_batch() -> TaskBatch:
    """1e4 copies of one instance whose five-token gold span lies far from the passage borders."""
    n = 10_000
    return TaskBatch(
        np.full(n, 50, dtype=np.int64),
        np.full(n, 20, dtype=np.int64),
        np.full(n, 24, dtype=np.int64),
    )


@pytest.fixture
def co_ucb_run() -> RunRecord:
    return run_experiment(small_config(PolicyKind.CO_UCB))


@pytest.fixture
def ucb_run() -> RunRecord:
    return run_experiment(small_config(PolicyKind.UCB))


@pytest.fixture
def hand_run() -> RunRecord:
    """Two single-arm steps over three arms, built by hand."""
    run = RunRecord("digest", "UCB", 0, (0.9, 0.7, 0.8))
    run.append(StepRecord(1, 1, None, (1, 0), (), 2, (0.9, 0.7, 0.8)))
    run.append(StepRecord(2, 2, None, (1, 1), (), 2, (0.9, 0.7, 0.8)))
    return run
