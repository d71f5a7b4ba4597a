"""Shared fixtures: small problems, datasets and seeded generators."""

from pathlib import Path

import numpy as np
import pytest

from oasis_bench.dataio import synth_classification
from oasis_bench.linalg import Rng
from oasis_bench.problems import LogisticRegression, NonlinearLeastSquares, Quadratic

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def rng() -> Rng:
    return Rng(12345)


@pytest.fixture
def diag_quadratic() -> Quadratic:
    """H = diag(2, 8), b = (2, 8): w* = (1, 1), F* = -5, L = 8, mu = 2."""
    return Quadratic(np.array([2.0, 8.0]), np.array([2.0, 8.0]))


@pytest.fixture
def small_dataset():
    return synth_classification(30, 8, 0.6, 1.0, Rng(7))


@pytest.fixture
def small_logistic(small_dataset) -> LogisticRegression:
    return LogisticRegression(small_dataset.x, small_dataset.y, lam=0.1)


@pytest.fixture
def small_nls(small_dataset) -> NonlinearLeastSquares:
    return NonlinearLeastSquares.from_signed_labels(small_dataset.x, small_dataset.y)


@pytest.fixture
def logistic_200():
    """The n=200, d=10, lambda=1/n synthetic logistic problem."""
    data = synth_classification(200, 10, 1.0, 1.0, Rng(2021))
    return LogisticRegression(data.x, data.y, lam=1.0 / 200)
