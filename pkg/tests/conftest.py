"""Shared fixtures: small ground truths and deterministic rngs."""

import numpy as np
import pytest

from gridtriplets import Embedding, GroundTruth, Triplet, WorkerModel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def perfect_worker():
    return WorkerModel("perfect")


@pytest.fixture
def line_gt():
    """Five points on a line at 0, 1, 2, 3, 10; two labels."""
    return GroundTruth(
        vectors=np.array([[0.0], [1.0], [2.0], [3.0], [10.0]]),
        labels=np.array([0, 0, 0, 1, 1]),
    )


@pytest.fixture
def random_embedding(rng):
    return Embedding(rng.normal(size=(12, 2)))


def random_triplets(rng, n_points, count):
    """Uniform random valid triplets over n_points objects."""
    out = []
    for _ in range(count):
        a, b, c = rng.choice(n_points, size=3, replace=False)
        out.append(Triplet(int(a), int(b), int(c)))
    return out
