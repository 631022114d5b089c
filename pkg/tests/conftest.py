import numpy as np
import pytest

from wormprop.graph import WsnGraph


@pytest.fixture
def g3():
    """3 nodes, 2 worms: 0 -> 2 with weights (0.6, 0.5), 1 -> 2 with
    (0.4, 0.7), node 2 thresholds (0.5, 0.6)."""
    return WsnGraph.from_edges(
        3, 2,
        thresholds=[[0.9, 0.9], [0.9, 0.9], [0.5, 0.6]],
        edges=[(0, 2, [0.6, 0.5]), (1, 2, [0.4, 0.7])],
    )


@pytest.fixture
def g3_tie():
    """g3 with the 1 -> 2 weights changed to (0.4, 0.6): node 2 sees equal
    sums 0.6 for both worms."""
    return WsnGraph.from_edges(
        3, 2,
        thresholds=[[0.9, 0.9], [0.9, 0.9], [0.5, 0.6]],
        edges=[(0, 2, [0.6, 0.5]), (1, 2, [0.4, 0.6])],
    )


@pytest.fixture
def g3_state():
    return np.array([1, 2, 0])


def random_graph(rng, n=None, k=None, p=None, theta_low=0.05):
    """A random fully-parameterized instance for property tests."""
    n = n or int(rng.integers(2, 10))
    k = k or int(rng.choice([1, 2, 4]))
    p = p if p is not None else float(rng.uniform(0.1, 0.6))
    edges = [(u, v) for u in range(n) for v in range(n)
             if u != v and rng.random() < p]
    thresholds = rng.uniform(theta_low, 1.0, size=(n, k))
    return WsnGraph.from_edges(
        n, k, thresholds,
        [(u, v, rng.uniform(0.05, 1.0, size=k)) for u, v in edges],
    )
