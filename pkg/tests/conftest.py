import numpy as np
import pytest

from psirank import ActivityRates, build_graph

# Canonical 4-user example graph (users A=0, B=1, C=2, D=3) used throughout:
# A follows B, C, D; B follows A, D; C follows A; D follows B, C.
TOY_EDGES = [(0, 1), (0, 2), (0, 3), (1, 0), (1, 3), (2, 0), (3, 1), (3, 2)]
A, B, C, D = 0, 1, 2, 3


@pytest.fixture
def toy_graph():
    return build_graph(TOY_EDGES, 4)


@pytest.fixture
def toy_rates_homogeneous():
    return ActivityRates(np.full(4, 0.105), np.full(4, 2.0))


@pytest.fixture
def two_cycle():
    return build_graph([(0, 1), (1, 0)], 2)


def random_strongly_connected(n, extra, rng):
    """Hamiltonian cycle plus random extra follow edges: every user has a leader."""
    perm = rng.permutation(n)
    edges = [(int(perm[k]), int(perm[(k + 1) % n])) for k in range(n)]
    while len(edges) < n + extra:
        a, b = int(rng.integers(n)), int(rng.integers(n))
        if a != b:
            edges.append((a, b))
    return build_graph(edges, n)


def random_sparse_graph(n, n_edges, rng):
    """Random directed graph; some users may have no leaders at all."""
    edges = set()
    while len(edges) < n_edges:
        a, b = int(rng.integers(n)), int(rng.integers(n))
        if a != b:
            edges.add((a, b))
    return build_graph(sorted(edges), n)


def ring_with_extras(n, total_edges, rng):
    """Directed ring plus random extra follower links (strongly connected)."""
    edges = {(j, (j + 1) % n) for j in range(n)}
    while len(edges) < total_edges:
        a, b = int(rng.integers(n)), int(rng.integers(n))
        if a != b:
            edges.add((a, b))
    return build_graph(sorted(edges), n)


def complete_graph(n):
    return build_graph([(a, b) for a in range(n) for b in range(n) if a != b], n)
