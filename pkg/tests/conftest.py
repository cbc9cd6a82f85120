import itertools

import numpy as np
import pytest

from hypersbm import Hypergraph, ModelParams, SamplerConfig, sample_hypergraph


def brute_force_pi(edge, labels, affinity):
    """Independent pair enumeration for pi_e."""
    total = 0.0
    for i, j in itertools.combinations(sorted(edge), 2):
        total += affinity[labels[i], labels[j]]
    return total


def brute_force_hye_to_node(messages, affinity):
    """Exhaustive marginalization of the pairwise weight over member labels.

    messages: (m, K) incoming rows.  Returns psi[i, a] summed over all
    K^(m-1) label tuples of the other members.
    """
    q = np.asarray(messages, dtype=float)
    q = q / q.sum(axis=1, keepdims=True)
    m, K = q.shape
    psi = np.zeros((m, K))
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for assign in itertools.product(range(K), repeat=m - 1):
            labels = {j: a for j, a in zip(others, assign)}
            weight = 1.0
            for j, a in labels.items():
                weight *= q[j, a]
            for a in range(K):
                labels_full = dict(labels)
                labels_full[i] = a
                pi = 0.0
                for u, v in itertools.combinations(range(m), 2):
                    pi += affinity[labels_full[u], labels_full[v]]
                psi[i, a] += pi * weight
    return psi


def brute_force_edge_weight(messages, affinity):
    """Exhaustive sum over all member labels of pi_e * prod of messages."""
    q = np.asarray(messages, dtype=float)
    q = q / q.sum(axis=1, keepdims=True)
    m, K = q.shape
    total = 0.0
    for assign in itertools.product(range(K), repeat=m):
        weight = 1.0
        for j, a in enumerate(assign):
            weight *= q[j, a]
        pi = 0.0
        for u, v in itertools.combinations(range(m), 2):
            pi += affinity[assign[u], assign[v]]
        total += pi * weight
    return total


def random_hypergraph(rng, num_nodes=12, max_size=4, num_edges=10) -> Hypergraph:
    """Uniform random simple hypergraph for metric and entropy tests."""
    seen = set()
    edges = []
    while len(edges) < num_edges:
        d = int(rng.integers(2, max_size + 1))
        e = tuple(sorted(rng.choice(num_nodes, size=d, replace=False).tolist()))
        if e not in seen:
            seen.add(e)
            edges.append(e)
    return Hypergraph(num_nodes, edges, max_size=max_size)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_planted():
    """Detectable planted instance shared across inference tests."""
    params = ModelParams.assortative(600, 2, 8.0, 1.0, max_size=3)
    h, truth = sample_hypergraph(params, SamplerConfig(seed=99))
    return h, truth, params
