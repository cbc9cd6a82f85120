"""Exact ensemble sampling via enumeration of community-count classes.

Hyperedge probabilities depend on member nodes only through the per-community
count vector of their labels, so hyperedges group into count classes sharing
one Bernoulli parameter.  Per class, the number of realized hyperedges is a
binomial draw; the hyperedges themselves are then placed by drawing member
nodes uniformly within each community.

Count classes are enumerated lexicographically over (size, counts) and each
class consumes an independent RNG stream derived from (seed, size, counts),
so classes can be processed in any order, or in parallel, without changing
the output.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .hypergraph import Hypergraph
from .model import ModelParams
from ._validation import as_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    """Tuning knobs for the sampler.

    binomial_mode "exact" always draws exact binomials (refusing when the
    trial count does not fit an int64); "auto" switches to a Poisson draw for
    large-count/small-probability classes and to a rounded Gaussian otherwise.
    """

    seed: int = 0
    binomial_mode: str = "auto"
    exact_threshold: int = 100_000
    poisson_mean_max: float = 50.0
    poisson_prob_max: float = 1e-3
    class_budget: int = 2_000_000

    def __post_init__(self):
        if self.binomial_mode not in ("exact", "auto"):
            raise InputError("binomial_mode must be 'exact' or 'auto'")
        if self.exact_threshold <= 0 or self.poisson_mean_max <= 0 or self.poisson_prob_max <= 0:
            raise InputError("sampler thresholds must be positive")


def pi_from_counts(counts, rescaled_or_affinity) -> float:
    """Hyperedge weight from per-community counts.

    sum_{a<b} #_a #_b m_ab + sum_a #_a (#_a - 1) / 2 * m_aa, for a symmetric
    matrix m (affinity p or rescaled c, depending on the caller's scale).
    """
    counts = np.asarray(counts, dtype=float)
    m = np.asarray(rescaled_or_affinity, dtype=float)
    return float(0.5 * (counts @ m @ counts - counts @ np.diag(m)))


def count_multiplicity(counts, community_sizes) -> int:
    """Number of node sets realizing a count vector: prod_a binom(N_a, #_a).

    Exact (arbitrary-precision) integer; zero when some #_a > N_a.
    """
    total = 1
    for k, n in zip(counts, community_sizes):
        if k > n:
            return 0
        total *= math.comb(int(n), int(k))
    return total


def log_count_multiplicity(counts, community_sizes) -> float:
    from scipy.special import gammaln

    counts = np.asarray(counts, dtype=float)
    sizes = np.asarray(community_sizes, dtype=float)
    if np.any(counts > sizes):
        return -np.inf
    return float(np.sum(gammaln(sizes + 1) - gammaln(counts + 1) - gammaln(sizes - counts + 1)))


def sample_num_hyperedges(num_possible: int, prob: float, rng, config: SamplerConfig) -> int:
    """Draw how many of ``num_possible`` i.i.d. Bernoulli(prob) events occur.

    Exact binomial below config.exact_threshold trials (always, in "exact"
    mode); Poisson when the mean is small and prob tiny; otherwise a rounded
    Gaussian clamped to [0, num_possible].
    """
    if not (0.0 <= prob <= 1.0):
        raise InputError(f"probability {prob} outside [0, 1]")
    if num_possible <= 0 or prob == 0.0:
        return 0
    if prob == 1.0:
        return int(num_possible)
    rng = as_generator(rng)
    exact_ok = num_possible < 2**63
    if config.binomial_mode == "exact":
        if not exact_ok:
            raise InputError("exact binomial mode with more than 2**63 trials")
        return int(rng.binomial(num_possible, prob))
    if num_possible <= config.exact_threshold:
        return int(rng.binomial(num_possible, prob))
    mean = math.exp(math.log(num_possible) + math.log(prob))
    if mean <= config.poisson_mean_max and prob <= config.poisson_prob_max:
        return int(rng.poisson(mean))
    sd = math.sqrt(mean * (1.0 - prob))
    draw = round(rng.normal(mean, sd))
    return int(min(max(draw, 0), num_possible))


def sample_assignments(params: ModelParams, rng) -> np.ndarray:
    """N independent categorical label draws from the prior."""
    rng = as_generator(rng)
    return rng.choice(params.num_communities, size=params.num_nodes, p=params.prior)


def expected_num_hyperedges(size: int, params: ModelParams) -> float:
    """Ensemble mean count of hyperedges of one size.

    E[omega_d] = binom(N-2, d-2) * N / kappa_d * (1/2) sum_ab c_ab n_a n_b,
    via the log-space ratio binom(N-2, d-2) / kappa_d.  With the default
    schedule and equal-degree parameters this is N * c / (d (d-1)).
    """
    if not 2 <= size <= params.max_size:
        raise InputError(f"size {size} outside [2, {params.max_size}]")
    n = params.prior
    ratio = params.kappa.ratios[size - 2]
    return float(ratio * params.num_nodes * 0.5 * (n @ params.rescaled @ n))


def _count_vectors(total: int, num_parts: int):
    """All nonnegative integer vectors with the given sum, lexicographic."""
    if num_parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _count_vectors(total - first, num_parts - 1):
            yield (first,) + rest


def _class_rng(seed: int, size: int, counts) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(size, *counts))
    return np.random.Generator(np.random.PCG64(ss))


def _sample_distinct_indices(rng, num_possible: int, num_draws: int) -> np.ndarray:
    """Uniform random subset of ``num_draws`` distinct ints in [0, num_possible)."""
    if num_draws > num_possible:
        raise InputError("cannot draw more distinct indices than available")
    if num_possible <= max(4 * num_draws, 1 << 12):
        return rng.permutation(num_possible)[:num_draws]
    out = np.unique(rng.integers(num_possible, size=num_draws))
    while out.size < num_draws:
        extra = rng.integers(num_possible, size=num_draws - out.size + 16)
        out = np.unique(np.concatenate([out, extra]))
    if out.size > num_draws:
        out = rng.permutation(out)[:num_draws]
    return out


def _decode_triangular(k: np.ndarray, n: int):
    """Map flat indices of the strict upper triangle of an n x n grid to (i, j)."""
    k = k.astype(np.float64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8 * k)) / 2).astype(np.int64)
    offset = i * (2 * n - 1 - i) // 2
    # float rounding can be off by one row in either direction
    too_far = offset > k
    i[too_far] -= 1
    offset = i * (2 * n - 1 - i) // 2
    next_offset = (i + 1) * (2 * n - 2 - i) // 2
    behind = k.astype(np.int64) >= next_offset
    i[behind] += 1
    offset = i * (2 * n - 1 - i) // 2
    j = k.astype(np.int64) - offset + i + 1
    return i, j


def _distinct_rows(rng, num_avail: int, num_rows: int, row_len: int) -> np.ndarray:
    """num_rows independent draws of row_len distinct ints in [0, num_avail)."""
    mat = rng.integers(num_avail, size=(num_rows, row_len))
    if row_len > 1:
        while True:
            s = np.sort(mat, axis=1)
            bad = np.flatnonzero((np.diff(s, axis=1) == 0).any(axis=1))
            if bad.size == 0:
                break
            mat[bad] = rng.integers(num_avail, size=(bad.size, row_len))
    return mat


def _realize_class(rng, counts, nodes_by_comm, num_draws: int) -> np.ndarray:
    """Draw ``num_draws`` hyperedges for one count class, duplicates possible."""
    cols = []
    for a, k in enumerate(counts):
        if k == 0:
            continue
        pool = nodes_by_comm[a]
        idx = _distinct_rows(rng, pool.shape[0], num_draws, k)
        cols.append(pool[idx])
    rows = np.concatenate(cols, axis=1)
    rows.sort(axis=1)
    return rows


def _dedup_in_draw_order(rows: np.ndarray) -> np.ndarray:
    _, first = np.unique(rows, axis=0, return_index=True)
    return rows[np.sort(first)]


def sample_hypergraph(params: ModelParams, config: SamplerConfig | None = None,
                      seed: int | None = None):
    """Draw (hypergraph, assignment) from the generative model.

    Pair classes (size 2) are realized exactly: the per-class count is
    binomial and the realized pairs form a uniform subset, which is
    distributionally identical to flipping every possible pair.  For sizes
    >= 3, realized hyperedges are placed by independent within-community
    node draws and repeated hyperedges are deleted, keeping the first
    occurrence in enumeration order.
    """
    config = config or SamplerConfig()
    if seed is not None:
        config = SamplerConfig(**{**config.__dict__, "seed": int(seed)})
    K = params.num_communities
    N = params.num_nodes

    labels = sample_assignments(params, _class_rng(config.seed, 0, ()))
    nodes_by_comm = [np.flatnonzero(labels == a) for a in range(K)]
    community_sizes = np.array([c.shape[0] for c in nodes_by_comm])

    for d in range(3, params.max_size + 1):
        n_classes = math.comb(d + K - 1, K - 1)
        if n_classes > config.class_budget:
            raise InputError(
                f"count-class enumeration for size d={d} needs {n_classes} classes, "
                f"over the budget {config.class_budget}"
            )

    edges: list[np.ndarray] = []
    for d in range(2, params.max_size + 1):
        log_kappa = params.kappa.log_kappa(d)
        for counts in _count_vectors(d, K):
            mult = count_multiplicity(counts, community_sizes)
            if mult == 0:
                continue
            prob = pi_from_counts(counts, params.affinity) * math.exp(-log_kappa)
            prob = min(prob, 1.0)
            rng = _class_rng(config.seed, d, counts)
            x = sample_num_hyperedges(mult, prob, rng, config)
            if x == 0:
                continue
            if d == 2:
                edges.append(_realize_pair_class(rng, counts, nodes_by_comm, x))
            else:
                rows = _realize_class(rng, counts, nodes_by_comm, x)
                edges.append(_dedup_in_draw_order(rows))

    all_edges = [tuple(int(v) for v in row) for block in edges for row in block]
    return Hypergraph(N, all_edges, max_size=params.max_size), labels


def _realize_pair_class(rng, counts, nodes_by_comm, num_draws: int) -> np.ndarray:
    """Uniform distinct pairs for a size-2 count class."""
    counts = np.asarray(counts)
    (which,) = np.nonzero(counts)
    if which.size == 1:
        a = int(which[0])
        pool = nodes_by_comm[a]
        n = pool.shape[0]
        flat = _sample_distinct_indices(rng, n * (n - 1) // 2, num_draws)
        i, j = _decode_triangular(flat, n)
        rows = np.stack([pool[i], pool[j]], axis=1)
    else:
        a, b = int(which[0]), int(which[1])
        pa, pb = nodes_by_comm[a], nodes_by_comm[b]
        flat = _sample_distinct_indices(rng, pa.shape[0] * pb.shape[0], num_draws)
        rows = np.stack([pa[flat // pb.shape[0]], pb[flat % pb.shape[0]]], axis=1)
    rows.sort(axis=1)
    return rows
