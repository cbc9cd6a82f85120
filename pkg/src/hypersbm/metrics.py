"""Evaluation metrics: overlap, NMI, Monte-Carlo link-prediction AUC.

The community-permutation ambiguity is resolved by maximizing the metric
over label permutations (exhaustively up to K = 8, by assignment on the
confusion matrix beyond).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputError
from .hypergraph import Hypergraph
from .model import ModelParams
from .sampling import pi_from_counts, _distinct_rows
from ._validation import as_generator, check_assignment

_EXHAUSTIVE_K = 8


@dataclass
class EvalReport:
    """Bundle of evaluation numbers; overlap is kept raw and clamped."""

    overlap_raw: float | None = None
    overlap: float | None = None
    nmi: float | None = None
    auc: float | None = None
    size_histogram: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "overlap_raw": self.overlap_raw,
            "overlap": self.overlap,
            "nmi": self.nmi,
            "auc": self.auc,
            "size_histogram": {str(k): v for k, v in self.size_histogram.items()},
        }


def best_alignment(marginals: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Permutation sigma maximizing the marginal mass sum_i q_i(sigma(t_i)).

    sigma[a] is the inferred label matched to true label a.
    """
    K = marginals.shape[1]
    truth = check_assignment(truth, marginals.shape[0], K)
    confusion = np.zeros((K, K))
    np.add.at(confusion, truth, marginals)
    if K <= _EXHAUSTIVE_K:
        best, best_perm = -np.inf, None
        for perm in itertools.permutations(range(K)):
            score = confusion[np.arange(K), perm].sum()
            if score > best:
                best, best_perm = score, perm
        return np.array(best_perm, dtype=np.int64)
    rows, cols = linear_sum_assignment(-confusion)
    perm = np.empty(K, dtype=np.int64)
    perm[rows] = cols
    return perm


def overlap(marginals: np.ndarray, truth: np.ndarray, prior: np.ndarray) -> float:
    """Normalized agreement (sum_i q_i(sigma(t_i)) / N - max n) / (1 - max n).

    Zero for marginals stuck at the prior, one at confident perfect
    recovery; slightly negative values are possible and preserved.
    """
    prior = np.asarray(prior, dtype=float)
    if prior.shape[0] < 2:
        raise InputError("overlap needs at least two communities")
    top = float(prior.max())
    if 1.0 - top <= 0:
        raise InputError("degenerate prior: max entry is 1")
    perm = best_alignment(marginals, truth)
    truth = check_assignment(truth, marginals.shape[0], marginals.shape[1])
    score = float(marginals[np.arange(marginals.shape[0]), perm[truth]].mean())
    return (score - top) / (1.0 - top)


def labels_to_marginals(labels: np.ndarray, num_communities: int) -> np.ndarray:
    """One-hot marginals from hard labels."""
    labels = np.asarray(labels)
    out = np.zeros((labels.shape[0], num_communities))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def nmi(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized mutual information I(a;b)/sqrt(H(a) H(b)).

    Zero by convention when either partition has zero entropy.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InputError("nmi needs two equal-length label vectors")
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    joint = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb) / a.size
    pa, pb = joint.sum(axis=1), joint.sum(axis=0)

    def entropy(p):
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())

    ha, hb = entropy(pa), entropy(pb)
    if ha <= 0 or hb <= 0:
        return 0.0
    nz = joint > 0
    info = float((joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])).sum())
    return info / math.sqrt(ha * hb)


def _auc_from_scores(pos: np.ndarray, neg: np.ndarray) -> float:
    wins = (pos > neg).sum() + 0.5 * (pos == neg).sum()
    return float(wins / pos.shape[0])


def auc_link_prediction(h: Hypergraph, params: ModelParams, labels: np.ndarray,
                        num_comparisons: int = 100_000, rng=None) -> float:
    """Monte-Carlo AUC of the hyperedge score pi_e / kappa_{|e|}.

    Each comparison pairs a uniformly drawn observed hyperedge with a
    uniformly drawn *non-observed* hyperedge of the same size, removing the
    size-dependent scale from the comparison.  Ties count one half.
    """
    if h.num_hyperedges == 0:
        raise InputError("AUC needs at least one observed hyperedge")
    rng = as_generator(rng)
    labels = check_assignment(labels, h.num_nodes, params.num_communities)
    K = params.num_communities
    observed = {e for e in h.hyperedges}

    counts = np.zeros((h.num_hyperedges, K))
    flat = h.flat
    np.add.at(counts, (flat.pair_edge, labels[flat.pair_node]), 1.0)
    edge_scores = _scores_from_counts(counts, h.sizes, params)

    pos_idx = rng.integers(h.num_hyperedges, size=num_comparisons)
    pos_scores = edge_scores[pos_idx]
    neg_scores = np.empty(num_comparisons)
    pos_sizes = h.sizes[pos_idx]
    for d in np.unique(pos_sizes):
        rows_at = np.flatnonzero(pos_sizes == d)
        neg_scores[rows_at] = _negative_scores(h, params, labels, int(d), rows_at.size, rng, observed)
    return _auc_from_scores(pos_scores, neg_scores)


def _scores_from_counts(counts: np.ndarray, sizes: np.ndarray, params: ModelParams) -> np.ndarray:
    p = params.affinity
    pi = 0.5 * (np.einsum("ea,ab,eb->e", counts, p, counts) - counts @ np.diag(p))
    return pi * np.exp(-np.asarray(params.kappa.log_kappa(sizes), dtype=float))


def _negative_scores(h, params, labels, size, num, rng, observed) -> np.ndarray:
    rows = _distinct_rows(rng, h.num_nodes, num, size)
    rows.sort(axis=1)
    pending = np.flatnonzero([tuple(r) in observed for r in rows])
    while pending.size:
        redraw = _distinct_rows(rng, h.num_nodes, pending.size, size)
        redraw.sort(axis=1)
        rows[pending] = redraw
        pending = pending[[tuple(r) in observed for r in rows[pending]]]
    K = params.num_communities
    counts = np.zeros((num, K))
    np.add.at(counts, (np.repeat(np.arange(num), size), labels[rows].ravel()), 1.0)
    return _scores_from_counts(counts, np.full(num, size, dtype=np.int64), params)


def size_histogram(h: Hypergraph) -> dict[int, float]:
    """Fraction of hyperedges at each size; values sum to 1."""
    if h.num_hyperedges == 0:
        return {}
    counts = np.bincount(h.sizes, minlength=h.max_size + 1)
    total = counts.sum()
    return {d: counts[d] / total for d in range(2, h.max_size + 1) if counts[d] > 0}
