"""Model parameters, size normalizers and exact likelihood evaluation.

The generative model: each node i draws a hard label t_i ~ Cat(n); every
possible hyperedge e of size 2..D is present independently with probability
pi_e / kappa_{|e|}, where pi_e sums the pairwise affinities p_{t_i t_j} over
the node pairs inside e.  The rescaled affinity c = N * p is O(1) in sparse
regimes and is the natural parameter for inference.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InputError
from .hypergraph import Hypergraph
from ._validation import (
    EPS_AFFINITY,
    check_assignment,
    check_probability_vector,
    check_symmetric_matrix,
    readonly,
)

logger = logging.getLogger(__name__)


def log_binom(n, k):
    """log of the binomial coefficient, safe for very large n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    from scipy.special import gammaln

    out = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    return np.where((k < 0) | (k > n), -np.inf, out)


class KappaSchedule:
    """Normalizers kappa_d for d = 2..D and the derived summation constants.

    The constants are

        C    = sum_d binom(N-2, d-2) * d      / kappa_d
        C'   = sum_d binom(N-2, d-2)          / kappa_d
        C''' = sum_d binom(N-2, d-2) * (1-d)  / kappa_d

    computed from the ratios binom(N-2, d-2) / kappa_d, which are formed in
    log space before exponentiation: with the default schedule the ratios are
    O(1/d^2) while the raw binomials overflow for N in the tens of thousands.

    Any schedule must satisfy kappa_d >= d(d-1)/2 so that pi_e / kappa_d is a
    valid probability for every affinity matrix with entries in [0, 1].
    """

    def __init__(self, num_nodes: int, log_values: Sequence[float]):
        self.num_nodes = int(num_nodes)
        lv = np.asarray(log_values, dtype=float)
        self.max_size = lv.shape[0] + 1
        if self.max_size > self.num_nodes:
            raise InputError("kappa schedule extends beyond max_size = num_nodes")
        d = np.arange(2, self.max_size + 1, dtype=float)
        floor = np.log(d * (d - 1) / 2.0)
        if lv.size and np.any(lv < floor - 1e-9):
            bad = int(d[np.argmax(lv < floor - 1e-9)])
            raise InputError(f"kappa_{bad} below the validity floor d(d-1)/2")
        self._log_values = readonly(lv)
        self.sizes = readonly(d.astype(np.int64))
        ratios = np.exp(log_binom(self.num_nodes - 2, d - 2) - lv) if lv.size else np.zeros(0)
        self.ratios = readonly(ratios)

    @classmethod
    def default(cls, num_nodes: int, max_size: int) -> "KappaSchedule":
        """kappa_d = binom(N-2, d-2) * d(d-1)/2, for which kappa_2 = 1."""
        d = np.arange(2, max_size + 1, dtype=float)
        lv = log_binom(num_nodes - 2, d - 2) + np.log(d * (d - 1) / 2.0)
        sched = cls(num_nodes, lv)
        sched._is_default = True
        return sched

    @classmethod
    def from_values(cls, num_nodes: int, values: Sequence[float]) -> "KappaSchedule":
        values = np.asarray(values, dtype=float)
        if values.size and values.min() <= 0:
            raise InputError("kappa values must be positive")
        return cls(num_nodes, np.log(values))

    @property
    def is_default(self) -> bool:
        return getattr(self, "_is_default", False)

    def log_kappa(self, size) -> np.ndarray | float:
        size = np.asarray(size)
        if np.any(size < 2) or np.any(size > self.max_size):
            raise InputError(f"size outside the schedule range [2, {self.max_size}]")
        out = self._log_values[size - 2]
        return float(out) if out.ndim == 0 else out

    def kappa(self, size) -> float:
        return float(np.exp(self.log_kappa(size)))

    @cached_property
    def C(self) -> float:
        return float(np.sum(self.sizes * self.ratios))

    @cached_property
    def C_prime(self) -> float:
        return float(np.sum(self.ratios))

    @cached_property
    def C_triple(self) -> float:
        return float(np.sum((1.0 - self.sizes) * self.ratios))

    def __repr__(self) -> str:
        kind = "default" if self.is_default else "custom"
        return f"KappaSchedule(N={self.num_nodes}, D={self.max_size}, {kind})"


class ModelParams:
    """Community prior n, affinity matrix p (with c = N*p) and kappa schedule.

    All arrays are validated and frozen at construction.
    """

    def __init__(self, prior, affinity, num_nodes: int, max_size: int | None = None,
                 kappa: KappaSchedule | None = None):
        self.prior = readonly(check_probability_vector(prior))
        self.num_communities = self.prior.shape[0]
        self.affinity = readonly(
            check_symmetric_matrix(affinity, self.num_communities, "affinity", lo=0.0, hi=1.0)
        )
        self.num_nodes = int(num_nodes)
        if kappa is not None and max_size is not None and kappa.max_size != max_size:
            raise InputError("max_size disagrees with the kappa schedule")
        if kappa is None:
            if max_size is None:
                raise InputError("either max_size or kappa must be given")
            kappa = KappaSchedule.default(self.num_nodes, max_size)
        if kappa.num_nodes != self.num_nodes:
            raise InputError("kappa schedule built for a different num_nodes")
        self.kappa = kappa
        self.max_size = kappa.max_size
        self.rescaled = readonly(self.num_nodes * self.affinity)

    @classmethod
    def from_rescaled(cls, prior, rescaled, num_nodes: int, max_size: int | None = None,
                      kappa: KappaSchedule | None = None) -> "ModelParams":
        rescaled = np.asarray(rescaled, dtype=float)
        return cls(prior, rescaled / float(num_nodes), num_nodes, max_size, kappa)

    @classmethod
    def assortative(cls, num_nodes: int, num_communities: int, degree: float,
                    c_out: float, max_size: int,
                    kappa: KappaSchedule | None = None) -> "ModelParams":
        """Equal-blocks benchmark: c_aa = c_in, c_ab = c_out, uniform prior.

        c_in is fixed by the equal-expected-degree constraint
        c_in + (K-1) c_out = K * degree.
        """
        K = int(num_communities)
        c_in = K * degree - (K - 1) * c_out
        if c_in < 0:
            raise InputError(f"c_out={c_out} implies negative c_in for degree={degree}, K={K}")
        c = np.full((K, K), float(c_out))
        np.fill_diagonal(c, c_in)
        return cls.from_rescaled(np.full(K, 1.0 / K), c, num_nodes, max_size, kappa)

    def clamped_rescaled(self, eps: float = EPS_AFFINITY) -> np.ndarray:
        """c with entries floored at eps, for logs and denominators."""
        return np.maximum(self.rescaled, eps)

    def permuted(self, perm) -> "ModelParams":
        """Same model with communities relabelled by a permutation."""
        perm = np.asarray(perm)
        return ModelParams(self.prior[perm], self.affinity[np.ix_(perm, perm)],
                           self.num_nodes, kappa=self.kappa)

    def to_dict(self) -> dict:
        kappa = "default" if self.kappa.is_default else [self.kappa.kappa(d) for d in range(2, self.max_size + 1)]
        return {
            "K": self.num_communities,
            "n": self.prior.tolist(),
            "p": self.affinity.tolist(),
            "D": self.max_size,
            "kappa": kappa,
        }

    @classmethod
    def from_dict(cls, data: dict, num_nodes: int) -> "ModelParams":
        try:
            K, n, p, D = data["K"], data["n"], data["p"], data["D"]
        except KeyError as exc:
            raise InputError(f"parameter file missing field {exc}") from exc
        kappa_field = data.get("kappa", "default")
        if kappa_field == "default":
            kappa = KappaSchedule.default(num_nodes, D)
        else:
            if len(kappa_field) != D - 1:
                raise InputError("explicit kappa must list values for d = 2..D")
            kappa = KappaSchedule.from_values(num_nodes, kappa_field)
        if int(K) != len(n):
            raise InputError("K disagrees with the length of n")
        return cls(n, p, num_nodes, kappa=kappa)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path, num_nodes: int) -> "ModelParams":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), num_nodes)

    def __repr__(self) -> str:
        return (
            f"ModelParams(K={self.num_communities}, N={self.num_nodes}, D={self.max_size})"
        )


def hyperedge_pi(edge, labels, affinity) -> float:
    """pi_e = sum of p_{t_i t_j} over the node pairs i < j inside the hyperedge."""
    edge = np.asarray(edge, dtype=np.int64)
    labels = np.asarray(labels)
    if edge.size and (edge.min() < 0 or edge.max() >= labels.shape[0]):
        raise InputError("hyperedge node id outside the assignment range")
    le = labels[edge]
    total = 0.0
    for i, j in itertools.combinations(range(edge.size), 2):
        total += affinity[le[i], le[j]]
    return float(total)


def hyperedge_probability(edge, labels, params: ModelParams) -> float:
    """Bernoulli parameter pi_e / kappa_{|e|} of a hyperedge being present."""
    edge = np.asarray(edge, dtype=np.int64)
    if edge.size > params.max_size:
        raise InputError(f"hyperedge size {edge.size} exceeds max_size {params.max_size}")
    pi = hyperedge_pi(edge, labels, params.affinity)
    return pi * math.exp(-params.kappa.log_kappa(edge.size))


def count_possible_hyperedges(num_nodes: int, max_size: int) -> int:
    """|Omega| = total number of node subsets of size 2..max_size."""
    return sum(math.comb(num_nodes, d) for d in range(2, max_size + 1))


def log_likelihood_exact(h: Hypergraph, labels, params: ModelParams,
                         max_terms: int = 10**6) -> float:
    """Full Bernoulli log-likelihood, enumerating every possible hyperedge.

    Feasible only for small instances; refuses when |Omega| exceeds
    ``max_terms``.  Returns -inf (with a log warning) if an observed
    hyperedge has pi_e = 0.
    """
    n_terms = count_possible_hyperedges(h.num_nodes, params.max_size)
    if n_terms > max_terms:
        raise InputError(
            f"|Omega| = {n_terms} exceeds the enumeration cap {max_terms}"
        )
    labels = check_assignment(labels, h.num_nodes, params.num_communities)
    observed = {frozenset(e) for e in h.hyperedges}
    total = 0.0
    for d in range(2, params.max_size + 1):
        log_kappa = params.kappa.log_kappa(d)
        for e in itertools.combinations(range(h.num_nodes), d):
            pi = hyperedge_pi(np.array(e), labels, params.affinity)
            prob = pi * math.exp(-log_kappa)
            if frozenset(e) in observed:
                if prob == 0.0:
                    logger.warning("observed hyperedge %s has zero probability", e)
                    return float("-inf")
                total += math.log(prob)
            else:
                if prob >= 1.0:
                    return float("-inf")
                total += math.log1p(-prob)
    prior = params.prior
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)
    if np.any(~np.isfinite(log_prior[labels])):
        return float("-inf")
    total += float(log_prior[labels].sum())
    return total


def expected_degree(params: ModelParams) -> float:
    """Ensemble mean node degree d0 = (C/2) * sum_ab c_ab n_a n_b."""
    n = params.prior
    return float(0.5 * params.kappa.C * (n @ params.rescaled @ n))
