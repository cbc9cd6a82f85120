"""Closed-form detectability bounds and information diagnostics.

Perturbations of the uninformative fixed point propagate through the factor
graph with a per-step transition matrix

    T~^ab = 2 / (f (f-1)) * n_a (c_ab / c - 1)

for a path step through a hyperedge of size f, i.e. the dyadic transition
matrix damped by the pair share of the hyperedge.  Averaging over hyperedge
sizes gives the stability criterion

    d0 (F - 1) * mu^2 * lambda^2 < 1,   mu = exp E[log 2/(|f|(|f|-1))],

with d0 the mean degree, F the mean hyperedge size and lambda the leading
eigenvalue magnitude of the dyadic matrix.  For equal blocks this bounds the
assortativity gap |c_in - c_out|, and the bound normalized by its maximum Kc
factorizes into independent effects of K, c and the size distribution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import InputError
from .hypergraph import Hypergraph
from .model import ModelParams, KappaSchedule, expected_degree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SizeDistribution:
    """Distribution of hyperedge sizes, 2..D, with its mean."""

    sizes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if self.sizes.shape != self.probs.shape or self.sizes.size == 0:
            raise InputError("sizes and probs must be equal-length, non-empty")
        if abs(self.probs.sum() - 1.0) > 1e-9 or np.any(self.probs < 0):
            raise InputError("probs must be a probability vector")

    @property
    def mean_size(self) -> float:
        return float(self.sizes @ self.probs)

    def mean_log_pair_share(self) -> float:
        """E[log(2 / (|f| (|f| - 1)))], the log damping per path step."""
        d = self.sizes.astype(float)
        return float(self.probs @ np.log(2.0 / (d * (d - 1.0))))


def ensemble_size_distribution(kappa: KappaSchedule) -> SizeDistribution:
    """P(d) proportional to the ensemble mean hyperedge counts.

    The community factor of E[omega_d] is size-independent, so P(d) is the
    normalized ratio binom(N-2, d-2) / kappa_d; with the default schedule
    P(d) is proportional to 1 / (d (d-1)).
    """
    ratios = np.asarray(kappa.ratios, dtype=float)
    if ratios.size == 0 or ratios.sum() <= 0:
        raise InputError("kappa schedule yields an empty size distribution")
    return SizeDistribution(sizes=kappa.sizes.copy(), probs=ratios / ratios.sum())


def empirical_size_distribution(h: Hypergraph) -> SizeDistribution:
    if h.num_hyperedges == 0:
        raise InputError("empty hypergraph has no size distribution")
    counts = np.bincount(h.sizes, minlength=h.max_size + 1)[2:]
    sizes = np.arange(2, h.max_size + 1, dtype=np.int64)
    keep = counts > 0
    return SizeDistribution(sizes=sizes[keep], probs=counts[keep] / counts.sum())


def transition_matrix(rescaled: np.ndarray, prior: np.ndarray, f_size: int) -> np.ndarray:
    """Perturbation transition through one hyperedge of the given size."""
    if f_size < 2:
        raise InputError("hyperedge size must be at least 2")
    c = _mean_community_degree(rescaled, prior)
    base = prior[:, None] * (rescaled / c - 1.0)
    return (2.0 / (f_size * (f_size - 1.0))) * base


def _mean_community_degree(rescaled: np.ndarray, prior: np.ndarray) -> float:
    rows = rescaled @ prior
    c = float(prior @ rows)
    if c <= 0:
        raise InputError("degenerate affinity: zero mean degree")
    if np.max(np.abs(rows - c)) > 1e-6 * max(c, 1.0):
        logger.warning("affinity violates the equal-expected-degree constraint; "
                       "bounds use the mean value c=%.6g", c)
    return c


def leading_eigenvalue(rescaled: np.ndarray, prior: np.ndarray,
                       tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Spectral radius of the dyadic transition matrix, by power iteration.

    diag(n) M with symmetric M is similar to diag(sqrt n) M diag(sqrt n), so
    the iteration runs on the symmetric form with a deterministic start.
    """
    c = _mean_community_degree(rescaled, prior)
    root = np.sqrt(prior)
    B = root[:, None] * (rescaled / c - 1.0) * root[None, :]
    K = prior.shape[0]
    v = 1.0 + 1e-3 * np.arange(K)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        u = B @ v
        norm = float(np.linalg.norm(u))
        if norm == 0.0:
            return 0.0
        if abs(norm - est) <= tol * max(1.0, norm):
            return norm
        est = norm
        v = u / norm
    return est


def stability_criterion(rescaled: np.ndarray, prior: np.ndarray, dist: SizeDistribution,
                        mean_degree: float) -> tuple[bool, float]:
    """Whether the uninformative fixed point is stable, and by what margin.

    Evaluates v = d0 (F-1) mu^2 lambda^2; stable (undetectable) iff v < 1.
    Returns (stable, 1 - v).
    """
    lam = leading_eigenvalue(rescaled, prior)
    mu = math.exp(dist.mean_log_pair_share())
    value = mean_degree * (dist.mean_size - 1.0) * mu * mu * lam * lam
    return value < 1.0, 1.0 - value


def ks_threshold(num_communities: int, degree: float, dist: SizeDistribution,
                 mean_degree: float | None = None,
                 kappa: KappaSchedule | None = None) -> float:
    """Assortativity gap |c_in - c_out| above which detection is feasible.

    K c / sqrt(d0 (F-1)) * exp(-E[log 2/(|f|(|f|-1))]); with pairwise-only
    hyperedges this is the classical K sqrt(c).  A single community has no
    threshold (returns 0).  The mean degree d0 defaults to the ensemble
    closed form C c / 2, which needs the kappa schedule.
    """
    if num_communities <= 1:
        return 0.0
    if degree <= 0:
        return float("inf")
    if mean_degree is None:
        if kappa is None:
            raise InputError("ks_threshold needs mean_degree or a kappa schedule")
        mean_degree = 0.5 * kappa.C * degree
    return (num_communities * degree / math.sqrt(mean_degree * (dist.mean_size - 1.0))
            * math.exp(-dist.mean_log_pair_share()))


@dataclass(frozen=True)
class PhiParts:
    """Normalized detectability bound Phi = alpha * beta * gamma."""

    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    gamma: float
    phi: float


def phi_decomposition(num_communities: int, degree: float, kappa: KappaSchedule,
                      dist: SizeDistribution | None = None) -> PhiParts:
    """Split the normalized bound into the K, c and size-distribution factors.

    alpha = (K-1)/K,  beta = 1/sqrt(c),
    gamma1 = exp(-E[log 2/(|f|(|f|-1))]),  gamma2 = 1/sqrt(C (F-1) / 2).
    """
    if num_communities < 1:
        raise InputError("need at least one community")
    dist = dist or ensemble_size_distribution(kappa)
    K = num_communities
    alpha = (K - 1) / K
    beta = 1.0 / math.sqrt(degree) if degree > 0 else float("inf")
    gamma1 = math.exp(-dist.mean_log_pair_share())
    gamma2 = 1.0 / math.sqrt(kappa.C * (dist.mean_size - 1.0) / 2.0)
    gamma = gamma1 * gamma2
    return PhiParts(alpha, beta, gamma1, gamma2, gamma, alpha * beta * gamma)


@dataclass
class DetectabilityReport:
    """Bound decomposition, stability verdict and entropy diagnostics."""

    num_communities: int
    degree: float
    max_size: int
    mode: str                     # "ensemble" or "empirical"
    mean_degree: float
    mean_size: float
    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    gamma: float
    phi: float
    threshold: float              # on |c_in - c_out|
    eigenvalue: float | None = None
    criterion_value: float | None = None
    stable: bool | None = None
    entropy: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def detectability_report(params: ModelParams, hypergraph: Hypergraph | None = None,
                         evaluate_matrix: bool = True) -> DetectabilityReport:
    """Assemble the full report for a model (and optionally a dataset).

    Without a hypergraph, the size distribution, mean degree and mean size
    come from the ensemble closed forms; with one, all three are measured on
    the data and the entropy diagnostics are included.
    """
    degree = _mean_community_degree(params.rescaled, params.prior)
    if hypergraph is None:
        dist = ensemble_size_distribution(params.kappa)
        d0 = expected_degree(params)
        entropy = None
        mode = "ensemble"
    else:
        dist = empirical_size_distribution(hypergraph)
        d0 = float(hypergraph.sizes.sum()) / hypergraph.num_nodes
        entropy = entropy_diagnostics(hypergraph).to_dict()
        mode = "empirical"
    parts = phi_decomposition(params.num_communities, degree, params.kappa, dist)
    threshold = ks_threshold(params.num_communities, degree, dist, mean_degree=d0)
    report = DetectabilityReport(
        num_communities=params.num_communities,
        degree=degree,
        max_size=params.max_size,
        mode=mode,
        mean_degree=d0,
        mean_size=dist.mean_size,
        alpha=parts.alpha,
        beta=parts.beta,
        gamma1=parts.gamma1,
        gamma2=parts.gamma2,
        gamma=parts.gamma,
        phi=parts.phi,
        threshold=threshold,
        entropy=entropy,
    )
    if evaluate_matrix:
        report.eigenvalue = leading_eigenvalue(params.rescaled, params.prior)
        mu = math.exp(dist.mean_log_pair_share())
        report.criterion_value = d0 * (dist.mean_size - 1.0) * (mu * report.eigenvalue) ** 2
        report.stable = report.criterion_value < 1.0
    return report


@dataclass(frozen=True)
class EntropyDiagnostics:
    """Entropies of the pair-in-hyperedge distribution and its marginals.

    The joint p_H picks a hyperedge uniformly and then one of its node pairs
    uniformly; p_E is its hyperedge marginal (uniform over E) and p_C its
    pair marginal (the weighted clique decomposition).  The conditional
    entropy H(pair | hyperedge) equals the empirical log gamma1 and the
    mutual information is H(p_C) minus that conditional entropy.
    """

    h_joint: float
    h_edges: float
    h_clique: float
    h_conditional: float
    perplexity_ratio: float
    mutual_information: float

    @property
    def log_gamma1(self) -> float:
        return self.h_conditional

    def to_dict(self) -> dict:
        out = asdict(self)
        out["log_gamma1"] = self.log_gamma1
        return out


def entropy_diagnostics(h: Hypergraph) -> EntropyDiagnostics:
    if h.num_hyperedges == 0:
        raise InputError("entropy diagnostics need at least one hyperedge")
    E = h.num_hyperedges
    sizes = h.sizes.astype(float)
    pair_counts = sizes * (sizes - 1.0) / 2.0
    h_joint = math.log(E) + float(np.log(pair_counts).mean())
    h_edges = math.log(E)

    codes = []
    weights = []
    for e, size in zip(h.hyperedges, h.sizes):
        w = 2.0 / (size * (size - 1.0)) / E
        for i in range(size):
            for j in range(i + 1, size):
                codes.append(e[i] * h.num_nodes + e[j])
                weights.append(w)
    codes = np.asarray(codes, dtype=np.int64)
    weights = np.asarray(weights)
    _, inverse = np.unique(codes, return_inverse=True)
    mass = np.bincount(inverse, weights=weights)
    h_clique = float(-(mass * np.log(mass)).sum())

    h_conditional = h_joint - h_edges
    return EntropyDiagnostics(
        h_joint=h_joint,
        h_edges=h_edges,
        h_clique=h_clique,
        h_conditional=h_conditional,
        perplexity_ratio=math.exp(h_joint) / math.exp(h_edges),
        mutual_information=h_clique - h_conditional,
    )
