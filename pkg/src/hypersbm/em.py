"""Expectation-maximization for the prior and the rescaled affinity.

The E step is a message-passing run; the M step uses the hard labels
t = argmax marginals.  The prior update is the label frequency; the affinity
update is multiplicative:

    c_ab <- c_ab * [sum_e (#_a #_b - delta_ab #_a) / pi_e]
                   / [N C' (N n_a n_b - delta_ab n_a)]

with #_a the per-community member counts of hyperedge e and pi_e evaluated
at the pre-update affinity and the hard labels.  The update is invariant
under rewriting c = N p, and a vanished community freezes its entries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericalAbort
from .hypergraph import Hypergraph
from .model import KappaSchedule, ModelParams
from .mp import MessageState, MpConfig, MpResult, hard_assignment, run_mp
from ._validation import EPS_AFFINITY, as_generator, check_assignment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmConfig:
    """Outer-loop settings; ``mp`` configures the inner message passing.

    The inner dropout default (0.01) is the stable choice when alternating
    with parameter updates; pass a custom MpConfig for synthetic data where
    0.25 converges much faster.
    """

    num_communities: int = 2
    tol: float = 1e-4
    max_iter: int = 50
    restarts: int = 5
    seed: int = 0
    mp: MpConfig = field(default_factory=lambda: MpConfig(dropout=0.01))
    init_params: tuple | None = None  # optional explicit (prior, rescaled) start


@dataclass
class InferenceResult:
    """Learned parameters plus the final message-passing state summary."""

    params: ModelParams
    marginals: np.ndarray
    assignment: np.ndarray
    free_energy: float
    delta_trace: list
    converged: bool
    restart: int = 0

    def __post_init__(self):
        expect = hard_assignment(self.marginals)
        if not np.array_equal(expect, self.assignment):
            raise ValueError("assignment must be the argmax of the marginals")


def update_n(marginals: np.ndarray) -> np.ndarray:
    """Prior update: fraction of nodes whose argmax marginal is each label."""
    labels = hard_assignment(marginals)
    counts = np.bincount(labels, minlength=marginals.shape[1])
    return counts / marginals.shape[0]


def edge_community_counts(h: Hypergraph, labels: np.ndarray, num_communities: int) -> np.ndarray:
    """(E, K) matrix of per-community member counts of every hyperedge."""
    labels = check_assignment(labels, h.num_nodes, num_communities)
    flat = h.flat
    counts = np.zeros((h.num_hyperedges, num_communities))
    np.add.at(counts, (flat.pair_edge, labels[flat.pair_node]), 1.0)
    return counts


def update_c(h: Hypergraph, labels: np.ndarray, rescaled: np.ndarray, prior: np.ndarray,
             kappa: KappaSchedule) -> np.ndarray:
    """One multiplicative affinity update from hard labels.

    Entries whose denominator vanishes (empty or singleton community) are
    frozen; all results are floored at the affinity clamp and symmetrized.
    """
    K = prior.shape[0]
    N = kappa.num_nodes
    c = np.maximum(np.asarray(rescaled, dtype=float), EPS_AFFINITY)
    counts = edge_community_counts(h, labels, K)
    p = c / N
    pi = 0.5 * (np.einsum("ea,ab,eb->e", counts, p, counts) - counts @ np.diag(p))
    if np.any(pi <= 0):
        raise NumericalAbort("zero hyperedge weight survived the affinity clamp")
    inv_pi = 1.0 / pi
    numerator = np.einsum("e,ea,eb->ab", inv_pi, counts, counts)
    numerator -= np.diag(counts.T @ inv_pi)
    denominator = N * kappa.C_prime * (N * np.outer(prior, prior) - np.diag(prior))
    ok = denominator > 0
    if np.any(~ok & (numerator > 0)):
        logger.warning("vanished community: freezing %d affinity entries", int((~ok).sum()))
    out = np.where(ok, c * np.divide(numerator, denominator, out=np.zeros_like(c), where=ok), c)
    out = 0.5 * (out + out.T)
    return np.maximum(out, EPS_AFFINITY)


def _init_rescaled(h: Hypergraph, K: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Weakly assortative random start matched to the observed mean degree."""
    kappa = KappaSchedule.default(h.num_nodes, h.max_size)
    mean_degree = float(h.sizes.sum()) / h.num_nodes
    scale = max(2.0 * mean_degree / kappa.C, EPS_AFFINITY)
    boost = rng.uniform(0.0, 0.5, size=K)
    diag = scale * (1.0 + boost)
    c = np.empty((K, K))
    if K > 1:
        off_row = (K * scale - diag) / (K - 1)
        for a in range(K):
            for b in range(K):
                c[a, b] = diag[a] if a == b else 0.5 * (off_row[a] + off_row[b])
    else:
        c[0, 0] = diag[0]
    prior = np.full(K, 1.0 / K)
    return prior, np.maximum(c, EPS_AFFINITY)


def run_em(h: Hypergraph, config: EmConfig) -> InferenceResult:
    """Alternate message passing with the closed-form parameter updates.

    Runs ``config.restarts`` independent restarts and keeps the one with the
    lowest free energy.  Within a restart, EM stops once
    sum |n - n_old| + sum |c - c_old| < tol, or after max_iter rounds.
    """
    from .energy import free_energy  # local import: energy builds on mp only

    best: InferenceResult | None = None
    for restart in range(config.restarts):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(restart,))))
        result = _run_em_once(h, config, rng, restart)
        if best is None or result.free_energy < best.free_energy:
            best = result
    return best


def _run_em_once(h: Hypergraph, config: EmConfig, rng, restart: int) -> InferenceResult:
    from .energy import free_energy

    K = config.num_communities
    if config.init_params is not None:
        prior = np.asarray(config.init_params[0], dtype=float)
        rescaled = np.asarray(config.init_params[1], dtype=float)
    else:
        prior, rescaled = _init_rescaled(h, K, rng)

    state: MessageState | None = None
    mp_result: MpResult | None = None
    trace: list[float] = []
    converged = False
    params = _build_params(h, prior, rescaled)
    for step in range(1, config.max_iter + 1):
        try:
            mp_result = run_mp(h, params, config.mp, rng=rng, init_state=state)
        except NumericalAbort as exc:
            raise NumericalAbort(f"EM restart {restart}, step {step}: {exc}") from exc
        state = mp_result.state
        labels = hard_assignment(state.marginals)
        new_prior = update_n(state.marginals)
        new_rescaled = update_c(h, labels, rescaled, new_prior, params.kappa)
        delta = float(np.abs(new_prior - prior).sum() + np.abs(new_rescaled - rescaled).sum())
        trace.append(delta)
        prior, rescaled = new_prior, new_rescaled
        params = _build_params(h, prior, rescaled)
        if delta < config.tol:
            converged = True
            break

    energy = free_energy(h, params, state).total
    return InferenceResult(
        params=params,
        marginals=state.marginals.copy(),
        assignment=hard_assignment(state.marginals),
        free_energy=energy,
        delta_trace=trace,
        converged=converged,
        restart=restart,
    )


def _build_params(h: Hypergraph, prior: np.ndarray, rescaled: np.ndarray) -> ModelParams:
    # the prior may have zero entries after an update; bypass simplex jitter
    prior = np.clip(prior, 0.0, None)
    prior = prior / prior.sum()
    return ModelParams.from_rescaled(prior, np.clip(rescaled, 0.0, float(h.num_nodes)),
                                     h.num_nodes, max_size=h.max_size)
