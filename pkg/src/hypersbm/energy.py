"""Cavity estimation of the free energy F = -log Z, plus exact tiny-instance
evidence and the parameter-simplex landscape sweep.

The cavity formula splits F into per-node terms, per observed hyperedge
terms, and a closed-form aggregate for the unobserved hyperedges:

    F = - sum_i f_i + sum_{e in E} (|e|-1) [log eta(e) - log kappa_e] + U

f_i is the log normalizer of node i's marginal, built from the same
hyperedge factors as message passing together with the full unobserved-field
exponent; eta(e) marginalizes pi_e over all members of e via running pair
sums; U is the quadratic marginal aggregate weighted by C'''.

The per-size normalizers kappa and the label-independent part of the
unobserved field are kept (they cancel in message normalization but not in
the evidence), so the estimate is directly comparable to -log Z.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .hypergraph import Hypergraph
from .model import ModelParams, log_binom
from .mp import MessageState, MpConfig, init_messages, run_mp, _edge_factors
from ._validation import as_generator

logger = logging.getLogger(__name__)

_TINY = 1e-300


@dataclass(frozen=True)
class FreeEnergyEstimate:
    """Cavity free energy and its three assembled parts.

    total = -sum_fi + sum_fe_observed + sum_fe_unobserved, exactly.
    """

    total: float
    sum_fi: float
    sum_fe_observed: float
    sum_fe_unobserved: float

    def assembly_gap(self) -> float:
        return abs(self.total - (-self.sum_fi + self.sum_fe_observed + self.sum_fe_unobserved))


def _marginal_pair_aggregate(params: ModelParams, marginals: np.ndarray) -> float:
    """sum_ab c_ab [qV(a) qV(b) - sum_k q_k(a) q_k(b)] with qV the marginal sums."""
    c = params.rescaled
    qv = marginals.sum(axis=0)
    self_term = np.einsum("ka,ab,kb->", marginals, c, marginals)
    return float(qv @ c @ qv - self_term)


def _completion_ratio(params: ModelParams) -> float:
    """sum over sizes >= 3 of binom(N-3, d-3) / kappa_d.

    Weight with which a node pair completes to an unobserved hyperedge that
    contains one further marked node.
    """
    sizes = np.arange(3, params.max_size + 1, dtype=float)
    if sizes.size == 0:
        return 0.0
    log_ratios = log_binom(params.num_nodes - 3, sizes - 3) - np.array(
        [params.kappa.log_kappa(int(d)) for d in sizes]
    )
    return float(np.sum(np.exp(log_ratios)))


def _unobserved_field(h: Hypergraph, params: ModelParams, state: MessageState) -> np.ndarray:
    """(N, K) exponent of each node's unobserved-hyperedge product.

    Assembled from the global field with three refinements that matter only
    at next order in 1/N but dominate the evidence error on small instances:
    the node's own marginal is excluded, the label-independent pair sums
    among the other members of size >= 3 factors are kept, and observed
    incident hyperedges are taken back out.
    """
    m = state.marginals
    c = params.rescaled
    cm = m @ c
    field = state.external_field[None, :] - (params.kappa.C_prime / params.num_nodes) * cm

    ratio3 = _completion_ratio(params)
    if ratio3 > 0.0:
        offset = ratio3 / (2.0 * params.num_nodes) * _marginal_pair_aggregate(params, m)
        qv = m.sum(axis=0)
        self_pairs = (ratio3 / params.num_nodes) * (
            np.einsum("ik,k->i", m, c @ qv) - np.einsum("ik,ik->i", m, cm)
        )
        field = field + (offset - self_pairs)[:, None]

    if h.num_hyperedges:
        per_pair, _ = _observed_factor_weights(h, params, state)
        U = np.zeros_like(field)
        for a in range(field.shape[1]):
            U[:, a] = np.bincount(h.flat.pair_node, weights=per_pair[:, a], minlength=h.num_nodes)
        field = field - U
    return field


def _observed_factor_weights(h: Hypergraph, params: ModelParams, state: MessageState):
    """Expected Bernoulli exponents of the *observed* hyperedges.

    Both the external field and the closed-form aggregate run over every
    possible hyperedge; observed ones must be taken back out of that
    unobserved-side bookkeeping (their weight sits on the observed side).
    Under the marginals m, an observed hyperedge e carries

        x_e(t_i) = [sum_{l in e\\i} (c m_l)(t_i) + pairs within e\\i] / (N kappa_e)

    toward member i's field and x_e = pairs within e / (N kappa_e) overall.
    Returns (per-pair x_e(t_i) rows, per-edge x_e).
    """
    flat = h.flat
    m = state.marginals[flat.pair_node]
    c = params.rescaled
    K = params.num_communities
    w = m @ c
    Q = np.zeros((h.num_hyperedges, K))
    for a in range(K):
        Q[:, a] = np.bincount(flat.pair_edge, weights=m[:, a], minlength=h.num_hyperedges)
    W = Q @ c
    dots = np.einsum("pk,pk->p", m, w)
    dot_sums = np.bincount(flat.pair_edge, weights=dots, minlength=h.num_hyperedges)
    pair_sum = 0.5 * (np.einsum("ea,ea->e", Q, W) - dot_sums)
    cavity_pairs = pair_sum[flat.pair_edge] - np.einsum("pk,pk->p", m, W[flat.pair_edge]) + dots
    scale = 1.0 / (params.num_nodes * np.exp(np.asarray(params.kappa.log_kappa(h.sizes), dtype=float)))
    per_pair = ((W[flat.pair_edge] - w) + cavity_pairs[:, None]) * scale[flat.pair_edge][:, None]
    per_edge = pair_sum * scale
    return per_pair, per_edge


def node_terms(h: Hypergraph, params: ModelParams, state: MessageState) -> float:
    """sum_i f_i, each the log normalizer of the node's marginal.

    f_i combines the observed incident hyperedge factors (with their size
    normalizers) with the node's unobserved-hyperedge field exponent.
    """
    flat = h.flat
    psi = _edge_factors(state, h, params)
    dead = psi.sum(axis=1) <= 0
    if np.any(dead):
        logger.warning("%d observed hyperedges carry zero weight", int(np.unique(flat.pair_edge[dead]).size))
    log_psi = np.log(np.maximum(psi, _TINY))
    log_psi -= np.asarray(params.kappa.log_kappa(h.sizes))[flat.pair_edge][:, None]
    K = params.num_communities
    S = np.zeros((h.num_nodes, K))
    for a in range(K):
        S[:, a] = np.bincount(flat.pair_node, weights=log_psi[:, a], minlength=h.num_nodes)
    with np.errstate(divide="ignore"):
        L = np.log(params.prior)[None, :] + S - _unobserved_field(h, params, state)
    top = L.max(axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    f = top[:, 0] + np.log(np.exp(L - top).sum(axis=1))
    return float(f.sum())


def edge_weight_recursive(messages: np.ndarray, affinity: np.ndarray) -> float:
    """eta(e) = sum over all member labels of pi_e * prod_j q_{j->e}(t_j).

    Two running quantities per added member: the pair sums s against the new
    member and the accumulated eta, at cost O(K |e|).
    """
    q = np.asarray(messages, dtype=float)
    if q.ndim != 2 or q.shape[0] < 2:
        raise InputError("need a (m, K) array with m >= 2 incoming messages")
    q = q / q.sum(axis=1, keepdims=True)
    p = np.asarray(affinity, dtype=float)
    s = np.zeros(q.shape[1])
    eta = 0.0
    for m in range(1, q.shape[0]):
        s = s + p @ q[m - 1]
        eta = eta + float(q[m] @ s)
    return eta


def observed_hyperedge_terms(h: Hypergraph, params: ModelParams, state: MessageState) -> float:
    """sum_{e in E} (|e|-1) * [log eta(e) - log kappa_{|e|}]."""
    flat = h.flat
    q = state.node_to_hye
    p = params.affinity
    K = params.num_communities
    Q = np.zeros((h.num_hyperedges, K))
    for a in range(K):
        Q[:, a] = np.bincount(flat.pair_edge, weights=q[:, a], minlength=h.num_hyperedges)
    w = q @ p
    dots = np.einsum("pk,pk->p", q, w)
    dot_sums = np.bincount(flat.pair_edge, weights=dots, minlength=h.num_hyperedges)
    eta = 0.5 * (np.einsum("ea,ab,eb->e", Q, p, Q) - dot_sums)
    if np.any(eta <= 0):
        logger.warning("%d observed hyperedges carry zero weight", int((eta <= 0).sum()))
    log_eta = np.log(np.maximum(eta, _TINY)) - np.asarray(params.kappa.log_kappa(h.sizes))
    return float(((h.sizes - 1) * log_eta).sum())


def unobserved_hyperedge_terms(params: ModelParams, state: MessageState,
                               h: Hypergraph | None = None) -> float:
    """Closed-form aggregate of the unobserved hyperedge terms (linear time).

    The quadratic marginal aggregate runs over every possible hyperedge;
    when the hypergraph is supplied, the observed ones are taken back out.
    """
    total = (params.kappa.C_triple / (2.0 * params.num_nodes)) * _marginal_pair_aggregate(
        params, state.marginals
    )
    if h is not None and h.num_hyperedges:
        _, per_edge = _observed_factor_weights(h, params, state)
        total -= float(((1.0 - h.sizes) * per_edge).sum())
    return total


def free_energy(h: Hypergraph, params: ModelParams, state: MessageState) -> FreeEnergyEstimate:
    """Assemble the cavity free energy from a message-passing state."""
    fi = node_terms(h, params, state)
    fe_obs = observed_hyperedge_terms(h, params, state)
    fe_unobs = unobserved_hyperedge_terms(params, state, h)
    return FreeEnergyEstimate(
        total=-fi + fe_obs + fe_unobs,
        sum_fi=fi,
        sum_fe_observed=fe_obs,
        sum_fe_unobserved=fe_unobs,
    )


def exact_neg_log_evidence(h: Hypergraph, params: ModelParams,
                           max_states: int = 10**7, chunk: int = 1 << 17) -> float:
    """-log Z by summing exp(log-likelihood) over all K^N assignments.

    Tiny instances only; refuses when K^N exceeds ``max_states``.
    """
    K = params.num_communities
    N = h.num_nodes
    n_states = K**N
    if n_states > max_states:
        raise InputError(f"K^N = {n_states} exceeds the enumeration limit {max_states}")
    observed = {frozenset(e) for e in h.hyperedges}
    edges = [
        (np.array(e, dtype=np.int64), frozenset(e) in observed)
        for d in range(2, params.max_size + 1)
        for e in itertools.combinations(range(N), d)
    ]
    with np.errstate(divide="ignore"):
        log_prior = np.log(params.prior)
    radix = K ** np.arange(N, dtype=np.int64)

    chunk_logs = []
    for start in range(0, n_states, chunk):
        idx = np.arange(start, min(start + chunk, n_states), dtype=np.int64)
        labels = (idx[:, None] // radix[None, :]) % K
        L = log_prior[labels].sum(axis=1)
        for members, is_observed in edges:
            tl = labels[:, members]
            pi = np.zeros(idx.shape[0])
            for i, j in itertools.combinations(range(members.size), 2):
                pi += params.affinity[tl[:, i], tl[:, j]]
            prob = pi * math.exp(-params.kappa.log_kappa(members.size))
            with np.errstate(divide="ignore"):
                term = np.log(prob) if is_observed else np.log1p(-np.minimum(prob, 1.0))
            term = np.where((prob >= 1.0) & (~is_observed), -np.inf, term)
            L += term
        finite = L[np.isfinite(L)]
        if finite.size:
            top = finite.max()
            chunk_logs.append(top + math.log(np.exp(finite - top).sum()))
    if not chunk_logs:
        return float("inf")
    arr = np.array(chunk_logs)
    top = arr.max()
    return float(-(top + math.log(np.exp(arr - top).sum())))


def barycentric_grid(resolution: int) -> list[tuple[int, int, int]]:
    """Integer barycentric coordinates (i, j, k), i + j + k = resolution."""
    if resolution < 1:
        raise InputError("resolution must be >= 1")
    return [
        (i, j, resolution - i - j)
        for i in range(resolution + 1)
        for j in range(resolution - i + 1)
    ]


def simplex_sweep(h: Hypergraph, vertices, resolution: int = 15,
                  mp_config: MpConfig | None = None, seed: int = 0) -> list[dict]:
    """Free energy over convex combinations of three parameter vertices.

    For every barycentric grid point, the prior and affinity are the convex
    combinations of the vertices' values; messages are run to convergence at
    those fixed parameters and the free energy recorded.
    """
    vertices = list(vertices)
    if len(vertices) != 3:
        raise InputError("simplex sweep expects exactly 3 parameter vertices")
    K = vertices[0].num_communities
    N = vertices[0].num_nodes
    for v in vertices[1:]:
        if v.num_communities != K or v.num_nodes != N or v.max_size != vertices[0].max_size:
            raise InputError("simplex vertices must share K, N and max_size")
    mp_config = mp_config or MpConfig(dropout=0.25)
    rows = []
    for i, j, k in barycentric_grid(resolution):
        lam = np.array([i, j, k], dtype=float) / resolution
        prior = sum(l * v.prior for l, v in zip(lam, vertices))
        prior = prior / prior.sum()
        affinity = sum(l * v.affinity for l, v in zip(lam, vertices))
        params = ModelParams(prior, affinity, N, kappa=vertices[0].kappa)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i, j))))
        result = run_mp(h, params, mp_config, rng=rng)
        fe = free_energy(h, params, result.state)
        rows.append({
            "lambda1": lam[0], "lambda2": lam[1], "lambda3": lam[2],
            "free_energy": fe.total, "converged": result.converged, "sweeps": result.sweeps,
        })
    return rows
