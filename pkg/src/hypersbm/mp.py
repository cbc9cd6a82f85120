"""Sparse message passing for community inference on hypergraphs.

Messages live on the (node, observed hyperedge) incidence pairs.  The
fixed-point updates are

    q_{i->e}(a)  prop.  n_a * prod_{f in E, f ni i, f != e} qhat_{f->i}(a) * exp(-h(a))
    qhat_{e->i}(a)  prop.  sum over labels of e \\ i of pi_e * prod q_{j->e}
    q_i(a)       prop.  n_a * prod_{f in E, f ni i} qhat_{f->i}(a) * exp(-h(a))
    h(a)         =      (C'/N) * sum_j sum_b c_ab q_j(b)

where the external field h absorbs the aggregate effect of all unobserved
hyperedges.  The qhat update marginalizes pi_e over the product measure of
the incoming messages; because pi_e is a sum of pairwise affinities, the
marginal reduces to running pair sums that cost O(K^2 |e|) for all members
and labels of one hyperedge.

Products in the q and marginal updates are accumulated in log space with a
single max-subtraction before exponentiation; high-degree nodes multiply
hundreds of factors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalAbort
from .hypergraph import Hypergraph
from .model import ModelParams
from ._validation import as_generator

logger = logging.getLogger(__name__)

# messages with every component below this floor are reset to uniform
UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True)
class MpConfig:
    """Update protocol: dropout fraction, damping, threshold, patience.

    Per sweep, a random ``dropout`` fraction of incidence pairs is redrawn
    independently for each of the three message updates; fully parallel
    updates (dropout=1 everywhere, no staggering) tend to collapse onto
    degenerate fixed points where communities share a label.  Updated rows
    move only a ``damping`` fraction of the way toward their new value,
    which slows crystallization enough for the anti-crowding field to keep
    communities on distinct labels.  Fixed points are unaffected by either.
    """

    dropout: float = 0.25
    damping: float = 0.3
    tol: float = 1e-6
    max_iter: int = 2000
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dropout <= 1.0:
            raise InputError("dropout must lie in (0, 1]")
        if not 0.0 < self.damping <= 1.0:
            raise InputError("damping must lie in (0, 1]")
        if self.tol <= 0 or self.max_iter <= 0 or self.patience <= 0:
            raise InputError("tol, max_iter and patience must be positive")


@dataclass
class MessageState:
    """Messages on incidence pairs plus per-node marginals and the field.

    node_to_hye and hye_to_node are (P, K) arrays aligned with
    ``Hypergraph.flat`` pair order; marginals is (N, K); external_field (K,).
    Rows are probability vectors.
    """

    node_to_hye: np.ndarray
    hye_to_node: np.ndarray
    marginals: np.ndarray
    external_field: np.ndarray

    def copy(self) -> "MessageState":
        return MessageState(
            self.node_to_hye.copy(),
            self.hye_to_node.copy(),
            self.marginals.copy(),
            self.external_field.copy(),
        )

    def max_row_error(self) -> float:
        """Largest deviation of any message/marginal row sum from 1."""
        errs = [
            np.abs(self.node_to_hye.sum(axis=1) - 1.0).max(initial=0.0),
            np.abs(self.hye_to_node.sum(axis=1) - 1.0).max(initial=0.0),
            np.abs(self.marginals.sum(axis=1) - 1.0).max(initial=0.0),
        ]
        return float(max(errs))


@dataclass
class MpResult:
    state: MessageState
    converged: bool
    sweeps: int
    final_delta: float = float("nan")
    delta_trace: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.state, self.converged, self.sweeps))


def init_messages(h: Hypergraph, params: ModelParams, rng) -> MessageState:
    """Random initialization honoring the circular dependencies.

    node-to-hyperedge messages and marginals are symmetric Dirichlet draws;
    hyperedge-to-node messages are set proportional to marginal / message and
    the field is computed from the marginals.
    """
    rng = as_generator(rng)
    flat = h.flat
    K = params.num_communities
    alpha = np.ones(K)
    node_to_hye = rng.dirichlet(alpha, size=flat.num_pairs) if flat.num_pairs else np.zeros((0, K))
    marginals = rng.dirichlet(alpha, size=h.num_nodes)
    hye_to_node = marginals[flat.pair_node] / np.maximum(node_to_hye, UNDERFLOW_FLOOR)
    if flat.num_pairs:
        hye_to_node /= hye_to_node.sum(axis=1, keepdims=True)
    state = MessageState(node_to_hye, hye_to_node, marginals, np.zeros(K))
    state.external_field = update_external_field(state, params)
    return state


def update_external_field(state: MessageState, params: ModelParams) -> np.ndarray:
    """h(a) = (C'/N) sum_b c_ab * (community-sum of marginals)_b."""
    totals = state.marginals.sum(axis=0)
    return (params.kappa.C_prime / params.num_nodes) * (params.rescaled @ totals)


def dp_hye_to_node(messages: np.ndarray, affinity: np.ndarray) -> np.ndarray:
    """Unnormalized hyperedge-to-member factors for one hyperedge.

    ``messages`` holds the incoming probability rows q_{j->e}, one per
    member.  Returns psi with psi[i, a] = sum over labels of the other
    members of pi_e * prod_j q_{j->e}(t_j), for every member i and label a.

    Marginalizing the pairwise sum pi_e against the product measure leaves
    only running pair sums, so all (i, a) values of one hyperedge cost
    O(K^2 |e|).
    """
    q = np.asarray(messages, dtype=float)
    if q.ndim != 2 or q.shape[0] < 2:
        raise InputError("need a (m, K) array with m >= 2 incoming messages")
    q = q / q.sum(axis=1, keepdims=True)
    p = np.asarray(affinity, dtype=float)
    w = q @ p                              # w[j, a] = sum_b q_j(b) p_{b a}
    W = w.sum(axis=0)                      # all-member pair sums
    dots = np.einsum("jk,jk->j", q, w)     # q_j . p q_j
    B = 0.5 * (q.sum(axis=0) @ W - dots.sum())
    base = B - q @ W + dots                # pair sums avoiding member i
    return base[:, None] + (W[None, :] - w)


def _edge_factors(state: MessageState, h: Hypergraph, params: ModelParams) -> np.ndarray:
    """Batched dp_hye_to_node over every incidence pair; rows unnormalized."""
    flat = h.flat
    q = state.node_to_hye
    p = params.affinity
    w = q @ p
    Q = np.zeros((flat.num_edges, q.shape[1]))
    for a in range(q.shape[1]):
        Q[:, a] = np.bincount(flat.pair_edge, weights=q[:, a], minlength=flat.num_edges)
    W = Q @ p
    dots = np.einsum("pk,pk->p", q, w)
    dot_sums = np.bincount(flat.pair_edge, weights=dots, minlength=flat.num_edges)
    B = 0.5 * (np.einsum("ek,ek->e", Q, W) - dot_sums)
    base = B[flat.pair_edge] - np.einsum("pk,pk->p", q, W[flat.pair_edge]) + dots
    return base[:, None] + (W[flat.pair_edge] - w)


def _normalize_rows(values: np.ndarray, what: str) -> np.ndarray:
    """Normalize nonnegative rows to the simplex; zero rows become uniform."""
    sums = values.sum(axis=1, keepdims=True)
    dead = sums[:, 0] <= 0.0
    if np.any(dead):
        logger.warning("%d degenerate %s rows reset to uniform", int(dead.sum()), what)
        values[dead] = 1.0
        sums = values.sum(axis=1, keepdims=True)
    return values / sums


def _normalize_log_rows(log_values: np.ndarray, what: str) -> np.ndarray:
    top = log_values.max(axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    if np.any(dead):
        logger.warning("%d degenerate %s rows reset to uniform", int(dead.sum()), what)
        log_values[dead] = 0.0
        top = log_values.max(axis=1, keepdims=True)
    out = np.exp(log_values - top)
    return out / out.sum(axis=1, keepdims=True)


def _node_log_products(log_hye_to_node: np.ndarray, h: Hypergraph) -> np.ndarray:
    """Per-node sum of incoming log hyperedge-to-node messages."""
    flat = h.flat
    K = log_hye_to_node.shape[1]
    S = np.zeros((h.num_nodes, K))
    for a in range(K):
        S[:, a] = np.bincount(flat.pair_node, weights=log_hye_to_node[:, a], minlength=h.num_nodes)
    return S


def update_hye_to_node(state: MessageState, h: Hypergraph, params: ModelParams, edge: int, member: int) -> np.ndarray:
    """Normalized qhat_{e->i} for one incidence pair."""
    members = h.hyperedges[edge]
    if member not in members:
        raise InputError(f"node {member} not in hyperedge {edge}")
    flat = h.flat
    rows = state.node_to_hye[flat.edge_ptr[edge]:flat.edge_ptr[edge + 1]]
    psi = dp_hye_to_node(rows, params.affinity)
    slot = members.index(member)
    return _normalize_rows(psi[[slot]].copy(), "hye_to_node")[0]


def update_node_to_hye(state: MessageState, h: Hypergraph, params: ModelParams, member: int, edge: int) -> np.ndarray:
    """Normalized q_{i->e} for one incidence pair, in log space."""
    log_qhat = np.log(np.maximum(state.hye_to_node, UNDERFLOW_FLOOR))
    S = _node_log_products(log_qhat, h)
    flat = h.flat
    members = h.hyperedges[edge]
    pair = flat.edge_ptr[edge] + members.index(member)
    with np.errstate(divide="ignore"):
        L = np.log(params.prior) + S[member] - log_qhat[pair] - state.external_field
    return _normalize_log_rows(L[None, :], "node_to_hye")[0]


def update_marginal(state: MessageState, h: Hypergraph, params: ModelParams, node: int) -> np.ndarray:
    """Normalized marginal q_i for one node."""
    log_qhat = np.log(np.maximum(state.hye_to_node, UNDERFLOW_FLOOR))
    S = _node_log_products(log_qhat, h)
    with np.errstate(divide="ignore"):
        L = np.log(params.prior) + S[node] - state.external_field
    return _normalize_log_rows(L[None, :], "marginal")[0]


def _select(rng, num: int, fraction: float) -> np.ndarray:
    if num == 0:
        return np.zeros(0, dtype=np.int64)
    if fraction >= 1.0:
        return np.arange(num, dtype=np.int64)
    sel = np.flatnonzero(rng.random(num) < fraction)
    if sel.size == 0:
        sel = rng.integers(num, size=1)
    return sel


def _first_bad_edge(values: np.ndarray, pair_edge: np.ndarray):
    bad = ~np.isfinite(values).all(axis=1)
    idx = np.flatnonzero(bad)
    return int(pair_edge[idx[0]]) if idx.size else None


def run_mp(h: Hypergraph, params: ModelParams, config: MpConfig | None = None,
           rng=None, init_state: MessageState | None = None) -> MpResult:
    """Iterate batched message sweeps until the marginals settle.

    Per sweep: redraw a dropout batch and update node-to-hyperedge messages;
    redraw and update hyperedge-to-node messages; redraw and update the
    marginals of the touched nodes; then refresh the external field.  The
    sweep change is Delta = sum_i sum_a |q_i_old(a) - q_i(a)|, and the run
    stops once Delta < tol for ``patience`` consecutive sweeps.

    Raises NumericalAbort if any message turns NaN/Inf, naming the sweep and
    a hyperedge involved.
    """
    config = config or MpConfig()
    rng = as_generator(rng if rng is not None else config.seed)
    if params.num_nodes != h.num_nodes:
        raise InputError("params built for a different number of nodes")
    if h.max_size > params.max_size:
        raise InputError("hypergraph contains hyperedges larger than params.max_size")

    state = init_state.copy() if init_state is not None else init_messages(h, params, rng)
    flat = h.flat
    P = flat.num_pairs
    with np.errstate(divide="ignore"):
        log_prior = np.log(params.prior)
    log_qhat = np.log(np.maximum(state.hye_to_node, UNDERFLOW_FLOOR))

    converged = False
    quiet = 0
    delta = float("nan")
    trace: list[float] = []
    sweeps = 0
    blend = config.damping
    for sweep in range(1, config.max_iter + 1):
        sweeps = sweep
        # node -> hyperedge messages
        sel = _select(rng, P, config.dropout)
        if sel.size:
            S = _node_log_products(log_qhat, h)
            L = log_prior[None, :] + S[flat.pair_node[sel]] - log_qhat[sel] - state.external_field[None, :]
            upd = _normalize_log_rows(L, "node_to_hye")
            state.node_to_hye[sel] = (1.0 - blend) * state.node_to_hye[sel] + blend * upd

        # hyperedge -> node messages
        sel = _select(rng, P, config.dropout)
        if sel.size:
            psi = _edge_factors(state, h, params)
            upd = _normalize_rows(psi[sel], "hye_to_node")
            state.hye_to_node[sel] = (1.0 - blend) * state.hye_to_node[sel] + blend * upd
            log_qhat[sel] = np.log(np.maximum(state.hye_to_node[sel], UNDERFLOW_FLOOR))

        # marginals of nodes drawn through a fresh pair batch
        sel = _select(rng, P, config.dropout)
        nodes = np.unique(flat.pair_node[sel]) if sel.size else np.zeros(0, dtype=np.int64)
        if nodes.size:
            S = _node_log_products(log_qhat, h)
            L = log_prior[None, :] + S[nodes] - state.external_field[None, :]
            upd = _normalize_log_rows(L, "marginal")
            old = state.marginals[nodes].copy()
            state.marginals[nodes] = (1.0 - blend) * old + blend * upd
            delta = float(np.abs(old - state.marginals[nodes]).sum())
        else:
            delta = 0.0
        trace.append(delta)

        state.external_field = update_external_field(state, params)

        if not (np.isfinite(delta) and np.isfinite(state.external_field).all()):
            edge = _first_bad_edge(state.hye_to_node, flat.pair_edge)
            where = f"hyperedge {edge}" if edge is not None else "external field"
            raise NumericalAbort(f"non-finite values at sweep {sweep} ({where})")

        quiet = quiet + 1 if delta < config.tol else 0
        if quiet >= config.patience:
            converged = True
            break

    if not np.isfinite(state.marginals).all() or not np.isfinite(state.node_to_hye).all():
        edge = _first_bad_edge(state.node_to_hye, flat.pair_edge)
        raise NumericalAbort(f"non-finite messages after sweep {sweeps} (hyperedge {edge})")

    return MpResult(state, converged, sweeps, delta, trace)


def hard_assignment(marginals: np.ndarray) -> np.ndarray:
    """Per-node argmax labels; ties resolve to the lowest index."""
    return np.argmax(marginals, axis=1)
