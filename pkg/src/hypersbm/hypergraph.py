"""Hypergraph container and the plain-text hyperedge-list format.

A hypergraph is a set of nodes ``0..N-1`` plus a list of unique hyperedges,
each a sorted tuple of at least two node ids.  Instances are immutable after
construction, so read-only sharing across workers is safe.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from ._validation import readonly


class Hypergraph:
    """Nodes plus unique hyperedges with a node -> hyperedge incidence index.

    Parameters
    ----------
    num_nodes : int
        Number of nodes N; node ids are dense integers in [0, N).
    hyperedges : iterable of iterables of int
        Each hyperedge is a set of 2..max_size distinct node ids.  Stored
        sorted, in the given order.
    max_size : int, optional
        Declared cap D on hyperedge sizes.  Defaults to the largest observed
        size (or 2 for an empty hypergraph).  Must not exceed N.
    """

    def __init__(self, num_nodes: int, hyperedges: Iterable[Sequence[int]], max_size: int | None = None):
        if num_nodes < 1:
            raise InputError("num_nodes must be positive")
        self.num_nodes = int(num_nodes)

        edges = []
        seen = set()
        for e in hyperedges:
            tup = tuple(sorted(int(v) for v in e))
            if len(tup) < 2:
                raise InputError(f"hyperedge {tup} has fewer than 2 nodes")
            if len(set(tup)) != len(tup):
                raise InputError(f"hyperedge {tup} repeats a node")
            if tup[0] < 0 or tup[-1] >= self.num_nodes:
                raise InputError(f"hyperedge {tup} has node ids outside [0, {self.num_nodes})")
            if tup in seen:
                raise InputError(f"duplicate hyperedge {tup}")
            seen.add(tup)
            edges.append(tup)
        self.hyperedges: list[tuple[int, ...]] = edges

        observed = max((len(e) for e in edges), default=2)
        self.max_size = int(max_size) if max_size is not None else observed
        if self.max_size < observed:
            raise InputError(f"max_size {self.max_size} below largest hyperedge size {observed}")
        if self.max_size > self.num_nodes:
            raise InputError("max_size cannot exceed the number of nodes")

        self.sizes = readonly(np.array([len(e) for e in edges], dtype=np.int64))

        incidence: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for idx, e in enumerate(edges):
            for v in e:
                incidence[v].append(idx)
        self.incidence: list[np.ndarray] = [readonly(np.array(lst, dtype=np.int64)) for lst in incidence]

    @property
    def num_hyperedges(self) -> int:
        return len(self.hyperedges)

    def degrees(self) -> np.ndarray:
        """Number of hyperedges incident to each node."""
        return np.array([len(inc) for inc in self.incidence], dtype=np.int64)

    @cached_property
    def flat(self) -> "FlatIncidence":
        """Flat CSR view of the (node, hyperedge) incidence pairs."""
        return FlatIncidence.from_hypergraph(self)

    def __repr__(self) -> str:
        return (
            f"Hypergraph(num_nodes={self.num_nodes}, "
            f"num_hyperedges={self.num_hyperedges}, max_size={self.max_size})"
        )


@dataclass(frozen=True)
class FlatIncidence:
    """Incidence pairs of a hypergraph in flat arrays, in two sort orders.

    Pair p is the p-th (hyperedge, member) slot with hyperedges concatenated
    in order; ``by_node``/``node_ptr`` give the same pairs grouped by node.
    """

    pair_edge: np.ndarray  # (P,) hyperedge index of each pair
    pair_node: np.ndarray  # (P,) node id of each pair
    edge_ptr: np.ndarray   # (E+1,) CSR offsets over hyperedges
    by_node: np.ndarray    # (P,) permutation sorting pairs by node
    node_ptr: np.ndarray   # (N+1,) CSR offsets over nodes after permutation
    num_nodes: int = field(default=0)
    num_edges: int = field(default=0)

    @classmethod
    def from_hypergraph(cls, h: Hypergraph) -> "FlatIncidence":
        sizes = h.sizes
        num_pairs = int(sizes.sum())
        pair_edge = np.repeat(np.arange(h.num_hyperedges, dtype=np.int64), sizes)
        pair_node = np.fromiter(
            (v for e in h.hyperedges for v in e), dtype=np.int64, count=num_pairs
        )
        edge_ptr = np.concatenate(([0], np.cumsum(sizes)))
        by_node = np.argsort(pair_node, kind="stable")
        counts = np.bincount(pair_node, minlength=h.num_nodes)
        node_ptr = np.concatenate(([0], np.cumsum(counts)))
        return cls(
            pair_edge=readonly(pair_edge),
            pair_node=readonly(pair_node),
            edge_ptr=readonly(edge_ptr),
            by_node=readonly(by_node),
            node_ptr=readonly(node_ptr),
            num_nodes=h.num_nodes,
            num_edges=h.num_hyperedges,
        )

    @property
    def num_pairs(self) -> int:
        return self.pair_node.shape[0]


def parse_hypergraph_text(lines: Iterable[str], num_nodes: int | None = None):
    """Parse the hyperedge-list text format.

    One hyperedge per line, whitespace-separated node tokens; ``#`` starts a
    comment line.  Tokens are arbitrary strings, mapped to dense ids in
    first-appearance order.  Duplicate lines (as sets) are rejected with a
    line-numbered error.

    Returns
    -------
    (Hypergraph, list of str)
        The hypergraph and the node tokens in dense-id order.
    """
    labels: list[str] = []
    label_to_id: dict[str, int] = {}
    edges: list[tuple[int, ...]] = []
    seen: dict[frozenset, int] = {}

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        ids = []
        for tok in tokens:
            if tok not in label_to_id:
                label_to_id[tok] = len(labels)
                labels.append(tok)
            ids.append(label_to_id[tok])
        key = frozenset(ids)
        if len(key) != len(ids):
            raise InputError(f"line {lineno}: hyperedge repeats a node")
        if len(ids) < 2:
            raise InputError(f"line {lineno}: hyperedge has fewer than 2 nodes")
        if key in seen:
            raise InputError(f"line {lineno}: duplicate of hyperedge on line {seen[key]}")
        seen[key] = lineno
        edges.append(tuple(ids))

    n = len(labels) if num_nodes is None else int(num_nodes)
    if n < len(labels):
        raise InputError(f"num_nodes={n} but {len(labels)} distinct node tokens found")
    if n == 0:
        raise InputError("empty hypergraph file and no num_nodes given")
    labels = labels + [str(i) for i in range(len(labels), n)]
    return Hypergraph(n, edges), labels


def load_hypergraph(path, num_nodes: int | None = None):
    """Load a hypergraph from a text file; see :func:`parse_hypergraph_text`."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hypergraph_text(fh, num_nodes=num_nodes)


def write_hypergraph(h: Hypergraph, path, labels: Sequence[str] | None = None) -> None:
    """Write the hyperedge-list text format.

    Node ids are written as their token (``labels``) or as decimal ids.
    Note that re-parsing assigns dense ids in first-appearance order; use
    :func:`canonical_node_order` to relabel a hypergraph so that a write /
    load round trip is the identity.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for e in h.hyperedges:
            if labels is None:
                fh.write(" ".join(str(v) for v in e))
            else:
                fh.write(" ".join(labels[v] for v in e))
            fh.write("\n")


def canonical_node_order(h: Hypergraph) -> np.ndarray:
    """Permutation old-id -> new-id matching first appearance in the edge list.

    Nodes in no hyperedge are appended afterwards in id order, so the
    returned array is a full relabelling of [0, N).
    """
    order = np.full(h.num_nodes, -1, dtype=np.int64)
    nxt = 0
    for e in h.hyperedges:
        for v in e:
            if order[v] < 0:
                order[v] = nxt
                nxt += 1
    for v in range(h.num_nodes):
        if order[v] < 0:
            order[v] = nxt
            nxt += 1
    return order


def relabel(h: Hypergraph, order: np.ndarray) -> Hypergraph:
    """Apply a node relabelling (old id -> new id) to a hypergraph."""
    edges = [tuple(int(order[v]) for v in e) for e in h.hyperedges]
    return Hypergraph(h.num_nodes, edges, max_size=h.max_size)


def truncate(h: Hypergraph, max_size: int) -> Hypergraph:
    """Drop every hyperedge larger than max_size (node set unchanged)."""
    if max_size < 2:
        raise InputError("max_size must be at least 2")
    edges = [e for e in h.hyperedges if len(e) <= max_size]
    return Hypergraph(h.num_nodes, edges, max_size=min(max_size, h.num_nodes))
