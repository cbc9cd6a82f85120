import io

import numpy as np
import pytest

from hypersbm import (
    Hypergraph,
    InputError,
    canonical_node_order,
    parse_hypergraph_text,
    relabel,
    truncate,
    write_hypergraph,
)


def test_basic_construction():
    h = Hypergraph(5, [(0, 1), (1, 2, 3)])
    assert h.num_hyperedges == 2
    assert h.max_size == 3
    assert h.hyperedges[1] == (1, 2, 3)
    assert list(h.incidence[1]) == [0, 1]
    assert list(h.incidence[4]) == []


def test_edges_sorted_and_validated():
    h = Hypergraph(4, [(2, 0)])
    assert h.hyperedges[0] == (0, 2)
    with pytest.raises(InputError):
        Hypergraph(4, [(1,)])
    with pytest.raises(InputError):
        Hypergraph(4, [(0, 0, 1)])
    with pytest.raises(InputError):
        Hypergraph(4, [(0, 4)])
    with pytest.raises(InputError):
        Hypergraph(4, [(0, 1), (1, 0)])
    with pytest.raises(InputError):
        Hypergraph(4, [(0, 1, 2)], max_size=2)
    with pytest.raises(InputError):
        Hypergraph(2, [(0, 1)], max_size=3)


def test_incidence_consistency():
    rng = np.random.default_rng(0)
    edges = set()
    while len(edges) < 15:
        d = int(rng.integers(2, 5))
        edges.add(tuple(sorted(rng.choice(20, size=d, replace=False).tolist())))
    h = Hypergraph(20, sorted(edges))
    for node in range(20):
        for e_idx in h.incidence[node]:
            assert node in h.hyperedges[e_idx]
    for e_idx, e in enumerate(h.hyperedges):
        for node in e:
            assert e_idx in h.incidence[node]


def test_flat_view_round_trip():
    h = Hypergraph(6, [(0, 1, 2), (2, 3), (1, 4, 5)])
    flat = h.flat
    assert flat.num_pairs == 8
    for p in range(flat.num_pairs):
        e = flat.pair_edge[p]
        assert int(flat.pair_node[p]) in h.hyperedges[e]
    # node grouping covers every pair exactly once
    assert sorted(flat.by_node.tolist()) == list(range(flat.num_pairs))
    for node in range(6):
        seg = flat.by_node[flat.node_ptr[node]:flat.node_ptr[node + 1]]
        assert sorted(flat.pair_edge[seg].tolist()) == sorted(h.incidence[node].tolist())


def test_parser_maps_tokens_in_first_appearance_order():
    text = "# a comment\nalice bob\n\nbob carol dave\n"
    h, labels = parse_hypergraph_text(io.StringIO(text))
    assert labels == ["alice", "bob", "carol", "dave"]
    assert h.hyperedges == [(0, 1), (1, 2, 3)]


def test_parser_rejects_duplicates_with_line_numbers():
    with pytest.raises(InputError, match="line 3"):
        parse_hypergraph_text(io.StringIO("a b\n# x\nb a\n"))
    with pytest.raises(InputError, match="line 1"):
        parse_hypergraph_text(io.StringIO("a a\n"))


def test_write_load_round_trip(tmp_path):
    h = Hypergraph(7, [(0, 1, 2), (3, 4), (0, 5), (2, 6)])
    order = canonical_node_order(h)
    h2 = relabel(h, order)
    path = tmp_path / "graph.hyg"
    write_hypergraph(h2, path)
    reread, labels = parse_hypergraph_text(open(path))
    assert reread.hyperedges == h2.hyperedges
    assert labels == [str(i) for i in range(7)]


def test_canonical_order_appends_isolated_nodes():
    h = Hypergraph(5, [(3, 4)])
    order = canonical_node_order(h)
    assert order[3] == 0 and order[4] == 1
    assert sorted(order.tolist()) == list(range(5))


def test_truncate_drops_large_edges():
    h = Hypergraph(6, [(0, 1), (1, 2, 3), (2, 3, 4, 5)])
    t = truncate(h, 3)
    assert [len(e) for e in t.hyperedges] == [2, 3]
    assert t.num_nodes == 6
    with pytest.raises(InputError):
        truncate(h, 1)
