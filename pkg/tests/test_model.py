import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersbm import (
    Hypergraph,
    InputError,
    KappaSchedule,
    ModelParams,
    expected_degree,
    hyperedge_pi,
    hyperedge_probability,
    log_likelihood_exact,
)
from conftest import brute_force_pi


class TestKappaSchedule:
    def test_default_kappa2_is_one(self):
        k = KappaSchedule.default(100, 4)
        assert k.kappa(2) == pytest.approx(1.0)
        assert k.kappa(3) == pytest.approx(3 * 98)

    def test_default_C_is_twice_harmonic(self):
        for N, D in [(50, 5), (10_000, 50), (300, 2)]:
            k = KappaSchedule.default(N, D)
            harmonic = sum(1.0 / d for d in range(1, D))
            assert k.C == pytest.approx(2 * harmonic, rel=1e-12)

    def test_validity_floor_enforced(self):
        KappaSchedule.from_values(10, [1.0, 3.0])
        with pytest.raises(InputError):
            KappaSchedule.from_values(10, [0.5])
        with pytest.raises(InputError):
            KappaSchedule.from_values(10, [1.0, 2.0])  # kappa_3 < 3

    def test_constants_match_direct_summation(self):
        # streaming (numpy) constants vs an independent fsum accumulation
        N, D = 5000, 20
        k = KappaSchedule.default(N, D)
        ratios = [math.comb(N - 2, d - 2) / (math.comb(N - 2, d - 2) * d * (d - 1) / 2)
                  for d in range(2, D + 1)]
        C = math.fsum(d * r for d, r in zip(range(2, D + 1), ratios))
        C_prime = math.fsum(ratios)
        C_triple = math.fsum((1 - d) * r for d, r in zip(range(2, D + 1), ratios))
        assert k.C == pytest.approx(C, rel=1e-12)
        assert k.C_prime == pytest.approx(C_prime, rel=1e-12)
        assert k.C_triple == pytest.approx(C_triple, rel=1e-12)

    def test_log_kappa_range_check(self):
        k = KappaSchedule.default(20, 3)
        with pytest.raises(InputError):
            k.log_kappa(4)
        with pytest.raises(InputError):
            k.log_kappa(1)


class TestModelParams:
    def test_validation(self):
        with pytest.raises(InputError):
            ModelParams([0.6, 0.6], np.eye(2) * 0.1, 10, max_size=2)
        with pytest.raises(InputError):
            ModelParams([0.5, 0.5], [[0.1, 0.2], [0.3, 0.1]], 10, max_size=2)
        with pytest.raises(InputError):
            ModelParams([0.5, 0.5], np.eye(2) * 1.5, 10, max_size=2)

    def test_rescaled_matches_affinity(self):
        params = ModelParams([0.5, 0.5], np.full((2, 2), 0.01), 50, max_size=3)
        np.testing.assert_allclose(params.rescaled, 50 * params.affinity)

    def test_assortative_constraint(self):
        params = ModelParams.assortative(1000, 4, 10.0, 2.0, max_size=2)
        rows = params.rescaled @ params.prior
        np.testing.assert_allclose(rows, 10.0)
        with pytest.raises(InputError):
            ModelParams.assortative(1000, 4, 1.0, 10.0, max_size=2)

    def test_json_round_trip(self, tmp_path):
        params = ModelParams.assortative(200, 3, 5.0, 1.0, max_size=4)
        path = tmp_path / "params.json"
        params.save(path)
        back = ModelParams.load(path, 200)
        np.testing.assert_allclose(back.prior, params.prior)
        np.testing.assert_allclose(back.affinity, params.affinity)
        assert back.kappa.is_default
        # explicit kappa array survives the round trip
        custom = ModelParams(params.prior, params.affinity, 200,
                             kappa=KappaSchedule.from_values(200, [2.0, 10.0, 40.0]))
        custom.save(path)
        back = ModelParams.load(path, 200)
        assert not back.kappa.is_default
        assert back.kappa.kappa(3) == pytest.approx(10.0)

    def test_arrays_frozen(self):
        params = ModelParams.assortative(100, 2, 3.0, 1.0, max_size=2)
        with pytest.raises(ValueError):
            params.prior[0] = 0.9


class TestHyperedgePi:
    def test_single_pair(self):
        p = np.array([[0.1, 0.2], [0.2, 0.4]])
        assert hyperedge_pi([0, 1], [0, 0], p) == pytest.approx(0.1)

    def test_three_node_example(self):
        # enumerate the 3 pairs: p_aa + 2 p_ab
        p = np.array([[0.1, 0.2], [0.2, 0.4]])
        t = np.array([0, 0, 1])
        expected = brute_force_pi((0, 1, 2), t, p)
        assert expected == pytest.approx(0.1 + 2 * 0.2)
        assert hyperedge_pi([0, 1, 2], t, p) == pytest.approx(expected)

    def test_zero_matrix(self):
        assert hyperedge_pi([0, 1, 2], [0, 1, 0], np.zeros((2, 2))) == 0.0

    def test_out_of_range_node(self):
        with pytest.raises(InputError):
            hyperedge_pi([0, 5], [0, 1], np.eye(2) * 0.1)

    @given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_matches_brute_force(self, size, K, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0, 1, (K, K))
        p = 0.5 * (p + p.T)
        t = rng.integers(0, K, size=8)
        edge = rng.choice(8, size=size, replace=False)
        assert hyperedge_pi(edge, t, p) == pytest.approx(brute_force_pi(edge, t, p), rel=1e-12)


class TestHyperedgeProbability:
    def test_pair_equals_pi_under_default_kappa(self):
        params = ModelParams([1.0], np.array([[0.3]]), 10, max_size=3)
        t = np.zeros(10, dtype=int)
        assert hyperedge_probability([0, 1], t, params) == pytest.approx(0.3)

    def test_size_three_example(self):
        # N = 5: kappa_3 = binom(3,1) * 3 = 9, pi = 0.5 -> 0.5 / 9
        n = np.array([0.5, 0.5])
        p = np.array([[0.1, 0.2], [0.2, 0.1]])
        params = ModelParams(n, p, 5, max_size=3)
        t = np.array([0, 0, 1, 0, 0])
        pi = hyperedge_pi([0, 1, 2], t, p)
        assert pi == pytest.approx(0.5)
        assert hyperedge_probability([0, 1, 2], t, params) == pytest.approx(0.5 / 9)

    def test_saturated_affinity_stays_valid(self):
        for N, D in [(6, 4), (12, 6)]:
            params = ModelParams([1.0], np.array([[1.0]]), N, max_size=D)
            t = np.zeros(N, dtype=int)
            for d in range(2, D + 1):
                prob = hyperedge_probability(list(range(d)), t, params)
                assert 0.0 <= prob <= 1.0 + 1e-12

    def test_oversized_edge_rejected(self):
        params = ModelParams([1.0], np.array([[0.5]]), 10, max_size=3)
        with pytest.raises(InputError):
            hyperedge_probability([0, 1, 2, 3], np.zeros(10, dtype=int), params)

    def test_probability_valid_over_all_label_patterns(self):
        # exhaustive over label multisets for d <= 5, K <= 4
        rng = np.random.default_rng(5)
        for K in (2, 4):
            p = rng.uniform(0, 1, (K, K))
            p = 0.5 * (p + p.T)
            params = ModelParams(np.full(K, 1 / K), p, 30, max_size=5)
            for d in range(2, 6):
                for labels in itertools.combinations_with_replacement(range(K), d):
                    t = np.array(labels + (0,) * (30 - d))
                    prob = hyperedge_probability(list(range(d)), t, params)
                    assert 0.0 <= prob <= 1.0


class TestLogLikelihoodExact:
    def test_two_node_single_edge(self):
        q = 0.37
        params = ModelParams([1.0], np.array([[q]]), 2, max_size=2)
        h = Hypergraph(2, [(0, 1)])
        value = log_likelihood_exact(h, [0, 0], params)
        assert value == pytest.approx(math.log(q))

    def test_empty_graph_zero_affinity(self):
        n = np.array([0.25, 0.75])
        params = ModelParams(n, np.zeros((2, 2)), 4, max_size=2)
        h = Hypergraph(4, [])
        t = np.array([0, 1, 1, 0])
        assert log_likelihood_exact(h, t, params) == pytest.approx(float(np.log(n)[t].sum()))

    def test_matches_independent_enumeration(self, rng):
        N, D, K = 4, 3, 2
        p = rng.uniform(0.01, 0.2, (K, K))
        p = 0.5 * (p + p.T)
        n = np.array([0.4, 0.6])
        params = ModelParams(n, p, N, max_size=D)
        h = Hypergraph(N, [(0, 1), (0, 2, 3), (1, 3)])
        t = rng.integers(0, K, size=N)
        observed = {frozenset(e) for e in h.hyperedges}
        total = float(np.log(n)[t].sum())
        for d in range(2, D + 1):
            for e in itertools.combinations(range(N), d):
                prob = brute_force_pi(e, t, p) / params.kappa.kappa(d)
                if frozenset(e) in observed:
                    total += math.log(prob)
                else:
                    total += math.log1p(-prob)
        assert log_likelihood_exact(h, t, params) == pytest.approx(total, rel=1e-12)

    def test_matches_dyadic_sbm(self, rng):
        # pairwise-only data with kappa_2 = 1 is the classical Bernoulli SBM
        N, K = 6, 2
        p = rng.uniform(0.05, 0.5, (K, K))
        p = 0.5 * (p + p.T)
        n = np.array([0.5, 0.5])
        params = ModelParams(n, p, N, max_size=2)
        edges = [(0, 1), (2, 3), (1, 4)]
        h = Hypergraph(N, edges)
        t = rng.integers(0, K, size=N)
        present = {frozenset(e) for e in edges}
        reference = float(np.log(n)[t].sum())
        for i in range(N):
            for j in range(i + 1, N):
                pij = p[t[i], t[j]]
                reference += math.log(pij) if frozenset((i, j)) in present else math.log1p(-pij)
        assert log_likelihood_exact(h, t, params) == pytest.approx(reference, rel=1e-12)

    def test_zero_probability_observed_edge(self):
        params = ModelParams([1.0], np.array([[0.0]]), 3, max_size=2)
        h = Hypergraph(3, [(0, 1)])
        assert log_likelihood_exact(h, [0, 0, 0], params) == -math.inf

    def test_enumeration_cap(self):
        params = ModelParams([1.0], np.array([[0.1]]), 40, max_size=10)
        h = Hypergraph(40, [])
        with pytest.raises(InputError):
            log_likelihood_exact(h, np.zeros(40, dtype=int), params, max_terms=1000)


class TestExpectedDegree:
    def test_uniform_case(self):
        params = ModelParams.assortative(500, 4, 7.0, 7.0, max_size=6)
        assert expected_degree(params) == pytest.approx(params.kappa.C * 7.0 / 2)

    def test_pairwise_reduces_to_quadratic_form(self, rng):
        c = rng.uniform(0, 5, (3, 3))
        c = 0.5 * (c + c.T)
        n = np.array([0.2, 0.3, 0.5])
        params = ModelParams.from_rescaled(n, c, 400, max_size=2)
        assert expected_degree(params) == pytest.approx(float(n @ c @ n))

    def test_large_size_harmonic_value(self):
        # K = 4, c = 10, D = 50: C = 2 H_49, so d0 = 10 H_49
        params = ModelParams.assortative(10_000, 4, 10.0, 10.0, max_size=50)
        harmonic49 = sum(1.0 / d for d in range(1, 50))
        assert expected_degree(params) == pytest.approx(10.0 * harmonic49, rel=1e-10)
