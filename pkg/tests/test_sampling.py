import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersbm import (
    InputError,
    ModelParams,
    SamplerConfig,
    count_multiplicity,
    expected_degree,
    expected_num_hyperedges,
    hyperedge_pi,
    pi_from_counts,
    sample_assignments,
    sample_hypergraph,
    sample_num_hyperedges,
)
from hypersbm.sampling import _count_vectors, _decode_triangular, _distinct_rows


class TestPiFromCounts:
    def test_two_community_example(self):
        p = np.array([[0.1, 0.2], [0.2, 0.3]])
        # counts (2, 1): one aa pair, two ab pairs, no bb pair
        assert pi_from_counts([2, 1], p) == pytest.approx(0.1 + 2 * 0.2)

    def test_single_community(self):
        p = np.array([[0.4]])
        for d in range(2, 7):
            assert pi_from_counts([d], p) == pytest.approx(d * (d - 1) / 2 * 0.4)

    @given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_agrees_with_pair_enumeration(self, size, K, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0, 1, (K, K))
        p = 0.5 * (p + p.T)
        labels = rng.integers(0, K, size=size)
        counts = np.bincount(labels, minlength=K)
        edge = np.arange(size)
        assert pi_from_counts(counts, p) == pytest.approx(
            hyperedge_pi(edge, labels, p), rel=1e-12
        )


class TestCountMultiplicity:
    def test_example(self):
        assert count_multiplicity([2, 1], [3, 2]) == 6

    def test_all_nodes_used(self):
        assert count_multiplicity([3, 2], [3, 2]) == 1

    def test_impossible(self):
        assert count_multiplicity([4, 0], [3, 5]) == 0

    def test_matches_comb_products(self):
        assert count_multiplicity([2, 3, 1], [10, 7, 4]) == (
            math.comb(10, 2) * math.comb(7, 3) * math.comb(4, 1)
        )


class TestSampleNumHyperedges:
    def test_degenerate_probabilities(self, rng):
        config = SamplerConfig()
        assert sample_num_hyperedges(100, 0.0, rng, config) == 0
        assert sample_num_hyperedges(100, 1.0, rng, config) == 100

    def test_invalid_probability(self, rng):
        with pytest.raises(InputError):
            sample_num_hyperedges(10, 1.5, rng, SamplerConfig())

    def test_poisson_regime_moments(self):
        # mean 10 with huge trial count: empirical mean within 5 sigma
        rng = np.random.default_rng(42)
        config = SamplerConfig()
        draws = [sample_num_hyperedges(10**8, 1e-7, rng, config) for _ in range(10_000)]
        mean = np.mean(draws)
        assert abs(mean - 10.0) < 5 * math.sqrt(10.0 / 10_000)

    def test_gaussian_regime_moments(self):
        rng = np.random.default_rng(7)
        config = SamplerConfig()
        n, prob = 10**7, 1e-3  # mean 10^4, sd ~100
        draws = [sample_num_hyperedges(n, prob, rng, config) for _ in range(2_000)]
        assert abs(np.mean(draws) - n * prob) < 5 * math.sqrt(n * prob / 2_000)

    def test_exact_mode_requires_int64(self, rng):
        config = SamplerConfig(binomial_mode="exact")
        with pytest.raises(InputError):
            sample_num_hyperedges(2**70, 1e-12, rng, config)


class TestSampleAssignments:
    def test_degenerate_prior(self, rng):
        params = ModelParams([1.0, 0.0], np.full((2, 2), 0.01), 5, max_size=2)
        t = sample_assignments(params, rng)
        assert np.all(t == 0)

    def test_binomial_concentration(self):
        params = ModelParams([0.5, 0.5], np.full((2, 2), 0.001), 10_000, max_size=2)
        t = sample_assignments(params, np.random.default_rng(0))
        count = int(np.sum(t == 0))
        sigma = math.sqrt(10_000 * 0.25)
        assert abs(count - 5000) < 4 * sigma

    def test_single_community(self, rng):
        params = ModelParams([1.0], np.array([[0.01]]), 50, max_size=2)
        assert np.all(sample_assignments(params, rng) == 0)


class TestExpectedNumHyperedges:
    def test_uniform_value(self):
        params = ModelParams.assortative(10_000, 4, 10.0, 10.0, max_size=10)
        for d in range(2, 11):
            assert expected_num_hyperedges(d, params) == pytest.approx(
                10_000 * 10.0 / (d * (d - 1)), rel=1e-3
            )

    def test_pairwise_count(self):
        params = ModelParams.assortative(10_000, 2, 10.0, 10.0, max_size=2)
        assert expected_num_hyperedges(2, params) == pytest.approx(50_000, rel=1e-3)

    def test_zero_affinity(self):
        params = ModelParams([0.5, 0.5], np.zeros((2, 2)), 100, max_size=3)
        assert expected_num_hyperedges(3, params) == 0.0

    def test_size_range_guard(self):
        params = ModelParams.assortative(100, 2, 3.0, 1.0, max_size=3)
        with pytest.raises(InputError):
            expected_num_hyperedges(4, params)


class TestCountVectors:
    def test_lexicographic_enumeration(self):
        got = list(_count_vectors(3, 2))
        assert got == [(0, 3), (1, 2), (2, 1), (3, 0)]
        assert len(list(_count_vectors(4, 3))) == math.comb(4 + 2, 2)


class TestInternals:
    def test_triangular_decode_exhaustive(self):
        for n in (2, 3, 7, 30):
            flat = np.arange(n * (n - 1) // 2)
            i, j = _decode_triangular(flat, n)
            pairs = list(zip(i.tolist(), j.tolist()))
            expected = [(a, b) for a in range(n) for b in range(a + 1, n)]
            assert pairs == expected

    def test_distinct_rows(self, rng):
        rows = _distinct_rows(rng, 10, 500, 4)
        assert rows.shape == (500, 4)
        for r in rows:
            assert len(set(r.tolist())) == 4


class TestSampleHypergraph:
    def test_zero_affinity_empty(self):
        params = ModelParams([0.5, 0.5], np.zeros((2, 2)), 50, max_size=4)
        h, t = sample_hypergraph(params, seed=3)
        assert h.num_hyperedges == 0

    def test_determinism(self):
        params = ModelParams.assortative(300, 3, 6.0, 2.0, max_size=4)
        h1, t1 = sample_hypergraph(params, seed=11)
        h2, t2 = sample_hypergraph(params, seed=11)
        assert h1.hyperedges == h2.hyperedges
        np.testing.assert_array_equal(t1, t2)
        h3, _ = sample_hypergraph(params, seed=12)
        assert h3.hyperedges != h1.hyperedges

    def test_output_is_simple_and_bounded(self):
        params = ModelParams.assortative(200, 2, 8.0, 2.0, max_size=5)
        h, t = sample_hypergraph(params, seed=21)
        assert len({tuple(e) for e in h.hyperedges}) == h.num_hyperedges
        assert all(2 <= len(e) <= 5 for e in h.hyperedges)
        assert all(len(set(e)) == len(e) for e in h.hyperedges)

    def test_class_budget_guard(self):
        params = ModelParams.assortative(100, 10, 2.0, 1.0, max_size=40)
        with pytest.raises(InputError, match="d="):
            sample_hypergraph(params, SamplerConfig(seed=0, class_budget=50))

    def test_tiny_config_class_frequencies(self):
        # N <= 12, D = 3, K = 2, exact binomials: per-class mean count over
        # many runs within 4 sigma of the binomial expectation
        N, K = 12, 2
        n = np.array([0.5, 0.5])
        p = np.array([[0.02, 0.008], [0.008, 0.015]])
        params = ModelParams(n, p, N, max_size=3)
        config = SamplerConfig(binomial_mode="exact")
        runs = 4000
        totals = {}
        expectations = {}
        for r in range(runs):
            h, t = sample_hypergraph(params, SamplerConfig(binomial_mode="exact", seed=50_000 + r))
            sizes = np.array([int(np.sum(t == a)) for a in range(K)])
            for counts in itertools.chain(_count_vectors(2, K), _count_vectors(3, K)):
                mult = count_multiplicity(counts, sizes)
                prob = pi_from_counts(counts, p) / params.kappa.kappa(sum(counts))
                expectations[counts] = expectations.get(counts, 0.0) + mult * prob
            for e in h.hyperedges:
                counts = tuple(np.bincount(t[list(e)], minlength=K).tolist())
                totals[counts] = totals.get(counts, 0) + 1
        for counts, expected_total in expectations.items():
            observed = totals.get(counts, 0)
            sigma = math.sqrt(max(expected_total, 1e-9))
            assert abs(observed - expected_total) <= 4 * sigma, (counts, observed, expected_total)

    def test_per_size_counts_match_expectation(self):
        params = ModelParams.assortative(2000, 4, 10.0, 10.0, max_size=6)
        h, _ = sample_hypergraph(params, seed=9)
        counts = np.bincount(h.sizes, minlength=7)
        for d in range(2, 7):
            mean = expected_num_hyperedges(d, params)
            assert abs(counts[d] - mean) < 5 * math.sqrt(mean)

    def test_equal_group_mean_degrees(self):
        # under the equal-expected-degree constraint all groups match
        params = ModelParams.assortative(3000, 2, 10.0, 4.0, max_size=3)
        per_group = {0: [], 1: []}
        for seed in range(4):
            h, t = sample_hypergraph(params, seed=700 + seed)
            deg = h.degrees()
            for a in (0, 1):
                per_group[a].append(deg[t == a].mean())
        mean_a, mean_b = (np.mean(per_group[a]) for a in (0, 1))
        se = math.sqrt(np.var(per_group[0]) / 4 + np.var(per_group[1]) / 4)
        assert abs(mean_a - mean_b) <= 3 * max(se, 1e-3 * mean_a)

    def test_mean_degree_matches_theory(self):
        params = ModelParams.assortative(4000, 4, 10.0, 10.0, max_size=8)
        h, _ = sample_hypergraph(params, seed=5)
        assert h.degrees().mean() == pytest.approx(expected_degree(params), rel=0.05)
