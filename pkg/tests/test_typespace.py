import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genbound import typespace as ts
from genbound.errors import CapacityError, DimensionMismatchError, ValidationError


def brute_force_types(n, m):
    """Independent oracle: filter the full product grid."""
    return sorted(c for c in itertools.product(range(n + 1), repeat=m) if sum(c) == n)


class TestEnumerate:
    def test_binary_n2(self):
        assert [t.counts for t in ts.enumerate_types(2, 2)] == [(0, 2), (1, 1), (2, 0)]

    def test_n4_m3_has_15(self):
        types = ts.enumerate_types(4, 3)
        assert len(types) == 15 == math.comb(6, 2)
        assert [t.counts for t in types] == brute_force_types(4, 3)

    def test_binary_n5_matches_claim1_exactly(self):
        assert len(ts.enumerate_types(5, 2)) == 6 == (5 + 1) ** (2 - 1)

    @pytest.mark.parametrize("n", range(0, 7))
    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_matches_brute_force(self, n, m):
        got = [t.counts for t in ts.enumerate_types(n, m)]
        assert got == brute_force_types(n, m)
        assert len(set(got)) == len(got)

    def test_type_array_matches_list(self):
        arr = ts.type_array(5, 3)
        assert [tuple(r) for r in arr] == [t.counts for t in ts.enumerate_types(5, 3)]

    def test_cap(self):
        with pytest.raises(CapacityError):
            ts.enumerate_types(100, 5, cap=1000)
        with pytest.raises(CapacityError):
            ts.type_array(100, 5, cap=1000)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            ts.enumerate_types(-1, 2)
        with pytest.raises(ValueError):
            ts.enumerate_types(3, 1)


class TestTypeCounts:
    @pytest.mark.parametrize(
        "n,m,expected",
        [(4, 3, math.log(15)), (0, 2, 0.0), (0, 5, 0.0), (5, 2, math.log(6))],
    )
    def test_exact_log(self, n, m, expected):
        assert ts.type_count_exact_log(n, m) == pytest.approx(expected, abs=1e-12)

    def test_exact_log_large_is_accurate(self):
        # n = 10^9, m = 3: binom(10^9 + 2, 2) computed exactly with integers
        exact = math.log(math.comb(10**9 + 2, 2))
        assert ts.type_count_exact_log(10**9, 3) == pytest.approx(exact, rel=1e-10)

    def test_claim1(self):
        assert ts.type_count_claim1_log(5, 2) == pytest.approx(math.log(6))
        assert ts.type_count_claim1_log(10, 3) == pytest.approx(math.log(121))
        assert ts.type_count_claim1_log(10, 3) > math.log(66)
        assert ts.type_count_claim1_log(0, 2) == 0.0

    # frozen from the linear-space formula (1/sqrt(2 pi k)) ((e/k)(n + (k+1)/2))^k
    @pytest.mark.parametrize(
        "n,m,linear,exact_count",
        [(10, 3, 68.9159458640025, 66), (1, 2, 2.168875102838455, 2), (5, 2, 6.506625308515366, 6)],
    )
    def test_claim2(self, n, m, linear, exact_count):
        got = ts.type_count_claim2_log(n, m)
        assert got == pytest.approx(math.log(linear), abs=1e-12)
        assert got >= math.log(exact_count)

    def test_claim2_between_exact_and_claim1_at_10_3(self):
        assert math.log(66) < ts.type_count_claim2_log(10, 3) < math.log(121)

    def test_claim2_exceeds_claim1_at_m2(self):
        # binary alphabet: the Stirling ceiling is looser than (n+1)
        assert ts.type_count_claim2_log(5, 2) > ts.type_count_claim1_log(5, 2)

    GRID_N = sorted({int(round(x)) for x in np.logspace(0, 3, 40)})

    @pytest.mark.parametrize("m", range(2, 51))
    def test_ceilings_dominate_exact(self, m):
        for n in self.GRID_N:
            exact = ts.type_count_exact_log(n, m)
            assert ts.type_count_claim1_log(n, m) >= exact - 1e-9
            assert ts.type_count_claim2_log(n, m) >= exact - 1e-9
            if m >= 3:
                assert ts.type_count_claim2_log(n, m) <= ts.type_count_claim1_log(n, m) + 1e-9

    def test_enumeration_count_matches_log_count(self):
        for n in range(11):
            for m in range(2, 5):
                assert len(ts.enumerate_types(n, m)) == round(math.exp(ts.type_count_exact_log(n, m)))


class TestDistance:
    def test_examples(self):
        assert ts.dataset_distance((2, 1), (1, 2)) == 1
        assert ts.dataset_distance((4, 0, 2), (4, 0, 2)) == 0
        assert ts.dataset_distance((3, 0, 0), (0, 0, 3)) == 3

    def test_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ts.dataset_distance((1, 1), (1, 1, 0))
        with pytest.raises(DimensionMismatchError):
            ts.dataset_distance((1, 1), (2, 1))

    @pytest.mark.parametrize("n", range(0, 7))
    @pytest.mark.parametrize("m", [2, 3])
    def test_metric_axioms_exhaustive(self, n, m):
        types = [t.counts for t in ts.enumerate_types(n, m)]
        d = {(a, b): ts.dataset_distance(a, b) for a in types for b in types}
        for a in types:
            for b in types:
                assert d[a, b] == d[b, a]
                assert (d[a, b] == 0) == (a == b)
                assert 0 <= d[a, b] <= n
                for c in types:
                    assert d[a, c] <= d[a, b] + d[b, c]

    def test_distance_matrix_agrees(self):
        arr = ts.type_array(4, 3)
        mat = ts.distance_matrix(arr)
        for i, a in enumerate(arr):
            for j, b in enumerate(arr):
                assert mat[i, j] == ts.dataset_distance(a, b)

    def test_distance_is_min_replacements(self):
        # oracle: BFS over single-sample replacements
        n, m = 4, 3
        types = [t.counts for t in ts.enumerate_types(n, m)]
        start = types[0]
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt = []
            for t in frontier:
                for i in range(m):
                    if t[i] == 0:
                        continue
                    for j in range(m):
                        if i == j:
                            continue
                        u = list(t)
                        u[i] -= 1
                        u[j] += 1
                        u = tuple(u)
                        if u not in dist:
                            dist[u] = dist[t] + 1
                            nxt.append(u)
            frontier = nxt
        for t in types:
            assert ts.dataset_distance(start, t) == dist[t]


class TestProbability:
    def test_examples(self):
        assert ts.type_log_probability((2, 0), ts.SourceDistribution((1.0, 0.0))) == 0.0
        assert ts.type_log_probability((1, 1), ts.SourceDistribution((0.5, 0.5))) == pytest.approx(
            math.log(0.5)
        )
        assert ts.type_log_probability((0, 2), ts.SourceDistribution((1.0, 0.0))) == -math.inf

    @pytest.mark.parametrize("n", range(0, 13))
    @pytest.mark.parametrize("probs", [(0.5, 0.5), (0.2, 0.8), (0.2, 0.3, 0.5), (0.0, 0.4, 0.6)])
    def test_sums_to_one(self, n, probs):
        pz = ts.SourceDistribution(probs)
        total = math.fsum(
            math.exp(ts.type_log_probability(t, pz)) for t in ts.enumerate_types(n, pz.m)
        )
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_against_sequence_enumeration(self):
        pz = ts.SourceDistribution((0.2, 0.3, 0.5))
        n = 4
        mass = {}
        for seq in itertools.product(range(3), repeat=n):
            counts = tuple(seq.count(a) for a in range(3))
            mass[counts] = mass.get(counts, 0.0) + math.prod(pz.probs[z] for z in seq)
        for t, p in mass.items():
            assert math.exp(ts.type_log_probability(t, pz)) == pytest.approx(p, rel=1e-12)

    def test_vectorized_agrees(self):
        pz = ts.SourceDistribution((0.0, 0.25, 0.75))
        arr = ts.type_array(5, 3)
        vec = ts.type_log_probabilities(arr, pz)
        for row, v in zip(arr, vec):
            assert v == pytest.approx(ts.type_log_probability(row, pz)) or (
                v == -math.inf and ts.type_log_probability(row, pz) == -math.inf
            )

    def test_source_validation(self):
        with pytest.raises(ValidationError):
            ts.SourceDistribution((0.5, 0.6))
        with pytest.raises(ValidationError):
            ts.SourceDistribution((1.2, -0.2))


class TestTypicality:
    def test_matching_type_is_typical(self):
        pz = ts.SourceDistribution((0.25, 0.75))
        assert ts.is_strongly_typical((1, 3), pz, ts.TypicalSetSpec(eta=0.0, n=4))

    def test_support_violation(self):
        pz = ts.SourceDistribution((0.0, 1.0))
        assert not ts.is_strongly_typical((1, 3), pz, ts.TypicalSetSpec(eta=1.0, n=4))

    def test_far_type(self):
        pz = ts.SourceDistribution((0.5, 0.5))
        assert not ts.is_strongly_typical((4, 0), pz, ts.TypicalSetSpec(eta=0.25, n=4))

    def test_default_spec(self):
        spec = ts.TypicalSetSpec.default(100)
        assert spec.eta == pytest.approx(math.sqrt(math.log(100) / 100))

    def test_atypical_bound(self):
        assert ts.atypical_mass_bound(10, 2, eta=0.0) == 1.0
        assert ts.atypical_mass_bound(100, 2) == pytest.approx(4e-4, rel=1e-12)

    @given(st.floats(0.01, 1.0), st.integers(1, 10**6))
    def test_atypical_bound_monotone_in_n(self, eta, n):
        assert ts.atypical_mass_bound(n + 1, 3, eta) <= ts.atypical_mass_bound(n, 3, eta)

    def test_exact_atypical_mass_below_bound(self):
        # exact mass of the atypical set, by enumeration
        for n in (10, 50, 100):
            for probs in [(0.5, 0.5), (0.3, 0.7), (0.2, 0.3, 0.5)]:
                pz = ts.SourceDistribution(probs)
                spec = ts.TypicalSetSpec.default(n)
                atyp = math.fsum(
                    math.exp(ts.type_log_probability(t, pz))
                    for t in ts.enumerate_types(n, pz.m)
                    if not ts.is_strongly_typical(t, pz, spec)
                )
                assert atyp <= ts.atypical_mass_bound(n, pz.m) + 1e-12

    def test_monte_carlo_atypical_frequency(self):
        n, draws = 100, 10**5
        pz = ts.SourceDistribution((0.5, 0.5))
        spec = ts.TypicalSetSpec.default(n)
        rng = np.random.default_rng(20261018)
        counts = rng.multinomial(n, pz.probs, size=draws)
        freq = np.abs(counts / n - 0.5).max(axis=1) > spec.eta + 1e-12
        p_hat = freq.mean()
        bound = ts.atypical_mass_bound(n, 2)
        se = math.sqrt(bound * (1 - bound) / draws)
        assert p_hat <= bound + 3 * se


@settings(max_examples=200)
@given(st.lists(st.integers(0, 20), min_size=2, max_size=6))
def test_count_vector_roundtrip(counts):
    cv = ts.CountVector(counts)
    assert cv.n == sum(counts)
    assert cv.m == len(counts)
    assert tuple(cv) == tuple(counts)
