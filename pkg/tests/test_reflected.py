import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from fluctua import reflected as rf
from fluctua.lattice import PathPair, contact_points, corner_type, Corner
from fluctua.oracle import excursion_cdf
from fluctua.rng import stream
from fluctua.stats import chisquare_test, ks_test


def key(a):
    return (tuple(a[0]), tuple(a[1]))


class TestEnumeration:
    def test_two_steps(self):
        states = rf.enumerate_states(1)
        assert {(p.v[1], p.w[1]) for p in states} == {(1, 1), (1, -1), (-1, -1)}

    def test_four_steps(self):
        assert len(rf.enumerate_states(2)) == 20

    @pytest.mark.parametrize("n", range(1, 7))
    def test_count_matches_formula(self, n):
        assert rf.enumerate_arrays(n).shape[0] == rf.km_count(2 * n, 0) == rf.state_space_size(n)

    def test_guard(self):
        with pytest.raises(ValueError):
            rf.enumerate_arrays(8)


class TestKarlinMcGregor:
    def test_small_values(self):
        assert rf.km_count(0, 0) == 1
        assert rf.km_count(2, 0) == 3
        assert rf.km_count(3, 0) == 0
        assert rf.km_count(1, 3) == 0

    def test_contact_example(self):
        assert rf.contact_prob_exact(2, 2, 1) == Fraction(1, 20)
        arr = rf.enumerate_arrays(2)
        hits = sum(1 for a in arr if 2 in contact_points(PathPair(a[0], a[1]))
                   and corner_type(a[0], 2) is Corner.DOWNWARD and a[0][1] == 1)
        assert Fraction(hits, len(arr)) == Fraction(1, 20)

    def test_wrong_parity(self):
        assert rf.contact_prob(4, 3, 1) == 0.0

    @pytest.mark.parametrize("n", range(1, 7))
    def test_expected_contact_corners(self, n):
        arr = rf.enumerate_arrays(n)
        L = 2 * n
        total = 0
        for a in arr:
            p = PathPair(a[0], a[1])
            total += sum(corner_type(a[0], k) is not Corner.NONE for k in contact_points(p))
        expected = 2 * sum((rf.contact_prob_exact(n, k, j) for k in range(1, L) for j in range(-L, L + 1)),
                           Fraction(0))
        assert Fraction(total, len(arr)) == expected

    def test_log_counts(self):
        for k, j in ((10, 0), (11, 3), (40, 8)):
            assert float(rf.log_km_count(k, j)) == pytest.approx(math.log(rf.km_count(k, j)), rel=1e-12)

    def test_asymptotic_center(self):
        L = 400
        assert rf.contact_prob_asymptotic(200, 200, 0) == pytest.approx(16 / (2 * math.pi * L * L), rel=1e-14)

    def test_asymptotic_relative_error(self):
        # j must share the parity of k - 1
        for j in range(1, 20, 2):
            exact = rf.contact_prob(200, 200, j)
            assert abs(rf.contact_prob_asymptotic(200, 200, j) / exact - 1) <= 0.05

    @given(st.integers(2, 60), st.integers(0, 30))
    def test_asymptotic_symmetry(self, k, j):
        assert rf.contact_prob_asymptotic(32, k, j) == rf.contact_prob_asymptotic(32, k, -j)

    def test_contact_range(self):
        with pytest.raises(ValueError):
            rf.contact_prob(2, 4, 0)


class TestUniformSampling:
    def test_two_steps(self):
        s = rf.sample_uniform_many(1, 100_000, stream(1, "u2"))
        freq = Counter(key(a) for a in s)
        assert len(freq) == 3
        se = math.sqrt((1 / 3) * (2 / 3) / 100_000)
        for c in freq.values():
            assert abs(c / 100_000 - 1 / 3) < 3 * se

    def test_four_steps_chisquare(self):
        index = {key(a): i for i, a in enumerate(rf.enumerate_arrays(2))}
        s = rf.sample_uniform_many(2, 100_000, stream(2, "u4"))
        counts = np.bincount([index[key(a)] for a in s], minlength=20)
        assert chisquare_test(counts, np.full(20, 1 / 20)).p_value > 0.01

    def test_samples_are_valid(self):
        for a in rf.sample_uniform_many(5, 200, stream(3, "valid")):
            PathPair(a[0], a[1])

    def test_midpoint_sum_gaussian(self):
        s = rf.sample_uniform_many(128, 20_000, stream(4, "S"))
        x = rf.midpoint_S(s, jitter=True, rng=stream(4, "Sj"))
        assert ks_test(x, sps.norm(scale=0.5).cdf).p_value > 0.01

    def test_midpoint_difference_raw_law(self):
        # with the unit-gap shift D(1/2) approaches the excursion marginal
        s = rf.sample_uniform_many(128, 20_000, stream(5, "D"))
        x = rf.midpoint_D(s, offset=1.0, rng=stream(5, "Dj"))
        assert ks_test(x, excursion_cdf).statistic < 0.02

    def test_conditioned_samples(self):
        X = rf.sample_contact_configs(4, 3, 0, "upward", 500, stream(6, "cc"))
        for a in X:
            assert 3 in contact_points(PathPair(a[0], a[1]))
            assert corner_type(a[0], 3) is Corner.UPWARD and a[0][2] == 0
        with pytest.raises(ValueError):
            rf.sample_contact_configs(2, 2, 3, "upward", 1, stream(0))


class TestRules:
    def test_contact_rates(self):
        mv = rf.moves(PathPair([0, 1, 0], [0, 1, 0]))
        assert sorted((m.kind, m.rate) for m in mv) == [("joint", 1), ("w", 2)]
        assert all(m.contact == "upward" for m in mv)

    def test_separated_corner_rate(self):
        mv = rf.moves(PathPair([0, 1, 2, 1, 0], [0, -1, -2, -1, 0]))
        assert {(m.kind, m.site, m.rate) for m in mv} == {("v", 2, 8), ("w", 2, 8)}

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_kernel_matches_rules(self, n):
        # each (site, direction) carries rate L^2; marks split it 1/2, 1/4, 1/4
        L = 2 * n
        for a in rf.enumerate_arrays(n):
            expected = Counter()
            for m in rf.moves(PathPair(a[0], a[1])):
                expected[key((m.target.v, m.target.w))] += Fraction(m.rate)
            got = Counter()
            for k in range(1, L):
                for up in (False, True):
                    for mark, width in ((0.25, Fraction(1, 2)), (0.6, Fraction(1, 4)), (0.9, Fraction(1, 4))):
                        V, W = a[0][None].copy(), a[1][None].copy()
                        if rf._flip(V, W, 0, k, up, mark) % 10:
                            got[key((V[0], W[0]))] += width * L * L
            assert got == expected

    def test_gillespie_step_rates(self):
        g = stream(7, "gill")
        s = rf.ReflectedState(PathPair([0, 1, 0], [0, 1, 0]))
        kinds = Counter()
        for _ in range(30_000):
            log = rf.ContactEventLog(2)
            rf.step(s, g, log)
            kinds[log.kind[0]] += 1
        p = kinds["joint-flip"] / 30_000
        assert abs(p - 1 / 3) < 3 * math.sqrt(2 / 9 / 30_000)

    def test_long_run_keeps_order(self):
        tr = rf.evolve(rf.zigzag_pair(16), 40.0, stream(8, "long"), log=False)
        assert tr.events >= 1_000_000
        PathPair(tr.v[-1], tr.w[-1])


class TestCoupling:
    def test_identical(self):
        p = rf.sample_uniform(8, stream(9, "id"))
        _, V, W, _ = rf.coupled_evolve([p, p], 0.1, stream(9, "c"), checkpoints=[0.05, 0.1])
        assert np.array_equal(V[:, 0], V[:, 1]) and np.array_equal(W[:, 0], W[:, 1])

    def test_top_bottom_order(self):
        # ordering is asserted after every event inside the kernel
        _, V, W, ev = rf.coupled_evolve([rf.top_pair(8), rf.zigzag_pair(8), rf.bottom_pair(8)], 2.0,
                                        stream(10, "tb"), checkpoints=[0.5, 1.0, 2.0])
        assert ev > 10_000
        assert (V[:, 0] >= V[:, 1]).all() and (V[:, 1] >= V[:, 2]).all()

    def test_envelope(self):
        g = stream(11, "env")
        for _ in range(20):
            a, b = rf.sample_uniform(12, g), rf.sample_uniform(12, g)
            hi, lo = rf.envelope(a, b)
            _, V, W, _ = rf.coupled_evolve([a, b, hi, lo], 0.01, g, checkpoints=[0.002, 0.005, 0.01])
            assert (V[:, 2] >= np.maximum(V[:, 0], V[:, 1])).all()
            assert (W[:, 3] <= np.minimum(W[:, 0], W[:, 1])).all()

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            rf.coupled_evolve([rf.zigzag_pair(2), rf.zigzag_pair(3)], 1.0, stream(0))


class TestSumDiff:
    def test_equal_paths(self):
        p = PathPair([0, 1, 2, 1, 0], [0, 1, 2, 1, 0])
        S, D = rf.sum_diff(p)
        v, _ = rf.rescale_pair(p)
        assert np.all(D.values == 0)
        assert np.allclose(S.values, math.sqrt(2) * v.values)

    @settings(max_examples=30)
    @given(st.integers(0, 2 ** 31))
    def test_round_trip(self, seed):
        p = rf.sample_uniform(6, stream(seed))
        S, D = rf.sum_diff(p)
        v, w = rf.rescale_pair(p)
        assert np.allclose((S.values + D.values) / math.sqrt(2), v.values)
        assert np.allclose((S.values - D.values) / math.sqrt(2), w.values)

    def test_split_pair(self):
        S, D = rf.sum_diff(PathPair([0, 1, 0], [0, -1, 0]))
        assert S(0.5) == 0
        assert D(0.5) == pytest.approx(2 / (math.sqrt(2) * math.sqrt(2)))


class TestReflectionMeasure:
    def test_empty_log(self):
        m = rf.reflection_measure(rf.ContactEventLog(8), 1.0)
        assert m.total.sum() == 0

    def test_mass_bookkeeping(self):
        tr = rf.evolve(rf.zigzag_pair(8), 0.5, stream(12, "log"))
        m = rf.reflection_measure(tr.log, 0.5, bins=(5, 4))
        assert m.total.sum() == pytest.approx(len(tr.log) * 2 / 16 ** 1.5)

    def test_csv_round_trip(self, tmp_path):
        tr = rf.evolve(rf.zigzag_pair(4), 0.2, stream(13, "csv"))
        tr.log.to_csv(tmp_path / "c.csv")
        back = rf.ContactEventLog.from_csv(tmp_path / "c.csv", 8)
        assert back.k == tr.log.k and back.type == tr.log.type and back.kind == tr.log.kind

    def test_up_down_symmetry(self):
        start = rf.sample_uniform(16, stream(14, "sym0"))
        tr = rf.evolve(start, 3.0, stream(14, "sym"))
        typ = np.array(tr.log.type)
        up, down = (typ == "upward").sum(), (typ == "downward").sum()
        # counts are positively correlated in time; allow 3 Poisson SE of the difference
        assert abs(up - down) < 3 * math.sqrt(up + down) * 3


@pytest.mark.parametrize("method", ["stratified", "stationary"])
def test_contact_term_matches_enumeration(method):
    from fluctua.lattice import bump

    n, phi = 4, bump(0.2, 0.8, 3.0)
    X = rf.enumerate_arrays(n)
    psi, R = rf.psi_and_reflection(X[:, 0], X[:, 1], phi, None)
    exact = np.mean(psi * R) * (2 * n) ** 2
    est = rf.contact_term_discrete(n, phi, None, stream(31, method), 40_000, method=method)
    assert abs(est.re - exact.real) < 3 * est.se_re + 1e-12
    assert abs(est.im - exact.imag) < 3 * est.se_im + 1e-12
