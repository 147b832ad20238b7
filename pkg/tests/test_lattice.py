import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluctua.lattice import (
    Corner,
    FluctuationField,
    InvariantError,
    OccupationVector,
    PathPair,
    bump,
    contact_points,
    corner_type,
    field_from_csv,
    field_to_csv,
    height_from_occupations,
    inner_product,
    l1_distance,
    pair_from_csv,
    pair_to_csv,
    rescale_pair,
    sine_bump,
)


@st.composite
def bridges(draw, half=st.integers(1, 8)):
    n = draw(half)
    steps = draw(st.permutations([1] * n + [-1] * n))
    return np.concatenate([[0], np.cumsum(steps)])


@st.composite
def ordered_pairs(draw):
    n = draw(st.integers(1, 6))
    a = draw(bridges(st.just(n)))
    b = draw(bridges(st.just(n)))
    # pointwise max/min of two bridges are again bridges
    return PathPair(np.maximum(a, b), np.minimum(a, b))


class TestOccupationVector:
    def test_rejects_negative(self):
        with pytest.raises(InvariantError):
            OccupationVector([1, -1])

    def test_canonical_total(self):
        OccupationVector([1, 2, 0], density=1.0)
        with pytest.raises(InvariantError):
            OccupationVector([1, 1, 0], density=1.0)


class TestHeights:
    def test_flat_occupation_gives_zero(self):
        f = height_from_occupations(OccupationVector([1, 1]), 1.0)
        assert np.all(f.values == 0)

    @pytest.mark.parametrize("occ,sign", [((2, 0), 1), ((0, 2), -1)])
    def test_two_site_values(self, occ, sign):
        f = height_from_occupations(OccupationVector(occ), 1.0)
        assert f(0.5) == pytest.approx(sign / math.sqrt(2), abs=1e-15)
        assert f(1.0) == 0

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=30), st.floats(0.05, 0.9))
    def test_differences_recover_occupations(self, counts, frac):
        n = len(counts)
        nbar = (sum(counts) + frac) / n
        f = height_from_occupations(OccupationVector(counts), nbar)
        d = np.diff(f.values) * math.sqrt(n)
        assert np.allclose(d, np.array(counts) - nbar, atol=1e-9)

    def test_raw_data_stays_integral(self):
        f = height_from_occupations(OccupationVector([3, 0, 1, 0]), 1.0)
        assert np.issubdtype(f.raw.dtype, np.integer)


class TestPathPair:
    def test_minimal_pair(self):
        v, w = rescale_pair(PathPair([0, 1, 0], [0, 1, 0]))
        assert np.allclose(v.values, [0, 1 / math.sqrt(2), 0])
        assert np.allclose(w.values, v.values)

    def test_split_pair(self):
        v, w = rescale_pair(PathPair([0, 1, 0], [0, -1, 0]))
        assert v(0.5) == pytest.approx(1 / math.sqrt(2))
        assert w(0.5) == pytest.approx(-1 / math.sqrt(2))

    @pytest.mark.parametrize("v,w", [([0, 0, 0], [0, 0, 0]), ([0, -1, 0], [0, 1, 0]), ([0, 1, 2], [0, 1, 2]),
                                     ([1, 0, 1], [1, 0, 1])])
    def test_invariants_enforced(self, v, w):
        with pytest.raises(InvariantError):
            PathPair(v, w)

    @given(ordered_pairs())
    def test_rescaling_keeps_order(self, pair):
        v, w = rescale_pair(pair)
        assert np.all(v.values >= w.values)

    def test_csv_round_trip(self, tmp_path):
        p = PathPair([0, 1, 2, 1, 0], [0, -1, 0, -1, 0])
        pair_to_csv(p, tmp_path / "p.csv")
        assert pair_from_csv(tmp_path / "p.csv") == p
        assert (tmp_path / "p.csv").read_text().splitlines()[0] == "k,v,w"


class TestCorners:
    def test_corner_types(self):
        assert corner_type([0, 1, 0], 1) is Corner.UPWARD
        assert corner_type([0, -1, 0], 1) is Corner.DOWNWARD
        assert corner_type([0, 1, 2, 1, 0], 1) is Corner.NONE

    def test_contact_points(self):
        assert contact_points(PathPair([0, 1, 0], [0, -1, 0])) == []
        assert contact_points(PathPair([0, 1, 2, 1, 0], [0, 1, 2, 1, 0])) == [1, 2, 3]

    def test_two_isolated_contacts(self):
        # 2N = 14 pair touching on three consecutive sites only around k = 3 and k = 9
        v = [0, 1, 0, 1, 0, 1, 2, 1, 0, 1, 0, 1, 2, 1, 0]
        w = [0, -1, 0, 1, 0, -1, -2, -1, 0, 1, 0, -1, -2, -1, 0]
        assert contact_points(PathPair(v, w)) == [3, 9]


class TestPairings:
    def test_zero_field(self):
        f = FluctuationField(np.zeros(17))
        assert inner_product(f, bump()) == 0.0

    def test_constant_field_against_quadrature(self):
        phi = bump(0.2, 0.8, 1.0)
        phi = phi.scaled(0.25 / phi.integral())
        f = FluctuationField(np.ones(65))
        assert inner_product(f, phi) == pytest.approx(0.25, rel=1e-10)

    @given(st.lists(st.floats(-5, 5), min_size=9, max_size=9), st.lists(st.floats(-5, 5), min_size=9, max_size=9),
           st.floats(-3, 3))
    def test_linearity(self, a, b, c):
        phi = sine_bump(0.1, 0.7, 2.0)
        f, g = FluctuationField(np.array(a)), FluctuationField(np.array(b))
        lhs = inner_product(f * c + g, phi)
        rhs = c * inner_product(f, phi) + inner_product(g, phi)
        assert lhs == pytest.approx(rhs, abs=1e-9)

    @pytest.mark.parametrize("L", [8, 16, 32])
    def test_weights_match_fine_quadrature(self, L):
        from scipy import integrate

        rng = np.random.default_rng(L)
        vals = rng.normal(size=L + 1)
        phi = bump(0.15, 0.85, 1.0)
        f = FluctuationField(vals)
        ref, _ = integrate.quad(lambda x: f(x) * phi(x), 0, 1, points=np.arange(1, L) / L, limit=500,
                                epsabs=1e-13)
        assert inner_product(f, phi) == pytest.approx(ref, rel=10 / L ** 2, abs=1e-12)

    def test_test_function_support(self):
        phi = bump(0.3, 0.6, 1.0)
        x = np.array([0.0, 0.29, 0.61, 1.0])
        assert np.all(phi(x) == 0) and np.all(phi.derivative(x, 2) == 0)
        with pytest.raises(ValueError):
            bump(0.0, 0.5)


class TestL1:
    def test_identical(self):
        f = FluctuationField(np.array([0, 1, 2, 1, 0]))
        assert l1_distance(f, f) == 0

    def test_constant_gap(self):
        f = FluctuationField(np.full(9, 0.7))
        g = FluctuationField(np.full(9, 0.2))
        assert l1_distance(f, g) == pytest.approx(0.5)

    @pytest.mark.parametrize("L", [4, 8, 20])
    def test_single_flip_area(self, L):
        v = np.concatenate([[0], np.cumsum([1, -1] * (L // 2))])
        a = rescale_pair(PathPair(v, v))[0]
        v2 = v.copy()
        v2[1] -= 2
        b = rescale_pair(PathPair(v2, v2))[0]
        # a flip moves one corner by 2 lattice units: triangle of area 2 * (2N)^{-3/2}
        assert l1_distance(a, b) == pytest.approx(2 * L ** -1.5)

    def test_sign_change_inside_cell(self):
        f = FluctuationField(np.array([0.0, 1.0, 0.0]))
        g = FluctuationField(np.array([0.0, -1.0, 0.0]))
        assert l1_distance(f, g) == pytest.approx(1.0)
        h = FluctuationField(np.array([1.0, -1.0]))
        assert l1_distance(h, FluctuationField(np.zeros(2))) == pytest.approx(0.5)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.lists(st.floats(-3, 3), min_size=5, max_size=5))
    def test_zero_iff_equal(self, a, b):
        f, g = FluctuationField(np.array(a)), FluctuationField(np.array(b))
        assert (l1_distance(f, g) == 0) == bool(np.all(np.array(a) == np.array(b)))

    def test_scale_mismatch_rejected(self):
        with pytest.raises(ValueError):
            l1_distance(FluctuationField(np.zeros(3), 1.0), FluctuationField(np.zeros(3), 2.0))


def test_field_csv_round_trip(tmp_path):
    f = FluctuationField(np.array([0.0, 0.25, -1.5, 0.0]))
    field_to_csv(f, tmp_path / "f.csv")
    g = field_from_csv(tmp_path / "f.csv")
    assert np.array_equal(g.values, f.values)
    assert "\r" not in (tmp_path / "f.csv").read_text()
