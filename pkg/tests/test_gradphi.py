import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from fluctua import gradphi as gp
from fluctua.rng import stream
from fluctua.stats import chisquare_test, ks_test, mean_estimate
from fluctua.verify import build_gradphi, stationarity_residual

QUAD = gp.Potential.quadratic()
ABS_INT = gp.Potential.absolute(1.0, integer=True)


def table_cdf(xs, c):
    return lambda x: np.interp(x, xs, c)


class TestPotential:
    def test_rejects_concave(self):
        with pytest.raises(ValueError):
            gp.Potential.table([-1, 0, 1], [0, 1, 0])

    def test_rejects_sublinear_growth(self):
        with pytest.raises(gp.NonNormalizableError):
            gp.Potential.table([-1, 0, 1], [0, 0, 1])

    def test_table_extension(self):
        V = gp.Potential.table([-1, 0, 2], [2, 0, 2])
        assert V(-3) == pytest.approx(6.0)
        assert V(4) == pytest.approx(4.0)
        assert V.certificate >= 0

    def test_parse(self, tmp_path):
        p = tmp_path / "v.txt"
        p.write_text("x,v\n-1,1\n0,0\n1,1\n")
        assert gp.Potential.parse(f"table:{p}").kind == "table"
        with pytest.raises(ValueError):
            gp.Potential.parse("cosh")


class TestState:
    def test_boundary(self):
        with pytest.raises(ValueError):
            gp.GradPhiState(np.array([1.0, 0.0, 0.0]))

    def test_wall(self):
        with pytest.raises(ValueError):
            gp.GradPhiState(np.array([0.0, -1.0, 0.0]), hard_wall=True)


class TestHeatBath:
    def test_gaussian_conditional(self):
        g = stream(1, "gauss")
        s = gp.GradPhiState(np.array([0.0, 0.0, 1.4, 0.0]))
        x = np.array([gp.heat_bath_update(s, 1, QUAD, g).heights[1] for _ in range(20_000)])
        assert ks_test(x, sps.norm(0.7, math.sqrt(0.5)).cdf).p_value > 0.01

    def test_truncated_gaussian_matches_grid(self):
        g = stream(2, "trunc")
        s = gp.GradPhiState(np.array([0.0, 0.0, 0.0]), hard_wall=True)
        x = np.array([gp.heat_bath_update(s, 1, QUAD, g).heights[1] for _ in range(20_000)])
        assert (x >= 0).all()
        xs, c = gp.grid_inverse_cdf_sampler(QUAD, 0.0, 0.0, True, False)
        assert ks_test(x, table_cdf(xs, c)).p_value > 0.01

    def test_two_sided_geometric_normalization(self):
        beta, h = 0.7, 3
        ks = np.arange(h - 60, h + 61)
        w = np.exp(-2 * beta * np.abs(ks - h))
        z = 1 + 2 * math.exp(-2 * beta) / (1 - math.exp(-2 * beta))
        assert w.sum() == pytest.approx(z, rel=1e-12)
        g = stream(3, "geo")
        x = np.array([gp.two_sided_geometric(h, h, beta, False, g) for _ in range(40_000)])
        sel = np.abs(ks - h) <= 4
        counts = np.array([(x == k).sum() for k in ks[sel]] + [(np.abs(x - h) > 4).sum()])
        p = np.concatenate([w[sel], [w[~sel].sum()]]) / z
        assert chisquare_test(counts, p).p_value > 0.01

    @pytest.mark.parametrize("a,b,wall", [(0, 3, False), (2, -1, False), (1, 4, True), (0, 0, True), (-2, -1, True)])
    def test_integer_abs_matches_grid(self, a, b, wall):
        g = stream(4, f"{a}{b}{wall}")
        x = np.array([gp.two_sided_geometric(a, b, 0.8, wall, g) for _ in range(20_000)])
        V = gp.Potential.absolute(0.8, integer=True)
        xs, c = gp.grid_inverse_cdf_sampler(V, a, b, wall, True)
        p = np.diff(np.concatenate([[0.0], c]))
        counts = np.array([(x == k).sum() for k in xs])
        assert counts.sum() == x.size
        keep = p * x.size >= 5
        counts = np.concatenate([counts[keep], [counts[~keep].sum()]])
        p = np.concatenate([p[keep], [p[~keep].sum()]])
        assert chisquare_test(counts, p).p_value > 0.01

    def test_table_potential_continuous(self):
        V = gp.Potential.table([-2, 0, 1, 3], [3, 0, 0.5, 3])
        g = stream(5, "table")
        s = gp.GradPhiState(np.array([0.0, 0.0, 0.5, 0.0]))
        x = np.array([gp.heat_bath_update(s, 1, V, g).heights[1] for _ in range(3000)])
        xs, c = gp.grid_inverse_cdf_sampler(V, 0.0, 0.5, False, False, resolution=1 << 15)
        assert ks_test(x, table_cdf(xs, c)).p_value > 0.01

    def test_interior_only(self):
        with pytest.raises(IndexError):
            gp.heat_bath_update(gp.GradPhiState(np.zeros(4)), 0, QUAD, stream(0))


class TestEvolve:
    def test_stationary_gaussian_midpoint(self):
        n = 16
        g = stream(6, "stat")
        h0 = gp.sample_gaussian_bridge(n, 1.0, g, size=3000)
        end = np.array([gp.evolve(gp.GradPhiState(h), 0.5, QUAD, g).heights[-1, n // 2] for h in h0])
        assert ks_test(end, sps.norm(scale=math.sqrt(n / 4)).cdf).p_value > 0.01

    def test_single_free_site(self):
        g = stream(7, "one")
        x = np.array([gp.evolve(gp.GradPhiState(np.zeros(3)), 5.0, QUAD, g).heights[-1, 1] for _ in range(5000)])
        assert ks_test(x, sps.norm(scale=math.sqrt(0.5)).cdf).p_value > 0.01

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 31), st.booleans())
    def test_wall_holds(self, seed, integer):
        V = gp.Potential.quadratic(integer=integer)
        dtype = np.int64 if integer else float
        tr = gp.evolve(gp.GradPhiState(np.zeros(9, dtype=dtype), hard_wall=True), 1.0, V, stream(seed),
                       checkpoints=[0.25, 0.5, 1.0])
        assert (tr.heights >= 0).all()
        assert tr.heights.dtype == dtype

    def test_event_rate(self):
        n = 8
        tr = gp.evolve(gp.GradPhiState(np.zeros(n + 1)), 2.0, QUAD, stream(8, "rate"))
        mean = (n - 1) * n * n * 2.0
        assert abs(tr.events - mean) < 4 * math.sqrt(mean)


class TestFields:
    def test_zero(self):
        assert np.all(gp.fluctuation_field(gp.GradPhiState(np.zeros(5))).values == 0)

    def test_midpoint_variance(self):
        n = 64
        h = gp.sample_gaussian_bridge(n, 1.0, stream(9, "var"), size=10_000)
        x = np.array([gp.fluctuation_field(gp.GradPhiState(r))(0.5) for r in h])
        est = mean_estimate("v", (x - x.mean()) ** 2)
        assert abs(est.estimate - 0.25) < 3 * est.se

    def test_wall_positive_field(self):
        h = gp.sample_equilibrium(16, QUAD, stream(10, "wall"), hard_wall=True, size=50, burn_in=0.5)
        assert (h >= 0).all()


@pytest.mark.parametrize("V", [gp.Potential.quadratic(integer=True, q=Fraction(1, 2)),
                               gp.Potential.absolute(integer=True, q=Fraction(1, 3))])
def test_detailed_balance_exact(V):
    G = build_gradphi(3, V, 3)
    rep = stationarity_residual(G)
    assert rep.exact and rep.residual == 0 and rep.detailed_balance == 0
