import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluctua import reflected as rf
from fluctua import verify as vf
from fluctua import zrp
from fluctua.lattice import bump, sine_bump
from fluctua.rng import stream

LIN = zrp.RateFunction.linear()


@pytest.fixture(scope="module")
def pair4():
    return vf.build_reflected(2)


def index_of(G, row):
    for i, s in enumerate(G.states):
        if np.array_equal(s, row):
            return i
    raise KeyError(row)


def rows_sum_zero_exact(G):
    out = [Fraction(0)] * G.size
    for s, r in zip(G.src, G.rates_exact):
        out[s] += r
    diag = -G.Q.diagonal()
    return all(float(o) == d for o, d in zip(out, diag))


class TestBuild:
    def test_two_step_pair(self):
        G = vf.build_reflected(1)
        assert G.size == 3
        i = index_of(G, np.array([[0, 1, 0], [0, 1, 0]]))
        out = {tuple(map(tuple, G.states[d])): r for s, d, r in zip(G.src, G.dst, G.rates_exact) if s == i}
        assert out == {((0, 1, 0), (0, -1, 0)): 2, ((0, -1, 0), (0, -1, 0)): 1}
        assert -G.Q[i, i] == 3

    def test_zrp_two_sites(self):
        G = vf.build_zrp(2, 1.0, LIN)
        assert {tuple(s) for s in G.states} == {(2, 0), (1, 1), (0, 2)}
        a, b = index_of(G, np.array([2, 0])), index_of(G, np.array([1, 1]))
        assert G.Q[a, b] == 4

    @pytest.mark.parametrize("G", [vf.build_reflected(3), vf.build_zrp(3, 1.0, LIN),
                                   vf.build_zrp(4, 0.5, zrp.RateFunction.indicator())])
    def test_rows_sum_to_zero(self, G):
        assert abs(G.Q.sum(axis=1)).max() == 0
        assert rows_sum_zero_exact(G)
        off = G.Q - np.diag(G.Q.diagonal())
        assert (np.asarray(off) >= 0).all()
        assert G.m.min() > 0 and G.m.sum() == pytest.approx(1.0, abs=1e-15)

    def test_guard(self):
        with pytest.raises(vf.GuardError):
            vf.build_reflected(6, guard=1000)
        with pytest.raises(ValueError):
            vf.build_generator("tasep")


class TestStationarity:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_reflected_exact(self, n):
        G = vf.build_reflected(n)
        rep = vf.stationarity_residual(G)
        assert rep.exact and rep.residual == 0 and rep.detailed_balance == 0
        assert vf.drift_identity_violation(G) == 0

    def test_zrp_factorial_weights(self):
        G = vf.build_zrp(3, 1.0, LIN)
        w = [Fraction(1, math.prod(math.factorial(int(c)) for c in s)) for s in G.states]
        z = sum(w)
        assert [x for x in G.m_exact] == [x / z for x in w]
        assert vf.stationarity_residual(G).ok

    def test_perturbed_measure(self):
        G = vf.build_zrp(3, 1.0, LIN)
        m = list(G.m_exact)
        m[0] = m[0] * Fraction(101, 100)
        assert vf.stationarity_residual(G, m).residual > 0
        G2 = vf.build_reflected(2)
        m2 = list(G2.m_exact)
        m2[3] = m2[3] * Fraction(101, 100)
        assert vf.stationarity_residual(G2, m2).residual > 0

    def test_float_mode(self):
        rep = vf.stationarity_residual(vf.build_zrp(3, 1.0, LIN), exact=False)
        assert rep.residual < 1e-12 and rep.detailed_balance < 1e-12


class TestResolvent:
    def test_constant(self, pair4):
        sol = vf.resolvent_solve(pair4, 0.7, np.ones(pair4.size))
        assert np.allclose(sol.F, 1 / 0.7, atol=1e-12)

    def test_large_lambda(self, pair4):
        f = stream(1, "f").normal(size=pair4.size)
        sol = vf.resolvent_solve(pair4, 1e6, f)
        assert np.abs(1e6 * sol.F - f).max() <= 1e-4 * np.abs(f).max()

    def test_lambda_positive(self, pair4):
        with pytest.raises(ValueError):
            vf.resolvent_solve(pair4, 0.0, np.ones(pair4.size))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 31), st.sampled_from([0.5, 1.0, 2.0]))
    def test_positivity_and_contraction(self, seed, lam):
        G = vf.build_zrp(3, 1.0, LIN)
        f = stream(seed).random(G.size)
        F = vf.resolvent_solve(G, lam, f).F
        assert (F >= -1e-15).all()
        assert lam * np.abs(F).max() <= np.abs(f).max() + 1e-12

    @pytest.mark.parametrize("lam,mu", [(0.5, 1.0), (1.0, 2.0), (0.5, 2.0)])
    def test_resolvent_identity(self, pair4, lam, mu):
        f = stream(2, "ri").normal(size=pair4.size)
        Rl = vf.resolvent_solve(pair4, lam, f).F
        Rm = vf.resolvent_solve(pair4, mu, f).F
        RlRm = vf.resolvent_solve(pair4, lam, Rm).F
        assert np.abs(Rl - Rm - (mu - lam) * RlRm).max() < 1e-9

    def test_monte_carlo_agrees(self):
        G = vf.build_reflected(1)
        f = G.metric[0] + 1.0
        F = vf.resolvent_solve(G, 1.0, f).F
        est = vf.mc_resolvent(G, 1.0, f, 100_000, stream(3, "mc"))
        for e, x in zip(est, F):
            assert abs(e.estimate - x) < 3 * e.se


class TestIBPF:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_reflected(self, pair4, lam):
        f = stream(4, "ibpf").normal(size=pair4.size)
        out = vf.verify_discrete_ibpf(pair4, lam, f, [bump(0.2, 0.6, 3.0), sine_bump(0.3, 0.9, -2.0)])
        assert out["scaled"] <= 1e-10
        assert out["stationarity_mass"] <= 1e-12

    def test_zrp_indicator(self):
        G = vf.build_zrp(4, 1.0, zrp.RateFunction.indicator())
        f = stream(5, "z").random(G.size)
        out = vf.verify_discrete_ibpf(G, 1.3, f, [bump(0.1, 0.9, 4.0)])
        assert out["scaled"] <= 1e-10 and out["stationarity_mass"] <= 1e-12

    def test_gradphi(self):
        from fluctua.gradphi import Potential

        G = vf.build_gradphi(4, Potential.absolute(integer=True, q=Fraction(1, 2)), 2)
        out = vf.verify_discrete_ibpf(G, 1.0, G.metric[0], [bump(0.2, 0.8, 1.0)])
        assert out["scaled"] <= 1e-10 and out["stationarity_mass"] <= 1e-12

    def test_constant_f_is_mass(self, pair4):
        phis = [bump(0.2, 0.7, 2.0), None]
        out = vf.verify_discrete_ibpf(pair4, 2.0, np.ones(pair4.size), phis)
        assert out["violation"] == pytest.approx(out["stationarity_mass"] / 2.0, abs=1e-14)


class TestSplit:
    def test_parts_sum(self):
        G = vf.build_reflected(3)
        bulk, refl, Lpsi = vf.split_generator_action(G, bump(0.1, 0.8, 2.0), sine_bump(0.2, 0.9, 1.0))
        assert np.abs(bulk + refl - Lpsi).max() < 1e-12 * np.abs(Lpsi).max()

    def test_reflection_support(self, pair4):
        _, refl, _ = vf.split_generator_action(pair4, bump(0.1, 0.9, 2.0), bump(0.2, 0.8, -1.0))
        has = rf.states_with_contacts(pair4.states)
        assert (np.abs(refl[~has]) == 0).all()
        assert (np.abs(refl[has]) > 0).all()
        # mean number of contact corners per state from the Karlin-McGregor weights
        V, W = pair4.states[:, 0], pair4.states[:, 1]
        lap = V[:, 2:] - 2 * V[:, 1:-1] + V[:, :-2]
        touch = (V[:, :-2] == W[:, :-2]) & (V[:, 1:-1] == W[:, 1:-1]) & (V[:, 2:] == W[:, 2:])
        K, J, P = rf.contact_weights(2)
        assert ((touch & (lap != 0)).sum() / pair4.size) == pytest.approx(2 * P.sum(), rel=1e-14)

    def test_no_contacts_state(self):
        V = np.array([[0, 1, 2, 1, 0]])
        W = np.array([[0, -1, -2, -1, 0]])
        _, _, refl = vf.generator_psi_reflected(V, W, bump(), bump(0.3, 0.7, 2.0))
        assert refl[0] == 0


class TestLipschitz:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_below_ceiling(self, n, lam):
        G = vf.build_reflected(n)
        out = vf.lipschitz_ratio(G, lam, 100, stream(6, n, lam))
        assert out["trials"] > 0
        assert out["ratio"] <= 1 / lam + 1e-9

    def test_constant_skipped(self, pair4):
        assert vf.lipschitz_seminorm(pair4, np.full(pair4.size, 3.0)) == 0.0

    def test_affine_invariance(self, pair4):
        f = vf.random_lipschitz(pair4, stream(7, "aff"), kind=1)
        r1 = vf.lipschitz_seminorm(pair4, vf.resolvent_solve(pair4, 1.0, f).F) / vf.lipschitz_seminorm(pair4, f)
        g = -2.5 * f + 4.0
        r2 = vf.lipschitz_seminorm(pair4, vf.resolvent_solve(pair4, 1.0, g).F) / vf.lipschitz_seminorm(pair4, g)
        assert r1 == pytest.approx(r2, rel=1e-10)

    def test_metric_symmetric(self, pair4):
        d = pair4.metric
        assert np.array_equal(d, d.T) and (np.diag(d) == 0).all()
        assert (d[~np.eye(pair4.size, dtype=bool)] > 0).all()


class TestSigmaReport:
    def test_zrp_exact_mass_zero(self):
        rows = vf.sigma_convergence_report("zrp", [3, 4], [bump(0.2, 0.8, 1.0)], 2000, stream(8, "rep"))
        for r in rows:
            assert r["method"] == "exact"
            assert abs(r["discrete"]["re"]) < 1e-12 and abs(r["discrete"]["im"]) < 1e-12

    def test_zrp_generator_action_matches_matrix(self):
        G = vf.build_zrp(4, 1.0, LIN)
        phi = bump(0.1, 0.9, 3.0)
        psi, Lpsi = vf.generator_psi_zrp(G.states, 1.0, LIN, phi)
        assert np.allclose(psi, G.psi([phi]), atol=1e-14)
        assert np.allclose(Lpsi, G.Q @ psi, atol=1e-12)

    def test_reflected_generator_action_matches_matrix(self, pair4):
        phis = [bump(0.1, 0.9, 3.0), sine_bump(0.2, 0.7, 1.0)]
        psi, bulk, refl = vf.generator_psi_reflected(pair4.states[:, 0], pair4.states[:, 1], *phis)
        assert np.allclose(bulk + refl, pair4.Q @ pair4.psi(phis), atol=1e-12)
