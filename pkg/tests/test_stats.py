import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sps

from fluctua.rng import run_replicas, stream
from fluctua.stats import (
    Accumulator,
    ComplexEstimate,
    TestReport,
    autocorrelation,
    bonferroni,
    chisquare_test,
    empirical_covariance,
    fit_decay_rate,
    ks_test,
    mean_estimate,
    two_sample_chisquare,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestAccumulator:
    @given(arrays(float, (40, 3), elements=finite), st.integers(1, 39))
    def test_merge_matches_full(self, x, cut):
        full = Accumulator(3)
        for row in x:
            full.add(row)
        a, b = Accumulator(3), Accumulator(3)
        for row in x[:cut]:
            a.add(row)
        for row in x[cut:]:
            b.add(row)
        m = a.merge(b)
        assert m.count == full.count
        assert np.allclose(m.mean, full.mean, rtol=1e-12, atol=1e-9)
        assert np.allclose(m.covariance, full.covariance, rtol=1e-9, atol=1e-6)

    @settings(max_examples=30)
    @given(arrays(float, (30, 2), elements=finite))
    def test_merge_associative(self, x):
        parts = []
        for chunk in np.array_split(x, 3):
            acc = Accumulator(2)
            for row in chunk:
                acc.add(row)
            parts.append(acc)
        left = parts[0].merge(parts[1]).merge(parts[2])
        right = parts[0].merge(parts[1].merge(parts[2]))
        assert np.allclose(left.mean, right.mean, rtol=1e-12, atol=1e-12)
        assert np.allclose(left.covariance, right.covariance, rtol=1e-9, atol=1e-9)
        assert (left.variance >= 0).all()

    def test_matches_numpy(self):
        x = stream(1, "acc").normal(size=(500, 4))
        acc = Accumulator(4)
        for row in x:
            acc.add(row)
        assert np.allclose(acc.covariance, np.cov(x.T), atol=1e-12)


class TestCovariance:
    def test_constant_samples(self):
        est = empirical_covariance(np.ones((10, 3)))
        assert np.all(est.matrix == 0)

    def test_standard_normals(self):
        x = stream(2, "cov").standard_normal((100_000, 3))
        est = empirical_covariance(x)
        z = (np.diag(est.matrix) - 1) / np.diag(est.se)
        assert np.all(np.abs(z) < 3)

    def test_jackknife_against_brute_force(self):
        x = stream(3, "jk").normal(size=(25, 2))
        est = empirical_covariance(x)
        loo = np.array([np.cov(np.delete(x, i, axis=0).T) for i in range(25)])
        se = np.sqrt((25 - 1) / 25 * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
        assert np.allclose(est.se, se, rtol=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            empirical_covariance(np.ones((1, 2)))

    def test_standard_errors_shrink_like_root_n(self):
        g = stream(4, "shrink")
        se = [mean_estimate("m", g.normal(size=n)).se for n in (20_000, 40_000, 80_000)]
        for a, b in zip(se, se[1:]):
            assert a / b == pytest.approx(np.sqrt(2), rel=0.2)


class TestKS:
    def test_calibration(self):
        g = stream(5, "ks-cal")
        rejections = sum(not ks_test(g.normal(size=500), sps.norm.cdf).passed for _ in range(400))
        assert rejections / 400 <= 0.02

    def test_power(self):
        x = stream(6, "ks-power").normal(0.1, 1.0, size=10_000)
        assert ks_test(x, sps.norm.cdf).p_value < 1e-3

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_test([], sps.norm.cdf)

    def test_non_monotone_cdf(self):
        with pytest.raises(ValueError):
            ks_test(np.linspace(-1, 1, 50), lambda x: np.cos(x))

    def test_report_bounds(self):
        with pytest.raises(ValueError):
            TestReport("x", 0.1, 1.5, 10)


class TestChiSquare:
    def test_uniform_counts(self):
        counts = np.bincount(stream(7, "chi").integers(0, 6, 60_000), minlength=6)
        assert chisquare_test(counts, np.full(6, 1 / 6)).passed

    def test_two_sample(self):
        g = stream(8, "chi2")
        a = np.bincount(g.integers(0, 4, 5000), minlength=4)
        b = np.bincount(g.integers(0, 4, 5000), minlength=4)
        assert two_sample_chisquare(a, b).p_value > 0.001


def ar1(phi, n, g, replicas=1):
    x = np.empty((replicas, n))
    x[:, 0] = g.normal(size=replicas) / np.sqrt(1 - phi ** 2)
    e = g.normal(size=(replicas, n))
    for t in range(1, n):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    return x


class TestAutocorrelation:
    def test_lag_zero_is_one(self):
        est = autocorrelation(stream(9, "ac").normal(size=1000), [0, 1, 2])
        assert est.acf[0] == 1.0

    def test_white_noise(self):
        est = autocorrelation(stream(10, "wn").normal(size=50_000), range(1, 6))
        assert np.all(np.abs(est.acf / est.se) < 3)

    def test_ar1(self):
        phi = 0.7
        x = ar1(phi, 100_000, stream(11, "ar1"))[0]
        lags = np.arange(1, 6)
        est = autocorrelation(x, lags)
        assert np.all(np.abs(est.acf - phi ** lags) < 3 * est.se)

    def test_ar1_replicas_and_decay_fit(self):
        phi = 0.8
        x = ar1(phi, 2000, stream(12, "ar1r"), replicas=16)
        lags = np.arange(0, 10)
        est = autocorrelation(x, lags)
        fit = fit_decay_rate(lags, est.acf, est.se)
        assert abs(fit.estimate + np.log(phi)) < 3 * fit.se + 0.02

    def test_short_series(self):
        with pytest.raises(ValueError):
            autocorrelation(np.zeros(50), [10])


class TestComplexEstimate:
    def test_from_samples(self):
        z = np.array([1 + 1j, 3 - 1j])
        e = ComplexEstimate.from_samples(z)
        assert e.value == 2 + 0j
        assert set(e.to_dict()) == {"re", "im", "se_re", "se_im"}

    def test_sum_adds_errors_in_quadrature(self):
        a = ComplexEstimate(1, 2, 3, 4, 10)
        b = ComplexEstimate(1, 1, 4, 3, 10)
        c = a + b
        assert (c.re, c.im, c.se_re, c.se_im) == (2, 3, 5.0, 5.0)


def test_estimate_schema():
    d = mean_estimate("x", [1.0, 2.0, 3.0]).to_dict()
    assert set(d) == {"name", "estimate", "se", "n"}


def test_bonferroni():
    assert bonferroni(0.01, 10) == pytest.approx(0.001)


class TestStreams:
    def test_same_key_same_stream(self):
        assert np.array_equal(stream(1, "a", 2).random(5), stream(1, "a", 2).random(5))

    def test_keys_separate_streams(self):
        base = stream(1, "a", 2).random(5)
        for other in (stream(2, "a", 2), stream(1, "b", 2), stream(1, "a", 3)):
            assert not np.array_equal(base, other.random(5))

    def test_worker_count_does_not_matter(self):
        fn = lambda r, g: float(g.normal())  # noqa: E731
        assert run_replicas(fn, 8, 3, "w", workers=1) == run_replicas(fn, 8, 3, "w", workers=4)

    def test_env_override(self, monkeypatch):
        from fluctua.rng import resolve_seed

        monkeypatch.setenv("FLUCTUA_SEED", "17")
        assert resolve_seed(3) == 17
        monkeypatch.delenv("FLUCTUA_SEED")
        assert resolve_seed(3) == 3
