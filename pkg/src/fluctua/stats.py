"""Estimators with error bars, plus the goodness-of-fit tests used by the experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats as sps


@dataclass
class Estimate:
    """Scalar estimate; serializes to ``{name, estimate, se, n, p_value?}``."""

    name: str
    estimate: float
    se: float
    n: int
    p_value: float | None = None

    def to_dict(self) -> dict:
        d = {"name": self.name, "estimate": float(self.estimate), "se": float(self.se), "n": int(self.n)}
        if self.p_value is not None:
            d["p_value"] = float(self.p_value)
        return d

    def z(self, target: float) -> float:
        return (self.estimate - target) / self.se if self.se > 0 else (
            0.0 if self.estimate == target else math.inf)


@dataclass
class ComplexEstimate:
    """Complex estimate with separate real/imaginary standard errors."""

    re: float
    im: float
    se_re: float
    se_im: float
    n: int = 0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    def to_dict(self) -> dict:
        return {"re": float(self.re), "im": float(self.im),
                "se_re": float(self.se_re), "se_im": float(self.se_im)}

    def __add__(self, other: "ComplexEstimate") -> "ComplexEstimate":
        return ComplexEstimate(self.re + other.re, self.im + other.im,
                               math.hypot(self.se_re, other.se_re),
                               math.hypot(self.se_im, other.se_im),
                               max(self.n, other.n))

    @classmethod
    def from_samples(cls, z: np.ndarray) -> "ComplexEstimate":
        z = np.asarray(z, dtype=complex)
        n = z.size
        if n < 2:
            raise ValueError("need at least two samples")
        return cls(float(z.real.mean()), float(z.imag.mean()),
                   float(z.real.std(ddof=1) / math.sqrt(n)),
                   float(z.imag.std(ddof=1) / math.sqrt(n)), n)


@dataclass
class TestReport:
    __test__ = False

    name: str
    statistic: float
    p_value: float
    n: int
    level: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    @property
    def passed(self) -> bool:
        """True when the null hypothesis is not rejected at ``level``."""
        return self.p_value > self.level

    def to_dict(self) -> dict:
        return {"name": self.name, "estimate": float(self.statistic), "se": 0.0,
                "n": int(self.n), "p_value": float(self.p_value)}


# ---------------------------------------------------------------------------
# Streaming moments


@dataclass
class Accumulator:
    """Streaming mean and co-moment matrix; ``merge`` uses the pairwise (Chan) update."""

    dim: int
    count: int = 0
    mean: np.ndarray = field(default=None)
    comoment: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.comoment is None:
            self.comoment = np.zeros((self.dim, self.dim))

    def add(self, x) -> "Accumulator":
        """Add one observation (shape ``(dim,)``) or a batch (shape ``(n, dim)``)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {x.shape[1]}")
        if x.shape[0] == 0:
            return self
        batch = Accumulator(self.dim, x.shape[0], x.mean(axis=0))
        d = x - batch.mean
        batch.comoment = d.T @ d
        return self.merge(batch, inplace=True)

    def merge(self, other: "Accumulator", inplace: bool = False) -> "Accumulator":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        n = self.count + other.count
        target = self if inplace else Accumulator(self.dim)
        if n == 0:
            return target
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        com = self.comoment + other.comoment + np.outer(delta, delta) * (self.count * other.count / n)
        target.count, target.mean, target.comoment = n, mean, com
        return target

    @property
    def covariance(self) -> np.ndarray:
        if self.count < 2:
            raise ValueError("need at least two observations")
        return self.comoment / (self.count - 1)

    @property
    def variance(self) -> np.ndarray:
        return np.clip(np.diag(self.covariance), 0.0, None)

    @property
    def se_mean(self) -> np.ndarray:
        return np.sqrt(self.variance / self.count)


@dataclass
class CovarianceEstimate:
    matrix: np.ndarray
    se: np.ndarray
    n: int


def empirical_covariance(samples) -> CovarianceEstimate:
    """Unbiased covariance of the columns with delete-one jackknife standard errors.

    The leave-one-out covariances are affine in the centred outer products, so the
    jackknife is evaluated in closed form without refitting.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two samples")
    dev = x - x.mean(axis=0)
    cov = dev.T @ dev / (n - 1)
    if n < 3:
        return CovarianceEstimate(cov, np.full((d, d), np.nan), n)
    # C_{-i} = (S - n/(n-1) dev_i dev_i^T) / (n-2); jackknife var = (n-1)/n sum (C_{-i} - mean)^2
    c = n / ((n - 1) * (n - 2))
    se = np.empty((d, d))
    for a in range(d):
        prods = dev[:, a:a + 1] * dev  # (n, d)
        centred = prods - prods.mean(axis=0)
        se[a] = c * np.sqrt((n - 1) / n * (centred ** 2).sum(axis=0))
    return CovarianceEstimate(cov, se, n)


def mean_estimate(name: str, values) -> Estimate:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two samples")
    return Estimate(name, float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size))


# ---------------------------------------------------------------------------
# Goodness of fit


def ks_test(samples, cdf: Callable[[np.ndarray], np.ndarray], name: str = "ks",
            level: float = 0.01) -> TestReport:
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("KS test needs at least one sample")
    vals = np.asarray(cdf(x), dtype=float)
    if (np.diff(vals) < -1e-12).any() or (vals < -1e-12).any() or (vals > 1 + 1e-12).any():
        raise ValueError("cdf is not a monotone distribution function on the sample support")
    res = sps.kstest(x, cdf)
    return TestReport(name, float(res.statistic), float(res.pvalue), int(x.size), level)


def chisquare_test(counts, probs, name: str = "chi2", level: float = 0.01) -> TestReport:
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValueError("counts and probabilities must align")
    n = counts.sum()
    probs = probs / probs.sum()
    res = sps.chisquare(counts, n * probs)
    return TestReport(name, float(res.statistic), float(res.pvalue), int(n), level)


def two_sample_chisquare(counts_a, counts_b, name: str = "chi2-2sample",
                         level: float = 0.01) -> TestReport:
    table = np.vstack([np.asarray(counts_a, float), np.asarray(counts_b, float)])
    keep = table.sum(axis=0) > 0
    res = sps.chi2_contingency(table[:, keep], correction=False)
    return TestReport(name, float(res.statistic), float(res.pvalue), int(table.sum()), level)


# ---------------------------------------------------------------------------
# Time series


@dataclass
class AutocorrelationEstimate:
    lags: np.ndarray
    acf: np.ndarray
    se: np.ndarray
    n: int


def _acf_raw(x: np.ndarray, lags: np.ndarray, mean: float, var: float) -> np.ndarray:
    d = x - mean
    out = np.empty(lags.size)
    for i, lag in enumerate(lags):
        out[i] = np.mean(d[: d.size - lag] * d[lag:]) / var if lag < d.size else np.nan
    return out


def autocorrelation(series, lags, batches: int = 32) -> AutocorrelationEstimate:
    """Normalized autocorrelation at integer ``lags`` with batch-means standard errors.

    A 2-d input is read as independent replicas (rows) sharing one stationary law.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    lags = np.asarray(lags, dtype=int)
    if (lags < 0).any():
        raise ValueError("lags must be non-negative")
    maxlag = int(lags.max()) if lags.size else 0
    length = x.shape[1]
    if length < 10 * max(maxlag, 1):
        raise ValueError(f"series length {length} shorter than 10x max lag {maxlag}")
    mean = float(x.mean())
    var = float(x.var())
    if var == 0.0:
        raise ValueError("constant series")
    per_replica = np.array([_acf_raw(row, lags, mean, var) for row in x])
    acf = per_replica.mean(axis=0)
    if x.shape[0] >= 8:
        se = per_replica.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
    else:
        blen = length // batches
        if blen <= maxlag:
            raise ValueError("batches too short for the requested lags")
        est = []
        for row in x:
            for b in range(batches):
                est.append(_acf_raw(row[b * blen:(b + 1) * blen], lags, mean, var))
        est = np.array(est)
        se = est.std(axis=0, ddof=1) / math.sqrt(est.shape[0])
    acf[lags == 0] = 1.0
    se[lags == 0] = 0.0
    return AutocorrelationEstimate(lags, acf, se, int(x.size))


def fit_decay_rate(times, acf, se) -> Estimate:
    """Weighted least-squares rate for ``acf(t) = exp(-rate t)`` through the origin.

    Points with ``acf <= 2 se`` carry no usable information on the log scale and are
    dropped; the SE follows from the delta method ``se(log acf) = se / acf``.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(acf, dtype=float)
    s = np.asarray(se, dtype=float)
    keep = (t > 0) & (a > 2 * s) & (s > 0)
    if not keep.any():
        raise ValueError("no lag with a resolvable autocorrelation")
    t, a, s = t[keep], a[keep], s[keep]
    w = (a / s) ** 2
    rate = -float(np.sum(w * t * np.log(a)) / np.sum(w * t * t))
    se_rate = float(1.0 / math.sqrt(np.sum(w * t * t)))
    return Estimate("decay_rate", rate, se_rate, int(keep.sum()))


def bonferroni(level: float, m: int) -> float:
    """Per-test level keeping the family-wise error at ``level`` over ``m`` tests."""
    return level / max(m, 1)
