"""Continuum oracles: Brownian bridge and excursion samplers, stationary mode statistics
of the additive stochastic heat equation, and Monte Carlo evaluation of the limit
measures ``Sigma^psi`` for the zero-range field and the reflected pair.

Sampled fields are returned as arrays of grid values on ``{0, 1/M, ..., 1}``
(one row per sample); pairings use the exact piecewise-linear hat weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats as sps

from .lattice import FluctuationField, TestFunction, hat_weights, pair_values
from .rng import as_generator
from .stats import ComplexEstimate


# ---------------------------------------------------------------------------
# Bridge


@dataclass(frozen=True)
class BridgeLaw:
    """Gaussian bridge with ``Cov(x, y) = scale^2 min(x, y)(1 - max(x, y))``."""

    scale: float = 1.0
    grid: int = 256

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("bridge grid needs at least 2 cells")

    @classmethod
    def for_spde(cls, c: float, sigma: float, grid: int = 256) -> "BridgeLaw":
        return cls(math.sqrt(sigma * sigma / (2.0 * c)), grid)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.grid + 1) / self.grid

    def covariance(self, x=None) -> np.ndarray:
        x = self.x if x is None else np.asarray(x, dtype=float)
        lo = np.minimum.outer(x, x)
        hi = np.maximum.outer(x, x)
        return self.scale ** 2 * lo * (1.0 - hi)


def standard_bridges(grid: int, size: int, rng) -> np.ndarray:
    """Exact standard bridge at the grid points: cumulative Gaussian increments minus the linear drift."""
    rng = as_generator(rng)
    inc = rng.standard_normal((size, grid)) / math.sqrt(grid)
    b = np.zeros((size, grid + 1))
    np.cumsum(inc, axis=1, out=b[:, 1:])
    b -= b[:, -1:] * (np.arange(grid + 1) / grid)
    b[:, -1] = 0.0
    return b


def sample_bridge(law: BridgeLaw, rng, size: int | None = None):
    """One :class:`FluctuationField` (``size=None``) or a ``(size, grid + 1)`` array."""
    b = law.scale * standard_bridges(law.grid, 1 if size is None else size, rng)
    return FluctuationField.from_values(b[0], "bridge") if size is None else b


# ---------------------------------------------------------------------------
# Excursion


def excursion_pdf(x, t: float = 0.5):
    """Density of the normalized excursion at time ``t``: ``2x^2 exp(-x^2/(2t(1-t))) / sqrt(2 pi t^3 (1-t)^3)``."""
    x = np.asarray(x, dtype=float)
    s = t * (1.0 - t)
    return np.where(x > 0, 2 * x * x * np.exp(-x * x / (2 * s)) / np.sqrt(2 * math.pi * s ** 3), 0.0)


def excursion_cdf(x, t: float = 0.5):
    """The excursion at ``t`` is ``sqrt(t(1-t))`` times a chi variable with 3 degrees of freedom."""
    return sps.chi(3).cdf(np.asarray(x, dtype=float) / math.sqrt(t * (1.0 - t)))


def excursion_mean(t: float = 0.5) -> float:
    return math.sqrt(t * (1.0 - t)) * 2.0 * math.sqrt(2.0 / math.pi)


def sample_excursion(grid: int, rng, size: int | None = None, method: str = "bessel3"):
    """Normalized Brownian excursion on ``grid`` cells.

    ``bessel3`` (default) takes the Euclidean norm of a three-dimensional
    standard bridge, which is exact in law at the grid points. ``vervaat``
    rotates a discretized bridge at its grid minimum; that is exact only as the
    grid is refined, since the true minimum falls between grid points.
    """
    if grid < 3:
        raise ValueError("excursion grid needs at least 3 cells")
    rng = as_generator(rng)
    m = 1 if size is None else size
    if method == "bessel3":
        b = standard_bridges(grid, 3 * m, rng).reshape(m, 3, grid + 1)
        e = np.sqrt((b * b).sum(axis=1))
    elif method == "vervaat":
        b = standard_bridges(grid, m, rng)
        body = b[:, :-1]
        amin = body.argmin(axis=1)
        idx = (amin[:, None] + np.arange(grid)[None, :]) % grid
        rot = np.take_along_axis(body, idx, axis=1) - body[np.arange(m), amin][:, None]
        e = np.concatenate([rot, np.zeros((m, 1))], axis=1)
    else:
        raise ValueError(f"unknown excursion method {method!r}")
    e[:, 0] = 0.0
    e[:, -1] = 0.0
    return FluctuationField.from_values(e[0], "excursion") if size is None else e


def concat_T_r(u1, u2, r: float, grid: int | None = None):
    """``sqrt(r) u1(x/r)`` on ``[0, r]`` followed by ``sqrt(1-r) u2((x-r)/(1-r))``.

    Works on :class:`FluctuationField` values or on tuples of them (applied
    componentwise). The output grid defaults to the finer of the two inputs.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    if isinstance(u1, tuple):
        return tuple(concat_T_r(a, b, r, grid) for a, b in zip(u1, u2))
    M = grid or max(u1.length, u2.length)
    x = np.arange(M + 1) / M
    left = math.sqrt(r) * u1(np.clip(x / r, 0.0, 1.0))
    right = math.sqrt(1.0 - r) * u2(np.clip((x - r) / (1.0 - r), 0.0, 1.0))
    return FluctuationField.from_values(np.where(x <= r, left, right))


def sample_conditioned_excursion(grid: int, r: float, rng, size: int | None = None):
    """Two independent excursions stitched by ``T_r``; ``r`` must be an interior grid point."""
    k = round(r * grid)
    if not 0 < k < grid or abs(k - r * grid) > 1e-9:
        raise ValueError("r must be an interior grid point")
    if k < 3 or grid - k < 3:
        raise ValueError("each side of r needs at least 3 cells")
    rng = as_generator(rng)
    m = 1 if size is None else size
    e1 = sample_excursion(k, rng, m)
    e2 = sample_excursion(grid - k, rng, m)
    out = np.concatenate([math.sqrt(r) * e1, math.sqrt(1.0 - r) * e2[:, 1:]], axis=1)
    return FluctuationField.from_values(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Modes of the additive stochastic heat equation


@dataclass(frozen=True)
class OUMode:
    """Coefficient of ``sqrt(2) sin(n pi x)`` for ``du = c u'' dt + sigma dW``."""

    n: int = 1
    c: float = 0.5
    sigma: float = 1.0

    @property
    def drift(self) -> float:
        return self.c * (self.n * math.pi) ** 2

    @property
    def stationary_variance(self) -> float:
        return self.sigma ** 2 / (2.0 * self.drift)


def ou_stats(mode: OUMode, t: float) -> tuple[float, float]:
    if t < 0:
        raise ValueError("t must be non-negative")
    return mode.stationary_variance, math.exp(-mode.drift * t)


def sine_mode(n: int = 1):
    return lambda x: math.sqrt(2.0) * np.sin(n * math.pi * np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Sigma measures


def _norm_sq(phi) -> float:
    return 0.0 if phi is None else phi.l2_norm_sq()


def sigma_limit_zrp(phi: TestFunction | None, c: float, sigma: float, samples: int, rng,
                    F: Callable | None = None, weighted: bool = True, grid: int = 512) -> ComplexEstimate:
    """Monte Carlo ``int F psi (i c <u, phi''> - sigma^2/2 ||phi||^2) dm`` over scaled bridges.

    With ``weighted=False`` the factor ``psi`` is dropped. ``F`` receives the
    ``(samples, grid + 1)`` array of field values.
    """
    if phi is None:
        return ComplexEstimate(0.0, 0.0, 0.0, 0.0, samples)
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    u = sample_bridge(BridgeLaw.for_spde(c, sigma, grid), rng, samples)
    a = pair_values(u, phi)
    a2 = pair_values(u, phi.second())
    val = 1j * c * a2 - 0.5 * sigma ** 2 * phi.l2_norm_sq()
    if weighted:
        val = val * np.exp(1j * a)
    if F is not None:
        val = val * F(u)
    return ComplexEstimate.from_samples(val)


def sigma_limit_zrp_exact(phi: TestFunction | None, c: float, sigma: float, weighted: bool = True) -> complex:
    """Closed form for ``F = 1``.

    Weighted, Gaussian integration by parts gives
    ``E[i c <u, phi''> psi] = (sigma^2/2) ||phi||^2 E[psi]`` so the total is 0.
    Unweighted, ``<u, phi''>`` is centred and only ``-sigma^2/2 ||phi||^2`` remains.
    """
    if phi is None or weighted:
        return 0j
    return complex(-0.5 * sigma ** 2 * phi.l2_norm_sq())


def bridge_pairing_variance(phi, scale: float = 1.0, grid: int = 2048) -> float:
    """``Var <scale * B, phi>`` for a standard bridge ``B``, by quadrature of the covariance kernel."""
    x = np.arange(grid + 1) / grid
    w = hat_weights(phi, grid) / grid
    return float(scale ** 2 * w @ BridgeLaw(1.0, grid).covariance(x) @ w)


def contact_density(r):
    """``(2 pi r^3 (1 - r)^3)^{-1/2}``."""
    r = np.asarray(r, dtype=float)
    return 1.0 / np.sqrt(2 * math.pi * (r * (1 - r)) ** 3)


def contact_density_integral(g: Callable, support: tuple[float, float]) -> float:
    """``int (2 pi r^3 (1-r)^3)^{-1/2} g(r) dr`` over a support strictly inside ``(0, 1)``."""
    s0, s1 = support
    if not 0.0 < s0 < s1 < 1.0:
        raise ValueError("support must avoid the singular endpoints 0 and 1")
    val, _ = integrate.quad(lambda r: float(contact_density(r)) * float(np.asarray(g(np.array([r])))[0]),
                            s0, s1, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


class _Mapped:
    """``x -> h(a + b x)`` restricted to ``[0, 1]``, for pairing rescaled pieces."""

    def __init__(self, h, a: float, b: float):
        self.h, self.a, self.b = h, a, b

    def __call__(self, x):
        return self.h(self.a + self.b * np.asarray(x, dtype=float))


class _Combo:
    """``(p * f + q * g) / sqrt 2`` with optional second derivative."""

    def __init__(self, f, g, p: float, q: float, order: int = 0):
        self.f, self.g, self.p, self.q, self.order = f, g, p, q, order

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for h, c in ((self.f, self.p), (self.g, self.q)):
            if h is not None and c != 0:
                out = out + c * (h.derivative(x, 2) if self.order == 2 else h(x))
        return out / math.sqrt(2.0)


@dataclass
class SigmaPairEvaluation:
    first: ComplexEstimate
    contact: ComplexEstimate

    @property
    def total(self) -> ComplexEstimate:
        return self.first + self.contact

    def to_dict(self) -> dict:
        return {"first": self.first.to_dict(), "contact": self.contact.to_dict(),
                "total": self.total.to_dict()}


def _support(phi_v, phi_w) -> tuple[float, float]:
    sup = [p.support for p in (phi_v, phi_w) if p is not None]
    if not sup:
        raise ValueError("at least one test function is needed")
    return min(s[0] for s in sup), max(s[1] for s in sup)


def sigma_pair_first(phi_v, phi_w, samples: int, rng, F: Callable | None = None,
                     grid: int = 512, weighted: bool = True) -> ComplexEstimate:
    """``1/2 int F psi (i<v, phi_v''> + i<w, phi_w''> - ||phi_v||^2 - ||phi_w||^2) dm`` with
    ``v = (S + D)/sqrt 2``, ``w = (S - D)/sqrt 2``, ``S`` a bridge and ``D`` an independent excursion.
    ``F`` receives the ``(v, w)`` value arrays."""
    rng = as_generator(rng)
    S = standard_bridges(grid, samples, rng)
    D = sample_excursion(grid, rng, samples)
    a, b = _Combo(phi_v, phi_w, 1, 1), _Combo(phi_v, phi_w, 1, -1)
    a2, b2 = _Combo(phi_v, phi_w, 1, 1, 2), _Combo(phi_v, phi_w, 1, -1, 2)
    theta = pair_values(S, a) + pair_values(D, b)
    lap = pair_values(S, a2) + pair_values(D, b2)
    val = 0.5 * (1j * lap - _norm_sq(phi_v) - _norm_sq(phi_w))
    if weighted:
        val = val * np.exp(1j * theta)
    if F is not None:
        r2 = math.sqrt(2.0)
        val = val * F((S + D) / r2, (S - D) / r2)
    return ComplexEstimate.from_samples(val)


def sigma_pair_contact(phi_v, phi_w, samples: int, rng, F: Callable | None = None,
                       nodes: int = 24, grid: int = 512, weighted: bool = True) -> ComplexEstimate:
    """``(i/2) int dr rho(r) b(r) E[F psi | D(r) = 0]`` with ``b = (phi_v - phi_w)/sqrt 2``.

    The ``r`` integral uses Gauss-Legendre nodes on the support of ``b`` (never
    the endpoints 0 or 1). At each node ``D`` is two independent excursions on
    ``grid`` cells each, and ``<D, b>`` is evaluated exactly by pulling ``b``
    back to each piece. ``samples`` is the total over all nodes.
    """
    rng = as_generator(rng)
    s0, s1 = _support(phi_v, phi_w)
    b = _Combo(phi_v, phi_w, 1, -1)
    a = _Combo(phi_v, phi_w, 1, 1)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    rs = s0 + (s1 - s0) * (xg + 1) / 2
    ws = wg * (s1 - s0) / 2
    if (rs <= 0).any() or (rs >= 1).any():
        raise ValueError("r nodes must lie strictly inside (0, 1)")
    per = max(2, samples // nodes)
    re = im = var_re = var_im = 0.0
    for r, w in zip(rs, ws):
        coef = 0.5 * w * float(contact_density(r)) * float(b(np.array([r]))[0])
        S = standard_bridges(grid, per, rng)
        e1 = sample_excursion(grid, rng, per)
        e2 = sample_excursion(grid, rng, per)
        theta = pair_values(S, a)
        theta = theta + r ** 1.5 * pair_values(e1, _Mapped(b, 0.0, r))
        theta = theta + (1 - r) ** 1.5 * pair_values(e2, _Mapped(b, r, 1 - r))
        val = np.exp(1j * theta) if weighted else np.ones(per, dtype=complex)
        if F is not None:
            x = np.arange(grid + 1) / grid
            left = np.sqrt(r) * np.array([np.interp(np.clip(x / r, 0, 1), x, e) for e in e1])
            right = np.sqrt(1 - r) * np.array([np.interp(np.clip((x - r) / (1 - r), 0, 1), x, e) for e in e2])
            D = np.where(x <= r, left, right)
            val = val * F((S + D) / math.sqrt(2), (S - D) / math.sqrt(2))
        z = 1j * coef * val
        re += z.real.mean()
        im += z.imag.mean()
        var_re += z.real.var(ddof=1) / per
        var_im += z.imag.var(ddof=1) / per
    return ComplexEstimate(re, im, math.sqrt(var_re), math.sqrt(var_im), per * nodes)


def sigma_limit_pair(phi_v, phi_w, samples: int, rng, F: Callable | None = None,
                     nodes: int = 24, grid: int = 512) -> SigmaPairEvaluation:
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    rng = as_generator(rng)
    first = sigma_pair_first(phi_v, phi_w, samples, rng, F, grid)
    if phi_v is phi_w or (phi_v is None and phi_w is None):
        contact = ComplexEstimate(0.0, 0.0, 0.0, 0.0, 0)
    else:
        contact = sigma_pair_contact(phi_v, phi_w, samples, rng, F, nodes, grid)
    return SigmaPairEvaluation(first, contact)


def contact_term_unweighted(phi_v, phi_w) -> complex:
    """``F = 1, psi = 1``: ``(i/2) int rho(r) (phi_v - phi_w)(r)/sqrt 2 dr`` by adaptive quadrature."""
    b = _Combo(phi_v, phi_w, 1, -1)
    return 0.5j * contact_density_integral(b, _support(phi_v, phi_w))
