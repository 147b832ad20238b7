"""Heat-bath (Gibbs sampler) dynamics for a gradient interface on ``{0, ..., N}``.

Each interior height ``h_i`` is resampled at rate ``N^2`` from
``exp(-V(h_i - h_{i-1}) - V(h_{i+1} - h_i))``, optionally restricted to
``h_i >= 0`` (hard wall) and to integers. This module is a model plugin: the
sampler follows the stated dynamics and no scaling limit is asserted for it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from numba import njit

from .lattice import FluctuationField
from .rng import as_generator

_TAIL_LOG = math.log(1e12)  # conditional mass cut-off 1e-12


class NonNormalizableError(ValueError):
    pass


@dataclass(frozen=True)
class Potential:
    """Convex ``V`` with at least linear growth at both ends.

    ``kind`` is ``quadratic`` (``kappa x^2 / 2``), ``abs`` (``beta |x|``) or
    ``table`` (piecewise-linear through ``(xs, vs)``, extended linearly).
    ``exact_weight`` optionally returns ``exp(-V(x))`` as a ``Fraction`` for
    integer ``x``, enabling rational detailed-balance checks.
    """

    kind: str
    param: float = 1.0
    integer: bool = False
    xs: tuple = ()
    vs: tuple = ()
    exact_weight: Callable[[int], Fraction] | None = field(default=None, compare=False)
    certificate: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kind not in ("quadratic", "abs", "table"):
            raise ValueError(f"unknown potential {self.kind!r}")
        if self.kind != "table" and self.param <= 0:
            raise ValueError("potential parameter must be positive")
        if self.kind == "table":
            xs = np.asarray(self.xs, dtype=float)
            if xs.size < 3 or (np.diff(xs) <= 0).any():
                raise ValueError("table potential needs >= 3 increasing abscissae")
            grid = xs
        else:
            grid = np.linspace(-20.0, 20.0, 4001)
        v = self(grid)
        second = v[2:] - 2 * v[1:-1] + v[:-2] if self.kind != "table" else np.diff(np.diff(v) / np.diff(grid))
        cert = float(second.min())
        object.__setattr__(self, "certificate", cert)
        if cert < -1e-12:
            raise ValueError(f"potential is not convex (second difference {cert})")
        lo_slope, hi_slope = self.end_slopes
        if not (lo_slope < 0 < hi_slope):
            raise NonNormalizableError("potential must grow at least linearly at both ends")

    @classmethod
    def quadratic(cls, kappa: float = 1.0, integer: bool = False, q: Fraction | None = None) -> "Potential":
        """``q`` (rational, with ``q = exp(-kappa/2)``) enables exact weights ``q^{x^2}``."""
        ew = (lambda x: q ** (x * x)) if q is not None else None
        if q is not None:
            kappa = -2.0 * math.log(float(q))
        return cls("quadratic", float(kappa), integer, exact_weight=ew)

    @classmethod
    def absolute(cls, beta: float = 1.0, integer: bool = False, q: Fraction | None = None) -> "Potential":
        """``q`` (rational, with ``q = exp(-beta)``) enables exact weights ``q^{|x|}``."""
        ew = (lambda x: q ** abs(x)) if q is not None else None
        if q is not None:
            beta = -math.log(float(q))
        return cls("abs", float(beta), integer, exact_weight=ew)

    @classmethod
    def table(cls, xs, vs, integer: bool = False) -> "Potential":
        return cls("table", 0.0, integer, tuple(map(float, xs)), tuple(map(float, vs)))

    @classmethod
    def parse(cls, text: str, integer: bool = False) -> "Potential":
        if text == "quadratic":
            return cls.quadratic(integer=integer)
        if text == "abs":
            return cls.absolute(integer=integer)
        if text.startswith("table:"):
            rows = [ln.replace(",", " ").split() for ln in Path(text[6:]).read_text().splitlines()]
            rows = [r for r in rows if r and not r[0].startswith("#")]
            try:
                data = np.array([[float(a), float(b)] for a, b in rows])
            except ValueError:
                data = np.array([[float(a), float(b)] for a, b in rows[1:]])
            return cls.table(data[:, 0], data[:, 1], integer)
        raise ValueError(f"unknown potential {text!r}")

    @property
    def end_slopes(self) -> tuple[float, float]:
        if self.kind == "table":
            xs, vs = np.asarray(self.xs), np.asarray(self.vs)
            return (vs[1] - vs[0]) / (xs[1] - xs[0]), (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])
        return (-1.0, 1.0) if self.kind == "abs" else (-math.inf, math.inf)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * self.param * x * x
        if self.kind == "abs":
            return self.param * np.abs(x)
        xs, vs = np.asarray(self.xs), np.asarray(self.vs)
        lo, hi = self.end_slopes
        out = np.interp(x, xs, vs)
        out = np.where(x < xs[0], vs[0] + lo * (x - xs[0]), out)
        return np.where(x > xs[-1], vs[-1] + hi * (x - xs[-1]), out)


@dataclass(frozen=True)
class GradPhiState:
    heights: np.ndarray
    hard_wall: bool = False
    clock: float = 0.0

    def __post_init__(self):
        h = np.array(self.heights, copy=True)
        if h.ndim != 1 or h.size < 2:
            raise ValueError("need heights h_0..h_N with N >= 1")
        if h[0] != 0 or h[-1] != 0:
            raise ValueError("boundary heights must be 0")
        if self.hard_wall and (h < 0).any():
            raise ValueError("hard wall violated")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def n(self) -> int:
        return self.heights.size - 1


# ---------------------------------------------------------------------------
# Exact conditional samplers (numba, shared with the kernels)


@njit(cache=True)
def _truncnorm_pos(mu, sd, rng):
    """``N(mu, sd^2)`` conditioned on ``>= 0``: plain rejection or Robert's exponential proposal."""
    alpha = -mu / sd
    if alpha <= 0.5:
        while True:
            z = rng.standard_normal()
            if z >= alpha:
                return mu + sd * z
    lam = 0.5 * (alpha + math.sqrt(alpha * alpha + 4.0))
    while True:
        z = alpha + rng.exponential(1.0) / lam
        if rng.random() <= math.exp(-0.5 * (z - lam) ** 2):
            return mu + sd * z


@njit(cache=True)
def _pw_exp(lo, hi, rate, wall, rng):
    """Density ∝ 1 on [lo, hi], ∝ exp(-rate d) at distance d outside; optionally cut at 0."""
    left_end = lo
    if wall and hi < 0.0:
        # only the right tail beyond 0 survives
        return rng.exponential(1.0 / rate)
    a = max(lo, 0.0) if wall else lo
    flat = hi - a
    if wall:
        # left tail restricted to [0, lo)
        span = max(lo, 0.0)
        left = (1.0 - math.exp(-rate * span)) / rate
    else:
        left = 1.0 / rate
    right = 1.0 / rate
    u = rng.random() * (flat + left + right)
    if u < flat:
        return a + u
    u -= flat
    if u < left:
        if wall:
            span = max(left_end, 0.0)
            e = -math.log(1.0 - rng.random() * (1.0 - math.exp(-rate * span))) / rate
        else:
            e = rng.exponential(1.0 / rate)
        return lo - e
    return hi + rng.exponential(1.0 / rate)


@njit(cache=True)
def _int_conditional(a, b, code, param, wall, rng):
    """Integer heat-bath draw over a window whose excluded mass is below 1e-12."""
    lo = min(a, b)
    hi = max(a, b)
    if code == 0:
        reach = int(math.ceil(math.sqrt(2.0 * 28.0 / param))) + 2
    else:
        reach = int(math.ceil(28.0 / (2.0 * param))) + 2
    x0 = lo - reach
    x1 = hi + reach
    if wall:
        x0 = max(x0, 0)
        if x1 < x0:
            x1 = x0 + reach
    n = x1 - x0 + 1
    logw = np.empty(n)
    m = -1e300
    for t in range(n):
        x = x0 + t
        if code == 0:
            lw = -0.5 * param * ((x - a) ** 2 + (b - x) ** 2)
        else:
            lw = -param * (abs(x - a) + abs(b - x))
        logw[t] = lw
        if lw > m:
            m = lw
    tot = 0.0
    for t in range(n):
        logw[t] = math.exp(logw[t] - m)
        tot += logw[t]
    u = rng.random() * tot
    acc = 0.0
    for t in range(n):
        acc += logw[t]
        if u < acc:
            return x0 + t
    return x1


@njit(cache=True)
def _cont_conditional(a, b, code, param, wall, rng):
    if code == 0:
        mu = 0.5 * (a + b)
        sd = math.sqrt(0.5 / param)
        if wall:
            return _truncnorm_pos(mu, sd, rng)
        return mu + sd * rng.standard_normal()
    return _pw_exp(min(a, b), max(a, b), 2.0 * param, wall, rng)


@njit(cache=True)
def _gradphi_kernel(h, integer, code, param, wall, checkpoints, out, rng):
    N = h.size - 1
    total = (N - 1) * float(N) * N
    t = 0.0
    events = 0
    for c in range(checkpoints.size):
        n_ev = rng.poisson(total * (checkpoints[c] - t)) if N > 1 else 0
        for _ in range(n_ev):
            i = 1 + int(rng.random() * (N - 1))
            if i > N - 1:
                i = N - 1
            if integer:
                h[i] = _int_conditional(int(h[i - 1]), int(h[i + 1]), code, param, wall, rng)
            else:
                h[i] = _cont_conditional(h[i - 1], h[i + 1], code, param, wall, rng)
            if wall and h[i] < 0:
                return -1
        events += n_ev
        t = checkpoints[c]
        out[c] = h
    return events


def _code(V: Potential) -> int:
    return {"quadratic": 0, "abs": 1}.get(V.kind, -1)


# ---------------------------------------------------------------------------
# Python-level API


def conditional_logdensity(V: Potential, a: float, b: float):
    return lambda x: -V(np.asarray(x, dtype=float) - a) - V(b - np.asarray(x, dtype=float))


def _grid_window(V: Potential, a: float, b: float, wall: bool):
    """Bracket containing all but 1e-12 of the conditional mass (log-concavity makes this safe)."""
    f = conditional_logdensity(V, a, b)
    lo, hi = min(a, b), max(a, b)
    xs = np.linspace(lo, hi, 64) if hi > lo else np.array([lo])
    peak = float(np.max(f(xs)))
    step = 1.0
    left, right = lo - step, hi + step
    while f(left) > peak - _TAIL_LOG - 5:
        step *= 2
        left = lo - step
    step = 1.0
    while f(right) > peak - _TAIL_LOG - 5:
        step *= 2
        right = hi + step
    if wall:
        left = max(left, 0.0)
        right = max(right, left + 1.0)
    return left, right


def grid_inverse_cdf_sampler(V: Potential, a: float, b: float, wall: bool, integer: bool,
                             resolution: int = 8192):
    """Inverse-CDF tables ``(support, cdf)`` for the conditional law (the generic sampler and test oracle)."""
    left, right = _grid_window(V, a, b, wall)
    f = conditional_logdensity(V, a, b)
    if integer:
        xs = np.arange(math.floor(left), math.ceil(right) + 1)
        if wall:
            xs = xs[xs >= 0]
        lw = f(xs)
        p = np.exp(lw - lw.max())
        c = np.cumsum(p)
        return xs, c / c[-1]
    xs = np.linspace(left, right, resolution + 1)
    lw = f(xs)
    p = np.exp(lw - lw.max())
    cell = 0.5 * (p[1:] + p[:-1]) * np.diff(xs)
    c = np.concatenate([[0.0], np.cumsum(cell)])
    return xs, c / c[-1]


def _draw_from_table(xs, c, u, integer):
    if integer:
        return xs[np.searchsorted(c, u, side="right").clip(0, xs.size - 1)]
    return np.interp(u, c, xs)


def heat_bath_update(state: GradPhiState, i: int, V: Potential, rng) -> GradPhiState:
    """Resample ``h_i`` from its conditional law given ``h_{i-1}, h_{i+1}``."""
    rng = as_generator(rng)
    h = np.array(state.heights, copy=True)
    if not 1 <= i <= h.size - 2:
        raise IndexError(f"site {i} is not interior")
    a, b = h[i - 1], h[i + 1]
    code = _code(V)
    if V.integer:
        if V.kind == "abs":
            h[i] = two_sided_geometric(int(a), int(b), V.param, state.hard_wall, rng)
        elif code == 0:
            h[i] = _int_conditional(int(a), int(b), 0, V.param, state.hard_wall, rng)
        else:
            xs, c = grid_inverse_cdf_sampler(V, a, b, state.hard_wall, True)
            h[i] = _draw_from_table(xs, c, rng.random(), True)
    elif code >= 0:
        h[i] = _cont_conditional(float(a), float(b), code, V.param, state.hard_wall, rng)
    else:
        xs, c = grid_inverse_cdf_sampler(V, a, b, state.hard_wall, False)
        h[i] = _draw_from_table(xs, c, rng.random(), False)
    return GradPhiState(h, state.hard_wall, state.clock)


def two_sided_geometric(a: int, b: int, beta: float, wall: bool, rng) -> int:
    """Integer law ∝ ``exp(-beta(|x - a| + |b - x|))``: flat on ``[lo, hi]``, geometric tails of ratio ``exp(-2 beta)``."""
    rng = as_generator(rng)
    lo, hi = min(a, b), max(a, b)
    q = math.exp(-2.0 * beta)
    tail = q / (1.0 - q)
    if wall and hi < 0:
        return int(rng.geometric(1.0 - q) - 1)
    start = max(lo, 0) if wall else lo
    flat = hi - start + 1
    if wall:
        span = max(lo, 0)  # admissible left-tail depths 1..span
        left = q * (1.0 - q ** span) / (1.0 - q)
    else:
        span = None
        left = tail
    u = rng.random() * (flat + left + tail)
    if u < flat:
        return int(start + min(int(u), flat - 1))
    u -= flat
    if u < left:
        if span is None:
            return int(lo - rng.geometric(1.0 - q))
        # truncated geometric on 1..span by inversion
        v = rng.random() * (1.0 - q ** span)
        d = int(math.floor(math.log1p(-v) / math.log(q))) + 1
        return int(lo - min(max(d, 1), span))
    return int(hi + rng.geometric(1.0 - q))


@dataclass
class GradPhiTrajectory:
    times: np.ndarray
    heights: np.ndarray  # (ncp, N + 1)
    events: int


def evolve(state: GradPhiState, horizon: float, V: Potential, rng, checkpoints=None) -> GradPhiTrajectory:
    """Sites fire as independent rate-``N^2`` clocks; the state is recorded at ``checkpoints``."""
    rng = as_generator(rng)
    cp = np.array([horizon] if checkpoints is None else checkpoints, dtype=float)
    N = state.n
    code = _code(V)
    if code >= 0:
        h = np.array(state.heights, dtype=np.int64 if V.integer else float)
        out = np.zeros((cp.size, N + 1), dtype=h.dtype)
        ev = _gradphi_kernel(h, V.integer, code, V.param, state.hard_wall, cp, out, rng)
        if ev < 0:
            raise AssertionError("hard wall violated")
        return GradPhiTrajectory(cp, out, int(ev))
    # generic potentials run through the Python heat-bath sampler
    cur = state
    t = 0.0
    out = []
    events = 0
    total = (N - 1) * N * N
    for target in cp:
        n_ev = rng.poisson(total * (target - t)) if N > 1 else 0
        for _ in range(n_ev):
            cur = heat_bath_update(cur, 1 + int(rng.integers(N - 1)), V, rng)
        events += n_ev
        t = target
        out.append(np.array(cur.heights))
    return GradPhiTrajectory(cp, np.array(out), events)


def fluctuation_field(state: GradPhiState) -> FluctuationField:
    h = state.heights
    return FluctuationField(h, math.sqrt(state.n), "sqrt(N)")


def sample_gaussian_bridge(n: int, kappa: float, rng, size: int = 1) -> np.ndarray:
    """Exact equilibrium for ``V = kappa x^2 / 2`` without wall: Gaussian increments minus the linear drift."""
    rng = as_generator(rng)
    inc = rng.standard_normal((size, n)) / math.sqrt(kappa)
    h = np.zeros((size, n + 1))
    np.cumsum(inc, axis=1, out=h[:, 1:])
    h -= h[:, -1:] * (np.arange(n + 1) / n)
    h[:, -1] = 0.0
    return h


def sample_equilibrium(n: int, V: Potential, rng, hard_wall: bool = False, size: int = 1,
                       burn_in: float = 4.0) -> np.ndarray:
    """Exact for the unconstrained continuous Gaussian case; otherwise heat-bath from flat for ``burn_in`` time units."""
    rng = as_generator(rng)
    if V.kind == "quadratic" and not V.integer and not hard_wall:
        return sample_gaussian_bridge(n, V.param, rng, size)
    dtype = np.int64 if V.integer else float
    out = np.zeros((size, n + 1), dtype=dtype)
    for s in range(size):
        st = GradPhiState(np.zeros(n + 1, dtype=dtype), hard_wall)
        out[s] = evolve(st, burn_in, V, rng).heights[-1]
    return out


def gibbs_log_weight(h, V: Potential) -> float:
    return -float(np.sum(V(np.diff(np.asarray(h, dtype=float)))))
