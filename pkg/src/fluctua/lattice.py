"""Configurations, rescaled height fields and test-function pairings.

Fields keep their raw lattice data (integers where the model is integral)
together with the normalization, so path arithmetic stays exact until the
values are actually requested.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy import integrate


class InvariantError(ValueError):
    """A configuration violates the invariants of its type."""


def _frozen(a, dtype=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Configurations


@dataclass(frozen=True)
class OccupationVector:
    """Particle counts on sites ``1..N`` (stored 0-based).

    ``density`` tags the vector as canonical for that density: the total
    count must then equal ``floor(N * density)``.
    """

    counts: np.ndarray
    density: float | None = None

    def __post_init__(self):
        counts = _frozen(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise InvariantError("occupation vector must be a non-empty 1-d sequence")
        if (counts < 0).any():
            raise InvariantError("negative particle count")
        object.__setattr__(self, "counts", counts)
        if self.density is not None:
            expected = canonical_total(counts.size, self.density)
            if counts.sum() != expected:
                raise InvariantError(
                    f"total {counts.sum()} != floor(N*density) = {expected}"
                )

    @property
    def n_sites(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return self.n_sites


def canonical_total(n_sites: int, density: float) -> int:
    # guard against 0.1*30 = 3.0000000000000004 style rounding
    return int(math.floor(n_sites * density + 1e-9))


@dataclass(frozen=True)
class PathPair:
    """Two ordered +-1 lattice bridges ``v >= w`` on ``{0, ..., 2N}`` pinned at 0."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = _frozen(self.v, dtype=np.int64)
        w = _frozen(self.w, dtype=np.int64)
        if v.ndim != 1 or v.shape != w.shape:
            raise InvariantError("v and w must be 1-d arrays of equal length")
        if v.size < 3 or (v.size - 1) % 2:
            raise InvariantError("paths must have an even number 2N >= 2 of steps")
        for name, p in (("v", v), ("w", w)):
            if p[0] != 0 or p[-1] != 0:
                raise InvariantError(f"{name} is not pinned at 0")
            if (np.abs(np.diff(p)) != 1).any():
                raise InvariantError(f"{name} has an increment other than +-1")
        if (v < w).any():
            raise InvariantError("ordering v >= w violated")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @property
    def length(self) -> int:
        """Number of steps 2N."""
        return int(self.v.size - 1)

    @property
    def half_length(self) -> int:
        return self.length // 2

    def as_array(self) -> np.ndarray:
        return np.stack([self.v, self.w])

    def __eq__(self, other):
        if not isinstance(other, PathPair):
            return NotImplemented
        return np.array_equal(self.v, other.v) and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash((self.v.tobytes(), self.w.tobytes()))


class Corner(enum.Enum):
    UPWARD = "upward"  # local maximum, Laplacian -2
    DOWNWARD = "downward"  # local minimum, Laplacian +2
    NONE = "none"


def laplacian(path) -> np.ndarray:
    """Discrete Laplacian at interior sites 1..len-2 (index 0 <-> site 1)."""
    p = np.asarray(path)
    return p[2:] - 2 * p[1:-1] + p[:-2]


def corner_type(path, k: int) -> Corner:
    p = np.asarray(path)
    if not 1 <= k <= p.size - 2:
        raise IndexError(f"site {k} outside 1..{p.size - 2}")
    lap = p[k + 1] - 2 * p[k] + p[k - 1]
    if lap == -2:
        return Corner.UPWARD
    if lap == 2:
        return Corner.DOWNWARD
    return Corner.NONE


def contact_points(pair: PathPair) -> list[int]:
    eq = pair.v == pair.w
    inner = eq[:-2] & eq[1:-1] & eq[2:]
    return [int(k) for k in np.flatnonzero(inner) + 1]


# ---------------------------------------------------------------------------
# Fields


@dataclass(frozen=True)
class FluctuationField:
    """Piecewise-linear function on ``[0, 1]`` given at nodes ``k / L``.

    The value at node ``k`` is ``raw[k] / scale``.
    """

    raw: np.ndarray
    scale: float = 1.0
    normalization: str = ""

    def __post_init__(self):
        raw = np.asarray(self.raw)
        if raw.dtype.kind not in "iuf":
            raw = raw.astype(float)
        raw = _frozen(raw)
        if raw.ndim != 1 or raw.size < 2:
            raise InvariantError("a field needs at least two grid values")
        if not self.scale > 0:
            raise InvariantError("scale must be positive")
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def from_values(cls, values, normalization: str = "") -> "FluctuationField":
        return cls(np.asarray(values, dtype=float), 1.0, normalization)

    @property
    def length(self) -> int:
        return int(self.raw.size - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.raw.size) / self.length

    @property
    def values(self) -> np.ndarray:
        return self.raw / self.scale

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    def __add__(self, other: "FluctuationField") -> "FluctuationField":
        if not isinstance(other, FluctuationField):
            return NotImplemented
        a, b = _common_grid(self, other)
        return FluctuationField.from_values(a + b)

    def __sub__(self, other: "FluctuationField") -> "FluctuationField":
        if not isinstance(other, FluctuationField):
            return NotImplemented
        a, b = _common_grid(self, other)
        return FluctuationField.from_values(a - b)

    def __mul__(self, c: float) -> "FluctuationField":
        return FluctuationField(self.raw * float(c), self.scale, self.normalization)

    __rmul__ = __mul__

    def refine(self, factor: int) -> np.ndarray:
        """Values on the grid ``k / (factor * L)`` (exact for piecewise-linear data)."""
        fine = np.arange(self.length * factor + 1) / (self.length * factor)
        return np.interp(fine, self.grid, self.values)


def _common_grid(f: FluctuationField, g: FluctuationField):
    if f.length == g.length:
        return f.values, g.values
    lcm = math.lcm(f.length, g.length)
    return f.refine(lcm // f.length), g.refine(lcm // g.length)


def height_from_occupations(occ: OccupationVector, density: float) -> FluctuationField:
    """Height field ``N^{-1/2} sum_{j<=k} (n(j) - density)`` on the grid ``k/N``."""
    if canonical_total(occ.n_sites, density) != occ.total:
        raise InvariantError("occupation vector is not canonical for this density")
    n = occ.n_sites
    raw = np.concatenate([[0.0], np.cumsum(occ.counts) - density * np.arange(1, n + 1)])
    if float(density).is_integer():
        raw = np.rint(raw).astype(np.int64)
    return FluctuationField(raw, math.sqrt(n), "sqrt(N)")


def rescale_pair(pair: PathPair) -> tuple[FluctuationField, FluctuationField]:
    s = math.sqrt(pair.length)
    return (
        FluctuationField(pair.v, s, "sqrt(2N)"),
        FluctuationField(pair.w, s, "sqrt(2N)"),
    )


def l1_distance(f: FluctuationField, g: FluctuationField) -> float:
    """Exact L1 norm of the piecewise-linear difference ``f - g``."""
    if not math.isclose(f.scale, g.scale, rel_tol=1e-12):
        raise InvariantError(f"scale mismatch: {f.scale} vs {g.scale}")
    if f.length == g.length:
        d = (f.raw - g.raw) / f.scale
        h = 1.0 / f.length
    else:
        a, b = _common_grid(f, g)
        d = a - b
        h = 1.0 / (d.size - 1)
    return piecewise_linear_l1(d, h)


def piecewise_linear_l1(d: np.ndarray, h: float) -> float:
    d = np.asarray(d, dtype=float)
    a, b = d[:-1], d[1:]
    same = a * b >= 0
    absa, absb = np.abs(a), np.abs(b)
    denom = np.where(same, 1.0, absa + absb)
    cell = np.where(same, 0.5 * (absa + absb), 0.5 * (a * a + b * b) / denom)
    return float(h * cell.sum())


# ---------------------------------------------------------------------------
# Test functions

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def hat_weights(func: Callable[[np.ndarray], np.ndarray], L: int) -> np.ndarray:
    """``Phi_k = L * int hat_k(x) func(x) dx`` for the hat basis on ``k / L``.

    With these weights ``<f, func> = sum_k f(k/L) Phi_k / L`` exactly for any
    piecewise-linear ``f`` on that grid (up to the 8-point Gauss rule per cell).
    """
    cells = np.arange(L)[:, None]
    x = (cells + _GL_NODES[None, :]) / L
    fx = func(x) * _GL_WEIGHTS[None, :]
    left = (fx * (1.0 - _GL_NODES[None, :])).sum(axis=1)
    right = (fx * _GL_NODES[None, :]).sum(axis=1)
    out = np.zeros(L + 1)
    out[:-1] += left
    out[1:] += right
    return out


@dataclass(frozen=True, eq=False)
class TestFunction:
    """C^2 function compactly supported in ``(s0, s1)`` with closed-form derivatives."""

    __test__ = False  # keep pytest from collecting this class

    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    d2phi: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    smoothness: str = "C2"
    name: str = ""
    resolution: int = 1024
    grid_phi: np.ndarray = field(init=False, repr=False)
    grid_dphi: np.ndarray = field(init=False, repr=False)
    grid_d2phi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s0, s1 = self.support
        if not 0.0 < s0 < s1 < 1.0:
            raise InvariantError("support must satisfy 0 < s0 < s1 < 1")
        x = np.arange(self.resolution + 1) / self.resolution
        object.__setattr__(self, "grid_phi", _frozen(self(x)))
        object.__setattr__(self, "grid_dphi", _frozen(self.derivative(x, 1)))
        object.__setattr__(self, "grid_d2phi", _frozen(self.derivative(x, 2)))

    def _mask(self, x):
        s0, s1 = self.support
        return (x > s0) & (x < s1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        m = self._mask(x)
        out = np.zeros_like(x)
        out[m] = self.phi(x[m])
        return out

    def derivative(self, x, order: int = 1):
        x = np.asarray(x, dtype=float)
        fn = {0: self.phi, 1: self.dphi, 2: self.d2phi}[order]
        m = self._mask(x)
        out = np.zeros_like(x)
        out[m] = fn(x[m])
        return out

    def second(self) -> "TestFunction":
        """``phi''`` viewed as a (non-C^2) function for pairings."""
        return _Derived(self)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(
            lambda x: c * self.phi(x),
            lambda x: c * self.dphi(x),
            lambda x: c * self.d2phi(x),
            self.support,
            self.smoothness,
            f"{c}*{self.name}",
            self.resolution,
        )

    def weights(self, L: int) -> np.ndarray:
        return _cached_weights(self, L)

    def l2_norm_sq(self) -> float:
        s0, s1 = self.support
        val, _ = integrate.quad(lambda x: float(self.phi(np.array([x]))[0]) ** 2, s0, s1,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    def integral(self) -> float:
        s0, s1 = self.support
        val, _ = integrate.quad(lambda x: float(self.phi(np.array([x]))[0]), s0, s1,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val


class _Derived:
    """Second derivative of a test function, usable wherever pairings need weights."""

    def __init__(self, base: TestFunction):
        self.base = base
        self.support = base.support

    def __call__(self, x):
        return self.base.derivative(x, 2)

    def weights(self, L: int) -> np.ndarray:
        return _cached_weights(self, L)


@lru_cache(maxsize=256)
def _cached_weights(fn, L: int) -> np.ndarray:
    w = hat_weights(fn, L)
    w.setflags(write=False)
    return w


def bump(s0: float = 0.25, s1: float = 0.75, amplitude: float = 1.0) -> TestFunction:
    """Smooth bump ``A exp(1 - 1/(1 - y^2))`` on ``(s0, s1)``, ``y`` the centred coordinate."""
    c = 0.5 * (s0 + s1)
    h = 0.5 * (s1 - s0)
    A = float(amplitude)

    def phi(x):
        y = (x - c) / h
        q = 1.0 - y * y
        return A * np.exp(1.0 - 1.0 / q)

    def dphi(x):
        y = (x - c) / h
        q = 1.0 - y * y
        return phi(x) * (-2.0 * y / (q * q)) / h

    def d2phi(x):
        y = (x - c) / h
        q = 1.0 - y * y
        g = -2.0 * y / (q * q)
        dg = -2.0 / (q * q) - 8.0 * y * y / (q ** 3)
        return phi(x) * (g * g + dg) / (h * h)

    return TestFunction(phi, dphi, d2phi, (s0, s1), "Cinf", f"bump({s0},{s1},{A})")


def sine_bump(s0: float = 0.25, s1: float = 0.75, amplitude: float = 1.0) -> TestFunction:
    """``A sin^4(pi (x - s0) / (s1 - s0))`` on ``(s0, s1)``; C^3 across the support ends."""
    ell = s1 - s0
    k = math.pi / ell
    A = float(amplitude)

    def phi(x):
        return A * np.sin(k * (x - s0)) ** 4

    def dphi(x):
        s, c = np.sin(k * (x - s0)), np.cos(k * (x - s0))
        return 4.0 * A * k * s ** 3 * c

    def d2phi(x):
        s, c = np.sin(k * (x - s0)), np.cos(k * (x - s0))
        return A * k * k * (12.0 * s * s * c * c - 4.0 * s ** 4)

    return TestFunction(phi, dphi, d2phi, (s0, s1), "C3", f"sine_bump({s0},{s1},{A})")


def inner_product(f: FluctuationField, phi) -> float:
    """Exact integral of the piecewise-linear field against ``phi``."""
    w = phi.weights(f.length) if hasattr(phi, "weights") else hat_weights(phi, f.length)
    return float(np.dot(f.raw, w) / (f.scale * f.length))


def pair_values(values: np.ndarray, phi) -> np.ndarray:
    """Batched pairing: rows of ``values`` are fields on a common uniform grid."""
    values = np.asarray(values, dtype=float)
    L = values.shape[-1] - 1
    w = phi.weights(L) if hasattr(phi, "weights") else hat_weights(phi, L)
    return values @ w / L


# ---------------------------------------------------------------------------
# CSV


def field_to_csv(f: FluctuationField, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", "value"])
        for x, val in zip(f.grid, f.values):
            wr.writerow([repr(float(x)), repr(float(val))])


def field_from_csv(path: str | Path) -> FluctuationField:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return FluctuationField.from_values([float(r["value"]) for r in rows])


def pair_to_csv(pair: PathPair, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["k", "v", "w"])
        for k, (a, b) in enumerate(zip(pair.v, pair.w)):
            wr.writerow([k, int(a), int(b)])


def pair_from_csv(path: str | Path) -> PathPair:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return PathPair([int(r["v"]) for r in rows], [int(r["w"]) for r in rows])


def fields_to_csv(grid: np.ndarray, columns: dict[str, Iterable[float]], path: str | Path) -> None:
    """Several fields sharing a grid, one column each."""
    names = list(columns)
    cols = [np.asarray(list(columns[n]), dtype=float) for n in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x", *names])
        for i, x in enumerate(grid):
            wr.writerow([repr(float(x)), *(repr(float(c[i])) for c in cols)])
