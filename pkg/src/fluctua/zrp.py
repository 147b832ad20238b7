"""Zero-range process on ``{1, ..., N}`` with reflecting ends.

A particle leaves site ``i`` at rate ``N^2 tau(n(i)) / 2`` towards each allowed
neighbour (site 1 only jumps right, site N only left). Time is diffusive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy import optimize, special

from .lattice import FluctuationField, InvariantError, OccupationVector, canonical_total
from .rng import as_generator


class FugacityError(ValueError):
    pass


class DensityError(ValueError):
    pass


class DegenerateRateError(ValueError):
    pass


class OrderViolation(AssertionError):
    pass


# ---------------------------------------------------------------------------
# Rates and single-site laws


@dataclass(frozen=True)
class RateFunction:
    """Non-decreasing ``tau`` with ``tau(0) = 0``, tabulated on ``0..K`` and extended beyond.

    ``kind`` fixes the extension: ``linear`` (tau(k) = k), ``indicator`` (1 for
    k >= 1) or ``table`` (held at its last value). ``growth`` is ``(C, p)`` with
    ``tau(k) <= C k^p``.
    """

    table: np.ndarray
    kind: str = "table"
    growth: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        t.setflags(write=False)
        if t.ndim != 1 or t.size < 2:
            raise InvariantError("rate table needs tau(0) and tau(1) at least")
        if t[0] != 0.0:
            raise InvariantError("tau(0) must be 0")
        if (np.diff(t) < 0).any():
            raise InvariantError("tau must be non-decreasing")
        C, p = self.growth
        k = np.arange(1, t.size)
        if (t[1:] > C * k ** p * (1 + 1e-12)).any():
            raise InvariantError(f"tau exceeds the declared growth bound {C} k^{p}")
        if self.kind not in ("linear", "indicator", "table"):
            raise InvariantError(f"unknown rate kind {self.kind!r}")
        object.__setattr__(self, "table", t)

    @classmethod
    def linear(cls, kmax: int = 64) -> "RateFunction":
        return cls(np.arange(kmax + 1, dtype=float), "linear", (1.0, 1.0))

    @classmethod
    def indicator(cls) -> "RateFunction":
        return cls(np.array([0.0, 1.0]), "indicator", (1.0, 0.0))

    @classmethod
    def from_table(cls, values: Sequence[float]) -> "RateFunction":
        v = np.asarray(values, dtype=float)
        return cls(v, "table", (float(v.max()), 0.0))

    @classmethod
    def parse(cls, text: str) -> "RateFunction":
        """``linear``, ``indicator`` or ``table:<file>`` (numbers separated by commas or whitespace)."""
        if text == "linear":
            return cls.linear()
        if text == "indicator":
            return cls.indicator()
        if text.startswith("table:"):
            raw = Path(text[len("table:"):]).read_text().replace(",", " ").split()
            return cls.from_table([float(x) for x in raw])
        raise ValueError(f"unknown rate function {text!r}")

    def __call__(self, k):
        k = np.asarray(k, dtype=np.int64)
        K = self.table.size - 1
        inside = np.minimum(k, K)
        out = self.table[inside]
        if self.kind == "linear":
            out = np.where(k > K, k.astype(float), out)
        return out

    def values(self, kmax: int) -> np.ndarray:
        return np.asarray(self(np.arange(kmax + 1)), dtype=float)

    @property
    def a_star(self) -> float:
        """Radius of convergence of ``sum_k a^k / prod_{i<=k} tau(i)``."""
        if self.kind == "linear":
            return math.inf
        return float(self.table[-1])

    def describe(self) -> str:
        return self.kind if self.kind != "table" else "table:" + ",".join(repr(float(x)) for x in self.table)


def _log_weights(tau: RateFunction, a: float, kmax: int) -> np.ndarray:
    t = tau.values(kmax)[1:]
    return np.concatenate([[0.0], np.cumsum(math.log(a) - np.log(t))])


@dataclass(frozen=True)
class GrandCanonicalLaw:
    """Truncated ``nu_a(k) ∝ a^k / prod_{i<=k} tau(i)`` with its moments.

    ``mean`` is the expected occupation, ``alpha`` its variance, ``tau_bar``
    the mean rate, ``gamma`` the variance of the rate and ``rho`` the
    covariance of occupation and rate (both ``tau_bar`` and ``rho`` equal ``a``).
    """

    a: float
    pmf: np.ndarray
    log_Z: float
    tau_bar: float
    alpha: float
    rho: float
    gamma: float
    tail_bound: float
    mean: float

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        return c

    def sample(self, rng, size) -> np.ndarray:
        rng = as_generator(rng)
        return np.searchsorted(self.cdf, rng.random(size), side="right").astype(np.int64)


_KMAX_CAP = 2_000_000


def build_nu(tau: RateFunction, a: float, tail_tol: float = 1e-14) -> GrandCanonicalLaw:
    if tau(1) <= 0:
        raise DegenerateRateError("tau(1) = 0: the single-site law is degenerate")
    if not 0 < a < tau.a_star:
        raise FugacityError(f"fugacity {a} outside (0, a*) with a* = {tau.a_star}")
    # ratios a / tau(k+1) are non-increasing, so once below 1 the tail is geometric
    kmax = max(16, int(2 * a) + 16)
    while True:
        logw = _log_weights(tau, a, kmax)
        r = a / float(tau(kmax + 1))
        lz = special.logsumexp(logw)
        if r < 1:
            tail = math.exp(logw[-1] - lz) * r / (1 - r)
            if tail <= tail_tol:
                break
        if kmax > _KMAX_CAP:
            raise FugacityError(f"series for a = {a} does not reach tail {tail_tol} by k = {_KMAX_CAP}")
        kmax *= 2
    pmf = np.exp(logw - lz)
    pmf /= pmf.sum()
    k = np.arange(kmax + 1, dtype=float)
    tk = tau.values(kmax)
    mean = float(pmf @ k)
    tau_bar = float(pmf @ tk)
    alpha = float(pmf @ (k - mean) ** 2)
    rho = float(pmf @ ((k - mean) * (tk - tau_bar)))
    gamma = float(pmf @ (tk - tau_bar) ** 2)
    return GrandCanonicalLaw(float(a), pmf, float(lz), tau_bar, alpha, rho, gamma, float(tail), mean)


def density_of(tau: RateFunction, a: float) -> float:
    """``R(a)``, the mean occupation under ``nu_a``."""
    return build_nu(tau, a).mean


def phi_of(tau: RateFunction, nbar: float, tol: float = 1e-10) -> float:
    """Fugacity ``a`` with ``R(a) = nbar``."""
    if nbar <= 0:
        raise DensityError("density must be positive")
    lo = 1e-300
    if math.isinf(tau.a_star):
        hi = max(1.0, 2.0 * nbar)
        while density_of(tau, hi) < nbar:
            hi *= 2.0
    else:
        for m in range(1, 40):
            hi = tau.a_star * (1.0 - 2.0 ** -m)
            try:
                if density_of(tau, hi) >= nbar:
                    break
            except FugacityError:
                raise DensityError(f"density {nbar} beyond the reachable range") from None
        else:
            raise DensityError(f"density {nbar} beyond the reachable range")
    a = optimize.brentq(lambda x: density_of(tau, x) - nbar, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    if abs(density_of(tau, a) - nbar) > tol * max(1.0, nbar):
        raise DensityError(f"could not invert R at density {nbar}")
    return float(a)


# ---------------------------------------------------------------------------
# Canonical measure


def canonical_log_weight(counts, tau: RateFunction) -> float:
    """Unnormalized ``log pi`` of a configuration: ``-sum_i sum_{j<=n(i)} log tau(j)``."""
    counts = np.asarray(counts, dtype=np.int64)
    kmax = int(counts.max(initial=0))
    cum = np.concatenate([[0.0], np.cumsum(np.log(tau.values(max(kmax, 1))[1:]))])
    return -float(cum[counts].sum())


def enumerate_configurations(n_sites: int, total: int) -> np.ndarray:
    """All occupation vectors on ``n_sites`` sites with ``total`` particles (lexicographic, descending)."""
    if n_sites == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total, -1, -1):
        for rest in enumerate_configurations(n_sites - 1, total - first):
            rows.append(np.concatenate([[first], rest]))
    return np.array(rows, dtype=np.int64)


def canonical_pmf(configs: np.ndarray, tau: RateFunction) -> np.ndarray:
    lw = np.array([canonical_log_weight(c, tau) for c in configs])
    return np.exp(lw - special.logsumexp(lw))


class _DPSampler:
    """Exact conditional sampler: ``P(n_i = k | remaining r) ∝ w(k) T_{i+1}(r - k)``."""

    def __init__(self, n_sites: int, total: int, tau: RateFunction, a: float):
        M = total
        logw = _log_weights(tau, a, max(M, 1))[: M + 1]
        # T[i, r] = log of total weight of sites i..N-1 carrying r particles
        T = np.full((n_sites + 1, M + 1), -np.inf)
        T[n_sites, 0] = 0.0
        for i in range(n_sites - 1, -1, -1):
            for r in range(M + 1):
                T[i, r] = special.logsumexp(logw[: r + 1] + T[i + 1, r::-1])
        self.cdfs = np.zeros((n_sites, M + 1, M + 1))
        for i in range(n_sites):
            for r in range(M + 1):
                lp = logw[: r + 1] + T[i + 1, r::-1]
                p = np.exp(lp - special.logsumexp(lp))
                c = np.cumsum(p)
                c[-1] = 1.0
                self.cdfs[i, r, : r + 1] = c
                self.cdfs[i, r, r + 1:] = 1.0
        self.n_sites, self.total = n_sites, M

    def sample(self, rng, size: int) -> np.ndarray:
        out = np.empty((size, self.n_sites), dtype=np.int64)
        rem = np.full(size, self.total, dtype=np.int64)
        for i in range(self.n_sites):
            u = rng.random(size)
            c = self.cdfs[i, rem]  # (size, M+1)
            k = (c <= u[:, None]).sum(axis=1)
            k = np.minimum(k, rem)
            out[:, i] = k
            rem -= k
        return out


def _rejection(n_sites: int, total: int, law: GrandCanonicalLaw, rng, size: int) -> np.ndarray:
    out = np.empty((size, n_sites), dtype=np.int64)
    got = 0
    batch = max(64, int(4 * math.sqrt(n_sites) * 8))
    while got < size:
        need = size - got
        draws = law.sample(rng, (max(batch, int(need * 3 * math.sqrt(n_sites + 1))), n_sites))
        ok = draws[draws.sum(axis=1) == total]
        take = min(need, ok.shape[0])
        out[got:got + take] = ok[:take]
        got += take
    return out


def sample_invariant_many(n_sites: int, nbar: float, tau: RateFunction, rng, size: int,
                          method: str = "auto", fugacity: float | None = None) -> np.ndarray:
    """``size`` independent draws from ``pi_{N, nbar}`` as rows of counts."""
    rng = as_generator(rng)
    total = canonical_total(n_sites, nbar)
    if total < 0:
        raise DensityError("negative particle number")
    a = fugacity if fugacity is not None else phi_of(tau, nbar) if nbar > 0 else 1.0
    if method == "auto":
        method = "dp" if n_sites * (total + 1) ** 2 <= 5_000_000 else "rejection"
    if n_sites == 1 or total == 0:
        return np.full((size, n_sites), total if n_sites == 1 else 0, dtype=np.int64)
    if method == "rejection":
        return _rejection(n_sites, total, build_nu(tau, a), rng, size)
    if method == "dp":
        return _DPSampler(n_sites, total, tau, a).sample(rng, size)
    raise ValueError(f"unknown sampling method {method!r}")


def sample_invariant(n_sites: int, nbar: float, tau: RateFunction, rng,
                     method: str = "auto", fugacity: float | None = None) -> OccupationVector:
    counts = sample_invariant_many(n_sites, nbar, tau, rng, 1, method, fugacity)[0]
    return OccupationVector(counts, nbar)


# ---------------------------------------------------------------------------
# Fields


def height_raw(counts, nbar: float) -> np.ndarray:
    """Rows of ``sum_{j<=k} (n(j) - nbar)`` for ``k = 0..N`` (unscaled)."""
    c = np.atleast_2d(np.asarray(counts, dtype=float))
    n = c.shape[1]
    h = np.zeros((c.shape[0], n + 1))
    h[:, 1:] = np.cumsum(c, axis=1) - nbar * np.arange(1, n + 1)
    return h


def q_field(occ: OccupationVector, tau: RateFunction, tau_bar: float) -> FluctuationField:
    n = occ.n_sites
    t = tau(occ.counts)
    raw = np.concatenate([[0.0], np.cumsum(t - tau_bar)])
    return FluctuationField(raw, math.sqrt(n), "sqrt(N)")


def q_raw(counts, tau: RateFunction, tau_bar: float) -> np.ndarray:
    c = np.atleast_2d(np.asarray(counts, dtype=np.int64))
    t = tau(c)
    h = np.zeros((c.shape[0], c.shape[1] + 1))
    h[:, 1:] = np.cumsum(t - tau_bar, axis=1)
    return h


# ---------------------------------------------------------------------------
# Dynamics


@dataclass(frozen=True)
class ZrpState:
    occupation: OccupationVector
    clock: float = 0.0


def site_rates(counts, tau: RateFunction) -> np.ndarray:
    """Total jump rate out of each site in diffusive time."""
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    dirs = np.full(n, 2.0)
    if n == 1:
        dirs[:] = 0.0
    else:
        dirs[0] = dirs[-1] = 1.0
    return n * n * tau(counts) * dirs / 2.0


def step(state: ZrpState, tau: RateFunction, rng, horizon: float | None = None) -> ZrpState:
    """One Gillespie event (or a jump of the clock to ``horizon`` if none occurs before it)."""
    rng = as_generator(rng)
    counts = state.occupation.counts.copy()
    n = counts.size
    rates = site_rates(counts, tau)
    total = rates.sum()
    if total <= 0:
        return ZrpState(state.occupation, math.inf if horizon is None else float(horizon))
    t = state.clock + rng.exponential(1.0 / total)
    if horizon is not None and t > horizon:
        return ZrpState(state.occupation, float(horizon))
    i = int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right"))
    i = min(i, n - 1)
    if i == 0:
        j = 1
    elif i == n - 1:
        j = n - 2
    else:
        j = i - 1 if rng.random() < 0.5 else i + 1
    counts[i] -= 1
    counts[j] += 1
    return ZrpState(OccupationVector(counts, state.occupation.density), float(t))


@njit(cache=True)
def _fen_build(w):
    n = w.size
    tree = np.zeros(n + 1)
    for i in range(n):
        j = i + 1
        tree[j] += w[i]
        k = j + (j & -j)
        if k <= n:
            tree[k] += tree[j]
    return tree


@njit(cache=True)
def _fen_add(tree, i, delta):
    n = tree.size - 1
    j = i + 1
    while j <= n:
        tree[j] += delta
        j += j & -j


@njit(cache=True)
def _fen_total(tree):
    n = tree.size - 1
    s = 0.0
    j = n
    while j > 0:
        s += tree[j]
        j -= j & -j
    return s


@njit(cache=True)
def _fen_find(tree, w, target):
    n = tree.size - 1
    pos = 0
    step = 1
    while step * 2 <= n:
        step *= 2
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step //= 2
    if pos >= n or w[pos] <= 0.0:
        # rounding pushed the target past the last positive weight
        pos = n - 1
        while pos > 0 and w[pos] <= 0.0:
            pos -= 1
    return pos


@njit(cache=True)
def _directions(n):
    d = np.full(n, 2.0)
    if n == 1:
        d[0] = 0.0
    else:
        d[0] = 1.0
        d[n - 1] = 1.0
    return d


@njit(cache=True)
def _zrp_kernel(n, tau_tab, t0, checkpoints, out, rng):
    N = n.size
    speed = N * N / 2.0
    dirs = _directions(N)
    w = np.empty(N)
    for i in range(N):
        w[i] = tau_tab[n[i]] * dirs[i]
    tree = _fen_build(w)
    t = t0
    c = 0
    ncp = checkpoints.size
    events = 0
    since = 0
    while c < ncp:
        tot = _fen_total(tree)
        if tot <= 0.0:
            while c < ncp:
                out[c, :] = n
                c += 1
            break
        t += rng.exponential(1.0 / (tot * speed))
        while c < ncp and checkpoints[c] < t:
            out[c, :] = n
            c += 1
        if c >= ncp:
            break
        i = _fen_find(tree, w, rng.random() * tot)
        if i == 0:
            j = 1
        elif i == N - 1:
            j = N - 2
        elif rng.random() < 0.5:
            j = i - 1
        else:
            j = i + 1
        n[i] -= 1
        n[j] += 1
        for s in (i, j):
            nw = tau_tab[n[s]] * dirs[s]
            _fen_add(tree, s, nw - w[s])
            w[s] = nw
        events += 1
        since += 1
        if since >= 65536:
            tree = _fen_build(w)
            since = 0
    return events


@dataclass
class Trajectory:
    """Configurations recorded at ``times``; ``configs[c]`` is the state at ``times[c]``."""

    times: np.ndarray
    configs: np.ndarray
    events: int


def _checkpoints(horizon: float, checkpoints) -> np.ndarray:
    cp = np.array([horizon] if checkpoints is None else checkpoints, dtype=float)
    if (np.diff(cp) < 0).any() or (cp < 0).any():
        raise ValueError("checkpoints must be non-negative and sorted")
    return cp


def evolve(initial: OccupationVector, horizon: float, tau: RateFunction, rng,
           checkpoints=None) -> Trajectory:
    rng = as_generator(rng)
    cp = _checkpoints(horizon, checkpoints)
    n = initial.counts.astype(np.int64).copy()
    tau_tab = tau.values(int(n.sum()) + 1)
    out = np.zeros((cp.size, n.size), dtype=np.int64)
    events = _zrp_kernel(n, tau_tab, 0.0, cp, out, rng)
    if (out.sum(axis=1) != initial.total).any():
        raise AssertionError("particle number not conserved")
    return Trajectory(cp, out, int(events))


@njit(cache=True)
def _zrp_coupled_kernel(n, tau_tab, checkpoints, out, pairs, rng):
    R, N = n.shape
    speed = N * N / 2.0
    dirs = _directions(N)
    H = np.zeros((R, N + 1), dtype=np.int64)
    for r in range(R):
        for k in range(N):
            H[r, k + 1] = H[r, k] + n[r, k]
    K = np.zeros(N, dtype=np.int64)
    w = np.empty(N)
    for i in range(N):
        m = 0
        for r in range(R):
            if n[r, i] > m:
                m = n[r, i]
        K[i] = m
        w[i] = tau_tab[m] * dirs[i]
    tree = _fen_build(w)
    t = 0.0
    c = 0
    ncp = checkpoints.size
    events = 0
    since = 0
    while c < ncp:
        tot = _fen_total(tree)
        if tot <= 0.0:
            while c < ncp:
                out[c] = n
                c += 1
            break
        t += rng.exponential(1.0 / (tot * speed))
        while c < ncp and checkpoints[c] < t:
            out[c] = n
            c += 1
        if c >= ncp:
            break
        i = _fen_find(tree, w, rng.random() * tot)
        if i == 0:
            j = 1
        elif i == N - 1:
            j = N - 2
        elif rng.random() < 0.5:
            j = i - 1
        else:
            j = i + 1
        # level of the firing clock: P(level = k) = (tau(k) - tau(k-1)) / tau(K_i)
        target = rng.random() * tau_tab[K[i]]
        lev = np.searchsorted(tau_tab[: K[i] + 1], target, side="right")
        hidx = i + 1 if j > i else i
        hd = -1 if j > i else 1
        for r in range(R):
            if n[r, i] >= lev:
                n[r, i] -= 1
                n[r, j] += 1
                H[r, hidx] += hd
        for p in range(pairs.shape[0]):
            if H[pairs[p, 0], hidx] < H[pairs[p, 1], hidx]:
                return -1 - events
        for s in (i, j):
            m = 0
            for r in range(R):
                if n[r, s] > m:
                    m = n[r, s]
            K[s] = m
            nw = tau_tab[m] * dirs[s]
            _fen_add(tree, s, nw - w[s])
            w[s] = nw
        events += 1
        since += 1
        if since >= 65536:
            tree = _fen_build(w)
            since = 0
    return events


def height_ordered(a, b) -> bool:
    """True when the height function of ``a`` dominates that of ``b`` everywhere."""
    return bool((np.cumsum(a) >= np.cumsum(b)).all())


def coupled_evolve(initials: Sequence[OccupationVector], horizon: float, tau: RateFunction, rng,
                   checkpoints=None) -> list[Trajectory]:
    """Run all replicas on one clock realization.

    Every pair that starts height-ordered is checked after each event; a
    violation raises ``OrderViolation``.
    """
    rng = as_generator(rng)
    if not initials:
        raise ValueError("no initial configurations")
    sizes = {o.n_sites for o in initials}
    if len(sizes) != 1:
        raise ValueError("replicas must share the number of sites")
    totals = {o.total for o in initials}
    if len(totals) != 1:
        raise ValueError("replicas must share the particle number")
    cp = _checkpoints(horizon, checkpoints)
    n = np.array([o.counts for o in initials], dtype=np.int64)
    pairs = np.array([(a, b) for a in range(len(initials)) for b in range(len(initials))
                      if a != b and height_ordered(n[a], n[b])], dtype=np.int64).reshape(-1, 2)
    tau_tab = tau.values(int(n[0].sum()) + 1)
    out = np.zeros((cp.size, *n.shape), dtype=np.int64)
    events = _zrp_coupled_kernel(n, tau_tab, cp, out, pairs, rng)
    if events < 0:
        raise OrderViolation(f"height ordering broken at event {-events - 1}")
    return [Trajectory(cp, out[:, r, :], int(events)) for r in range(len(initials))]


def envelope(a: OccupationVector, b: OccupationVector) -> tuple[OccupationVector, OccupationVector]:
    """Configurations whose heights are the pointwise max and min of those of ``a`` and ``b``."""
    ha, hb = np.cumsum(a.counts), np.cumsum(b.counts)
    hmax = np.concatenate([[0], np.maximum(ha, hb)])
    hmin = np.concatenate([[0], np.minimum(ha, hb)])
    return OccupationVector(np.diff(hmax)), OccupationVector(np.diff(hmin))


def l1_heights(counts_a, counts_b) -> np.ndarray:
    """L1 distance between rescaled height fields (rows broadcast)."""
    from .lattice import piecewise_linear_l1

    a = np.atleast_2d(counts_a)
    b = np.atleast_2d(counts_b)
    n = a.shape[1]
    d = np.zeros((max(a.shape[0], b.shape[0]), n + 1))
    d[:, 1:] = np.cumsum(a - b, axis=1)
    return np.array([piecewise_linear_l1(row / math.sqrt(n), 1.0 / n) for row in d])
