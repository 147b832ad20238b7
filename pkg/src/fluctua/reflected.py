"""Two ordered interfaces ``v >= w`` with corner-flip dynamics and reflection at contact points.

Rates in diffusive time, with ``R = (2N)^2 / 2``:

* a corner away from a contact point flips at rate ``R``;
* at an upward-corner contact, ``w`` flips down alone at rate ``R`` and both
  paths flip together at rate ``R / 2`` (``v`` alone is blocked);
* at a downward-corner contact, ``v`` flips up alone at rate ``R`` and both
  flip together at rate ``R / 2``.

Bulk runs use a uniformized kernel: every interior site carries a "down" and
an "up" clock of rate ``2R`` with a uniform mark deciding which move (if any)
is applied. The same marks drive every replica, which yields a monotone
coupling for the order ``(v, w) <= (v', w')`` iff ``v <= v'`` and ``w <= w'``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import special

from .lattice import Corner, FluctuationField, PathPair, contact_points, corner_type, rescale_pair
from .rng import as_generator
from .stats import ComplexEstimate

STATE_GUARD_ENUM = 14


class OrderViolation(AssertionError):
    pass


# ---------------------------------------------------------------------------
# Rules


def flip_rate(length: int) -> int:
    """``(2N)^2 / 2`` for a path of ``2N = length`` steps (an integer since 2N is even)."""
    return length * length // 2


@dataclass(frozen=True)
class Move:
    target: PathPair
    rate: int
    site: int
    kind: str  # "v", "w" or "joint"
    contact: str  # "upward", "downward" or "none"


def moves(pair: PathPair) -> list[Move]:
    """All transitions out of ``pair`` with their integer rates."""
    v, w = pair.v, pair.w
    L = pair.length
    R = flip_rate(L)
    out: list[Move] = []
    for k in range(1, L):
        cv = corner_type(v, k)
        cw = corner_type(w, k)
        contact = v[k - 1] == w[k - 1] and v[k] == w[k] and v[k + 1] == w[k + 1]
        if not contact:
            if cv is not Corner.NONE:
                nv = v.copy()
                nv[k] += -2 if cv is Corner.UPWARD else 2
                if (nv[k] >= w[k]):
                    out.append(Move(PathPair(nv, w), R, k, "v", "none"))
            if cw is not Corner.NONE:
                nw = w.copy()
                nw[k] += -2 if cw is Corner.UPWARD else 2
                if v[k] >= nw[k]:
                    out.append(Move(PathPair(v, nw), R, k, "w", "none"))
            continue
        if cv is Corner.NONE:
            continue
        d = -2 if cv is Corner.UPWARD else 2
        tag = "upward" if cv is Corner.UPWARD else "downward"
        nv, nw = v.copy(), w.copy()
        nv[k] += d
        nw[k] += d
        if cv is Corner.UPWARD:
            out.append(Move(PathPair(v, nw), R, k, "w", tag))
        else:
            out.append(Move(PathPair(nv, w), R, k, "v", tag))
        out.append(Move(PathPair(nv, nw), R // 2, k, "joint", tag))
    return out


# ---------------------------------------------------------------------------
# Exact single-trajectory engine


@dataclass
class ContactEventLog:
    """Contact flips as parallel arrays ``t, k, type, kind``.

    ``type`` is ``upward`` or ``downward`` (corner at the contact point);
    ``kind`` is ``single-flip`` or ``joint-flip``.
    """

    length: int
    t: list = field(default_factory=list)
    k: list = field(default_factory=list)
    type: list = field(default_factory=list)
    kind: list = field(default_factory=list)

    def append(self, t: float, k: int, ctype: str, kind: str) -> None:
        self.t.append(float(t))
        self.k.append(int(k))
        self.type.append(ctype)
        self.kind.append(kind)

    def __len__(self) -> int:
        return len(self.t)

    def merge(self, other: "ContactEventLog") -> "ContactEventLog":
        if other.length != self.length:
            raise ValueError("logs from different system sizes")
        out = ContactEventLog(self.length)
        rows = sorted(zip(self.t + other.t, self.k + other.k, self.type + other.type, self.kind + other.kind))
        for row in rows:
            out.append(*row)
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "k", "type", "kind"])
            for row in zip(self.t, self.k, self.type, self.kind):
                wr.writerow([repr(row[0]), row[1], row[2], row[3]])

    @classmethod
    def from_csv(cls, path: str | Path, length: int) -> "ContactEventLog":
        log = cls(length)
        with open(path, newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                log.append(float(r["t"]), int(r["k"]), r["type"], r["kind"])
        return log


@dataclass(frozen=True)
class ReflectedState:
    pair: PathPair
    clock: float = 0.0


def step(state: ReflectedState, rng, log: ContactEventLog | None = None,
         horizon: float | None = None) -> ReflectedState:
    """One exact Gillespie event of the pair dynamics."""
    rng = as_generator(rng)
    opts = moves(state.pair)
    rates = np.array([m.rate for m in opts], dtype=float)
    total = rates.sum()
    t = state.clock + rng.exponential(1.0 / total)
    if horizon is not None and t > horizon:
        return ReflectedState(state.pair, float(horizon))
    i = min(int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right")), len(opts) - 1)
    mv = opts[i]
    if log is not None and mv.contact != "none":
        log.append(t, mv.site, mv.contact, "joint-flip" if mv.kind == "joint" else "single-flip")
    return ReflectedState(mv.target, float(t))


# ---------------------------------------------------------------------------
# Enumeration and Karlin-McGregor counts


def _bridges(length: int) -> np.ndarray:
    """All +-1 bridges of ``length`` steps from 0 to 0, as rows of heights."""
    from itertools import combinations

    half = length // 2
    rows = []
    for ups in combinations(range(length), half):
        s = -np.ones(length, dtype=np.int64)
        s[list(ups)] = 1
        rows.append(np.concatenate([[0], np.cumsum(s)]))
    return np.array(rows, dtype=np.int64)


def enumerate_arrays(half_length: int) -> np.ndarray:
    """Every element of the ordered-pair state space as an array of shape ``(M, 2, 2N + 1)``."""
    L = 2 * half_length
    if half_length < 1:
        raise ValueError("half-length must be >= 1")
    if L > STATE_GUARD_ENUM:
        raise ValueError(f"enumeration guard: 2N = {L} > {STATE_GUARD_ENUM}")
    B = _bridges(L)
    chunks = []
    for i in range(B.shape[0]):
        below = B[(B <= B[i]).all(axis=1)]
        pair = np.empty((below.shape[0], 2, L + 1), dtype=np.int64)
        pair[:, 0] = B[i]
        pair[:, 1] = below
        chunks.append(pair)
    return np.concatenate(chunks)


def enumerate_states(half_length: int) -> list[PathPair]:
    return [PathPair(a[0], a[1]) for a in enumerate_arrays(half_length)]


def km_count(k: int, j: int) -> int:
    """Number of ordered pairs of length-``k`` simple walks from 0 both ending at ``j``."""
    if k < 0 or abs(j) > k or (k + j) % 2:
        return 0
    m = (k + j) // 2
    c = math.comb
    return c(k, m) ** 2 - (c(k, m - 1) * c(k, m + 1) if m >= 1 else 0)


def log_km_count(k, j):
    """``log C(k, j)`` in floating point via ``C = B(k,m)^2 (k+1)/((m+1)(k-m+1))``."""
    k = np.asarray(k, dtype=float)
    j = np.asarray(j, dtype=float)
    m = (k + j) / 2.0
    lb = special.gammaln(k + 1) - special.gammaln(m + 1) - special.gammaln(k - m + 1)
    out = 2 * lb + np.log(k + 1) - np.log(m + 1) - np.log(k - m + 1)
    bad = (np.abs(j) > k) | (np.mod(k + j, 2) != 0) | (k < 0)
    return np.where(bad, -np.inf, out)


def contact_prob_exact(half_length: int, k: int, j: int) -> Fraction:
    L = 2 * half_length
    if not 1 <= k <= L - 1:
        raise ValueError(f"k = {k} outside 1..{L - 1}")
    return Fraction(km_count(k - 1, j) * km_count(L - k - 1, j), km_count(L, 0))


def contact_prob(half_length: int, k: int, j: int) -> float:
    """Probability under the uniform measure of an upward (equivalently downward) contact at ``k`` with ``v(k-1) = j``."""
    L = 2 * half_length
    if L <= 2048:
        return float(contact_prob_exact(half_length, k, j))
    if not 1 <= k <= L - 1:
        raise ValueError(f"k = {k} outside 1..{L - 1}")
    lp = log_km_count(k - 1, j) + log_km_count(L - k - 1, j) - log_km_count(L, 0)
    return float(np.exp(lp))


def contact_prob_asymptotic(half_length: int, k, j):
    L = 2.0 * half_length
    k = np.asarray(k, dtype=float)
    j = np.asarray(j, dtype=float)
    g = L * L / (k * (L - k))
    out = g * g * np.exp(-(j * j / L) * g) / (2 * math.pi * L * L)
    return float(out) if out.ndim == 0 else out


def contact_weights(half_length: int, ks: np.ndarray | None = None):
    """Flattened ``(k, j, probability)`` table of one contact type over ``ks``."""
    L = 2 * half_length
    ks = np.arange(1, L) if ks is None else np.asarray(ks)
    K, J = [], []
    for k in ks:
        jmax = min(k - 1, L - k - 1)
        js = np.arange(-jmax, jmax + 1, 2)
        K.append(np.full(js.size, k))
        J.append(js)
    K = np.concatenate(K)
    J = np.concatenate(J)
    if L <= 2048:
        denom = km_count(L, 0)
        P = np.array([float(Fraction(km_count(int(k) - 1, int(j)) * km_count(L - int(k) - 1, int(j)), denom))
                      for k, j in zip(K, J)])
    else:
        P = np.exp(log_km_count(K - 1, J) + log_km_count(L - K - 1, J) - log_km_count(L, 0))
    return K, J, P


def state_space_size(half_length: int) -> int:
    return km_count(2 * half_length, 0)


# ---------------------------------------------------------------------------
# Uniform sampling


@njit(cache=True)
def _ordered_segment(n, j, v, w, off, rng):
    """Fill ``v[off:off+n+1], w[...]`` with a uniform ordered pair of walks from ``(v0, w0)``
    (already stored at ``off``) to ``(j, j)``; rejection with early abort."""
    v0 = v[off]
    w0 = w[off]
    tries = 0
    while True:
        tries += 1
        a = v0
        b = w0
        upa = (n + j - v0) // 2
        upb = (n + j - w0) // 2
        ok = True
        for s in range(n):
            rem = n - s
            if rng.random() * rem < upa:
                a += 1
                upa -= 1
            else:
                a -= 1
            if rng.random() * rem < upb:
                b += 1
                upb -= 1
            else:
                b -= 1
            if a < b:
                ok = False
                break
            v[off + s + 1] = a
            w[off + s + 1] = b
        if ok:
            return tries


@njit(cache=True)
def _uniform_many(L, size, out, rng):
    for i in range(size):
        out[i, 0, 0] = 0
        out[i, 1, 0] = 0
        _ordered_segment(L, 0, out[i, 0], out[i, 1], 0, rng)


def sample_uniform_many(half_length: int, size: int, rng, method: str = "auto",
                        burn_in_factor: float = 8.0) -> np.ndarray:
    """``size`` exact uniform draws as an ``(size, 2, 2N + 1)`` integer array."""
    rng = as_generator(rng)
    L = 2 * half_length
    if method == "auto":
        method = "rejection" if L <= 2048 else "burn-in"
    out = np.zeros((size, 2, L + 1), dtype=np.int64)
    if method == "rejection":
        _uniform_many(L, size, out, rng)
        return out
    if method == "burn-in":
        horizon = burn_in_factor * math.log(L)
        start = zigzag_pair(half_length)
        for i in range(size):
            tr = evolve(start, horizon, rng, log=False)
            out[i, 0], out[i, 1] = tr.v[-1], tr.w[-1]
        return out
    raise ValueError(f"unknown sampling method {method!r}")


def sample_uniform(half_length: int, rng, method: str = "auto") -> PathPair:
    a = sample_uniform_many(half_length, 1, rng, method)[0]
    return PathPair(a[0], a[1])


def zigzag_pair(half_length: int) -> PathPair:
    """Deterministic start: ``v`` oscillates in ``{0, 1}``, ``w`` in ``{0, -1}``."""
    L = 2 * half_length
    z = np.arange(L + 1) % 2
    return PathPair(z, -z)


def top_pair(half_length: int) -> PathPair:
    """Maximal element: both paths are the tent ``min(k, 2N - k)``."""
    k = np.arange(2 * half_length + 1)
    t = np.minimum(k, 2 * half_length - k)
    return PathPair(t, t)


def bottom_pair(half_length: int) -> PathPair:
    k = np.arange(2 * half_length + 1)
    t = -np.minimum(k, 2 * half_length - k)
    return PathPair(t, t)


@njit(cache=True)
def _conditioned_many(L, k, j, up, size, out, rng):
    for i in range(size):
        v = out[i, 0]
        w = out[i, 1]
        v[0] = 0
        w[0] = 0
        _ordered_segment(k - 1, j, v, w, 0, rng)
        h = j + 1 if up else j - 1
        v[k] = h
        w[k] = h
        v[k + 1] = j
        w[k + 1] = j
        # the right piece read backwards is an ordered pair from (0, 0) to (j, j)
        tv = np.empty(L - k, dtype=np.int64)
        tw = np.empty(L - k, dtype=np.int64)
        tv[0] = 0
        tw[0] = 0
        _ordered_segment(L - k - 1, j, tv, tw, 0, rng)
        for s in range(L - k):
            v[L - s] = tv[s]
            w[L - s] = tw[s]


def sample_contact_configs(half_length: int, k: int, j: int, ctype: str, size: int, rng) -> np.ndarray:
    """Uniform draws from the states with a contact at ``k`` of type ``ctype`` and ``v(k-1) = j``."""
    rng = as_generator(rng)
    L = 2 * half_length
    if not 1 <= k <= L - 1:
        raise ValueError("contact site out of range")
    if km_count(k - 1, j) == 0 or km_count(L - k - 1, j) == 0:
        raise ValueError(f"no state with a contact at ({k}, {j})")
    out = np.zeros((size, 2, L + 1), dtype=np.int64)
    _conditioned_many(L, k, j, ctype == "upward", size, out, rng)
    return out


# ---------------------------------------------------------------------------
# Uniformized coupled kernel


@njit(cache=True)
def _flip(V, W, r, k, up, mark):
    """Apply the move selected by ``(k, up, mark)`` to replica ``r``.

    Returns 0 (nothing), 1 (v alone), 2 (w alone) or 3 (joint), plus 10 when
    the site was a contact point.
    """
    vl = V[r, k - 1]
    vk = V[r, k]
    vr = V[r, k + 1]
    wl = W[r, k - 1]
    wk = W[r, k]
    wr = W[r, k + 1]
    contact = vl == wl and vk == wk and vr == wr
    c = 10 if contact else 0
    if not up:
        vmax = vl == vr and vk == vl + 1
        wmax = wl == wr and wk == wl + 1
        if mark < 0.5:
            if wmax:
                W[r, k] = wk - 2
                return 2 + c
        elif mark < 0.75:
            if vmax:
                V[r, k] = vk - 2
                if contact:
                    W[r, k] = wk - 2
                    return 3 + c
                return 1
        else:
            if vmax and not contact:
                V[r, k] = vk - 2
                return 1
    else:
        vmin = vl == vr and vk == vl - 1
        wmin = wl == wr and wk == wl - 1
        if mark < 0.5:
            if vmin:
                V[r, k] = vk + 2
                return 1 + c
        elif mark < 0.75:
            if wmin:
                W[r, k] = wk + 2
                if contact:
                    V[r, k] = vk + 2
                    return 3 + c
                return 2
        else:
            if wmin and not contact:
                W[r, k] = wk + 2
                return 2
    return 0


@njit(cache=True)
def _event(V, W, R, L, u, pairs, log_on, t, log_t, log_k, log_type, log_kind, nlog):
    x = u * (L - 1)
    k = int(x)
    if k >= L - 1:
        k = L - 2
    f = x - k
    k += 1
    up = f >= 0.5
    mark = 2.0 * f - (1.0 if up else 0.0)
    for r in range(R):
        code = _flip(V, W, r, k, up, mark)
        if r == 0 and log_on and code > 10:
            log_t[nlog] = t
            log_k[nlog] = k
            log_type[nlog] = 1 if up else 0  # 0 upward corner, 1 downward corner
            log_kind[nlog] = 1 if code == 13 else 0  # 1 joint
            nlog += 1
        if V[r, k] < W[r, k]:
            return -1, nlog
    for p in range(pairs.shape[0]):
        a = pairs[p, 0]
        b = pairs[p, 1]
        if V[a, k] < V[b, k] or W[a, k] < W[b, k]:
            return -2, nlog
    return 0, nlog


@njit(cache=True)
def _pair_kernel(V, W, checkpoints, c, t, out_v, out_w, pairs, log_on,
                 log_t, log_k, log_type, log_kind, rng):
    """Advance from time ``t`` (checkpoint index ``c``) until the last checkpoint or a full log.

    Returns ``(status, c, t, events, nlog)``; status 0 done, 1 log full, <0 invariant violated.
    """
    R, L1 = V.shape
    L = L1 - 1
    total = 2.0 * L * L * (L - 1)
    ncp = checkpoints.size
    events = 0
    nlog = 0
    cap = log_t.size
    if log_on:
        while c < ncp:
            if nlog + 1 > cap:
                return 1, c, t, events, nlog
            t_next = t + rng.exponential(1.0 / total)
            while c < ncp and checkpoints[c] < t_next:
                out_v[c] = V
                out_w[c] = W
                c += 1
            if c >= ncp:
                # memoryless clock: the pending event lies past the horizon
                t = checkpoints[ncp - 1]
                break
            t = t_next
            st, nlog = _event(V, W, R, L, rng.random(), pairs, True, t, log_t, log_k, log_type, log_kind, nlog)
            events += 1
            if st < 0:
                return st, c, t, events, nlog
        return 0, c, t, events, nlog
    while c < ncp:
        n_ev = rng.poisson(total * (checkpoints[c] - t))
        for _ in range(n_ev):
            st, nlog = _event(V, W, R, L, rng.random(), pairs, False, t, log_t, log_k, log_type, log_kind, nlog)
            if st < 0:
                return st, c, t, events, nlog
        events += n_ev
        t = checkpoints[c]
        out_v[c] = V
        out_w[c] = W
        c += 1
    return 0, c, t, events, nlog


@dataclass
class PairTrajectory:
    """Replica-0 configurations at ``times`` plus the contact log (if recorded)."""

    times: np.ndarray
    v: np.ndarray  # (ncp, 2N + 1)
    w: np.ndarray
    events: int
    log: ContactEventLog | None


def _run(initials: Sequence[PathPair], cp: np.ndarray, rng, log: bool, order_check: bool,
         log_capacity: int = 1 << 16):
    L = initials[0].length
    if any(p.length != L for p in initials):
        raise ValueError("replicas must share the system size")
    V = np.array([p.v for p in initials], dtype=np.int64)
    W = np.array([p.w for p in initials], dtype=np.int64)
    R = V.shape[0]
    pairs = []
    if order_check:
        for a in range(R):
            for b in range(R):
                if a != b and (V[a] >= V[b]).all() and (W[a] >= W[b]).all():
                    pairs.append((a, b))
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    out_v = np.zeros((cp.size, R, L + 1), dtype=np.int64)
    out_w = np.zeros_like(out_v)
    cap = log_capacity if log else 1
    buf = (np.zeros(cap), np.zeros(cap, np.int64), np.zeros(cap, np.int64), np.zeros(cap, np.int64))
    clog = ContactEventLog(L) if log else None
    c, t, events = 0, 0.0, 0
    while True:
        st, c, t, ev, nlog = _pair_kernel(V, W, cp, c, t, out_v, out_w, pairs, log, *buf, rng)
        events += ev
        if log:
            for i in range(nlog):
                clog.append(buf[0][i], int(buf[1][i]), "downward" if buf[2][i] else "upward",
                            "joint-flip" if buf[3][i] else "single-flip")
        if st == -1:
            raise AssertionError("pair ordering v >= w broken")
        if st == -2:
            raise OrderViolation("monotone coupling lost the partial order")
        if st == 0:
            break
    return out_v, out_w, events, clog


def evolve(initial: PathPair, horizon: float, rng, checkpoints=None, log: bool = True) -> PairTrajectory:
    rng = as_generator(rng)
    cp = np.array([horizon] if checkpoints is None else checkpoints, dtype=float)
    out_v, out_w, events, clog = _run([initial], cp, rng, log, False)
    return PairTrajectory(cp, out_v[:, 0], out_w[:, 0], events, clog)


def coupled_evolve(initials: Sequence[PathPair], horizon: float, rng, checkpoints=None
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Drive all replicas with one clock realization.

    Returns ``(times, V, W, events)`` with ``V[c, r]`` the ``v`` path of replica
    ``r`` at ``times[c]``. Each initially ordered pair of replicas is checked
    after every event; a violation raises ``OrderViolation``.
    """
    rng = as_generator(rng)
    if not initials:
        raise ValueError("no initial configurations")
    cp = np.array([horizon] if checkpoints is None else checkpoints, dtype=float)
    out_v, out_w, events, _ = _run(initials, cp, rng, False, True)
    return cp, out_v, out_w, events


def envelope(a: PathPair, b: PathPair) -> tuple[PathPair, PathPair]:
    """Pointwise max and min pairs; both lie in the state space and sandwich ``a`` and ``b``."""
    return (PathPair(np.maximum(a.v, b.v), np.maximum(a.w, b.w)),
            PathPair(np.minimum(a.v, b.v), np.minimum(a.w, b.w)))


def pair_distance(V1, W1, V2, W2) -> np.ndarray:
    """``||v - v'||_L1 + ||w - w'||_L1`` of the rescaled paths (rows broadcast)."""
    from .lattice import piecewise_linear_l1

    V1, W1, V2, W2 = (np.atleast_2d(x) for x in (V1, W1, V2, W2))
    L = V1.shape[-1] - 1
    s = math.sqrt(L)
    dv = (V1 - V2) / s
    dw = (W1 - W2) / s
    return np.array([piecewise_linear_l1(a, 1.0 / L) + piecewise_linear_l1(b, 1.0 / L)
                     for a, b in zip(np.broadcast_to(dv, np.broadcast_shapes(dv.shape, dw.shape)),
                                     np.broadcast_to(dw, np.broadcast_shapes(dv.shape, dw.shape)))])


# ---------------------------------------------------------------------------
# Fields and contact statistics


def sum_diff(pair: PathPair) -> tuple[FluctuationField, FluctuationField]:
    """``S = (v + w) / sqrt 2`` and ``D = (v - w) / sqrt 2`` after rescaling by ``sqrt(2N)``."""
    s = math.sqrt(2.0 * pair.length)
    return (FluctuationField(pair.v + pair.w, s, "sqrt(2)*sqrt(2N)"),
            FluctuationField(pair.v - pair.w, s, "sqrt(2)*sqrt(2N)"))


def midpoint_D(samples: np.ndarray, offset: float | None = None, rng=None) -> np.ndarray:
    """``D(1/2)`` for stacked samples ``(M, 2, 2N + 1)``.

    The lattice value is ``m = (v - w)(N) / 2``. With ``offset`` it is replaced
    by ``m + offset + U - 1/2``, ``U`` uniform on ``[0, 1)``: ``offset = 0`` spreads
    each atom over its own cell, ``offset = 1`` also adds the unit gap that
    separates weakly ordered walks from strictly non-intersecting ones.
    """
    L = samples.shape[-1] - 1
    N = L // 2
    m = (samples[:, 0, N] - samples[:, 1, N]) / 2.0
    if offset is not None:
        m = m + offset - 0.5 + as_generator(rng).random(m.size)
    return m / math.sqrt(N)


def midpoint_S(samples: np.ndarray, jitter: bool = False, rng=None) -> np.ndarray:
    L = samples.shape[-1] - 1
    N = L // 2
    x = (samples[:, 0, N] + samples[:, 1, N]).astype(float)
    if jitter:
        # lattice step of v + w at an even site is 4
        x = x + 4.0 * (as_generator(rng).random(x.size) - 0.5)
    return x / (math.sqrt(2.0) * math.sqrt(L))


@dataclass
class ReflectionMeasure:
    """Binned contact events on ``[0, horizon] x (0, 1)``, upward- and downward-driven parts apart."""

    time_edges: np.ndarray
    space_edges: np.ndarray
    upward: np.ndarray
    downward: np.ndarray
    weight: float
    normalization: str

    @property
    def total(self) -> np.ndarray:
        return self.upward + self.downward


def reflection_measure(log: ContactEventLog, horizon: float, bins: tuple[int, int] = (10, 10)
                       ) -> ReflectionMeasure:
    """Each contact flip carries mass ``2 / (2N)^{3/2}``, the area moved by one rescaled corner flip."""
    L = log.length
    weight = 2.0 / L ** 1.5
    te = np.linspace(0.0, horizon, bins[0] + 1)
    xe = np.linspace(0.0, 1.0, bins[1] + 1)
    t = np.asarray(log.t, dtype=float)
    x = np.asarray(log.k, dtype=float) / L
    typ = np.asarray(log.type)
    hist = {}
    for name in ("upward", "downward"):
        sel = typ == name
        h, _, _ = np.histogram2d(t[sel], x[sel], bins=(te, xe)) if sel.any() else (
            np.zeros(bins), None, None)
        hist[name] = h * weight
    return ReflectionMeasure(te, xe, hist["upward"], hist["downward"], weight,
                             "2/(2N)^(3/2) per logged contact flip")


# ---------------------------------------------------------------------------
# Generator action on exponential test functions


def pairing_weights(length: int, phi) -> np.ndarray:
    """Hat weights so that ``<v-field, phi> = v @ w / (2N)^{3/2}``."""
    return phi.weights(length) if phi is not None else np.zeros(length + 1)


def psi_and_reflection(V: np.ndarray, W: np.ndarray, phi_v, phi_w, sites=None):
    """``psi(u)`` and ``sum_k R_k(u)`` for stacked states.

    ``R_k`` is the reflection part of ``L psi / ((2N)^2 psi)``; if ``sites`` is
    given only that site (per row) contributes.
    """
    V = np.atleast_2d(V)
    W = np.atleast_2d(W)
    L = V.shape[1] - 1
    Pv = pairing_weights(L, phi_v)
    Pw = pairing_weights(L, phi_w)
    scale = L ** 1.5
    psi = np.exp(1j * (V @ Pv + W @ Pw) / scale)
    lapv = V[:, 2:] - 2 * V[:, 1:-1] + V[:, :-2]
    lapw = W[:, 2:] - 2 * W[:, 1:-1] + W[:, :-2]
    contact = (V[:, :-2] == W[:, :-2]) & (V[:, 1:-1] == W[:, 1:-1]) & (V[:, 2:] == W[:, 2:])
    up = contact & (lapv == -2)
    down = contact & (lapv == 2)
    dv = np.exp(1j * lapv * Pv[1:-1] / scale)
    dw = np.exp(1j * lapw * Pw[1:-1] / scale)
    joint = 0.25 * (dv * dw - 1.0)
    Rk = np.where(up, -0.5 * (dv - 1.0) + joint, 0.0) + np.where(down, -0.5 * (dw - 1.0) + joint, 0.0)
    if sites is not None:
        idx = np.asarray(sites) - 1
        Rk = Rk[np.arange(Rk.shape[0]), idx]
        return psi, Rk
    return psi, Rk.sum(axis=1)


def contact_term_discrete(half_length: int, phi_v, phi_w, rng, samples: int = 100_000,
                          F: Callable | None = None, method: str = "stratified",
                          chunk: int = 4096) -> ComplexEstimate:
    """``int F psi (2N)^2 sum_k R_k dm_N``: the contact part of the discrete Sigma measure.

    ``stratified`` draws ``(k, j, type)`` from the exact Karlin-McGregor weights
    restricted to sites where ``Phi_v - Phi_w`` is non-zero and then a uniform
    state with that contact; ``stationary`` averages over plain uniform samples.
    ``F`` maps stacked rescaled ``(v, w)`` value arrays to real values.
    """
    rng = as_generator(rng)
    L = 2 * half_length
    vals = []
    if method == "stationary":
        done = 0
        while done < samples:
            m = min(chunk, samples - done)
            X = sample_uniform_many(half_length, m, rng)
            psi, R = psi_and_reflection(X[:, 0], X[:, 1], phi_v, phi_w)
            f = 1.0 if F is None else F(X[:, 0] / math.sqrt(L), X[:, 1] / math.sqrt(L))
            vals.append(f * psi * R * L * L)
            done += m
        return ComplexEstimate.from_samples(np.concatenate(vals))
    if method != "stratified":
        raise ValueError(f"unknown method {method!r}")
    diff = pairing_weights(L, phi_v) - pairing_weights(L, phi_w)
    ks = np.flatnonzero(np.abs(diff[1:-1]) > 0) + 1
    if ks.size == 0:
        return ComplexEstimate(0.0, 0.0, 0.0, 0.0, samples)
    K, J, P = contact_weights(half_length, ks)
    total = 2.0 * P.sum()  # upward and downward strata carry equal weight
    probs = np.concatenate([P, P]) / total
    cells = rng.choice(probs.size, size=samples, p=probs)
    order = np.argsort(cells, kind="stable")
    cells = cells[order]
    uniq, counts = np.unique(cells, return_counts=True)
    for cell, cnt in zip(uniq, counts):
        ctype = "upward" if cell < P.size else "downward"
        idx = cell % P.size
        k, j = int(K[idx]), int(J[idx])
        X = sample_contact_configs(half_length, k, j, ctype, int(cnt), rng)
        psi, Rk = psi_and_reflection(X[:, 0], X[:, 1], phi_v, phi_w, sites=np.full(cnt, k))
        f = 1.0 if F is None else F(X[:, 0] / math.sqrt(L), X[:, 1] / math.sqrt(L))
        vals.append(f * psi * Rk * L * L)
    est = ComplexEstimate.from_samples(np.concatenate(vals))
    return ComplexEstimate(est.re * total, est.im * total, est.se_re * total, est.se_im * total, samples)


def contact_term_leading(half_length: int, phi_v, phi_w) -> complex:
    """Deterministic ``F = 1, psi = 1`` version: ``i sqrt(2N)/2 sum_k (Phi_v - Phi_w)(k) m_N(contact at k)``."""
    L = 2 * half_length
    diff = pairing_weights(L, phi_v) - pairing_weights(L, phi_w)
    ks = np.flatnonzero(np.abs(diff[1:-1]) > 0) + 1
    if ks.size == 0:
        return 0j
    K, J, P = contact_weights(half_length, ks)
    per_k = np.bincount(K, weights=P, minlength=L + 1)
    return 1j * math.sqrt(L) / 2.0 * float(np.sum(2.0 * per_k[ks] * diff[ks]))


def states_with_contacts(arrays: np.ndarray) -> np.ndarray:
    """Boolean mask of stacked states having at least one contact corner."""
    V, W = arrays[:, 0], arrays[:, 1]
    lap = V[:, 2:] - 2 * V[:, 1:-1] + V[:, :-2]
    contact = (V[:, :-2] == W[:, :-2]) & (V[:, 1:-1] == W[:, 1:-1]) & (V[:, 2:] == W[:, 2:])
    return (contact & (lap != 0)).any(axis=1)


__all__ = [
    "ContactEventLog", "Move", "OrderViolation", "PairTrajectory", "ReflectedState", "ReflectionMeasure",
    "bottom_pair", "contact_points", "contact_prob", "contact_prob_asymptotic", "contact_prob_exact",
    "contact_term_discrete", "contact_term_leading", "contact_weights", "coupled_evolve", "enumerate_arrays",
    "enumerate_states", "envelope", "evolve", "flip_rate", "km_count", "log_km_count", "midpoint_D",
    "midpoint_S", "moves", "pair_distance", "psi_and_reflection", "reflection_measure", "rescale_pair",
    "sample_contact_configs", "sample_uniform", "sample_uniform_many", "state_space_size", "step",
    "sum_diff", "top_pair", "zigzag_pair",
]
