"""Exact checks on enumerated state spaces: generators, invariant measures, resolvents,
the discrete integration-by-parts identity, the bulk/reflection split of the pair
generator, Lipschitz bounds for resolvents, and discrete-versus-continuum Sigma tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import gradphi, oracle, reflected, zrp
from .lattice import piecewise_linear_l1
from .rng import as_generator
from .stats import ComplexEstimate, Estimate

STATE_GUARD = 250_000


class GuardError(ValueError):
    pass


@dataclass
class FiniteGenerator:
    """Enumerated chain: transitions ``(src, dst, rate)`` with exact rates, and a candidate invariant law.

    ``fields`` lists, per path component, the raw values ``(M, L + 1)`` and the
    scale such that the rescaled field at ``k / L`` is ``raw[:, k] / scale``.
    """

    model: str
    states: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    rates_exact: list
    m_exact: list
    fields: list
    meta: dict = field(default_factory=dict)
    _Q: sparse.csr_matrix | None = field(default=None, repr=False)
    _metric: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return int(self.states.shape[0])

    @property
    def rates(self) -> np.ndarray:
        return np.array([float(r) for r in self.rates_exact])

    @property
    def m(self) -> np.ndarray:
        m = np.array([float(x) for x in self.m_exact])
        return m / m.sum()

    @property
    def Q(self) -> sparse.csr_matrix:
        if self._Q is None:
            n = self.size
            off = sparse.csr_matrix((self.rates, (self.src, self.dst)), shape=(n, n))
            out = np.asarray(off.sum(axis=1)).ravel()
            self._Q = (off - sparse.diags(out)).tocsr()
        return self._Q

    def adjoint(self) -> sparse.csr_matrix:
        """``L* = D_m^{-1} Q^T D_m``, the adjoint of ``Q`` in ``L^2(m)``."""
        m = self.m
        return (sparse.diags(1.0 / m) @ self.Q.T @ sparse.diags(m)).tocsr()

    def theta(self, phis: Sequence) -> np.ndarray:
        """``sum_c <u_c, phi_c>`` for every state (exact piecewise-linear pairing)."""
        out = np.zeros(self.size)
        for (raw, scale), phi in zip(self.fields, phis):
            if phi is None:
                continue
            L = raw.shape[1] - 1
            out += raw @ phi.weights(L) / (scale * L)
        return out

    def psi(self, phis: Sequence) -> np.ndarray:
        return np.exp(1j * self.theta(phis))

    @property
    def metric(self) -> np.ndarray:
        """Pairwise sums of L1 distances between rescaled components."""
        if self._metric is None:
            n = self.size
            d = np.zeros((n, n))
            for raw, scale in self.fields:
                L = raw.shape[1] - 1
                vals = raw / scale
                for i in range(n):
                    diff = vals - vals[i]
                    a, b = diff[:, :-1], diff[:, 1:]
                    same = a * b >= 0
                    absa, absb = np.abs(a), np.abs(b)
                    den = np.where(same, 1.0, absa + absb)
                    cell = np.where(same, 0.5 * (absa + absb), 0.5 * (a * a + b * b) / den)
                    d[i] += cell.sum(axis=1) / L
            self._metric = d
        return self._metric


# ---------------------------------------------------------------------------
# Builders


def _codes(arrays: np.ndarray) -> np.ndarray:
    """Integer code of each ordered pair from its step bits."""
    L = arrays.shape[-1] - 1
    sv = (np.diff(arrays[:, 0], axis=1) + 1) // 2
    sw = (np.diff(arrays[:, 1], axis=1) + 1) // 2
    pw = 1 << np.arange(L, dtype=np.int64)
    return sv @ pw + (sw @ pw) * (1 << L)


def build_reflected(half_length: int, guard: int = STATE_GUARD) -> FiniteGenerator:
    L = 2 * half_length
    size = reflected.state_space_size(half_length)
    if size > guard:
        raise GuardError(f"{size} states exceed the guard {guard}")
    S = reflected.enumerate_arrays(half_length)
    codes = _codes(S)
    order = np.argsort(codes)
    S, codes = S[order], codes[order]
    V, W = S[:, 0], S[:, 1]
    R = reflected.flip_rate(L)
    src, dst, rates, site, kind, ctype = [], [], [], [], [], []

    def add(mask, nv, nw, rate, k, kd, ct):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return
        T = np.stack([nv[idx], nw[idx]], axis=1)
        assert (T[:, 0] >= T[:, 1]).all()
        tgt = np.searchsorted(codes, _codes(T))
        assert (codes[tgt] == _codes(T)).all()
        src.append(idx)
        dst.append(tgt)
        rates.append(np.full(idx.size, rate, dtype=np.int64))
        site.append(np.full(idx.size, k))
        kind.append(np.full(idx.size, kd))
        ctype.append(np.full(idx.size, ct))

    for k in range(1, L):
        lv = V[:, k + 1] - 2 * V[:, k] + V[:, k - 1]
        lw = W[:, k + 1] - 2 * W[:, k] + W[:, k - 1]
        contact = (V[:, k - 1] == W[:, k - 1]) & (V[:, k] == W[:, k]) & (V[:, k + 1] == W[:, k + 1])
        vf, wf = V.copy(), W.copy()
        vf[:, k] += lv  # flipping a corner moves it by its Laplacian
        wf[:, k] += lw
        add(~contact & (lv != 0), vf, W, R, k, 0, 0)
        add(~contact & (lw != 0), V, wf, R, k, 1, 0)
        up = contact & (lv == -2)
        down = contact & (lv == 2)
        add(up, V, wf, R, k, 1, 1)
        add(up, vf, wf, R // 2, k, 2, 1)
        add(down, vf, W, R, k, 0, 2)
        add(down, vf, wf, R // 2, k, 2, 2)
    n = S.shape[0]
    g = FiniteGenerator(
        "reflected", S, np.concatenate(src), np.concatenate(dst),
        [int(r) for r in np.concatenate(rates)], [Fraction(1, n)] * n,
        [(V, math.sqrt(L)), (W, math.sqrt(L))],
        {"half_length": half_length, "uniform_m": True, "site": np.concatenate(site),
         "kind": np.concatenate(kind), "contact": np.concatenate(ctype), "codes": codes},
    )
    return g


def _frac(x: float) -> Fraction:
    return Fraction(x)  # floats are dyadic rationals, so this is exact


def build_zrp(n_sites: int, nbar: float, tau: zrp.RateFunction, guard: int = STATE_GUARD) -> FiniteGenerator:
    from .lattice import canonical_total

    total = canonical_total(n_sites, nbar)
    S = zrp.enumerate_configurations(n_sites, total)
    if S.shape[0] > guard:
        raise GuardError(f"{S.shape[0]} states exceed the guard {guard}")
    index = {tuple(s): i for i, s in enumerate(S)}
    tab = [_frac(float(x)) for x in tau.values(max(total, 1))]
    src, dst, rates = [], [], []
    for a, s in enumerate(S):
        for i in range(n_sites):
            if s[i] == 0:
                continue
            for j in (i - 1, i + 1):
                if 0 <= j < n_sites:
                    t = s.copy()
                    t[i] -= 1
                    t[j] += 1
                    src.append(a)
                    dst.append(index[tuple(t)])
                    rates.append(Fraction(n_sites * n_sites) * tab[s[i]] / 2)
    # pi ∝ prod_i 1 / prod_{j <= n(i)} tau(j)
    cum = [Fraction(1)]
    for k in range(1, total + 1):
        cum.append(cum[-1] * tab[k])
    m = []
    for s in S:
        w = Fraction(1)
        for c in s:
            w /= cum[c]
        m.append(w)
    z = sum(m)
    m = [x / z for x in m]
    raw = zrp.height_raw(S, nbar)
    return FiniteGenerator("zrp", S, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), rates, m,
                           [(raw, math.sqrt(n_sites))],
                           {"n_sites": n_sites, "density": nbar, "tau": tau.describe(), "uniform_m": False})


def build_gradphi(n_sites: int, V: gradphi.Potential, cap: int, guard: int = STATE_GUARD) -> FiniteGenerator:
    """Integer heat bath with hard wall on heights ``{0, ..., cap}`` (the cap is part of the model)."""
    if not V.integer:
        raise ValueError("finite generator needs an integer potential")
    inner = n_sites - 1
    size = (cap + 1) ** inner
    if size > guard:
        raise GuardError(f"{size} states exceed the guard {guard}")
    grids = np.stack(np.meshgrid(*[np.arange(cap + 1)] * inner, indexing="ij"), axis=-1).reshape(-1, inner)
    S = np.zeros((grids.shape[0], n_sites + 1), dtype=np.int64)
    S[:, 1:-1] = grids
    if V.exact_weight is not None:
        wfun = V.exact_weight
    else:
        wfun = lambda x: math.exp(-float(V(x)))  # noqa: E731
    wcache = {d: wfun(d) for d in range(-cap, cap + 1)}
    stride = (cap + 1) ** np.arange(inner - 1, -1, -1)
    src, dst, rates = [], [], []
    N2 = n_sites * n_sites
    for a, h in enumerate(S):
        for i in range(1, n_sites):
            left, right = h[i - 1], h[i + 1]
            ws = [wcache[x - left] * wcache[right - x] for x in range(cap + 1)]
            z = sum(ws)
            for x in range(cap + 1):
                if x == h[i]:
                    continue
                t = h[1:-1].copy()
                t[i - 1] = x
                src.append(a)
                dst.append(int(t @ stride))
                rates.append(N2 * ws[x] / z)
    m = []
    for h in S:
        w = 1
        for d in np.diff(h):
            w = w * wcache[int(d)]
        m.append(w)
    z = sum(m)
    m = [x / z for x in m]
    return FiniteGenerator("gradphi", S, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), rates, m,
                           [(S.astype(float), math.sqrt(n_sites))],
                           {"n_sites": n_sites, "cap": cap, "potential": V.kind, "uniform_m": False})


def build_generator(model: str, **params) -> FiniteGenerator:
    if model == "reflected":
        return build_reflected(params["half_length"], params.get("guard", STATE_GUARD))
    if model == "zrp":
        return build_zrp(params["n_sites"], params["density"], params.get("tau", zrp.RateFunction.linear()),
                         params.get("guard", STATE_GUARD))
    if model == "gradphi":
        return build_gradphi(params["n_sites"], params["potential"], params.get("cap", 3),
                             params.get("guard", STATE_GUARD))
    raise ValueError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# Stationarity


@dataclass
class StationarityReport:
    residual: object  # exact (Fraction/int) or float
    detailed_balance: object
    exact: bool

    @property
    def ok(self) -> bool:
        return self.residual == 0 and self.detailed_balance == 0


def stationarity_residual(G: FiniteGenerator, m: Sequence | None = None, exact: bool = True) -> StationarityReport:
    """``||m^T Q||_inf`` and ``max |m(x) Q(x,y) - m(y) Q(y,x)|``.

    Exact mode uses integer arithmetic when ``m`` is uniform and integer rates
    allow it, and ``Fraction`` arithmetic otherwise.
    """
    n = G.size
    if not exact:
        mv = G.m if m is None else np.asarray(m, dtype=float)
        res = float(np.abs(G.Q.T @ mv).max())
        Qc = G.Q.tocoo()
        M = sparse.csr_matrix((mv[Qc.row] * Qc.data, (Qc.row, Qc.col)), shape=(n, n))
        off = M - sparse.diags(M.diagonal())
        db = float(np.abs((off - off.T).data).max(initial=0.0))
        return StationarityReport(res, db, False)
    mm = G.m_exact if m is None else list(m)
    uniform = all(x == mm[0] for x in mm)
    if uniform and all(isinstance(r, int) for r in G.rates_exact):
        r = np.array(G.rates_exact, dtype=np.int64)
        inflow = np.zeros(n, dtype=np.int64)
        outflow = np.zeros(n, dtype=np.int64)
        np.add.at(inflow, G.dst, r)
        np.add.at(outflow, G.src, r)
        res = int(np.abs(inflow - outflow).max()) * mm[0]
        key = G.src.astype(np.int64) * n + G.dst
        rkey = G.dst.astype(np.int64) * n + G.src
        order = np.argsort(key)
        pos = np.searchsorted(key[order], rkey)
        pos = np.clip(pos, 0, key.size - 1)
        found = key[order][pos] == rkey
        rev = np.where(found, r[order][pos], 0)
        db = int(np.abs(r - rev).max()) * mm[0]
        return StationarityReport(res, db, True)
    flux = {}
    bal = [Fraction(0)] * n
    for s, d, r in zip(G.src, G.dst, G.rates_exact):
        f = mm[s] * r
        flux[(int(s), int(d))] = f
        bal[d] += f
        bal[s] -= f
    res = max(abs(x) for x in bal)
    db = max((abs(f - flux.get((d, s), 0)) for (s, d), f in flux.items()), default=Fraction(0))
    return StationarityReport(res, db, True)


def drift_identity_violation(G: FiniteGenerator) -> int:
    """``max |L(v + w)(k) - ((2N)^2 / 2) Delta(v + w)(k)|`` over all states and sites (exact integers)."""
    if G.model != "reflected":
        raise ValueError("drift identity is a property of the reflected pair")
    S = G.states
    L = S.shape[-1] - 1
    R = reflected.flip_rate(L)
    s = S[:, 0] + S[:, 1]
    r = np.array(G.rates_exact, dtype=np.int64)
    ds = (S[G.dst, 0] + S[G.dst, 1]) - s[G.src]  # (T, L+1)
    Ls = np.zeros_like(s)
    np.add.at(Ls, G.src, r[:, None] * ds)
    lap = np.zeros_like(s)
    lap[:, 1:-1] = s[:, 2:] - 2 * s[:, 1:-1] + s[:, :-2]
    return int(np.abs(Ls[:, 1:-1] - R * lap[:, 1:-1]).max())


# ---------------------------------------------------------------------------
# Resolvents


@dataclass
class ResolventSolution:
    lam: float
    f: np.ndarray
    F: np.ndarray
    residual: float


def resolvent_solve(G: FiniteGenerator, lam: float, f) -> ResolventSolution:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    f = np.asarray(f)
    A = (lam * sparse.identity(G.size, format="csc") - G.Q.tocsc())
    try:
        lu = splinalg.splu(A)
        F = lu.solve(f.astype(complex) if np.iscomplexobj(f) else f.astype(float))
    except RuntimeError as exc:
        cond = splinalg.onenormest(A) * splinalg.onenormest(splinalg.inv(A))
        raise RuntimeError(f"resolvent solve failed (condition ~ {cond:.3g})") from exc
    res = float(np.abs(A @ F - f).max())
    scale = max(float(np.abs(f).max()), 1e-300)
    if res > 1e-10 * scale:
        raise RuntimeError(f"resolvent residual {res} too large")
    return ResolventSolution(float(lam), f, F, res)


def verify_discrete_ibpf(G: FiniteGenerator, lam: float, f, phis: Sequence) -> dict:
    """Check ``-sum F psi sigma + lam sum F psi m - sum f psi m = 0`` with ``psi sigma = (L* psi) m``."""
    sol = resolvent_solve(G, lam, f)
    m = G.m
    psi = G.psi(phis)
    Lstar_psi = G.adjoint() @ psi
    sigma = Lstar_psi * m / psi
    F = sol.F
    terms = (-np.sum(F * psi * sigma), lam * np.sum(F * psi * m), -np.sum(np.asarray(f) * psi * m))
    violation = abs(sum(terms))
    scale = sum(abs(t) for t in terms) + 1e-300
    mass = abs(np.sum(Lstar_psi * m))
    return {"violation": float(violation), "scaled": float(violation / max(scale, 1.0)),
            "stationarity_mass": float(mass), "residual": sol.residual}


def split_generator_action(G: FiniteGenerator, phi_v, phi_w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(bulk, reflection, L psi)``: bulk is ``(2N)^2 psi sum_k A_k`` with every corner free to flip
    and reflection the correction ``(2N)^2 psi sum_k R_k`` at contact points."""
    if G.model != "reflected":
        raise ValueError("split is defined for the reflected pair")
    _, bulk, refl = generator_psi_reflected(G.states[:, 0], G.states[:, 1], phi_v, phi_w)
    psi = G.psi([phi_v, phi_w])
    Lpsi = G.Q @ psi
    return bulk, refl, Lpsi


# ---------------------------------------------------------------------------
# Lipschitz bounds


def random_lipschitz(G: FiniteGenerator, rng, kind: int | None = None) -> np.ndarray:
    """Distance-to-a-state maps and random mixtures of them (all Lipschitz for the table metric)."""
    rng = as_generator(rng)
    d = G.metric
    kind = int(rng.integers(3)) if kind is None else kind
    if kind == 0:
        return d[int(rng.integers(G.size))].copy()
    picks = rng.integers(G.size, size=4)
    coef = rng.normal(size=4)
    if kind == 1:
        return coef @ d[picks]
    return np.minimum(d[picks[0]], d[picks[1]]) - 0.5 * np.maximum(d[picks[2]], d[picks[3]])


def lipschitz_seminorm(G: FiniteGenerator, f: np.ndarray) -> float:
    d = G.metric
    diff = np.abs(f[:, None] - f[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(d > 0, diff / d, 0.0)
    return float(ratio.max())


def lipschitz_ratio(G: FiniteGenerator, lam: float, trials: int, rng) -> dict:
    """Largest observed ``[R_lam f]_Lip / [f]_Lip`` over random Lipschitz ``f``, with ceiling ``1/lam``."""
    rng = as_generator(rng)
    best, used = 0.0, 0
    for _ in range(trials):
        f = random_lipschitz(G, rng)
        lf = lipschitz_seminorm(G, f)
        if lf == 0:
            continue
        F = resolvent_solve(G, lam, f).F
        best = max(best, lipschitz_seminorm(G, F) / lf)
        used += 1
    return {"ratio": best, "ceiling": 1.0 / lam, "trials": used}


# ---------------------------------------------------------------------------
# Monte Carlo resolvent for the pair


@njit(cache=True)
def _state_code(V, W, L):
    c = 0
    for i in range(L):
        if V[0, i + 1] > V[0, i]:
            c |= 1 << i
        if W[0, i + 1] > W[0, i]:
            c |= 1 << (L + i)
    return c


@njit(cache=True)
def _mc_resolvent(v0, w0, codes, fvals, lam, ntraj, rng):
    L = v0.size - 1
    rate = 2.0 * L * L * (L - 1)
    V = np.empty((1, L + 1), dtype=np.int64)
    W = np.empty((1, L + 1), dtype=np.int64)
    s1 = 0.0
    s2 = 0.0
    for n in range(ntraj):
        V[0, :] = v0
        W[0, :] = w0
        T = rng.exponential(1.0 / lam)
        t = 0.0
        acc = 0.0
        idx = np.searchsorted(codes, _state_code(V, W, L))
        while True:
            dt = rng.exponential(1.0 / rate)
            if t + dt >= T:
                acc += (T - t) * fvals[idx]
                break
            acc += dt * fvals[idx]
            t += dt
            u = rng.random()
            x = u * (L - 1)
            k = int(x)
            if k >= L - 1:
                k = L - 2
            f = x - k
            k += 1
            up = f >= 0.5
            mark = 2.0 * f - (1.0 if up else 0.0)
            if reflected._flip(V, W, 0, k, up, mark) != 0:
                idx = np.searchsorted(codes, _state_code(V, W, L))
        s1 += acc
        s2 += acc * acc
    return s1, s2


def mc_resolvent(G: FiniteGenerator, lam: float, f: np.ndarray, ntraj: int, rng,
                 starts: Sequence[int] | None = None) -> list[Estimate]:
    """``E int_0^T f(u_t) dt`` with ``T ~ Exp(lam)`` from each start state, simulated with the pair kernel."""
    if G.model != "reflected":
        raise ValueError("Monte Carlo resolvent is wired to the reflected pair kernel")
    rng = as_generator(rng)
    codes = G.meta["codes"]
    fv = np.asarray(f, dtype=float)
    out = []
    for i in (range(G.size) if starts is None else starts):
        s1, s2 = _mc_resolvent(G.states[i, 0].copy(), G.states[i, 1].copy(), codes, fv, float(lam), ntraj, rng)
        mean = s1 / ntraj
        var = max(s2 / ntraj - mean * mean, 0.0) * ntraj / (ntraj - 1)
        out.append(Estimate(f"R_lambda f[{i}]", mean, math.sqrt(var / ntraj), ntraj))
    return out


# ---------------------------------------------------------------------------
# Sigma_N on large systems by stationary sampling


def generator_psi_reflected(V: np.ndarray, W: np.ndarray, phi_v, phi_w):
    """``(psi, bulk, reflection)`` with ``L psi = bulk + reflection`` evaluated per state."""
    L = V.shape[1] - 1
    psi, Rsum = reflected.psi_and_reflection(V, W, phi_v, phi_w)
    Pv = reflected.pairing_weights(L, phi_v)
    Pw = reflected.pairing_weights(L, phi_w)
    scale = L ** 1.5
    lapv = V[:, 2:] - 2 * V[:, 1:-1] + V[:, :-2]
    lapw = W[:, 2:] - 2 * W[:, 1:-1] + W[:, :-2]
    A = 0.5 * np.where(lapv != 0, np.exp(1j * lapv * Pv[1:-1] / scale) - 1, 0).sum(axis=1)
    A += 0.5 * np.where(lapw != 0, np.exp(1j * lapw * Pw[1:-1] / scale) - 1, 0).sum(axis=1)
    return psi, L * L * psi * A, L * L * psi * Rsum


def generator_psi_zrp(counts: np.ndarray, nbar: float, tau: zrp.RateFunction, phi):
    """``(psi, L psi)`` for stacked occupation vectors."""
    c = np.atleast_2d(counts)
    n = c.shape[1]
    P = phi.weights(n)
    scale = n ** 1.5
    raw = zrp.height_raw(c, nbar)
    psi = np.exp(1j * raw @ P / scale)
    rates = n * n * tau(c) / 2.0
    right = np.exp(-1j * P[1:n] / scale) - 1.0  # jump i -> i+1 lowers h(i)
    left = np.exp(1j * P[1:n] / scale) - 1.0  # jump i -> i-1 raises the height at node i
    Lrel = (rates[:, :-1] * right).sum(axis=1) + (rates[:, 1:] * left).sum(axis=1)
    return psi, psi * Lrel


def sigma_discrete_zrp(n_sites: int, nbar: float, tau, phi, samples: int, rng, F: Callable | None = None
                       ) -> ComplexEstimate:
    """Monte Carlo ``int F psi dSigma_N = E_pi[F L psi]`` (reversibility gives ``L* = L``)."""
    rng = as_generator(rng)
    c = zrp.sample_invariant_many(n_sites, nbar, tau, rng, samples)
    psi, Lpsi = generator_psi_zrp(c, nbar, tau, phi)
    f = 1.0 if F is None else F(zrp.height_raw(c, nbar) / math.sqrt(n_sites))
    return ComplexEstimate.from_samples(f * Lpsi)


def sigma_discrete_reflected(half_length: int, phi_v, phi_w, samples: int, rng, F: Callable | None = None
                             ) -> dict:
    rng = as_generator(rng)
    X = reflected.sample_uniform_many(half_length, samples, rng)
    L = 2 * half_length
    psi, bulk, refl = generator_psi_reflected(X[:, 0], X[:, 1], phi_v, phi_w)
    f = 1.0 if F is None else F(X[:, 0] / math.sqrt(L), X[:, 1] / math.sqrt(L))
    return {"total": ComplexEstimate.from_samples(f * (bulk + refl)),
            "bulk": ComplexEstimate.from_samples(f * bulk),
            "reflection": ComplexEstimate.from_samples(f * refl)}


def _z(a: ComplexEstimate, b: ComplexEstimate) -> tuple[float, float]:
    def one(x, y, sx, sy):
        s = math.hypot(sx, sy)
        return (x - y) / s if s > 0 else (0.0 if x == y else math.inf)
    return one(a.re, b.re, a.se_re, b.se_re), one(a.im, b.im, a.se_im, b.se_im)


def sigma_convergence_report(model: str, sizes: Sequence[int], phis: Sequence, samples: int, rng,
                             F_list: Sequence[tuple[str, Callable | None]] = (("1", None),),
                             nbar: float = 1.0, tau: zrp.RateFunction | None = None,
                             c: float | None = None, sigma: float | None = None,
                             exact_max_states: int = 5000) -> list[dict]:
    """Discrete ``int F psi dSigma_N`` (exact when the state space is small, Monte Carlo otherwise)
    next to the continuum value, with z-scores per component."""
    rng = as_generator(rng)
    rows = []
    if model == "zrp":
        tau = tau or zrp.RateFunction.linear()
        law = zrp.build_nu(tau, zrp.phi_of(tau, nbar))
        c = law.rho / (2 * law.alpha) if c is None else c
        sigma = math.sqrt(law.tau_bar) if sigma is None else sigma
        (phi,) = phis
        for name, F in F_list:
            cont = oracle.sigma_limit_zrp(phi, c, sigma, samples, rng, F=F)
            for n in sizes:
                G = None
                from .lattice import canonical_total
                if math.comb(n + canonical_total(n, nbar) - 1, n - 1) <= exact_max_states and F is None:
                    G = build_zrp(n, nbar, tau)
                if G is not None:
                    psi = G.psi([phi])
                    val = complex(np.sum((G.Q @ psi) * G.m))
                    disc = ComplexEstimate(val.real, val.imag, 0.0, 0.0, G.size)
                    how = "exact"
                else:
                    disc = sigma_discrete_zrp(n, nbar, tau, phi, samples, rng, F)
                    how = "mc"
                zr, zi = _z(disc, cont)
                rows.append({"model": model, "size": n, "F": name, "method": how, "discrete": disc.to_dict(),
                             "continuum": cont.to_dict(), "z_re": zr, "z_im": zi})
        return rows
    if model == "reflected":
        phi_v, phi_w = phis
        for name, F in F_list:
            cont = oracle.sigma_limit_pair(phi_v, phi_w, samples, rng, F=F)
            for n in sizes:
                disc = sigma_discrete_reflected(n, phi_v, phi_w, samples, rng, F)
                zr, zi = _z(disc["total"], cont.total)
                rows.append({"model": model, "size": 2 * n, "F": name, "method": "mc",
                             "discrete": disc["total"].to_dict(), "discrete_reflection": disc["reflection"].to_dict(),
                             "continuum": cont.total.to_dict(), "continuum_contact": cont.contact.to_dict(),
                             "z_re": zr, "z_im": zi})
        return rows
    raise ValueError(f"unknown model {model!r}")
