"""``fluctua`` command line: subcommands build an :class:`ExperimentConfig` and hand it to :func:`run`."""
from __future__ import annotations

import argparse
import csv
import json
import math
import shutil
import sys
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse
from scipy import stats as sps

from . import acceptance, gradphi, oracle, reflected, verify, zrp
from .config import ConfigError, ExperimentConfig, dump, load
from .lattice import OccupationVector, PathPair, bump, canonical_total, fields_to_csv, pair_to_csv
from .rng import run_replicas, stream
from .stats import Estimate, empirical_covariance, ks_test, mean_estimate

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _checkpoints(cfg: ExperimentConfig, count: int = 5) -> np.ndarray:
    return np.linspace(0.0, cfg.horizon, count)


def _probes(cfg: ExperimentConfig) -> list[float]:
    return [float(p) for p in cfg.probes] if cfg.probes else [0.25, 0.5, 0.75]


# ---------------------------------------------------------------------------
# zrp


def _zrp_setup(cfg):
    p = cfg.params
    n = int(p.get("n_sites", 32))
    nbar = float(p.get("density", 1.0))
    tau = zrp.RateFunction.parse(str(p.get("tau", "linear")))
    return n, nbar, tau


def zrp_sample(cfg, out: Path) -> dict:
    n, nbar, tau = _zrp_setup(cfg)
    size = max(2, int(cfg.params.get("samples", cfg.replicas)))
    c = zrp.sample_invariant_many(n, nbar, tau, stream(cfg.seed, "zrp-sample"), size)
    law = zrp.build_nu(tau, zrp.phi_of(tau, nbar))
    u = zrp.height_raw(c, nbar) / math.sqrt(n)
    q = zrp.q_raw(c, tau, law.tau_bar) / math.sqrt(n)
    probes = _probes(cfg)
    idx = [int(round(s * n)) for s in probes]
    est = empirical_covariance(np.hstack([u[:, idx], q[:, idx]]))
    results = []
    for a, s in enumerate(probes):
        results.append(mean_estimate(f"u({s})", u[:, idx[a]]).to_dict())
        for b, t in enumerate(probes):
            k = len(probes)
            results.append(Estimate(f"cov_uu({s},{t})", est.matrix[a, b], est.se[a, b], size).to_dict())
            results.append(Estimate(f"cov_uq({s},{t})", est.matrix[a, k + b], est.se[a, k + b], size).to_dict())
        _write_csv(out / f"probe_{s}.csv", ["sample", "u", "q"],
                   [(i, float(u[i, idx[a]]), float(q[i, idx[a]])) for i in range(size)])
    grid = np.arange(n + 1) / n
    fields_to_csv(grid, {f"u{i}": u[i] for i in range(min(size, 4))}, out / "fields.csv")
    return {"results": results, "moments": {"alpha": law.alpha, "rho": law.rho, "gamma": law.gamma,
                                            "fugacity": law.a, "tau_bar": law.tau_bar}}


def _zrp_initial(n, nbar, tau, g, flat: bool):
    if flat:
        total = canonical_total(n, nbar)
        counts = np.full(n, total // n)
        counts[: total % n] += 1
        return OccupationVector(counts)
    return OccupationVector(zrp.sample_invariant_many(n, nbar, tau, g, 1)[0])


def zrp_evolve(cfg, out: Path) -> dict:
    n, nbar, tau = _zrp_setup(cfg)
    cps = _checkpoints(cfg)
    flat = bool(cfg.params.get("flat", False))

    def one(r, g):
        tr = zrp.evolve(_zrp_initial(n, nbar, tau, g, flat), cfg.horizon, tau, g, cps)
        return tr

    trs = run_replicas(one, cfg.replicas, cfg.seed, "zrp-evolve", cfg.workers)
    grid = np.arange(n + 1) / n
    h = zrp.height_raw(trs[0].configs, nbar) / math.sqrt(n)
    fields_to_csv(grid, {f"t={t}": h[c] for c, t in enumerate(cps)}, out / "trajectory.csv")
    results = []
    for s in _probes(cfg):
        k = int(round(s * n))
        vals = np.array([zrp.height_raw(tr.configs[-1], nbar)[0, k] / math.sqrt(n) for tr in trs])
        if vals.size >= 2:
            results.append(mean_estimate(f"u({s}, t={cfg.horizon})", vals).to_dict())
    return {"results": results, "events": int(sum(tr.events for tr in trs)), "checkpoints": cps.tolist()}


def zrp_contract(cfg, out: Path) -> dict:
    n, nbar, tau = _zrp_setup(cfg)
    cps = _checkpoints(cfg)

    def one(r, g):
        a, b = (OccupationVector(x) for x in zrp.sample_invariant_many(n, nbar, tau, g, 2))
        hi, lo = zrp.envelope(a, b)
        tr = zrp.coupled_evolve([a, b, hi, lo], cfg.horizon, tau, g, cps)
        return [float(zrp.l1_heights(tr[0].configs[c], tr[1].configs[c])[0]) for c in range(cps.size)]

    d = np.array(run_replicas(one, max(2, cfg.replicas), cfg.seed, "zrp-contract", cfg.workers))
    _write_csv(out / "distance.csv", ["t", "mean", "se"],
               [(float(t), float(d[:, c].mean()), float(d[:, c].std(ddof=1) / math.sqrt(len(d))))
                for c, t in enumerate(cps)])
    return {"results": [mean_estimate(f"l1(t={t})", d[:, c]).to_dict() for c, t in enumerate(cps)],
            "ordering": "held"}


# ---------------------------------------------------------------------------
# reflected


def _half(cfg) -> int:
    return int(cfg.params.get("half_length", 16))


def reflected_sample(cfg, out: Path) -> dict:
    n = _half(cfg)
    size = max(2, int(cfg.params.get("samples", cfg.replicas)))
    g = stream(cfg.seed, "reflected-sample")
    X = reflected.sample_uniform_many(n, size, g)
    s = reflected.midpoint_S(X, jitter=True, rng=g)
    d = reflected.midpoint_D(X, offset=0.0, rng=g)
    _write_csv(out / "probe_0.5.csv", ["sample", "S", "D"], [(i, float(s[i]), float(d[i])) for i in range(size)])
    pair_to_csv(PathPair(X[0, 0], X[0, 1]), out / "pair.csv")
    results = [ks_test(s, sps.norm(0, 0.5).cdf).to_dict() | {"name": "ks S(1/2) vs N(0,1/4)"},
               ks_test(d, oracle.excursion_cdf).to_dict() | {"name": "ks D(1/2) vs excursion"},
               mean_estimate("S(1/2)", s).to_dict(), mean_estimate("D(1/2)", d).to_dict()]
    return {"results": results}


def _start_pair(cfg, g) -> PathPair:
    n = _half(cfg)
    start = str(cfg.params.get("start", "uniform"))
    if start == "uniform":
        X = reflected.sample_uniform_many(n, 1, g)[0]
        return PathPair(X[0], X[1])
    table = {"zigzag": reflected.zigzag_pair, "top": reflected.top_pair, "bottom": reflected.bottom_pair}
    if start not in table:
        raise ConfigError(f"unknown start {start!r}")
    return table[start](n)


def reflected_evolve(cfg, out: Path) -> dict:
    cps = _checkpoints(cfg)
    g = stream(cfg.seed, "reflected-evolve")
    tr = reflected.evolve(_start_pair(cfg, g), cfg.horizon, g, cps, log=True)
    L = 2 * _half(cfg)
    grid = np.arange(L + 1) / L
    cols = {}
    for c, t in enumerate(cps):
        cols[f"v@t={t}"] = tr.v[c] / math.sqrt(L)
        cols[f"w@t={t}"] = tr.w[c] / math.sqrt(L)
    fields_to_csv(grid, cols, out / "trajectory.csv")
    tr.log.to_csv(out / "contacts.csv")
    return {"results": [], "events": tr.events, "contact_events": len(tr.log), "checkpoints": cps.tolist()}


def reflected_km(cfg, out: Path) -> dict:
    n = _half(cfg)
    K, J, P = reflected.contact_weights(n)
    A = reflected.contact_prob_asymptotic(n, K, J)
    rows = []
    for ctype in ("upward", "downward"):
        rows += [(int(k), int(j), ctype, float(p), float(a)) for k, j, p, a in zip(K, J, P, A)]
    _write_csv(out / "contacts.csv", ["k", "j", "type", "exact", "asymptotic"], rows)
    return {"results": [], "states": str(reflected.state_space_size(n)),
            "contact_mass": float(2 * P.sum())}


def _bins(cfg) -> tuple[int, int]:
    text = str(cfg.params.get("bins", "10x10"))
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise ConfigError(f"bins must look like TxX, got {text!r}") from exc


def reflected_contact_stats(cfg, out: Path) -> dict:
    bins = _bins(cfg)

    def one(r, g):
        return reflected.evolve(_start_pair(cfg, g), cfg.horizon, g, None, log=True).log

    logs = run_replicas(one, cfg.replicas, cfg.seed, "reflected-contacts", cfg.workers)
    log = logs[0]
    for other in logs[1:]:
        log = log.merge(other)
    log.to_csv(out / "contacts.csv")
    hists = [reflected.reflection_measure(lg, cfg.horizon, bins) for lg in logs]
    mean_up = np.mean([h.upward for h in hists], axis=0)
    mean_down = np.mean([h.downward for h in hists], axis=0)
    te, xe = hists[0].time_edges, hists[0].space_edges
    rows = []
    for i in range(bins[0]):
        for j in range(bins[1]):
            rows.append((float(te[i]), float(te[i + 1]), float(xe[j]), float(xe[j + 1]),
                         float(mean_up[i, j]), float(mean_down[i, j])))
    _write_csv(out / "reflection_measure.csv", ["t0", "t1", "x0", "x1", "upward", "downward"], rows)
    totals = np.array([h.total.sum() for h in hists])
    res = [mean_estimate("reflection mass", totals).to_dict()] if totals.size >= 2 else []
    return {"results": res, "contact_events": len(log), "weight": hists[0].weight}


def reflected_contract(cfg, out: Path) -> dict:
    n = _half(cfg)
    cps = _checkpoints(cfg)

    def one(r, g):
        X = reflected.sample_uniform_many(n, 2, g)
        a, b = PathPair(X[0, 0], X[0, 1]), PathPair(X[1, 0], X[1, 1])
        hi, lo = reflected.envelope(a, b)
        _, V, W, _ = reflected.coupled_evolve([a, b, hi, lo], cfg.horizon, g, cps)
        return reflected.pair_distance(V[:, 0], W[:, 0], V[:, 1], W[:, 1])

    d = np.array(run_replicas(one, max(2, cfg.replicas), cfg.seed, "reflected-contract", cfg.workers))
    _write_csv(out / "distance.csv", ["t", "mean", "se"],
               [(float(t), float(d[:, c].mean()), float(d[:, c].std(ddof=1) / math.sqrt(len(d))))
                for c, t in enumerate(cps)])
    return {"results": [mean_estimate(f"l1(t={t})", d[:, c]).to_dict() for c, t in enumerate(cps)],
            "ordering": "held"}


# ---------------------------------------------------------------------------
# gradphi


def _potential(cfg) -> gradphi.Potential:
    return gradphi.Potential.parse(str(cfg.params.get("potential", "quadratic")),
                                   integer=bool(cfg.params.get("integer", False)))


def gradphi_evolve(cfg, out: Path) -> dict:
    n = int(cfg.params.get("n_sites", 32))
    V = _potential(cfg)
    wall = bool(cfg.params.get("wall", False))
    cps = _checkpoints(cfg)
    dtype = np.int64 if V.integer else float

    def one(r, g):
        return gradphi.evolve(gradphi.GradPhiState(np.zeros(n + 1, dtype=dtype), wall), cfg.horizon, V, g, cps)

    trs = run_replicas(one, cfg.replicas, cfg.seed, "gradphi-evolve", cfg.workers)
    grid = np.arange(n + 1) / n
    fields_to_csv(grid, {f"t={t}": trs[0].heights[c] / math.sqrt(n) for c, t in enumerate(cps)},
                  out / "trajectory.csv")
    mid = np.array([tr.heights[-1, n // 2] / math.sqrt(n) for tr in trs])
    res = [mean_estimate(f"h(1/2, t={cfg.horizon})", mid).to_dict()] if mid.size >= 2 else []
    return {"results": res, "events": int(sum(tr.events for tr in trs)), "certificate": V.certificate}


def gradphi_sample(cfg, out: Path) -> dict:
    n = int(cfg.params.get("n_sites", 32))
    V = _potential(cfg)
    wall = bool(cfg.params.get("wall", False))
    size = max(2, int(cfg.params.get("samples", cfg.replicas)))
    h = gradphi.sample_equilibrium(n, V, stream(cfg.seed, "gradphi-sample"), wall, size,
                                   float(cfg.params.get("burn_in", 4.0)))
    u = h / math.sqrt(n)
    res = []
    for s in _probes(cfg):
        k = int(round(s * n))
        res.append(mean_estimate(f"h({s})", u[:, k]).to_dict())
        _write_csv(out / f"probe_{s}.csv", ["sample", "value"], [(i, float(u[i, k])) for i in range(size)])
    return {"results": res}


# ---------------------------------------------------------------------------
# oracle


def oracle_bridge(cfg, out: Path) -> dict:
    grid = int(cfg.params.get("grid", 256))
    size = max(2, int(cfg.params.get("samples", 1000)))
    c = float(cfg.params.get("c", 0.5))
    sigma = float(cfg.params.get("sigma", 1.0))
    law = oracle.BridgeLaw.for_spde(c, sigma, grid)
    b = oracle.sample_bridge(law, stream(cfg.seed, "oracle-bridge"), size)
    k = grid // 2
    fields_to_csv(law.x, {f"b{i}": b[i] for i in range(min(size, 4))}, out / "samples.csv")
    target = law.scale ** 2 / 4
    return {"results": [Estimate("var b(1/2)", float(b[:, k].var(ddof=1)),
                                 float(b[:, k].var(ddof=1) * math.sqrt(2 / (size - 1))), size).to_dict()],
            "target_variance": target}


def oracle_excursion(cfg, out: Path) -> dict:
    grid = int(cfg.params.get("grid", 256))
    size = max(2, int(cfg.params.get("samples", 1000)))
    method = str(cfg.params.get("method", "bessel3"))
    e = oracle.sample_excursion(grid, stream(cfg.seed, "oracle-excursion"), size, method)
    x = np.arange(grid + 1) / grid
    fields_to_csv(x, {f"e{i}": e[i] for i in range(min(size, 4))}, out / "samples.csv")
    mid = e[:, grid // 2]
    return {"results": [ks_test(mid, oracle.excursion_cdf).to_dict() | {"name": "ks e(1/2) vs excursion"},
                        mean_estimate("e(1/2)", mid).to_dict()],
            "target_mean": oracle.excursion_mean(0.5)}


def oracle_sigma(cfg, out: Path) -> dict:
    size = max(1000, int(cfg.params.get("samples", 10_000)))
    g = stream(cfg.seed, "oracle-sigma")
    model = str(cfg.params.get("target", "pair"))
    if model == "zrp":
        phi = bump(0.2, 0.8, 1.0)
        c = float(cfg.params.get("c", 0.5))
        sigma = float(cfg.params.get("sigma", 1.0))
        w = oracle.sigma_limit_zrp(phi, c, sigma, size, g)
        u = oracle.sigma_limit_zrp(phi, c, sigma, size, g, weighted=False)
        return {"results": [], "weighted": w.to_dict(), "unweighted": u.to_dict(),
                "weighted_exact": {"re": 0.0, "im": 0.0},
                "unweighted_exact": {"re": oracle.sigma_limit_zrp_exact(phi, c, sigma, False).real, "im": 0.0}}
    if model != "pair":
        raise ConfigError(f"unknown sigma target {model!r}")
    phi_v = bump(0.3, 0.7, 1.0)
    ev = oracle.sigma_limit_pair(phi_v, None, size, g)
    return {"results": [], **{k: v for k, v in ev.to_dict().items()},
            "contact_unweighted": {"re": 0.0, "im": oracle.contact_term_unweighted(phi_v, None).imag}}


# ---------------------------------------------------------------------------
# verify


def run_verify(cfg, out: Path) -> dict:
    """Exact checks on one enumerated model; ``passed`` is the conjunction of all statuses."""
    p = cfg.params
    model = str(p.get("model", "reflected"))
    size = int(p.get("size", 2))
    lam = float(p.get("lambda", 1.0))
    trials = int(p.get("trials", 100))
    g = stream(cfg.seed, "verify")
    if model == "reflected":
        G = verify.build_reflected(size)
    elif model == "zrp":
        G = verify.build_zrp(size, float(p.get("density", 1.0)), zrp.RateFunction.parse(str(p.get("tau", "linear"))))
    elif model == "gradphi":
        V = gradphi.Potential.absolute(1.0, integer=True, q=Fraction(1, 2))
        G = verify.build_gradphi(size, V, int(p.get("cap", 3)))
    else:
        raise ConfigError(f"unknown model {model!r}")
    checks = {}
    Q = G.Q
    rows = np.asarray(Q.sum(axis=1)).ravel()
    off = Q - sparse.diags(Q.diagonal())
    checks["generator"] = {"status": bool(abs(rows).max() <= 1e-12 and (off.data >= 0).all()),
                           "max_row_sum": float(abs(rows).max()), "states": G.size}
    st = verify.stationarity_residual(G)
    checks["stationarity"] = {"status": st.ok, "residual": str(st.residual),
                              "detailed_balance": str(st.detailed_balance)}
    if model == "reflected":
        dv = verify.drift_identity_violation(G)
        checks["drift_identity"] = {"status": dv == 0, "violation": dv}
    one = verify.resolvent_solve(G, lam, np.ones(G.size))
    checks["constants"] = {"status": bool(np.abs(one.F - 1 / lam).max() <= 1e-10 / lam),
                           "residual": one.residual}
    f = np.abs(g.normal(size=G.size))
    F = verify.resolvent_solve(G, lam, f).F
    checks["positivity"] = {"status": bool((F >= -1e-12).all() and lam * np.abs(F).max() <= np.abs(f).max() + 1e-10)}
    worst = 0.0
    for _ in range(trials):
        phis = [bump(float(g.uniform(0.02, 0.4)), float(g.uniform(0.6, 0.98)), float(g.uniform(0.5, 3)))
                for _ in range(len(G.fields))]
        r = verify.verify_discrete_ibpf(G, float(g.uniform(0.1, 5)), g.normal(size=G.size), phis)
        worst = max(worst, r["scaled"])
    checks["resolvent_identity"] = {"status": worst <= 1e-10, "max_violation": worst, "trials": trials}
    if model == "reflected":
        phv, phw = bump(0.1, 0.9, 1.5), bump(0.2, 0.7, 0.7)
        bulk, refl, Lpsi = verify.split_generator_action(G, phv, phw)
        mask = reflected.states_with_contacts(G.states)
        checks["generator_split"] = {"status": bool(np.abs(bulk + refl - Lpsi).max() <= 1e-12 and
                                                    (np.abs(refl[~mask]) == 0).all()),
                                     "max_error": float(np.abs(bulk + refl - Lpsi).max()),
                                     "states_with_reflection": int((np.abs(refl) > 0).sum()),
                                     "states_with_contacts": int(mask.sum())}
        if G.size <= 2000:
            lip = verify.lipschitz_ratio(G, lam, trials, g)
            checks["lipschitz"] = {"status": lip["ratio"] <= lip["ceiling"] + 1e-9, **lip}
    passed = all(c["status"] for c in checks.values())
    return {"results": [], "model": model, "size": size, "lambda": lam, "checks": checks, "passed": passed}


def run_acceptance_cfg(cfg, out: Path) -> dict:
    res = acceptance.run_suite(cfg.suite or "all", cfg.seed, cfg.budget, echo=print)
    return {"results": [], "criteria": [r.to_dict() for r in res], "passed": all(r.passed for r in res)}


HANDLERS: dict[tuple[str, str], Callable] = {
    ("zrp", "sample"): zrp_sample, ("zrp", "evolve"): zrp_evolve, ("zrp", "contract"): zrp_contract,
    ("reflected", "sample"): reflected_sample, ("reflected", "evolve"): reflected_evolve,
    ("reflected", "km"): reflected_km, ("reflected", "contact-stats"): reflected_contact_stats,
    ("reflected", "contract"): reflected_contract,
    ("gradphi", "evolve"): gradphi_evolve, ("gradphi", "sample"): gradphi_sample,
    ("oracle", "bridge"): oracle_bridge, ("oracle", "excursion"): oracle_excursion,
    ("oracle", "sigma"): oracle_sigma,
    ("verify", ""): run_verify, ("acceptance", ""): run_acceptance_cfg,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute ``cfg`` and write ``config.resolved``, CSVs and ``report.json`` into ``cfg.out``.

    Files are produced in a scratch directory and moved into place only on
    success, so a failing run leaves no partial artifacts behind.
    """
    cfg = cfg.with_env_seed()
    handler = HANDLERS.get((cfg.model, cfg.action))
    if handler is None:
        raise ConfigError(f"no handler for {cfg.model} {cfg.action}".strip())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        (scratch / "config.resolved").write_text(dump(cfg), encoding="utf-8", newline="\n")
        report = handler(cfg, scratch)
        report = {"command": f"{cfg.model} {cfg.action}".strip(), "seed": cfg.seed, **report}
        text = json.dumps(acceptance._jsonable(report), sort_keys=True, indent=2) + "\n"
        (scratch / "report.json").write_text(text, encoding="utf-8", newline="\n")
        for f in scratch.iterdir():
            shutil.move(str(f), out / f.name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return EXIT_OK if report.get("passed", True) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argparse


def _common(p: argparse.ArgumentParser, horizon: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--probes", type=float, nargs="*", default=None)
    if horizon:
        p.add_argument("--horizon", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fluctua", description="Interface fluctuation simulators and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    z = sub.add_parser("zrp", help="zero-range process")
    z.add_argument("action", choices=["sample", "evolve", "contract"])
    z.add_argument("--n-sites", type=int, required=True)
    z.add_argument("--density", type=float, default=1.0)
    z.add_argument("--tau", default="linear")
    z.add_argument("--samples", type=int, default=None)
    z.add_argument("--flat", action="store_true")
    _common(z)

    r = sub.add_parser("reflected", help="reflected pair of interfaces")
    r.add_argument("action", choices=["sample", "evolve", "km", "contact-stats", "contract"])
    r.add_argument("--half-length", type=int, required=True)
    r.add_argument("--bins", default="10x10")
    r.add_argument("--start", default="uniform", choices=["uniform", "zigzag", "top", "bottom"])
    r.add_argument("--samples", type=int, default=None)
    _common(r)

    g = sub.add_parser("gradphi", help="gradient interface with heat-bath dynamics")
    g.add_argument("action", choices=["evolve", "sample"])
    g.add_argument("--potential", default="quadratic")
    g.add_argument("--wall", action="store_true")
    g.add_argument("--integer", action="store_true")
    g.add_argument("--n-sites", type=int, required=True)
    g.add_argument("--samples", type=int, default=None)
    g.add_argument("--burn-in", type=float, default=4.0)
    _common(g)

    o = sub.add_parser("oracle", help="continuum reference samplers")
    o.add_argument("action", choices=["bridge", "excursion", "sigma"])
    o.add_argument("--grid", type=int, default=256)
    o.add_argument("--samples", type=int, default=10_000)
    o.add_argument("--method", default="bessel3", choices=["bessel3", "vervaat"])
    o.add_argument("--target", default="pair", choices=["pair", "zrp"])
    _common(o, horizon=False)

    v = sub.add_parser("verify", help="exact finite-state checks")
    v.add_argument("--model", required=True, choices=["reflected", "zrp", "gradphi"])
    v.add_argument("--size", type=int, required=True)
    v.add_argument("--lambda", dest="lam", type=float, default=1.0)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--density", type=float, default=1.0)
    v.add_argument("--tau", default="linear")
    v.add_argument("--cap", type=int, default=3)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="out")

    a = sub.add_parser("acceptance", help="run the acceptance criteria")
    a.add_argument("--suite", default="all")
    a.add_argument("--budget", default="full", choices=["small", "full"])
    a.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    a.add_argument("--out", default="out")

    c = sub.add_parser("run", help="run an experiment described by a config file")
    c.add_argument("config")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cmd = args.command
    if cmd == "run":
        return load(args.config)
    if cmd == "verify":
        params = {"model": args.model, "size": args.size, "lambda": args.lam, "trials": args.trials,
                  "density": args.density, "tau": args.tau, "cap": args.cap}
        return ExperimentConfig("verify", "", params, seed=args.seed, out=args.out)
    if cmd == "acceptance":
        if args.suite not in acceptance.SUITES:
            raise ConfigError(f"unknown suite {args.suite!r}; choose from {sorted(acceptance.SUITES)}")
        return ExperimentConfig("acceptance", "", {}, seed=args.seed, out=args.out, suite=args.suite,
                                budget=args.budget)
    params = {}
    if cmd == "zrp":
        params = {"n_sites": args.n_sites, "density": args.density, "tau": args.tau, "flat": args.flat}
    elif cmd == "reflected":
        params = {"half_length": args.half_length, "bins": args.bins, "start": args.start}
    elif cmd == "gradphi":
        params = {"n_sites": args.n_sites, "potential": args.potential, "wall": args.wall,
                  "integer": args.integer, "burn_in": args.burn_in}
    elif cmd == "oracle":
        params = {"grid": args.grid, "samples": args.samples, "method": args.method, "target": args.target}
    if getattr(args, "samples", None) is not None:
        params["samples"] = args.samples
    return ExperimentConfig(cmd, args.action, params, horizon=getattr(args, "horizon", 1.0),
                            replicas=args.replicas, probes=list(args.probes or []), seed=args.seed,
                            out=args.out, workers=args.workers)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except (ConfigError, zrp.DensityError, zrp.FugacityError, gradphi.NonNormalizableError) as exc:
        print(f"fluctua: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"fluctua: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
