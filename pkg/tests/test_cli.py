import json

import pytest

from fluctua.cli import EXIT_OK, EXIT_USAGE, main
from fluctua.config import ExperimentConfig, save


def run_cli(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


@pytest.mark.parametrize("argv,files", [
    (["zrp", "sample", "--n-sites", "16", "--samples", "500", "--probes", "0.25", "0.5"],
     ["probe_0.5.csv", "fields.csv"]),
    (["zrp", "evolve", "--n-sites", "8", "--horizon", "0.05", "--replicas", "2"], []),
    (["zrp", "contract", "--n-sites", "8", "--horizon", "0.05", "--replicas", "3"], ["distance.csv"]),
    (["reflected", "sample", "--half-length", "8", "--samples", "300"], ["probe_0.5.csv", "pair.csv"]),
    (["reflected", "evolve", "--half-length", "4", "--horizon", "0.05"], ["trajectory.csv", "contacts.csv"]),
    (["reflected", "km", "--half-length", "4"], ["contacts.csv"]),
    (["reflected", "contact-stats", "--half-length", "4", "--horizon", "0.05", "--bins", "2x3"],
     ["reflection_measure.csv"]),
    (["reflected", "contract", "--half-length", "4", "--horizon", "0.02", "--replicas", "2"], []),
    (["gradphi", "evolve", "--n-sites", "8", "--horizon", "0.05", "--wall"], []),
    (["gradphi", "sample", "--n-sites", "8", "--samples", "20", "--burn-in", "0.1"], []),
    (["oracle", "bridge", "--grid", "16", "--samples", "200"], []),
    (["oracle", "excursion", "--grid", "16", "--samples", "200"], []),
    (["oracle", "sigma", "--grid", "32", "--samples", "1000", "--target", "zrp"], []),
])
def test_subcommands(tmp_path, argv, files):
    code, out = run_cli(tmp_path, *argv, "--seed", "5")
    assert code == EXIT_OK
    assert (out / "config.resolved").exists()
    rep = report(out)
    assert rep["seed"] == 5 and rep["command"] == " ".join(argv[:2])
    for f in files:
        assert (out / f).exists(), f
    assert not [p for p in out.iterdir() if p.name.startswith(".partial-")]


def test_reflected_km_header(tmp_path):
    _, out = run_cli(tmp_path, "reflected", "km", "--half-length", "2")
    assert (out / "contacts.csv").read_text().splitlines()[0] == "k,j,type,exact,asymptotic"


def test_deterministic_report(tmp_path):
    args = ["reflected", "sample", "--half-length", "8", "--samples", "200", "--seed", "11"]
    _, a = run_cli(tmp_path, *args, name="a")
    _, b = run_cli(tmp_path, *args, name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "pair.csv").read_bytes() == (b / "pair.csv").read_bytes()


def test_env_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FLUCTUA_SEED", "42")
    _, out = run_cli(tmp_path, "oracle", "bridge", "--grid", "8", "--samples", "10", "--seed", "1")
    assert report(out)["seed"] == 42


def test_verify_passes(tmp_path):
    code, out = run_cli(tmp_path, "verify", "--model", "reflected", "--size", "2", "--trials", "20")
    rep = report(out)
    assert code == EXIT_OK and rep["passed"]


@pytest.mark.parametrize("argv", [
    ["verify", "--model", "zrp", "--size", "3"],
    ["verify", "--model", "gradphi", "--size", "3", "--cap", "2"],
])
def test_verify_other_models(tmp_path, argv):
    code, out = run_cli(tmp_path, *argv, "--trials", "10")
    assert code == EXIT_OK and report(out)["passed"]


def test_missing_required_flag():
    with pytest.raises(SystemExit) as exc:
        main(["zrp", "sample"])
    assert exc.value.code == EXIT_USAGE


def test_bad_density(tmp_path):
    code, out = run_cli(tmp_path, "zrp", "sample", "--n-sites", "8", "--density", "-1")
    assert code == EXIT_USAGE
    assert not (out / "report.json").exists()


def test_unknown_suite(tmp_path):
    code, _ = run_cli(tmp_path, "acceptance", "--suite", "nope")
    assert code == EXIT_USAGE


def test_run_config(tmp_path):
    cfg = ExperimentConfig("reflected", "km", {"half_length": 3}, out=str(tmp_path / "o"), seed=2)
    save(cfg, tmp_path / "c.cfg")
    assert main(["run", str(tmp_path / "c.cfg")]) == EXIT_OK
    assert report(tmp_path / "o")["command"] == "reflected km"


def test_bad_config_file(tmp_path):
    (tmp_path / "bad.cfg").write_text("experiment.model = tasep\n")
    assert main(["run", str(tmp_path / "bad.cfg")]) == EXIT_USAGE
    assert main(["run", str(tmp_path / "missing.cfg")]) == EXIT_USAGE
