import csv
import json

import pytest

from sfns.cli import EXIT_ABORT, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USAGE, main

GAUSS = {"family": "GaussianBump", "amplitude": 1.0, "width": 1.0}
ZERO = {"family": "Polynomial", "params": {"coeffs": [0.0]}}


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.mark.parametrize("family,extra", [("beltrami", ["--lambda", "2.5"]), ("poly22", ["--coeffs", "f2=1,f4=2,g2=0.5,g4=1",
                                                                                       "--nu", "0.1", "--t", "0", "1"]),
                                          ("bump2d", []), ("heat2d", ["--t", "0.5"])])
def test_verify_passes_and_echoes_config(tmp_path, family, extra):
    out = tmp_path / "rep.json"
    assert main(["verify", "--family", family, "--points", "200", "--out", str(out), *extra]) == EXIT_OK
    reports = json.loads(out.read_text())
    assert reports and all(r["passed"] for r in reports)
    config = json.loads((tmp_path / "rep.config.json").read_text())
    assert config["family"] == family and config["solution"]["family"]


def test_documented_verify_invocation(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    argv = ["verify", "--family", "beltrami", "--lambda", "2", "--alpha", "1", "--beta", "0", "--points", "1000",
            "--seed", "7", "--tol", "1e-8", "--out", "r.json"]
    assert main(argv) == EXIT_OK
    assert (tmp_path / "r.json").exists() and (tmp_path / "r.config.json").exists()


def test_verify_failure_and_usage_errors(tmp_path):
    out = str(tmp_path / "r.json")
    assert main(["verify", "--family", "beltrami", "--tol", "1e-30", "--points", "50", "--out", out]) == EXIT_FAIL
    assert main(["verify", "--family", "hopf", "--out", out]) == EXIT_USAGE
    assert main(["verify", "--family", "poly22", "--coeffs", "f2=1,g4=1", "--out", out]) == EXIT_USAGE
    assert main(["verify"]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE


def test_evolve_hm2d_writes_run(tmp_path):
    cfg = _write(tmp_path / "c.json", {"grid": {"n": 32, "L": 16.0}, "phi0": GAUSS,
                                       "solver": {"nu": 0.01, "dt": 0.05, "T": 0.2}})
    out = tmp_path / "run"
    assert main(["evolve", "hm2d", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "index.json").read_text())["completed"]
    assert json.loads((out / "config.json").read_text())["phi0"]["family"] == "GaussianBump"
    with open(out / "series.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 5


def test_evolve_heat_and_ns3d(tmp_path):
    heat = _write(tmp_path / "h.json", {"dim": 2, "grid": {"n": 16, "L": 10.0}, "f0": GAUSS,
                                        "solver": {"nu": 0.1, "dt": 0.1, "T": 0.2}})
    assert main(["evolve", "heat", "--config", heat, "--out", str(tmp_path / "heat")]) == EXIT_OK
    ns = _write(tmp_path / "n.json", {"grid": {"n": 16, "L": 8.0}, "rep": "22", "phi0": GAUSS, "psi0": ZERO,
                                      "cutoff": [0.3, 0.5], "recover_potentials": True,
                                      "solver": {"nu": 0.05, "dt": 0.02, "T": 0.04}})
    assert main(["evolve", "ns3d", "--config", ns, "--out", str(tmp_path / "ns")]) == EXIT_OK
    index = json.loads((tmp_path / "ns" / "index.json").read_text())
    assert "phi" in index["snapshots"][0]["files"] and "killed" in index["snapshots"][0]


def test_evolve_abort_and_bad_configs(tmp_path):
    big = dict(GAUSS, amplitude=100.0)
    cfg = _write(tmp_path / "c.json", {"grid": {"n": 16, "L": 8.0}, "rep": "22", "phi0": big, "psi0": ZERO,
                                       "solver": {"nu": 0.0, "dt": 1.0, "T": 2.0}})
    out = tmp_path / "abort"
    assert main(["evolve", "ns3d", "--config", cfg, "--out", str(out)]) == EXIT_ABORT
    assert not json.loads((out / "index.json").read_text())["completed"]
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["evolve", "hm2d", "--config", str(tmp_path / "bad.json"), "--out", str(out)]) == EXIT_USAGE
    no_profile = _write(tmp_path / "np.json", {"solver": {"nu": 0, "dt": 0.1, "T": 0.1}})
    assert main(["evolve", "hm2d", "--config", no_profile, "--out", str(out)]) == EXIT_USAGE
    bad_grid = _write(tmp_path / "bg.json", {"grid": {"n": 40}, "phi0": GAUSS, "solver": {"nu": 0, "dt": 0.1, "T": 0.1}})
    assert main(["evolve", "hm2d", "--config", bad_grid, "--out", str(out)]) == EXIT_USAGE


def _symmetry_config(tmp_path, **extra):
    cfg = {"rep": "22", "phi0": GAUSS, "psi0": ZERO, "grid": {"n": 16, "L": 8.0}, "u_max": 0.02,
           "solver": {"nu": 0.05, "dt": 0.05, "T": 0.1}, **extra}
    return _write(tmp_path / "s.json", cfg)


def test_symmetry_outputs(tmp_path):
    out = tmp_path / "sym"
    code = main(["symmetry", "--config", _symmetry_config(tmp_path), "--out", str(out)])
    report = json.loads((out / "symmetry.json").read_text())
    assert report["prediction"]["predicted"] == "break"
    assert code == (EXIT_INCONCLUSIVE if report["verdict"] == "inconclusive" else EXIT_OK)
    assert report["agrees_with_prediction"] == (report["verdict"] == "break")
    config = json.loads((out / "config.json").read_text())
    assert config["command"] == "symmetry" and len(config["frames"]["A"]) == 3
    with open(out / "anisotropy.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 3


def test_symmetry_inconclusive_exit_code(tmp_path):
    # unreachable break and persist thresholds force the middle verdict
    cfg = _symmetry_config(tmp_path, thresholds={"break_abs": 1e9, "persist_factor": 0.5})
    assert main(["symmetry", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_INCONCLUSIVE


def test_symmetry_rejects_bad_rep(tmp_path):
    cfg = _symmetry_config(tmp_path, rep="13")
    assert main(["symmetry", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE
