import copy
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cnsflow.cli import main

CONFIGS = Path(__file__).parent.parent / "configs"

SMALL = {
    "grid": {"L": 8.0, "N": 64},
    "indices": ["17/8", "3", "15/8", "9/17", "1/6", "7/15"],
    "T": 0.05,
    "M": 8,
    "solver": "both",
    "dt": 0.001,
    "data": {
        "n0": {"gaussians": [{"center": [0.4, 0.2], "variance": 0.5, "mass": 0.05}]},
        "c0": {"gaussians": [{"center": [-0.3, 0.1], "variance": 1.0, "amplitude": 0.002}]},
        "zeta0": {"gaussians": [{"center": [0.0, 0.0], "variance": 1.0, "mass": 0.05}]},
    },
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# -- validate-indices ----------------------------------------------------------------


def test_validate_indices_pass_and_fail(capsys):
    assert main(["validate-indices", "--indices", "17/8", "3", "15/8", "9/17", "1/6", "7/15"]) == 0
    assert "overall: PASS" in capsys.readouterr().out
    assert main(["validate-indices", "--indices", "2", "3", "2", "1/2", "1/6", "1/2"]) == 1
    out = capsys.readouterr().out
    assert "overall: FAIL" in out and "A4.4" in out


def test_validate_indices_budget_and_json(tmp_path, capsys):
    src = tmp_path / "idx.json"
    src.write_text(json.dumps({"indices": ["17/8", "3", "15/8", "9/17", "1/6", "7/15"]}))
    rep = tmp_path / "rep.json"
    assert main(["validate-indices", "--json", str(src), "--budget", "--grad-phi-l2", "1", "--out", str(rep)]) == 0
    golden = json.loads((Path(__file__).parent / "golden" / "remark_set_budget.json").read_text())
    budget = json.loads(rep.read_text())["budget"]
    assert budget["eps_max"] == pytest.approx(golden["eps_max"], rel=1e-12)


def test_validate_indices_sweep(capsys):
    assert main(["validate-indices", "--sweep", "17/8,3,15/8,3/2,2"]) == 0
    found = json.loads(capsys.readouterr().out)
    assert ["17/8", "3", "15/8", "9/17", "1/6", "7/15"] in found
    assert main(["validate-indices", "--sweep", "1"]) == 1


def test_validate_indices_needs_input(capsys):
    assert main(["validate-indices"]) == 2
    assert "$.indices" in capsys.readouterr().err


def test_malformed_indices_exit_2(capsys):
    assert main(["validate-indices", "--indices", "1/2", "3", "2", "0", "0", "0"]) == 2


# -- run commands --------------------------------------------------------------------


def test_simulate_zero_config(tmp_path, capsys):
    out = tmp_path / "zero"
    assert main(["simulate", str(CONFIGS / "zero.json"), "--out", str(out)]) == 0
    for name in ("ledger.json", "ledger.csv", "manifest.json", "picard_summary.json", "picard_iterations.csv"):
        assert (out / name).is_file(), name
    for solver in ("picard", "oracle"):
        assert (out / solver / "trajectory.json").is_file()
        assert (out / solver / "n_init.f64").is_file()
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "simulate" and man["ledger_passed"] is True
    assert set(man["versions"]) >= {"cnsflow", "numpy", "scipy", "python"}
    assert "ledger: PASS" in capsys.readouterr().out


def test_simulate_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", cfg, "--out", str(a)]) == 0
    assert main(["simulate", cfg, "--out", str(b)]) == 0
    assert (a / "ledger.json").read_text() == (b / "ledger.json").read_text()
    files = sorted(p.relative_to(a) for p in a.rglob("*.f64"))
    assert files
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_picard_compare_verify_and_scale_check(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert main(["picard", cfg, "--out", str(tmp_path / "p")]) == 0
    led = json.loads((tmp_path / "p" / "ledger.json").read_text())
    assert {r["anchor"] for r in led["records"]} >= {"contraction-lemma"}
    assert main(["compare", cfg, "--out", str(tmp_path / "c")]) == 0
    assert main(["verify", cfg, "--out", str(tmp_path / "v"), "--skip-scaling"]) == 0
    led = json.loads((tmp_path / "v" / "ledger.json").read_text())
    assert any(r["anchor"] == "atomic-seminorm" for r in led["records"])
    assert main(["scale-check", cfg, "--out", str(tmp_path / "s"), "--lam", "2"]) == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["lambda"] == 2.0


# -- errors --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda c: c["data"].pop("n0"), "$.data"),
        (lambda c: c["grid"].update(N=-4), "$.grid.N"),
        (lambda c: c["data"]["n0"]["gaussians"][0].update(variance="wide"), "$.data.n0.gaussians[0].variance"),
        (lambda c: c.update(bogus=1), "$"),
    ],
)
def test_config_errors_exit_2_with_a_json_path(tmp_path, capsys, mutate, path):
    cfg = copy.deepcopy(SMALL)
    mutate(cfg)
    assert main(["simulate", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert f"config error at {path}" in err


def test_negative_density_is_refused(tmp_path, capsys):
    cfg = copy.deepcopy(SMALL)
    cfg["data"]["n0"]["gaussians"][0]["mass"] = -0.05
    assert main(["picard", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_divergence_exits_3(tmp_path, capsys):
    cfg = copy.deepcopy(SMALL)
    cfg["grid"]["N"] = 128
    cfg["T"] = 0.5
    cfg["tolerances"] = {"max_iter": 15}
    big = {"gaussians": [{"center": [0.0, 0.0], "variance": 0.3, "mass": 400.0}]}
    cfg["data"]["n0"] = big
    cfg["data"]["zeta0"] = big
    cfg["data"]["c0"]["gaussians"][0]["amplitude"] = 0.01
    assert main(["picard", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "cnsflow", "validate-indices", "--indices", "17/8", "3", "15/8", "9/17", "1/6", "7/15"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and "overall: PASS" in r.stdout


def test_verify_on_dirac_data_sees_the_atom(tmp_path):
    out = tmp_path / "dv"
    assert main(["verify", str(CONFIGS / "dirac_filament.json"), "--out", str(out), "--skip-scaling"]) == 0
    rec = next(r for r in json.loads((out / "ledger.json").read_text())["records"] if r["anchor"] == "atomic-seminorm")
    assert "atoms present" in rec["name"] and rec["measured_value"] == pytest.approx(0.1995, abs=5e-4)
