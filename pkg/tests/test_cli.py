import csv
import json

import pytest

from ncpoisson.cli import main
from ncpoisson.report import (
    ConfigError,
    RunConfig,
    convergence_study,
    flow_demo,
    load_config_file,
    resolve_config,
    run_suite,
)

SMALL = ["--samples", "10"]


def test_verify_passes_and_writes_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify", "hochschild", "--out", str(out), *SMALL]) == 0
    data = json.loads(out.read_text())
    assert data["suite"] == "hochschild" and data["pass"] is True
    assert {"wall_time", "config", "seed", "checks"} <= set(data)
    assert "12/12 passed" in capsys.readouterr().out


def test_verify_failing_check_exits_one(capsys):
    # a tolerance no floating-point residual can meet
    assert main(["verify", "classical", "--tol", "1e-300", "--quiet"]) == 1
    assert capsys.readouterr().out.count("\n") == 1


def test_usage_errors_exit_two(tmp_path, capsys):
    assert main(["verify", "foliation", "--q", "3"]) == 2
    assert main(["verify", "hochschild", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["flow", "harmonic", "--x0", "1,0,0"]) == 2
    assert main(["flow", "harmonic", "--x0", "1,0", "--dt", "-1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify", "nosuchsuite"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_config_precedence(tmp_path):
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"seed": 5, "grid": 16, "density": "const"}))
    cfg = resolve_config({"seed": 9, "grid": None}, js)
    assert (cfg.seed, cfg.grid, cfg.density, cfg.truncation) == (9, 16, "const", 16)
    ini = tmp_path / "c.cfg"
    ini.write_text("seed = 3\nx_modes = 2\n")
    assert load_config_file(ini) == {"seed": "3", "x_modes": "2"}
    cfg = resolve_config({}, ini)
    assert (cfg.seed, cfg.x_modes, cfg.refine_grid) == (3, 2, 48)


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(density="userfourier")
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"grid": "many"})
    with pytest.raises(ConfigError):
        RunConfig(grid=32, refine_grid=16)
    cfg = RunConfig.from_mapping({"density": "userfourier", "coefficients": '[{"ky": [1, 0], "a": 0.3}]'})
    assert cfg.coefficients


def test_report_bodies_are_reproducible():
    cfg = RunConfig(seed=11, samples=10)
    a, b = run_suite("hochschild", cfg), run_suite("hochschild", cfg)
    assert a.body_json() == b.body_json()
    assert "wall_time" not in a.body_json()


def test_unknown_suite_rejected():
    with pytest.raises(ConfigError):
        run_suite("nope")


def test_converge_csv(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    assert main(["converge", "leibniz", "--grids", "8,16", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [int(r["grid"]) for r in rows] == [8, 16]
    assert rows[0]["order"] == "" and float(rows[1]["order"]) > 0
    assert "monotone: True" in capsys.readouterr().out
    with pytest.raises(ConfigError):
        convergence_study("leibniz", [16, 8])


def test_flow_command(tmp_path, capsys):
    out = tmp_path / "flow.csv"
    assert main(["flow", "harmonic", "--x0", "1,0", "--dt", "0.01", "--record-every", "10", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["return_distance"] <= 1e-8 and summary["drift"]["energy"] <= 1e-8
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["t", "x1", "x2", "energy"]
    assert len(rows) - 1 == summary["recorded_points"]


def test_flow_user_polynomial(tmp_path):
    spec = tmp_path / "p.json"
    spec.write_text(json.dumps({"dim": 2, "terms": [{"coeff": 0.5, "powers": [2, 0]}, {"coeff": 0.5, "powers": [0, 2]}]}))
    summary = flow_demo("userpolynomial", [0.0, 1.0], 1.0, 0.01, user_spec=str(spec))
    assert summary["drift"]["energy"] <= 1e-8


def test_dump_commands(tmp_path, capsys):
    k = tmp_path / "k.csv"
    assert main(["dump", "kernel", "--out", str(k), "--grid", "8", "--x-modes", "1"]) == 0
    assert len(list(csv.reader(open(k)))) == 1 + 8**4
    f = tmp_path / "f.csv"
    assert main(["dump", "field", "--out", str(f), "--grid", "8"]) == 0
    assert next(csv.reader(open(f))) == ["ix", "iy1", "iy2", "density", "kappa1", "kappa2"]
    capsys.readouterr()
