import csv
import dataclasses

import pytest

import etmg.mpc
from etmg.cli import main
from etmg.qp import MAX_ITERATIONS, solve_qp
from etmg.scenario import load_config, preset_path, read_trace, write_config

from conftest import small_config


@pytest.fixture
def small_files(tmp_path):
    paths = []
    for name in ("scenario_I", "scenario_II"):
        path = tmp_path / f"{name}.toml"
        write_config(small_config(name, horizon=8, k_sim=4), path)
        paths.append(path)
    return paths


def test_validate_preset(capsys):
    assert main(["validate", "--config", "preset:scenario_I"]) == 0
    out = capsys.readouterr().out
    assert "mass balance" in out and "equilibrium" in out and "validation passed" in out


def test_validate_file(tmp_path, capsys):
    path = tmp_path / "cfg.toml"
    assert main(["export-preset", "scenario_II", "--out", str(path)]) == 0
    assert load_config(path) == load_config(preset_path("scenario_II"))
    assert main(["validate", "--config", str(path)]) == 0


def test_export_to_stdout(capsys):
    assert main(["export-preset", "scenario_I"]) == 0
    assert capsys.readouterr().out == preset_path("scenario_I").read_text()


def test_validate_reports_mass_imbalance(tmp_path, capsys, preset_I):
    edges = list(preset_I.thermal_edges)
    edges[0] = dataclasses.replace(edges[0], flow=0.03)
    path = tmp_path / "bad.toml"
    write_config(dataclasses.replace(preset_I, thermal_edges=tuple(edges)), path)
    assert main(["validate", "--config", str(path)]) == 2
    assert "mass balance violated at node" in capsys.readouterr().err


def test_simulate_writes_trace(small_files, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["simulate", "--config", str(small_files[0]), "--out", str(out)]) == 0
    header, data = read_trace(out)
    assert header[:4] == ["k", "u_et", "u_es", "u_ehp"]
    assert data.shape[0] == 4
    assert len(out.read_text().splitlines()) == 5
    assert "total grid energy" in capsys.readouterr().out


def test_compare_writes_summary(small_files, tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", "--config-a", str(small_files[0]), "--config-b", str(small_files[1]), "--out", str(out)]) == 0
    assert (out / "scenario_I.csv").exists() and (out / "scenario_II.csv").exists()
    with open(out / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["metric", "scenario_I", "scenario_II", "relative_change_percent"]
    metrics = [r[0] for r in rows[1:]]
    for name in ("grid_energy", "peak_ess_power", "peak_hp_power", "hp_variance", "used_ess_capacity", "total_cost"):
        assert name in metrics
    assert metrics[-1] == "max_violation"


def test_compare_same_config_gets_distinct_labels(small_files, tmp_path):
    out = tmp_path / "cmp"
    args = ["compare", "--config-a", str(small_files[0]), "--config-b", str(small_files[0]), "--out", str(out)]
    assert main(args) == 0
    assert (out / "scenario_I_a.csv").read_bytes() == (out / "scenario_I_b.csv").read_bytes()


def test_unknown_flag_prints_usage(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--bogus"])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(["validate", "--config", str(tmp_path / "none.toml")]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path, capsys):
    cfg = small_config("scenario_I", horizon=8, k_sim=4, ess_max=(1.0,))
    path = tmp_path / "cfg.toml"
    write_config(cfg, path)
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "t.csv")]) == 3
    err = capsys.readouterr().err
    assert "step 0" in err and "ess_energy" in err


def test_solver_failure_exit_code(small_files, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(etmg.mpc, "solve_qp", lambda p, **kw: dataclasses.replace(solve_qp(p, max_iter=1), status=MAX_ITERATIONS))
    assert main(["simulate", "--config", str(small_files[0]), "--out", str(tmp_path / "t.csv")]) == 4
    assert MAX_ITERATIONS in capsys.readouterr().err
