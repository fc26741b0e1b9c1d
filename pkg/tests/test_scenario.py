import dataclasses
import math

import numpy as np
import pytest

from etmg.mpc import SimulationTrace
from etmg.profiles import Peak, ProfileError, ProfileParams, ProfileSet, load_profiles, synthesize_profiles, write_profiles
from etmg.scenario import (
    ConfigError,
    build_model,
    dumps_config,
    load_config,
    loads_config,
    preset_path,
    read_trace,
    run_scenario,
    scenario_profiles,
    summarize,
    trace_header,
    write_config,
    write_trace,
)

from conftest import small_config

HEATED = ("T_e1", "T_e4", "T_n1")


def bounds_by_label(cfg, model):
    labels = model.thermal.state_labels()
    return dict(zip(labels, cfg.mpc.temperature_min)), dict(zip(labels, cfg.mpc.temperature_max))


def test_shared_case_study_numbers(preset_I, preset_II):
    for cfg in (preset_I, preset_II):
        m = cfg.mpc
        assert (cfg.dt, m.horizon, cfg.ambient_temperature) == (900.0, 96, 10.0)
        assert (cfg.density, cfg.heat_capacity) == (987.0, 4182.0)
        assert [n.volume for n in cfg.thermal_nodes if n.kind == "storage"] == [100.0, 100.0]
        assert m.line_min == (-1.2,) * 6 and m.line_max == (1.2,) * 6
        assert m.u_min == (-1.2, -1.2, -1.0) and m.u_max == (1.2, 1.2, 0.0)
        assert m.ess_max == (5.0,)
        assert m.u_hp_best == (-0.56,)
        assert cfg.hp_cop == (3.0,)
        assert m.c_grid == 10.0


def test_scenario_I_weights_and_bounds(preset_I, model):
    m = preset_I.mpc
    assert (m.c_ess, m.c_hp, m.c_hp_best, m.c_hp_ramp) == ((0.0,), (0.0,), (0.0,), (0.0,))
    assert len(m.tracked) == 1
    t = m.tracked[0]
    assert (model.thermal.state_labels()[t.state], t.target, t.weight) == ("T_e1", 90.0, 10.0)
    lo, hi = bounds_by_label(preset_I, model)
    assert all(lo[s] == 90.0 for s in HEATED)
    assert all(v == 55.0 for s, v in lo.items() if s not in HEATED)
    assert set(hi.values()) == {95.0}


def test_scenario_II_weights_and_bounds(preset_II, model):
    m = preset_II.mpc
    assert (m.c_ess, m.c_hp, m.c_hp_best, m.c_hp_ramp) == ((0.01,), (0.01,), (0.1,), (0.1,))
    assert m.tracked == ()
    lo, hi = bounds_by_label(preset_II, model)
    assert all(lo[s] == 85.5 for s in HEATED)
    assert all(v == 55.0 for s, v in lo.items() if s not in HEATED)
    assert set(hi.values()) == {95.0}


def test_presets_differ_only_in_controller(preset_I, preset_II):
    a = dataclasses.replace(preset_I, label="x", mpc=None)
    b = dataclasses.replace(preset_II, label="x", mpc=None)
    assert a == b


def test_preset_profile_magnitudes(preset_I):
    prof = scenario_profiles(preset_I)
    assert len(prof) >= preset_I.k_sim + preset_I.mpc.horizon
    assert 1.5 <= prof.d_er.max() <= 2.0
    assert prof.Q_d.max() <= 3.0
    assert prof.d_er.min() == 0.0


@pytest.mark.parametrize("name", ["scenario_I", "scenario_II"])
def test_config_round_trip(tmp_path, name):
    cfg = load_config(preset_path(name))
    path = tmp_path / "cfg.toml"
    write_config(cfg, path)
    assert load_config(path) == cfg
    assert dumps_config(load_config(path)) == dumps_config(cfg)


def test_round_trip_infinite_bounds(preset_I):
    mpc = dataclasses.replace(preset_I.mpc, temperature_max=(math.inf,) * 6, line_min=(-math.inf,) * 6)
    cfg = dataclasses.replace(preset_I, mpc=mpc)
    assert loads_config(dumps_config(cfg)) == cfg


@pytest.mark.parametrize(
    "old, new, message",
    [
        ("schema_version = 1", "schema_version = 7", "schema_version"),
        ("horizon = 96", 'horizon = "x"', "mpc.horizon"),
        ("[mpc]", "[mpcx]", "mpc.horizon"),
        ("T_e1 = 90.0", "T_e9 = 90.0", "T_e9"),
        ("dt = 900.0\nk_sim", "dt = -1.0\nk_sim", "dt"),
        ("c_ess = [0.0]", 'c_ess = ["a"]', "mpc.c_ess"),
        ('kind = "synthetic"\n', 'kind = "radio"\n', "profiles.kind"),
    ],
)
def test_config_errors_name_the_field(preset_I, old, new, message):
    text = dumps_config(preset_I)
    assert old in text
    with pytest.raises(ConfigError, match=message):
        loads_config(text.replace(old, new, 1), "bad.toml")


def test_config_parse_error_names_source():
    with pytest.raises(ConfigError, match="bad.toml"):
        loads_config("a = [", "bad.toml")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.toml")


def test_unknown_preset():
    with pytest.raises(ConfigError, match="scenario_I"):
        preset_path("scenario_III")


def test_synthesis_is_deterministic():
    assert synthesize_profiles(ProfileParams()) == synthesize_profiles(ProfileParams())


def test_zero_amplitude_profiles():
    p = ProfileParams(steps=96, load_base=0.0, load_peaks=(), heat_base=0.0, heat_peaks=(), solar_peak=0.0)
    prof = synthesize_profiles(p)
    for arr in (prof.d_er, prof.d_ed, prof.Q_d):
        np.testing.assert_array_equal(arr, 0.0)


def test_daily_period():
    prof = synthesize_profiles(ProfileParams(steps=192))
    np.testing.assert_allclose(prof.Q_d[:96], prof.Q_d[96:], atol=1e-12)
    np.testing.assert_allclose(prof.d_er[:96], prof.d_er[96:], atol=1e-12)


def test_solar_peaks_at_noon():
    prof = synthesize_profiles(ProfileParams(steps=96, solar_peak=2.0, solar_noon=13.0))
    assert prof.d_er[52, 0] == pytest.approx(2.0)
    assert int(np.argmax(prof.d_er[:, 0])) == 52


def test_negative_heights_rejected():
    with pytest.raises(ProfileError):
        Peak(7.0, -1.0, 1.0)
    with pytest.raises(ProfileError):
        ProfileParams(load_base=-0.1)


def test_profile_csv_round_trip(tmp_path):
    prof = synthesize_profiles(ProfileParams(steps=10, ambient_temperature=4.5))
    path = tmp_path / "p.csv"
    write_profiles(prof, path)
    assert path.read_text().splitlines()[0] == "k,d_er,d_ed,Q_d,T_amb"
    assert load_profiles(path) == prof


def test_multi_unit_profile_columns(tmp_path):
    prof = ProfileSet(np.ones((3, 2)), np.zeros((3, 1)), np.full((3, 2), 0.5))
    path = tmp_path / "p.csv"
    write_profiles(prof, path)
    assert path.read_text().splitlines()[0] == "k,d_er1,d_er2,d_ed,Q_d1,Q_d2"
    assert load_profiles(path) == prof


@pytest.mark.parametrize(
    "body, message",
    [
        ("k,d_er,d_ed,Q_d\n0,1,1,1\n1,1,oops,1\n", "row 3"),
        ("k,d_er,d_ed,Q_d\n0,1,1\n", "row 2"),
        ("k,d_er,d_ed,Q_d\n0,1,1,1\n2,1,1,1\n", "row 3"),
        ("k,d_er,d_ed,Q_d\n0,1,-1,1\n", "row 2"),
        ("k,d_er,d_ed,Q_d\n0,1,nan,1\n", "row 2"),
        ("k,d_er,d_ed\n0,1,1\n", "missing"),
        ("k,d_er,d_ed,Q_d,wind\n0,1,1,1,1\n", "unknown"),
        ("k,d_er,d_ed,Q_d\n", "no data"),
    ],
)
def test_malformed_profiles(tmp_path, body, message):
    path = tmp_path / "p.csv"
    path.write_text(body)
    with pytest.raises(ProfileError, match=message):
        load_profiles(path)


def test_profile_shape_mismatch(model):
    prof = ProfileSet(np.ones((3, 2)), np.zeros(3), np.zeros(3))
    with pytest.raises(ProfileError, match="RES"):
        prof.forecast(model, 10.0)


def test_forecast_signs(model):
    prof = ProfileSet([1.5], [0.4], [2.0])
    fc = prof.forecast(model, 10.0)
    np.testing.assert_array_equal(fc.d_t, [[-2.0, 10.0]])
    np.testing.assert_array_equal(fc.d_e, [[1.5, -0.4]])


def test_empty_trace_is_header_only(tmp_path, model):
    path = tmp_path / "t.csv"
    write_trace(SimulationTrace(model.state_labels()), model, path)
    lines = path.read_text().splitlines()
    assert lines == [
        "k,u_et,u_es,u_ehp,x_e,T_e1,T_e2,T_e3,T_e4,T_n1,T_n3,cost_lt,cost_ect,cost_ecs,cost_echp,cost_lhp"
    ]
    header, data = read_trace(path)
    assert header == trace_header(model) and data.shape == (0, 16)


def test_trace_round_trip_and_determinism(tmp_path):
    cfg = small_config("scenario_II", horizon=8, k_sim=5)
    model, trace = run_scenario(cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(trace, model, a)
    _, again = run_scenario(cfg)
    write_trace(again, model, b)
    assert a.read_bytes() == b.read_bytes()
    header, data = read_trace(a)
    assert data.shape == (5, len(header))
    np.testing.assert_array_equal(data[:, 0], np.arange(5))
    np.testing.assert_array_equal(data[:, 1:4], trace.array("u"))
    np.testing.assert_array_equal(data[:, 4:11], trace.array("x"))
    np.testing.assert_array_equal(data[:, 11], trace.cost_array("lt"))


def test_summary_metrics():
    cfg = small_config("scenario_I", horizon=8, k_sim=4)
    model, trace = run_scenario(cfg)
    s = summarize("x", trace, model)
    u = trace.array("u")
    assert s.grid_energy == pytest.approx(u[:, 0].sum() * 0.25)
    assert s.peak_hp_power == pytest.approx(np.abs(u[:, 2]).max())
    assert s.hp_variance == pytest.approx(np.var(u[:, 2]))
    ess = np.append(trace.array("x")[:, 0], trace.final_state[0])
    assert s.used_ess_capacity == pytest.approx(ess.max() - ess.min())
    assert s.total_cost == pytest.approx(trace.total_cost)


def test_short_profiles_rejected():
    cfg = small_config("scenario_I", horizon=8, k_sim=4)
    cfg = dataclasses.replace(
        cfg, profiles=dataclasses.replace(cfg.profiles, synthetic=ProfileParams(steps=5))
    )
    with pytest.raises(ConfigError, match="k_sim"):
        run_scenario(cfg)


def test_csv_profile_source_relative_path(tmp_path):
    cfg = small_config("scenario_I", horizon=8, k_sim=2)
    write_profiles(scenario_profiles(cfg), tmp_path / "prof.csv")
    csv_cfg = dataclasses.replace(cfg, profiles=dataclasses.replace(cfg.profiles, kind="csv", path="prof.csv"))
    write_config(csv_cfg, tmp_path / "cfg.toml")
    _, t_csv = run_scenario(load_config(tmp_path / "cfg.toml"), base_dir=tmp_path)
    _, t_syn = run_scenario(cfg)
    np.testing.assert_allclose(t_csv.array("u"), t_syn.array("u"), atol=1e-9)


def test_build_model_checks_dimensions(preset_I):
    bad = dataclasses.replace(preset_I, mpc=dataclasses.replace(preset_I.mpc, ess_max=(5.0, 5.0)))
    with pytest.raises(ConfigError, match="ess_max"):
        build_model(bad)
