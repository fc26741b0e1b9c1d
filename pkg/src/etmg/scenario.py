"""Scenario configuration files, model construction, traces and comparison metrics.

Configuration files are TOML with a mandatory ``schema_version``; the grammar is
described in ``docs/config.md``. Edges without explicit ``volume``, ``flow`` or
``loss_coefficient`` take the values derived from the ``[calibration]`` table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import tomlkit

from .coupling import EtmgModel, HeatPumpBank, assemble_etmg, steady_heat_pump_power, thermal_steady_state
from .electrical import ElectricalNetwork, NodeRole
from .graphs import DirectedGraph
from .mpc import Forecast, MpcConfig, SimulationTrace, TrackedTemperature, receding_horizon_run
from .profiles import Peak, ProfileParams, ProfileSet, load_profiles, synthesize_profiles
from .thermal import (
    ContinuousThermalModel,
    ThermalEdge,
    ThermalNetwork,
    ThermalNode,
    assemble_continuous_thermal,
    calibrate_case_study,
)

SCHEMA_VERSION = 1
PRESETS = ("scenario_I", "scenario_II")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSpec:
    nominal_heat: float = 3e6  # W
    supply_temperature: float = 90.0
    temperature_difference: float = 30.0
    loss_fraction: float = 0.05
    length: float = 5000.0
    diameter: float = 0.1


@dataclass(frozen=True)
class EdgeSpec:
    source: int
    sink: int
    kind: str
    volume: float | None = None
    flow: float | None = None
    loss_coefficient: float | None = None


@dataclass(frozen=True)
class NodeSpec:
    kind: str
    volume: float = 0.0


@dataclass(frozen=True)
class InitialState:
    """Either explicit ``temperatures`` or ``mode = "steady"``.

    The steady mode places the thermal states at the fixed point reached under
    the first profile sample with the heat pump holding ``steady_state`` at
    ``steady_temperature``.
    """

    ess: tuple[float, ...]
    mode: str = "explicit"
    temperatures: tuple[float, ...] = ()
    steady_state: str = "T_e1"
    steady_temperature: float = 90.0
    u_hp: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ProfileSource:
    kind: str = "synthetic"  # or "csv"
    path: str = ""
    synthetic: ProfileParams = field(default_factory=ProfileParams)


@dataclass(frozen=True)
class ScenarioConfig:
    label: str
    dt: float
    k_sim: int
    density: float
    heat_capacity: float
    ambient_temperature: float
    calibration: CalibrationSpec
    thermal_nodes: tuple[NodeSpec, ...]
    thermal_edges: tuple[EdgeSpec, ...]
    node_roles: tuple[str, ...]
    lines: tuple[tuple[int, int], ...]
    line_parameters: tuple[float, ...]
    hp_cop: tuple[float, ...]
    hp_edges: tuple[int, ...]
    hp_nodes: tuple[int, ...]
    demand_edges: tuple[int, ...]
    mpc: MpcConfig
    initial: InitialState
    profiles: ProfileSource = field(default_factory=ProfileSource)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.k_sim < 1:
            raise ConfigError(f"k_sim must be at least 1, got {self.k_sim}")
        n_t = len(self.thermal_nodes)
        for i, e in enumerate(self.thermal_edges):
            if not (0 <= e.source < n_t and 0 <= e.sink < n_t):
                raise ConfigError(f"thermal edge {i} references a node outside 0..{n_t - 1}")
        n_e = len(self.node_roles)
        for i, (a, b) in enumerate(self.lines):
            if not (0 <= a < n_e and 0 <= b < n_e):
                raise ConfigError(f"line {i} references a node outside 0..{n_e - 1}")
        if len(self.line_parameters) != len(self.lines):
            raise ConfigError("one line parameter per line required")
        for j in (*self.hp_edges, *self.demand_edges):
            if not 0 <= j < len(self.thermal_edges):
                raise ConfigError(f"edge binding {j} is not a thermal edge")
        for n in self.hp_nodes:
            if not 0 <= n < n_e:
                raise ConfigError(f"heat-pump node {n} is not an electrical node")

    @property
    def state_labels(self) -> list[str]:
        storages = [i for i, n in enumerate(self.thermal_nodes) if n.kind == "storage"]
        n_ess = self.node_roles.count("ess")
        return (
            [f"x_e{i + 1}" for i in range(n_ess)]
            + [f"T_e{j + 1}" for j in range(len(self.thermal_edges))]
            + [f"T_n{l + 1}" for l in storages]
        )


# model construction ----------------------------------------------------------


def build_thermal(cfg: ScenarioConfig) -> tuple[ThermalNetwork, ContinuousThermalModel]:
    c = cfg.calibration
    cal = calibrate_case_study(
        c.nominal_heat,
        c.supply_temperature,
        c.temperature_difference,
        c.loss_fraction,
        c.length,
        c.diameter,
        cfg.density,
        cfg.heat_capacity,
        cfg.ambient_temperature,
    )
    graph = DirectedGraph(len(cfg.thermal_nodes), [(e.source, e.sink) for e in cfg.thermal_edges])
    edges = [
        ThermalEdge(
            kind=e.kind,
            volume=cal.volume if e.volume is None else e.volume,
            flow=cal.flow if e.flow is None else e.flow,
            loss_coefficient=cal.loss_coefficient if e.loss_coefficient is None else e.loss_coefficient,
        )
        for e in cfg.thermal_edges
    ]
    nodes = [ThermalNode(n.kind, n.volume) for n in cfg.thermal_nodes]
    net = ThermalNetwork(graph, edges, nodes, cfg.density, cfg.heat_capacity, cfg.ambient_temperature)
    return net, assemble_continuous_thermal(net, cfg.hp_edges, cfg.demand_edges)


def build_electrical(cfg: ScenarioConfig) -> ElectricalNetwork:
    graph = DirectedGraph(len(cfg.node_roles), list(cfg.lines))
    return ElectricalNetwork(graph, cfg.line_parameters, tuple(NodeRole(r) for r in cfg.node_roles))


def build_model(cfg: ScenarioConfig) -> EtmgModel:
    _, thermal = build_thermal(cfg)
    bank = HeatPumpBank(cfg.hp_cop, cfg.hp_edges, cfg.hp_nodes)
    model = assemble_etmg(thermal, build_electrical(cfg), bank, cfg.dt)
    try:
        cfg.mpc.check_dimensions(model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return model


def scenario_profiles(cfg: ScenarioConfig, base_dir: Path | None = None) -> ProfileSet:
    src = cfg.profiles
    if src.kind == "synthetic":
        return synthesize_profiles(src.synthetic)
    if src.kind == "csv":
        path = Path(src.path)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_profiles(path)
    raise ConfigError(f"unknown profile source '{src.kind}'")


def initial_state(cfg: ScenarioConfig, model: EtmgModel, forecast: Forecast) -> np.ndarray:
    init = cfg.initial
    d = model.dims
    if len(init.ess) != d.n_ess:
        raise ConfigError(f"initial.ess has {len(init.ess)} entries, model has {d.n_ess} storages")
    if init.mode == "explicit":
        if len(init.temperatures) != d.n_thermal:
            raise ConfigError(f"initial.temperatures has {len(init.temperatures)} entries, model has {d.n_thermal}")
        temps = np.asarray(init.temperatures, float)
    elif init.mode == "steady":
        labels = model.thermal.state_labels()
        if init.steady_state not in labels:
            raise ConfigError(f"initial.steady_state '{init.steady_state}' is not one of {labels}")
        idx = labels.index(init.steady_state)
        u = steady_heat_pump_power(model, forecast.d_t[0], idx, init.steady_temperature)
        temps = thermal_steady_state(model, [u], forecast.d_t[0])
    else:
        raise ConfigError(f"initial.mode must be 'explicit' or 'steady', got '{init.mode}'")
    return np.concatenate([np.asarray(init.ess, float), temps])


def run_scenario(
    cfg: ScenarioConfig, profiles: ProfileSet | None = None, base_dir: Path | None = None
) -> tuple[EtmgModel, SimulationTrace]:
    """Build the model, resolve profiles and initial state, and run the closed loop."""
    model = build_model(cfg)
    if profiles is None:
        profiles = scenario_profiles(cfg, base_dir)
    needed = cfg.k_sim + cfg.mpc.horizon
    if len(profiles) < needed:
        raise ConfigError(f"profiles cover {len(profiles)} steps, k_sim + horizon needs {needed}")
    forecast = profiles.forecast(model, cfg.ambient_temperature)
    x0 = initial_state(cfg, model, forecast)
    trace = receding_horizon_run(model, cfg.mpc, forecast, cfg.k_sim, x0, cfg.initial.u_hp)
    return model, trace


# TOML serialization ----------------------------------------------------------


def _num(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _unnum(v):
    if isinstance(v, str) and v in ("inf", "-inf", "+inf"):
        return float(v)
    return v


def _floats(seq) -> list:
    return [_num(float(v)) for v in seq]


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    m = cfg.mpc
    labels = cfg.state_labels
    n_ess = cfg.node_roles.count("ess")
    thermal_labels = labels[n_ess:]
    syn = cfg.profiles.synthetic
    profiles: dict[str, Any] = {"kind": cfg.profiles.kind}
    if cfg.profiles.kind == "csv":
        profiles["path"] = cfg.profiles.path
    else:
        profiles["synthetic"] = {
            "steps": syn.steps,
            "dt": float(syn.dt),
            "start_hour": float(syn.start_hour),
            "load_base": float(syn.load_base),
            "load_peaks": [[p.hour, p.height, p.width] for p in syn.load_peaks],
            "heat_base": float(syn.heat_base),
            "heat_peaks": [[p.hour, p.height, p.width] for p in syn.heat_peaks],
            "solar_peak": float(syn.solar_peak),
            "solar_noon": float(syn.solar_noon),
            "solar_halfwidth": float(syn.solar_halfwidth),
        }
        if syn.ambient_temperature is not None:
            profiles["synthetic"]["ambient_temperature"] = float(syn.ambient_temperature)
    initial: dict[str, Any] = {"mode": cfg.initial.mode, "ess": _floats(cfg.initial.ess)}
    if cfg.initial.mode == "explicit":
        initial["temperatures"] = _floats(cfg.initial.temperatures)
    else:
        initial["steady_state"] = cfg.initial.steady_state
        initial["steady_temperature"] = float(cfg.initial.steady_temperature)
    if cfg.initial.u_hp is not None:
        initial["u_hp"] = _floats(cfg.initial.u_hp)

    def edge(e: EdgeSpec):
        out = {"source": e.source, "sink": e.sink, "kind": e.kind}
        for k in ("volume", "flow", "loss_coefficient"):
            if getattr(e, k) is not None:
                out[k] = float(getattr(e, k))
        return out

    return {
        "schema_version": cfg.schema_version,
        "label": cfg.label,
        "dt": float(cfg.dt),
        "k_sim": cfg.k_sim,
        "physics": {
            "density": float(cfg.density),
            "heat_capacity": float(cfg.heat_capacity),
            "ambient_temperature": float(cfg.ambient_temperature),
        },
        "calibration": {k: float(v) for k, v in asdict(cfg.calibration).items()},
        "thermal": {
            "nodes": [{"kind": n.kind, "volume": float(n.volume)} for n in cfg.thermal_nodes],
            "edges": [edge(e) for e in cfg.thermal_edges],
            "demand_edges": list(cfg.demand_edges),
        },
        "electrical": {
            "roles": list(cfg.node_roles),
            "lines": [list(l) for l in cfg.lines],
            "line_parameters": _floats(cfg.line_parameters),
        },
        "heat_pumps": {"cop": _floats(cfg.hp_cop), "edges": list(cfg.hp_edges), "nodes": list(cfg.hp_nodes)},
        "mpc": {
            "horizon": m.horizon,
            "c_grid": float(m.c_grid),
            "c_ess": _floats(m.c_ess),
            "c_hp": _floats(m.c_hp),
            "c_hp_best": _floats(m.c_hp_best),
            "c_hp_ramp": _floats(m.c_hp_ramp),
            "u_hp_best": _floats(m.u_hp_best),
            "tracked": [
                {"state": thermal_labels[t.state], "target": float(t.target), "weight": float(t.weight)}
                for t in m.tracked
            ],
        },
        "bounds": {
            "temperature_min": {lab: _num(v) for lab, v in zip(thermal_labels, m.temperature_min)},
            "temperature_max": {lab: _num(v) for lab, v in zip(thermal_labels, m.temperature_max)},
            "ess_max": _floats(m.ess_max),
            "line_min": _floats(m.line_min),
            "line_max": _floats(m.line_max),
            "u_min": _floats(m.u_min),
            "u_max": _floats(m.u_max),
        },
        "initial": initial,
        "profiles": profiles,
    }


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing field '{where}.{key}'" if where else f"missing field '{key}'")
    return table[key]


def _typed(conv, table: dict, key: str, where: str):
    value = _require(table, key, where)
    try:
        return conv(_unnum(value))
    except (TypeError, ValueError):
        name = f"{where}.{key}" if where else key
        raise ConfigError(f"field '{name}' must be {conv.__name__}, got {value!r}") from None


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    try:
        return _config_from_dict(data)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def _config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    version = _require(data, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
    phys = _require(data, "physics", "")
    thermal = _require(data, "thermal", "")
    elec = _require(data, "electrical", "")
    hp = _require(data, "heat_pumps", "")
    mpc = _require(data, "mpc", "")
    bounds = _require(data, "bounds", "")
    init = _require(data, "initial", "")
    prof = data.get("profiles", {"kind": "synthetic"})

    nodes = tuple(NodeSpec(str(_require(n, "kind", "thermal.nodes")), float(n.get("volume", 0.0))) for n in _require(thermal, "nodes", "thermal"))
    edges = []
    for i, e in enumerate(_require(thermal, "edges", "thermal")):
        extra = {k: float(e[k]) for k in ("volume", "flow", "loss_coefficient") if k in e}
        unknown = set(e) - {"source", "sink", "kind", "volume", "flow", "loss_coefficient"}
        if unknown:
            raise ConfigError(f"thermal.edges[{i}]: unknown field(s) {sorted(unknown)}")
        edges.append(
            EdgeSpec(_typed(int, e, "source", f"thermal.edges[{i}]"), _typed(int, e, "sink", f"thermal.edges[{i}]"), str(_require(e, "kind", f"thermal.edges[{i}]")), **extra)
        )
    roles = tuple(str(r) for r in _require(elec, "roles", "electrical"))
    storages = [i for i, n in enumerate(nodes) if n.kind == "storage"]
    thermal_labels = [f"T_e{j + 1}" for j in range(len(edges))] + [f"T_n{l + 1}" for l in storages]

    def per_state(table_name: str, default: float) -> tuple[float, ...]:
        table = bounds.get(table_name, {})
        unknown = set(table) - set(thermal_labels)
        if unknown:
            raise ConfigError(f"bounds.{table_name}: unknown state(s) {sorted(unknown)}; states are {thermal_labels}")
        return tuple(float(_unnum(table.get(lab, default))) for lab in thermal_labels)

    tracked = []
    for t in mpc.get("tracked", []):
        label = str(_require(t, "state", "mpc.tracked"))
        if label not in thermal_labels:
            raise ConfigError(f"mpc.tracked: unknown state '{label}'; states are {thermal_labels}")
        tracked.append(TrackedTemperature(thermal_labels.index(label), _typed(float, t, "target", "mpc.tracked"), _typed(float, t, "weight", "mpc.tracked")))

    def floats(table, key, where):
        values = _require(table, key, where)
        try:
            return tuple(float(_unnum(v)) for v in values)
        except (TypeError, ValueError):
            raise ConfigError(f"field '{where}.{key}' must be a list of numbers, got {values!r}") from None

    mpc_cfg = MpcConfig(
        horizon=_typed(int, mpc, "horizon", "mpc"),
        c_grid=_typed(float, mpc, "c_grid", "mpc"),
        c_ess=floats(mpc, "c_ess", "mpc"),
        c_hp=floats(mpc, "c_hp", "mpc"),
        c_hp_best=floats(mpc, "c_hp_best", "mpc"),
        c_hp_ramp=floats(mpc, "c_hp_ramp", "mpc"),
        u_hp_best=floats(mpc, "u_hp_best", "mpc"),
        temperature_min=per_state("temperature_min", -math.inf),
        temperature_max=per_state("temperature_max", math.inf),
        ess_max=floats(bounds, "ess_max", "bounds"),
        line_min=floats(bounds, "line_min", "bounds"),
        line_max=floats(bounds, "line_max", "bounds"),
        u_min=floats(bounds, "u_min", "bounds"),
        u_max=floats(bounds, "u_max", "bounds"),
        tracked=tuple(tracked),
    )

    mode = str(init.get("mode", "explicit"))
    initial = InitialState(
        ess=floats(init, "ess", "initial"),
        mode=mode,
        temperatures=floats(init, "temperatures", "initial") if mode == "explicit" else (),
        steady_state=str(init.get("steady_state", "T_e1")),
        steady_temperature=float(init.get("steady_temperature", 90.0)),
        u_hp=floats(init, "u_hp", "initial") if "u_hp" in init else None,
    )

    kind = str(prof.get("kind", "synthetic"))
    if kind == "synthetic":
        s = dict(prof.get("synthetic", {}))
        known = {f.name for f in fields(ProfileParams)}
        unknown = set(s) - known
        if unknown:
            raise ConfigError(f"profiles.synthetic: unknown field(s) {sorted(unknown)}")
        for key in ("load_peaks", "heat_peaks"):
            if key in s:
                s[key] = tuple(Peak(*map(float, p)) for p in s[key])
        for key in ("steps",):
            if key in s:
                s[key] = int(s[key])
        source = ProfileSource(kind="synthetic", synthetic=ProfileParams(**s))
    elif kind == "csv":
        source = ProfileSource(kind="csv", path=str(_require(prof, "path", "profiles")))
    else:
        raise ConfigError(f"profiles.kind must be 'synthetic' or 'csv', got '{kind}'")

    cal = data.get("calibration", {})
    unknown = set(cal) - {f.name for f in fields(CalibrationSpec)}
    if unknown:
        raise ConfigError(f"calibration: unknown field(s) {sorted(unknown)}")

    lines = tuple(tuple(int(v) for v in l) for l in _require(elec, "lines", "electrical"))
    if any(len(l) != 2 for l in lines):
        raise ConfigError("electrical.lines entries must be [source, sink] pairs")
    line_params = _require(elec, "line_parameters", "electrical")
    if not isinstance(line_params, list):
        line_params = [line_params] * len(lines)

    return ScenarioConfig(
        label=str(data.get("label", "scenario")),
        dt=_typed(float, data, "dt", ""),
        k_sim=_typed(int, data, "k_sim", ""),
        density=_typed(float, phys, "density", "physics"),
        heat_capacity=_typed(float, phys, "heat_capacity", "physics"),
        ambient_temperature=_typed(float, phys, "ambient_temperature", "physics"),
        calibration=CalibrationSpec(**{k: float(v) for k, v in cal.items()}),
        thermal_nodes=nodes,
        thermal_edges=tuple(edges),
        node_roles=roles,
        lines=lines,
        line_parameters=tuple(float(a) for a in line_params),
        hp_cop=floats(hp, "cop", "heat_pumps"),
        hp_edges=tuple(int(j) for j in _require(hp, "edges", "heat_pumps")),
        hp_nodes=tuple(int(j) for j in _require(hp, "nodes", "heat_pumps")),
        demand_edges=tuple(int(j) for j in _require(thermal, "demand_edges", "thermal")),
        mpc=mpc_cfg,
        initial=initial,
        profiles=source,
        schema_version=int(version),
    )


def dumps_config(cfg: ScenarioConfig) -> str:
    return tomlkit.dumps(config_to_dict(cfg))


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = tomlkit.parse(text).unwrap()
    except tomlkit.exceptions.ParseError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads_config(text, str(path))


def write_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg))


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(PRESETS)}")
    return Path(str(resources.files("etmg") / "presets" / f"{name}.toml"))


def load_preset(name: str) -> ScenarioConfig:
    return load_config(preset_path(name))


# traces ----------------------------------------------------------------------

COST_KEYS = ("lt", "ect", "ecs", "echp", "lhp")


def trace_header(model: EtmgModel) -> list[str]:
    d = model.dims
    head = ["k", "u_et"]
    head += ["u_es"] if d.n_ess == 1 else [f"u_es{i + 1}" for i in range(d.n_ess)]
    head += ["u_ehp"] if d.n_hp == 1 else [f"u_ehp{i + 1}" for i in range(d.n_hp)]
    head += ["x_e"] if d.n_ess == 1 else [f"x_e{i + 1}" for i in range(d.n_ess)]
    head += model.thermal.state_labels()
    head += [f"cost_{k}" for k in COST_KEYS]
    return head


def write_trace(trace: SimulationTrace, model: EtmgModel, path) -> None:
    """Write one CSV row per applied step; floats use the shortest round-trip repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_header(model))
        for k in range(len(trace)):
            values = [*trace.u[k], *trace.x[k], *(trace.costs[k][c] for c in COST_KEYS)]
            writer.writerow([k, *(repr(float(v)) for v in values)])


def read_trace(path) -> tuple[list[str], np.ndarray]:
    """Return the header and a float array of the data rows (``k`` included)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


# comparison ------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    label: str
    grid_energy: float  # MWh imported over the run
    peak_ess_power: float  # MW
    peak_hp_power: float  # MW
    hp_variance: float  # MW^2
    used_ess_capacity: float  # MWh
    total_cost: float
    min_T_e1: float

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


def summarize(label: str, trace: SimulationTrace, model: EtmgModel) -> RunSummary:
    d = model.dims
    u = trace.array("u")
    x = np.vstack([trace.array("x"), trace.final_state[None, :]])
    ess = x[:, d.x_ess]
    return RunSummary(
        label=label,
        grid_energy=float(np.sum(u[:, d.u_grid]) * model.dt_hours),
        peak_ess_power=float(np.max(np.abs(u[:, d.u_ess]))),
        peak_hp_power=float(np.max(np.abs(u[:, d.u_hp]))),
        hp_variance=float(np.sum(np.var(u[:, d.u_hp], axis=0))),
        used_ess_capacity=float(np.sum(ess.max(axis=0) - ess.min(axis=0))),
        total_cost=trace.total_cost,
        min_T_e1=float(np.min(x[:, d.n_ess])),
    )
