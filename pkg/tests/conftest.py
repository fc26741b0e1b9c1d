import dataclasses
import math

import numpy as np
import pytest

from etmg.coupling import HeatPumpBank, assemble_etmg
from etmg.graphs import DirectedGraph
from etmg.mpc import MpcConfig
from etmg.scenario import build_electrical, build_model, load_preset
from etmg.thermal import (
    ThermalEdge,
    ThermalNetwork,
    ThermalNode,
    assemble_continuous_thermal,
    calibrate_case_study,
)

RING_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0)]
RING_KINDS = ["simple_pipe", "consumer_exchanger", "simple_pipe", "heat_pump_exchanger"]


def ring_network(loss_coefficient=None, flow=None, storage_volume=100.0):
    cal = calibrate_case_study(3e6, 90.0, 30.0, 0.05, 5000.0, 0.1)
    kappa = cal.loss_coefficient if loss_coefficient is None else loss_coefficient
    q = cal.flow if flow is None else flow
    edges = [ThermalEdge(kind, cal.volume, q, kappa) for kind in RING_KINDS]
    nodes = [
        ThermalNode("storage", storage_volume),
        ThermalNode("crossing"),
        ThermalNode("storage", storage_volume),
        ThermalNode("crossing"),
    ]
    return ThermalNetwork(DirectedGraph(4, RING_EDGES), edges, nodes)


def ring_thermal(**kwargs):
    return assemble_continuous_thermal(ring_network(**kwargs), hp_edges=[3], demand_edges=[1])


def ring_model(dt=900.0, **kwargs):
    """Reference microgrid with a custom ring (e.g. lossless) and sample time."""
    cfg = load_preset("scenario_I")
    bank = HeatPumpBank(cfg.hp_cop, cfg.hp_edges, cfg.hp_nodes)
    return assemble_etmg(ring_thermal(**kwargs), build_electrical(cfg), bank, dt)


def small_config(name="scenario_I", horizon=8, k_sim=4, **mpc_changes):
    """A preset with a short horizon and run, for fast closed-loop tests."""
    cfg = load_preset(name)
    mpc = dataclasses.replace(cfg.mpc, horizon=horizon, **mpc_changes)
    syn = dataclasses.replace(cfg.profiles.synthetic, steps=horizon + k_sim)
    return dataclasses.replace(
        cfg, k_sim=k_sim, mpc=mpc, profiles=dataclasses.replace(cfg.profiles, synthetic=syn)
    )


def unconstrained(mpc: MpcConfig) -> MpcConfig:
    inf = math.inf
    n_t, n_l, n_u = len(mpc.temperature_min), len(mpc.line_min), len(mpc.u_min)
    return dataclasses.replace(
        mpc,
        temperature_min=(-inf,) * n_t,
        temperature_max=(inf,) * n_t,
        ess_max=(inf,) * len(mpc.ess_max),
        line_min=(-inf,) * n_l,
        line_max=(inf,) * n_l,
        u_min=(-inf,) * n_u,
        u_max=(inf,) * n_u,
    )


@pytest.fixture(scope="session")
def preset_I():
    return load_preset("scenario_I")


@pytest.fixture(scope="session")
def preset_II():
    return load_preset("scenario_II")


@pytest.fixture(scope="session")
def model(preset_I):
    return build_model(preset_I)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
