"""District heating grid: hydraulics check, heat losses and continuous-time temperature model.

State ordering is all edge temperatures (edge id order) followed by the
temperatures of the storage nodes (node id order). Crossings carry no state;
their perfectly mixed temperature is eliminated into the edge coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .graphs import DirectedGraph, build_incidence, split_incidence


class ThermalModelError(ValueError):
    """Invalid thermal network description or inconsistent edge roles."""


class MassBalanceError(ThermalModelError):
    def __init__(self, node: int, residual: float):
        self.node = node
        self.residual = residual
        super().__init__(f"mass balance violated at node {node}: residual {residual:.6g} m^3/s")


class EdgeKind(str, Enum):
    SIMPLE_PIPE = "simple_pipe"
    HEAT_PUMP_EXCHANGER = "heat_pump_exchanger"
    CONSUMER_EXCHANGER = "consumer_exchanger"


class NodeKind(str, Enum):
    STORAGE = "storage"
    CROSSING = "crossing"


@dataclass(frozen=True)
class HydraulicParams:
    """Steady momentum-balance data of one edge (length in m, pump pressure in Pa)."""

    length: float = 1.0
    friction: float = 0.0
    pump_pressure: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise ThermalModelError(f"hydraulic length must be positive, got {self.length}")
        if self.friction < 0 or self.pump_pressure < 0:
            raise ThermalModelError("friction coefficient and pump pressure must be nonnegative")


@dataclass(frozen=True)
class ThermalEdge:
    kind: EdgeKind
    volume: float
    flow: float
    loss_coefficient: float
    hydraulic: HydraulicParams = field(default_factory=HydraulicParams)

    def __post_init__(self):
        object.__setattr__(self, "kind", EdgeKind(self.kind))
        if not self.volume > 0:
            raise ThermalModelError(f"edge volume must be positive, got {self.volume}")
        if self.loss_coefficient < 0:
            raise ThermalModelError(f"loss coefficient must be nonnegative, got {self.loss_coefficient}")


@dataclass(frozen=True)
class ThermalNode:
    kind: NodeKind
    volume: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NodeKind(self.kind))
        if self.kind is NodeKind.STORAGE and not self.volume > 0:
            raise ThermalModelError("storage nodes need a positive volume")
        if self.kind is NodeKind.CROSSING and self.volume != 0:
            raise ThermalModelError("crossings are volumeless")


@dataclass(frozen=True)
class ThermalNetwork:
    graph: DirectedGraph
    edges: tuple[ThermalEdge, ...]
    nodes: tuple[ThermalNode, ...]
    density: float = 987.0
    heat_capacity: float = 4182.0
    ambient_temperature: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(self.edges) != self.graph.edge_count:
            raise ThermalModelError("one ThermalEdge per graph edge required")
        if len(self.nodes) != self.graph.node_count:
            raise ThermalModelError("one ThermalNode per graph node required")
        if not (self.density > 0 and self.heat_capacity > 0):
            raise ThermalModelError("density and heat capacity must be positive")

    @property
    def rho_c(self) -> float:
        return self.density * self.heat_capacity

    @property
    def storage_nodes(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind is NodeKind.STORAGE]

    @property
    def crossing_nodes(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind is NodeKind.CROSSING]

    @property
    def flows(self) -> np.ndarray:
        return np.array([e.flow for e in self.edges], dtype=float)

    @property
    def state_count(self) -> int:
        return len(self.edges) + len(self.storage_nodes)


@dataclass(frozen=True)
class HydraulicReport:
    node_residuals: np.ndarray  # inflow - outflow per node, m^3/s
    pressure_drops: np.ndarray  # per edge, Pa

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.node_residuals))) if self.node_residuals.size else 0.0


def validate_hydraulics(net: ThermalNetwork, tol: float = 1e-9) -> HydraulicReport:
    """Check flow orientation and nodal mass balance; report pressure drops.

    Raises ``ThermalModelError`` when a flow is not strictly positive along its
    edge and ``MassBalanceError`` for the first node whose residual exceeds ``tol``.
    """
    q = net.flows
    for j, qj in enumerate(q):
        if not qj > 0:
            raise ThermalModelError(f"edge {j} has flow {qj}; orientation must follow the water flow (q > 0)")
    residuals = build_incidence(net.graph) @ q
    for node, r in enumerate(residuals):
        if abs(r) > tol:
            raise MassBalanceError(node, float(r))
    drops = np.array(
        [
            e.hydraulic.length * (-e.hydraulic.friction * net.density * abs(e.flow) * e.flow + e.hydraulic.pump_pressure)
            for e in net.edges
        ]
    )
    return HydraulicReport(node_residuals=residuals, pressure_drops=drops)


def edge_heat_loss(edge_temperature, ambient_temperature, loss_coefficient):
    """Heat flow (W) lost to the surroundings by an edge at the given temperature."""
    return loss_coefficient * (np.asarray(edge_temperature) - ambient_temperature)


@dataclass(frozen=True)
class Calibration:
    flow: float  # m^3/s
    loss_coefficient: float  # W/K
    volume: float  # m^3


def calibrate_case_study(
    nominal_heat: float,
    supply_temperature: float,
    temperature_difference: float,
    loss_fraction: float,
    length: float,
    diameter: float,
    density: float = 987.0,
    heat_capacity: float = 4182.0,
    ambient_temperature: float = 10.0,
) -> Calibration:
    """Derive pipe flow, loss coefficient and volume from nominal operating data.

    The flow carries ``nominal_heat`` (W) at ``temperature_difference``; the loss
    coefficient dissipates ``loss_fraction`` of it at ``supply_temperature``.
    """
    for name, value in [
        ("nominal_heat", nominal_heat),
        ("loss_fraction", loss_fraction),
        ("length", length),
        ("diameter", diameter),
        ("density", density),
        ("heat_capacity", heat_capacity),
    ]:
        if not value > 0:
            raise ThermalModelError(f"{name} must be positive, got {value}")
    if temperature_difference == 0 or supply_temperature == ambient_temperature:
        raise ZeroDivisionError("temperature difference and supply-ambient gap must be nonzero")
    flow = nominal_heat / (density * heat_capacity * temperature_difference)
    kappa = loss_fraction * nominal_heat / (supply_temperature - ambient_temperature)
    volume = math.pi * (diameter / 2.0) ** 2 * length
    return Calibration(flow=flow, loss_coefficient=kappa, volume=volume)


@dataclass(frozen=True)
class ContinuousThermalModel:
    A: np.ndarray  # 1/s
    B: np.ndarray  # K/(s W), heat-pump heat per column
    E: np.ndarray  # K/(s W) per demand column, last column 1/s for ambient temperature
    inertia: np.ndarray  # rho*c*V per state, J/K
    edge_count: int
    storage_nodes: tuple[int, ...]
    hp_edges: tuple[int, ...]
    demand_edges: tuple[int, ...]
    mixing: np.ndarray = field(repr=False)  # edge-edge coupling block before volume scaling

    @property
    def state_count(self) -> int:
        return self.A.shape[0]

    def state_labels(self) -> list[str]:
        return [f"T_e{j + 1}" for j in range(self.edge_count)] + [f"T_n{l + 1}" for l in self.storage_nodes]


def mixing_matrix(net: ThermalNetwork) -> np.ndarray:
    """Edge-edge block: loss-augmented outflow on the diagonal, perfect mixing through crossings."""
    q = net.flows
    kappa = np.array([e.loss_coefficient for e in net.edges])
    At = np.diag(-q - kappa / net.rho_c)
    for l in net.crossing_nodes:
        incoming, outgoing = net.graph.in_out_edges(l)
        if not incoming or not outgoing:
            raise ThermalModelError(f"crossing {l} needs at least one inflow and one outflow")
        out_total = q[outgoing].sum()
        if out_total == 0:
            raise ZeroDivisionError(f"crossing {l} has zero total outflow")
        for i in outgoing:
            for j in incoming:
                At[i, j] += q[i] * q[j] / out_total
    return At


def assemble_continuous_thermal(
    net: ThermalNetwork, hp_edges: Sequence[int], demand_edges: Sequence[int]
) -> ContinuousThermalModel:
    """Continuous-time matrices ``(A', B', E')`` of the temperature dynamics.

    ``hp_edges`` and ``demand_edges`` fix the column order of ``B'`` and of the
    heat columns of ``E'``. Heat flows enter in W with a plus sign, so consumer
    extraction must be supplied as negative values.
    """
    validate_hydraulics(net)
    hp_edges = tuple(int(j) for j in hp_edges)
    demand_edges = tuple(int(j) for j in demand_edges)
    n_e = len(net.edges)
    for j in hp_edges + demand_edges:
        if not 0 <= j < n_e:
            raise ThermalModelError(f"edge id {j} out of range")
    if set(hp_edges) & set(demand_edges):
        raise ThermalModelError(f"edges {sorted(set(hp_edges) & set(demand_edges))} have both heat-pump and demand roles")
    if len(set(hp_edges)) != len(hp_edges) or len(set(demand_edges)) != len(demand_edges):
        raise ThermalModelError("duplicate edge in role assignment")
    for j in hp_edges:
        if net.edges[j].kind is not EdgeKind.HEAT_PUMP_EXCHANGER:
            raise ThermalModelError(f"edge {j} is bound to a heat pump but is a {net.edges[j].kind.value}")
    for j in demand_edges:
        if net.edges[j].kind is not EdgeKind.CONSUMER_EXCHANGER:
            raise ThermalModelError(f"edge {j} is bound to a consumer but is a {net.edges[j].kind.value}")

    storages = net.storage_nodes
    q = net.flows
    kappa = np.array([e.loss_coefficient for e in net.edges])
    F_plus, F_minus = split_incidence(build_incidence(net.graph))
    Fp, Fm = F_plus[storages, :], F_minus[storages, :]

    At = mixing_matrix(net)
    block = np.block(
        [
            [At, np.diag(q) @ Fm.T],
            [Fp @ np.diag(q), -np.diag(Fp @ q)],
        ]
    )
    volumes = np.concatenate([[e.volume for e in net.edges], [net.nodes[l].volume for l in storages]])
    inertia = net.rho_c * volumes
    n_x = len(volumes)

    # rho*c*J^-1 reduces to diag(1/V)
    A = block / volumes[:, None]
    B = np.zeros((n_x, len(hp_edges)))
    for col, j in enumerate(hp_edges):
        B[j, col] = 1.0 / inertia[j]
    E = np.zeros((n_x, len(demand_edges) + 1))
    for col, j in enumerate(demand_edges):
        E[j, col] = 1.0 / inertia[j]
    E[:n_e, -1] = kappa / inertia[:n_e]
    return ContinuousThermalModel(
        A=A,
        B=B,
        E=E,
        inertia=inertia,
        edge_count=n_e,
        storage_nodes=tuple(storages),
        hp_edges=hp_edges,
        demand_edges=demand_edges,
        mixing=At,
    )
