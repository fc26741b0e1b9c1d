"""Heat-pump coupling and the combined discrete-time microgrid model.

Signals of the combined model:

* state ``x = [x_e; T_e; T_n,s]``: ESS energy (MWh), edge and storage temperatures (degC)
* control ``u_e = [u_e,t; u_e,s; u_e,hp]`` (MW): grid import at the PCC, ESS charging
  power (positive charges), heat-pump electrical power (nonpositive, it draws power)
* ``d_t = [Q_d; T_amb]``: consumer heat flows in MW_th (nonpositive, extraction) and ambient degC
* ``d_e = [d_e,r; d_e,d]`` (MW) in injection sign: RES infeed positive, loads negative
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretize import zoh_discretize
from .electrical import ElectricalNetwork, NodeRole, PowerBalanceError, PtdfMap, assemble_ptdf
from .thermal import ContinuousThermalModel

MW = 1e6
SECONDS_PER_HOUR = 3600.0


class CouplingError(ValueError):
    pass


@dataclass(frozen=True)
class HeatPumpBank:
    """Constant-COP heat pumps; pump ``i`` sits on ``edges[i]`` and electrical ``nodes[i]``."""

    cop: tuple[float, ...]
    edges: tuple[int, ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "cop", tuple(float(a) for a in self.cop))
        object.__setattr__(self, "edges", tuple(int(e) for e in self.edges))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        if not len(self.cop) == len(self.edges) == len(self.nodes):
            raise CouplingError("COP, edge and node bindings must have equal length")
        if any(not a > 0 for a in self.cop):
            raise CouplingError("coefficients of performance must be positive")
        if len(set(self.edges)) != len(self.edges) or len(set(self.nodes)) != len(self.nodes):
            raise CouplingError("heat-pump bindings must be one-to-one")

    @property
    def alpha(self) -> np.ndarray:
        return np.asarray(self.cop)


def heat_pump_map(u_hp: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Heat output (MW_th) of heat pumps drawing electrical power ``u_hp`` (MW, <= 0)."""
    return -np.asarray(alpha, dtype=float) * np.asarray(u_hp, dtype=float)


@dataclass(frozen=True)
class Dimensions:
    n_ess: int
    n_edges: int
    n_storages: int
    n_hp: int
    n_demand: int
    n_res: int
    n_load: int
    n_nodes: int
    n_lines: int

    @property
    def n_thermal(self) -> int:
        return self.n_edges + self.n_storages

    @property
    def n_x(self) -> int:
        return self.n_ess + self.n_thermal

    @property
    def n_u(self) -> int:
        return 1 + self.n_ess + self.n_hp

    @property
    def n_dt(self) -> int:
        return self.n_demand + 1

    @property
    def n_de(self) -> int:
        return self.n_res + self.n_load

    # slices into u_e
    @property
    def u_grid(self) -> slice:
        return slice(0, 1)

    @property
    def u_ess(self) -> slice:
        return slice(1, 1 + self.n_ess)

    @property
    def u_hp(self) -> slice:
        return slice(1 + self.n_ess, self.n_u)

    # slices into x
    @property
    def x_ess(self) -> slice:
        return slice(0, self.n_ess)

    @property
    def x_thermal(self) -> slice:
        return slice(self.n_ess, self.n_x)


@dataclass(frozen=True)
class EtmgModel:
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    ptdf: PtdfMap
    dims: Dimensions
    dt: float  # seconds
    thermal: ContinuousThermalModel
    heat_pumps: HeatPumpBank

    @property
    def dt_hours(self) -> float:
        return self.dt / SECONDS_PER_HOUR

    @property
    def injection_map(self) -> np.ndarray:
        """Matrix ``M`` with ``p_e,n = M @ [u_e; d_e]`` (ESS charging enters as consumption)."""
        d = self.dims
        M = np.eye(d.n_nodes)
        M[d.u_ess, d.u_ess] *= -1.0
        return M

    @property
    def thermal_block(self) -> np.ndarray:
        s = self.dims.x_thermal
        return self.A[s, s]

    def state_labels(self) -> list[str]:
        return [f"x_e{i + 1}" for i in range(self.dims.n_ess)] + self.thermal.state_labels()


def assemble_etmg(
    thermal: ContinuousThermalModel,
    electrical: ElectricalNetwork,
    heat_pumps: HeatPumpBank,
    dt: float,
) -> EtmgModel:
    """Discretize the thermal layer and stack it with the ESS integrators.

    ``dt`` is in seconds. Heat-pump columns of ``B`` and demand columns of ``E``
    take MW; the ambient-temperature column of ``E`` takes degC.
    """
    if not dt > 0:
        raise CouplingError(f"sample time must be positive, got {dt}")
    n_ess = electrical.count(NodeRole.ESS)
    n_hp = electrical.count(NodeRole.HEAT_PUMP)
    if len(heat_pumps.cop) != n_hp:
        raise CouplingError(f"heat-pump block: {len(heat_pumps.cop)} pumps configured but {n_hp} heat-pump nodes")
    if tuple(heat_pumps.edges) != tuple(thermal.hp_edges):
        raise CouplingError(
            f"heat-pump block: bank edges {heat_pumps.edges} differ from thermal control edges {thermal.hp_edges}"
        )
    if sorted(heat_pumps.nodes) != electrical.nodes_with(NodeRole.HEAT_PUMP):
        raise CouplingError("heat-pump block: bank nodes must be exactly the heat-pump nodes of the electrical grid")
    if list(heat_pumps.nodes) != sorted(heat_pumps.nodes):
        raise CouplingError("heat-pump block: pumps must be listed in electrical node order")

    A_t, B_t, E_t = zoh_discretize(thermal.A, thermal.B, thermal.E, dt)
    dims = Dimensions(
        n_ess=n_ess,
        n_edges=thermal.edge_count,
        n_storages=len(thermal.storage_nodes),
        n_hp=n_hp,
        n_demand=len(thermal.demand_edges),
        n_res=electrical.count(NodeRole.RES),
        n_load=electrical.count(NodeRole.LOAD),
        n_nodes=electrical.graph.node_count,
        n_lines=electrical.graph.edge_count,
    )
    n_x, n_u = dims.n_x, dims.n_u
    A = np.zeros((n_x, n_x))
    A[:n_ess, :n_ess] = np.eye(n_ess)
    A[n_ess:, n_ess:] = A_t
    B = np.zeros((n_x, n_u))
    B[:n_ess, dims.u_ess] = np.eye(n_ess) * dt / SECONDS_PER_HOUR
    B[n_ess:, dims.u_hp] = -B_t @ np.diag(heat_pumps.alpha) * MW
    E = np.zeros((n_x, dims.n_dt))
    E[n_ess:, :-1] = E_t[:, :-1] * MW
    E[n_ess:, -1] = E_t[:, -1]
    return EtmgModel(
        A=A,
        B=B,
        E=E,
        ptdf=assemble_ptdf(electrical),
        dims=dims,
        dt=float(dt),
        thermal=thermal,
        heat_pumps=heat_pumps,
    )


def nodal_powers(model: EtmgModel, u_e: np.ndarray, d_e: np.ndarray) -> np.ndarray:
    return model.injection_map @ np.concatenate([np.asarray(u_e, float), np.asarray(d_e, float)])


def plant_step(model: EtmgModel, x, u_e, d_t, d_e, tol: float = 1e-6):
    """Advance one sample; returns ``(x_next, p_e,n, p_e,e)``.

    Raises ``PowerBalanceError`` if the nodal powers do not sum to zero.
    """
    x = np.asarray(x, dtype=float)
    u_e = np.asarray(u_e, dtype=float)
    d_t = np.asarray(d_t, dtype=float)
    p_n = nodal_powers(model, u_e, d_e)
    residual = float(p_n.sum())
    if abs(residual) > tol:
        raise PowerBalanceError(residual, tol)
    x_next = model.A @ x + model.B @ u_e + model.E @ d_t
    return x_next, p_n, model.ptdf.matrix @ p_n


def thermal_steady_state(model: EtmgModel, u_hp: Sequence[float], d_t: Sequence[float]) -> np.ndarray:
    """Thermal fixed point under constant heat-pump power and disturbances."""
    s = model.dims.x_thermal
    A_t = model.A[s, s]
    rhs = model.B[s, model.dims.u_hp] @ np.asarray(u_hp, float) + model.E[s] @ np.asarray(d_t, float)
    return np.linalg.solve(np.eye(A_t.shape[0]) - A_t, rhs)


def steady_heat_pump_power(model: EtmgModel, d_t: Sequence[float], state: int, temperature: float) -> float:
    """Power of a single heat pump that holds thermal state ``state`` at ``temperature`` in steady state."""
    if model.dims.n_hp != 1:
        raise CouplingError("steady heat-pump sizing needs exactly one heat pump")
    base = thermal_steady_state(model, [0.0], d_t)[state]
    unit = thermal_steady_state(model, [1.0], d_t)[state] - base
    return float((temperature - base) / unit)
