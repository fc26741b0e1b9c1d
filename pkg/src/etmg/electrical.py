"""DC power flow, global balance and battery (ESS) energy dynamics.

Units at this layer are MW, MWh and hours. Nodal powers follow the injection
sign: positive means power delivered into the grid at that node.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graphs import DirectedGraph, build_incidence


class ElectricalModelError(ValueError):
    pass


class PowerBalanceError(ElectricalModelError):
    def __init__(self, residual: float, tol: float):
        self.residual = residual
        super().__init__(f"nodal powers do not balance: sum = {residual:.6g} (tolerance {tol:g})")


class NodeRole(str, Enum):
    PCC = "pcc"
    ESS = "ess"
    HEAT_PUMP = "heat_pump"
    RES = "res"
    LOAD = "load"


_ROLE_ORDER = [NodeRole.PCC, NodeRole.ESS, NodeRole.HEAT_PUMP, NodeRole.RES, NodeRole.LOAD]


@dataclass(frozen=True)
class ElectricalNetwork:
    """Power lines with lumped parameter ``a = b * v_m * v_l`` (MW per rad).

    Node roles must be sorted PCC, ESS, heat pumps, RES, loads, with exactly one
    PCC at index 0. Edge orientation is arbitrary and only fixes the sign of
    reported line flows.
    """

    graph: DirectedGraph
    line_params: tuple[float, ...]
    node_roles: tuple[NodeRole, ...]

    def __post_init__(self):
        roles = tuple(NodeRole(r) for r in self.node_roles)
        object.__setattr__(self, "node_roles", roles)
        object.__setattr__(self, "line_params", tuple(float(a) for a in self.line_params))
        if len(roles) != self.graph.node_count:
            raise ElectricalModelError("one role per electrical node required")
        if len(self.line_params) != self.graph.edge_count:
            raise ElectricalModelError("one line parameter per edge required")
        if any(not a > 0 for a in self.line_params):
            raise ElectricalModelError("line parameters must be positive")
        if roles.count(NodeRole.PCC) != 1 or roles[0] is not NodeRole.PCC:
            raise ElectricalModelError("exactly one PCC node is required and it must be node 0")
        ranks = [_ROLE_ORDER.index(r) for r in roles]
        if ranks != sorted(ranks):
            raise ElectricalModelError(f"nodes must be ordered PCC, ESS, heat pumps, RES, loads; got {[r.value for r in roles]}")

    def count(self, role: NodeRole) -> int:
        return self.node_roles.count(NodeRole(role))

    def nodes_with(self, role: NodeRole) -> list[int]:
        return [i for i, r in enumerate(self.node_roles) if r is NodeRole(role)]


@dataclass(frozen=True)
class PtdfMap:
    matrix: np.ndarray  # lines x nodes

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p


def assemble_ptdf(net: ElectricalNetwork) -> PtdfMap:
    """Injection-to-flow map with the last node as angle reference.

    Positive flow on line ``j`` runs from its source to its sink node.
    """
    n = net.graph.node_count
    F = build_incidence(net.graph)
    a = np.asarray(net.line_params)
    T = np.eye(n)
    T[:-1, -1] = -1.0
    T_red = np.eye(n)[:-1, :]
    L = F @ np.diag(a) @ F.T
    L_red = T_red @ L @ T_red.T
    if n > 1:
        cond = np.linalg.cond(L_red)
        if not np.isfinite(cond) or cond > 1e14:
            raise ElectricalModelError("reduced Laplacian is singular; the electrical graph is disconnected")
    # theta solves L theta = p with theta_n = 0; power flows from high to low angle
    angles = np.linalg.solve(T, T_red.T) @ np.linalg.solve(L_red, T_red) if n > 1 else np.zeros((1, 1))
    return PtdfMap(matrix=-np.diag(a) @ F.T @ angles)


def check_balance(p: np.ndarray) -> float:
    """Sum of nodal powers; zero when generation and consumption balance."""
    return float(np.sum(p))


def line_flows(ptdf: PtdfMap, p: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    residual = check_balance(p)
    if abs(residual) > tol:
        raise PowerBalanceError(residual, tol)
    return ptdf.matrix @ p


def ess_step(x: np.ndarray, u: np.ndarray, dt_hours: float) -> np.ndarray:
    """Stored energy after charging with power ``u`` (MW, positive charges) for ``dt_hours``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != u.shape:
        raise ElectricalModelError(f"ESS state {x.shape} and power {u.shape} differ in shape")
    return x + dt_hours * u

