"""Receding-horizon operation controller.

The horizon problem is condensed: predicted states are affine in the stacked
controls ``U = [u_e(k0); ...; u_e(k0+N-1)]``, so state, line-flow and control
limits all become linear inequalities on ``U`` and the power balance becomes one
equality per step. Stage costs are evaluated for ``k0..k0+N-1`` (the ``k0``
temperature term is a constant), limits are imposed on ``x(k0+1)..x(k0+N)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.optimize

from .coupling import EtmgModel, plant_step
from .qp import INFEASIBLE, OPTIMAL, AdmmSettings, QpProblem, QpSolution, solve_qp

logger = logging.getLogger(__name__)

REGULARIZATION = 1e-9


class MpcError(RuntimeError):
    pass


class MpcInfeasibleError(MpcError):
    def __init__(self, step: int, family: str, status: str):
        self.step = step
        self.family = family
        self.status = status
        super().__init__(f"MPC problem at step {step} is {status}; largest violation in constraint family '{family}'")


class MpcSolverError(MpcError):
    def __init__(self, step: int, status: str, iterations: int):
        self.step = step
        self.status = status
        super().__init__(f"QP solver stopped at step {step} with status {status} after {iterations} iterations")


@dataclass(frozen=True)
class TrackedTemperature:
    state: int  # thermal state index (edges first, then storages)
    target: float
    weight: float


@dataclass(frozen=True)
class MpcConfig:
    """Weights, desired values and admissible sets of the horizon problem.

    Per-unit tuples follow the model's unit ordering. ``temperature_min`` and
    ``temperature_max`` hold one entry per thermal state (``+-inf`` for none);
    ``u_min``/``u_max`` one per control ``[u_e,t, u_e,s..., u_e,hp...]``.
    """

    horizon: int
    c_grid: float
    c_ess: tuple[float, ...]
    c_hp: tuple[float, ...]
    c_hp_best: tuple[float, ...]
    c_hp_ramp: tuple[float, ...]
    u_hp_best: tuple[float, ...]
    temperature_min: tuple[float, ...]
    temperature_max: tuple[float, ...]
    ess_max: tuple[float, ...]
    line_min: tuple[float, ...]
    line_max: tuple[float, ...]
    u_min: tuple[float, ...]
    u_max: tuple[float, ...]
    tracked: tuple[TrackedTemperature, ...] = ()

    def __post_init__(self):
        for name in (
            "c_ess", "c_hp", "c_hp_best", "c_hp_ramp", "u_hp_best", "temperature_min",
            "temperature_max", "ess_max", "line_min", "line_max", "u_min", "u_max",
        ):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "tracked", tuple(self.tracked))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        weights = [self.c_grid, *self.c_ess, *self.c_hp, *self.c_hp_best, *self.c_hp_ramp]
        weights += [t.weight for t in self.tracked]
        if any(w < 0 for w in weights):
            raise ValueError("cost weights must be nonnegative")
        for lo, hi, name in [
            (self.temperature_min, self.temperature_max, "temperature"),
            (self.line_min, self.line_max, "line"),
            (self.u_min, self.u_max, "control"),
            ((0.0,) * len(self.ess_max), self.ess_max, "ESS"),
        ]:
            if len(lo) != len(hi):
                raise ValueError(f"{name} bounds differ in length")
            bad = [i for i, (a, b) in enumerate(zip(lo, hi)) if a > b]
            if bad:
                raise ValueError(f"{name} bounds are inverted at indices {bad}")

    def check_dimensions(self, model: EtmgModel) -> None:
        d = model.dims
        expected = {
            "c_ess": d.n_ess, "c_hp": d.n_hp, "c_hp_best": d.n_hp, "c_hp_ramp": d.n_hp,
            "u_hp_best": d.n_hp, "temperature_min": d.n_thermal, "temperature_max": d.n_thermal,
            "ess_max": d.n_ess, "line_min": d.n_lines, "line_max": d.n_lines, "u_min": d.n_u, "u_max": d.n_u,
        }
        for name, size in expected.items():
            if len(getattr(self, name)) != size:
                raise ValueError(f"MpcConfig.{name} has {len(getattr(self, name))} entries, model needs {size}")
        for t in self.tracked:
            if not 0 <= t.state < d.n_thermal:
                raise ValueError(f"tracked state {t.state} out of range")

    def scaled(self, factor: float) -> "MpcConfig":
        """Copy with every cost weight multiplied by ``factor``."""
        return replace(
            self,
            c_grid=self.c_grid * factor,
            c_ess=tuple(w * factor for w in self.c_ess),
            c_hp=tuple(w * factor for w in self.c_hp),
            c_hp_best=tuple(w * factor for w in self.c_hp_best),
            c_hp_ramp=tuple(w * factor for w in self.c_hp_ramp),
            tracked=tuple(TrackedTemperature(t.state, t.target, t.weight * factor) for t in self.tracked),
        )


@dataclass(frozen=True)
class Forecast:
    """Disturbances per step: ``d_t`` rows ``[Q_d (MW_th, <= 0)..., T_amb]``, ``d_e`` rows in injection sign."""

    d_t: np.ndarray
    d_e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d_t", np.atleast_2d(np.asarray(self.d_t, dtype=float)))
        object.__setattr__(self, "d_e", np.atleast_2d(np.asarray(self.d_e, dtype=float)))
        if self.d_t.shape[0] != self.d_e.shape[0]:
            raise ValueError("thermal and electrical forecasts differ in length")

    def __len__(self) -> int:
        return self.d_t.shape[0]

    def window(self, start: int, length: int) -> "Forecast":
        if start + length > len(self):
            raise ValueError(f"forecast covers {len(self)} steps, need {start + length}")
        return Forecast(self.d_t[start : start + length], self.d_e[start : start + length])


# stage costs -----------------------------------------------------------------


def stage_cost_temperature(x_mp, x_desired, weights) -> float:
    dev = np.asarray(x_mp, float) - np.asarray(x_desired, float)
    return float(np.sum(np.asarray(weights, float) * dev**2))


def stage_cost_economic(u, weights) -> float:
    return float(np.sum(np.asarray(weights, float) * np.asarray(u, float) ** 2))


def stage_cost_heatpump(u_hp, u_prev, u_best, c_best, c_ramp) -> float:
    u_hp = np.asarray(u_hp, float)
    return float(
        np.sum(np.asarray(c_best, float) * (u_hp - np.asarray(u_best, float)) ** 2)
        + np.sum(np.asarray(c_ramp, float) * (u_hp - np.asarray(u_prev, float)) ** 2)
    )


def stage_costs(model: EtmgModel, cfg: MpcConfig, x, u, u_hp_prev) -> dict[str, float]:
    d = model.dims
    xt = np.asarray(x, float)[d.x_thermal]
    u = np.asarray(u, float)
    idx = [t.state for t in cfg.tracked]
    return {
        "lt": stage_cost_temperature(xt[idx], [t.target for t in cfg.tracked], [t.weight for t in cfg.tracked]),
        "ect": stage_cost_economic(u[d.u_grid], [cfg.c_grid]),
        "ecs": stage_cost_economic(u[d.u_ess], cfg.c_ess),
        "echp": stage_cost_economic(u[d.u_hp], cfg.c_hp),
        "lhp": stage_cost_heatpump(u[d.u_hp], u_hp_prev, cfg.u_hp_best, cfg.c_hp_best, cfg.c_hp_ramp),
    }


# condensation ----------------------------------------------------------------


def prediction_matrices(model: EtmgModel, x0, d_t: np.ndarray, horizon: int):
    """Return ``(free, gamma)`` with stacked ``[x(1); ...; x(N)] = free + gamma @ U``."""
    A, B, E = model.A, model.B, model.E
    n_x, n_u = B.shape
    gamma = np.zeros((horizon * n_x, horizon * n_u))
    free = np.zeros(horizon * n_x)
    x = np.asarray(x0, float)
    for i in range(horizon):
        rows = slice(i * n_x, (i + 1) * n_x)
        x = A @ x + E @ d_t[i]
        free[rows] = x
        if i:
            gamma[rows, : i * n_u] = A @ gamma[(i - 1) * n_x : i * n_x, : i * n_u]
        gamma[rows, i * n_u : (i + 1) * n_u] = B
    return free, gamma


@dataclass
class CondensedQp:
    problem: QpProblem
    constant: float  # objective offset: J(U) = 1/2 U'HU + g'U + constant (regularization excluded)
    free: np.ndarray
    gamma: np.ndarray
    families: dict[str, slice] = field(default_factory=dict)  # rows of A_in per constraint family
    horizon: int = 1

    def shift(self, sol: QpSolution) -> tuple[np.ndarray, np.ndarray]:
        """Primal and dual guesses for the next step: drop step ``k0``, repeat the last step."""

        def shifted(v, per_step):
            if per_step == 0:
                return v
            return np.concatenate([v[per_step:], v[-per_step:]])

        N = self.horizon
        x = shifted(sol.x, sol.x.size // N)
        y_eq = shifted(sol.y_eq, sol.y_eq.size // N)
        y_in = np.concatenate(
            [shifted(sol.y_in[rows], (rows.stop - rows.start) // N) for rows in self.families.values()]
        )
        return x, np.concatenate([y_eq, y_in])

    def horizon_cost(self, U: np.ndarray) -> float:
        p = self.problem
        return float(0.5 * U @ (p.H - REGULARIZATION * np.eye(p.n)) @ U + p.g @ U + self.constant)


def build_qp(model: EtmgModel, cfg: MpcConfig, x0, u_hp_prev, forecast: Forecast) -> CondensedQp:
    """Condense the horizon problem starting at state ``x0`` into a :class:`QpProblem`."""
    cfg.check_dimensions(model)
    d = model.dims
    N, n_x, n_u = cfg.horizon, d.n_x, d.n_u
    fc = forecast.window(0, N)
    x0 = np.asarray(x0, float)
    free, gamma = prediction_matrices(model, x0, fc.d_t, N)
    nU = N * n_u

    Q = np.zeros((nU, nU))
    r = np.zeros(nU)
    const = 0.0

    # temperature tracking on x(k0+1)..x(k0+N-1); the x(k0) term is constant
    if cfg.tracked:
        sel = np.array([d.n_ess + t.state for t in cfg.tracked])
        target = np.array([t.target for t in cfg.tracked])
        w = np.array([t.weight for t in cfg.tracked])
        dev0 = x0[sel] - target
        const += float(np.sum(w * dev0**2))
        for i in range(N - 1):
            rows = i * n_x + sel
            G = gamma[rows]
            dev = free[rows] - target
            Q += G.T @ (w[:, None] * G)
            r += G.T @ (w * dev)
            const += float(np.sum(w * dev**2))

    per_step = np.zeros(n_u)
    per_step[d.u_grid] = cfg.c_grid
    per_step[d.u_ess] = cfg.c_ess
    per_step[d.u_hp] = np.asarray(cfg.c_hp) + np.asarray(cfg.c_hp_best)
    Q[np.diag_indices(nU)] += np.tile(per_step, N)
    c_best = np.asarray(cfg.c_hp_best)
    u_best = np.asarray(cfg.u_hp_best)
    c_ramp = np.asarray(cfg.c_hp_ramp)
    u_prev = np.asarray(u_hp_prev, float).reshape(d.n_hp)
    hp_cols = np.arange(d.u_hp.start, d.u_hp.stop)
    for k in range(N):
        cols = k * n_u + hp_cols
        r[cols] -= c_best * u_best
        const += float(np.sum(c_best * u_best**2))
        Q[cols, cols] += c_ramp
        if k == 0:
            r[cols] -= c_ramp * u_prev
            const += float(np.sum(c_ramp * u_prev**2))
        else:
            prev = cols - n_u
            Q[prev, prev] += c_ramp
            Q[cols, prev] -= c_ramp
            Q[prev, cols] -= c_ramp

    H = 2.0 * Q + REGULARIZATION * np.eye(nU)
    H = 0.5 * (H + H.T)
    g = 2.0 * r

    # power balance: 1' p_e,n = 0 at every step
    M = model.injection_map
    M_u, M_d = M[:, :n_u], M[:, n_u:]
    A_eq = np.kron(np.eye(N), M_u.sum(axis=0)[None, :])
    b_eq = -(fc.d_e @ M_d.sum(axis=0))

    blocks, lbs, ubs, families = [], [], [], {}
    row = 0

    def add(name, Ab, lb, ub):
        nonlocal row
        blocks.append(Ab)
        lbs.append(lb)
        ubs.append(ub)
        families[name] = slice(row, row + Ab.shape[0])
        row += Ab.shape[0]

    add("controls", np.eye(nU), np.tile(cfg.u_min, N), np.tile(cfg.u_max, N))

    x_lo = np.concatenate([np.zeros(d.n_ess), cfg.temperature_min])
    x_hi = np.concatenate([np.asarray(cfg.ess_max), cfg.temperature_max])
    bounded = np.flatnonzero(np.isfinite(x_lo) | np.isfinite(x_hi))
    ess_rows = [i * n_x + j for i in range(N) for j in bounded if j < d.n_ess]
    th_rows = [i * n_x + j for i in range(N) for j in bounded if j >= d.n_ess]
    for name, rows in (("ess_energy", ess_rows), ("temperatures", th_rows)):
        if rows:
            rows = np.array(rows)
            state = rows % n_x
            add(name, gamma[rows], x_lo[state] - free[rows], x_hi[state] - free[rows])

    F = model.ptdf.matrix
    line_u = F @ M_u
    line_d = fc.d_e @ (F @ M_d).T  # N x lines
    add(
        "line_flows",
        np.kron(np.eye(N), line_u),
        (np.asarray(cfg.line_min)[None, :] - line_d).reshape(-1),
        (np.asarray(cfg.line_max)[None, :] - line_d).reshape(-1),
    )

    problem = QpProblem(H=H, g=g, A_eq=A_eq, b_eq=b_eq, A_in=np.vstack(blocks), lb=np.concatenate(lbs), ub=np.concatenate(ubs))
    return CondensedQp(problem=problem, constant=const, free=free, gamma=gamma, families=families, horizon=N)


def worst_family(cqp: CondensedQp, U: np.ndarray) -> str:
    """Constraint family to blame for an infeasible horizon problem.

    Controls and power balance are kept hard; every other family gets one
    elastic slack shared by its rows, and the family needing the largest
    relaxation is reported. Falls back to the largest violation at ``U`` when
    the elastic problem finds no conflict.
    """
    p = cqp.problem
    soft = [name for name in cqp.families if name != "controls"]
    n = p.n
    rows, rhs = [], []
    for name, sl in cqp.families.items():
        col = np.zeros(len(soft))
        if name in soft:
            col[soft.index(name)] = -1.0
        A = p.A_in[sl]
        for sign, bound in ((1.0, p.ub[sl]), (-1.0, p.lb[sl])):
            keep = np.isfinite(bound)
            if keep.any():
                rows.append(np.hstack([sign * A[keep], np.tile(col, (int(keep.sum()), 1))]))
                rhs.append(sign * bound[keep])
    res = scipy.optimize.linprog(
        np.concatenate([np.zeros(n), np.ones(len(soft))]),
        A_ub=np.vstack(rows) if rows else None,
        b_ub=np.concatenate(rhs) if rhs else None,
        A_eq=np.hstack([p.A_eq, np.zeros((p.A_eq.shape[0], len(soft)))]) if p.A_eq.shape[0] else None,
        b_eq=p.b_eq if p.A_eq.shape[0] else None,
        bounds=[(None, None)] * n + [(0.0, None)] * len(soft),
        method="highs",
    )
    if res.status == 2:
        return "controls"
    if res.status == 0 and soft and res.x[n:].max() > 1e-9:
        return soft[int(np.argmax(res.x[n:]))]

    worst, name = -np.inf, "power_balance"
    if p.A_eq.shape[0]:
        worst = float(np.max(np.abs(p.A_eq @ U - p.b_eq)))
    Ax = p.A_in @ U
    viol = np.maximum(p.lb - Ax, Ax - p.ub)
    for fam, sl in cqp.families.items():
        v = float(np.max(viol[sl], initial=-np.inf))
        if v > worst:
            worst, name = v, fam
    return name


# closed loop -----------------------------------------------------------------


@dataclass
class SimulationTrace:
    """Closed-loop record; row ``k`` holds the state at ``k`` and the control applied at ``k``."""

    state_labels: list[str]
    x: list[np.ndarray] = field(default_factory=list)
    u: list[np.ndarray] = field(default_factory=list)
    p_nodes: list[np.ndarray] = field(default_factory=list)
    p_lines: list[np.ndarray] = field(default_factory=list)
    costs: list[dict[str, float]] = field(default_factory=list)
    horizon_cost: list[float] = field(default_factory=list)
    solver: list[dict] = field(default_factory=list)
    final_state: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.u)

    def array(self, name: str) -> np.ndarray:
        return np.array(getattr(self, name))

    def cost_array(self, key: str) -> np.ndarray:
        return np.array([c[key] for c in self.costs])

    @property
    def total_cost(self) -> float:
        return float(sum(sum(c.values()) for c in self.costs))


def solve_step(
    model: EtmgModel,
    cfg: MpcConfig,
    x0,
    u_hp_prev,
    forecast: Forecast,
    step: int = 0,
    warm: tuple[np.ndarray, np.ndarray, float] | None = None,
    tol: float = 1e-6,
    max_iter: int = 20000,
) -> tuple[CondensedQp, QpSolution]:
    """Build and solve one horizon problem; ``warm`` is ``(x, y, rho)`` from :meth:`CondensedQp.shift`."""
    cqp = build_qp(model, cfg, x0, u_hp_prev, forecast)
    if warm is None:
        sol = solve_qp(cqp.problem, tol=tol, max_iter=max_iter)
    else:
        x_w, y_w, rho = warm
        sol = solve_qp(cqp.problem, tol=tol, max_iter=max_iter, x0=x_w, y0=y_w, settings=AdmmSettings(rho=rho))
    if sol.status != OPTIMAL:
        if sol.status == INFEASIBLE:
            raise MpcInfeasibleError(step, worst_family(cqp, sol.x), sol.status)
        raise MpcSolverError(step, sol.status, sol.iterations)
    return cqp, sol


def receding_horizon_run(
    model: EtmgModel,
    cfg: MpcConfig,
    profiles: Forecast,
    k_sim: int,
    x_init: Sequence[float],
    u_hp_init: Sequence[float] | None = None,
    tol: float = 1e-6,
    max_iter: int = 20000,
) -> SimulationTrace:
    """Run ``k_sim`` closed-loop steps with perfect forecasts taken from ``profiles``."""
    cfg.check_dimensions(model)
    d = model.dims
    N = cfg.horizon
    if len(profiles) < k_sim + N:
        raise ValueError(f"profiles cover {len(profiles)} steps, need k_sim + N = {k_sim + N}")
    x = np.asarray(x_init, float).copy()
    if x.shape != (d.n_x,):
        raise ValueError(f"initial state has shape {x.shape}, model needs ({d.n_x},)")
    u_prev = np.asarray(cfg.u_hp_best if u_hp_init is None else u_hp_init, float)
    trace = SimulationTrace(state_labels=model.state_labels())
    warm = None
    for k in range(k_sim):
        t0 = time.perf_counter()
        cqp, sol = solve_step(model, cfg, x, u_prev, profiles.window(k, N), k, warm, tol, max_iter)
        elapsed = time.perf_counter() - t0
        u = sol.x[: d.n_u]
        x_next, p_n, p_e = plant_step(model, x, u, profiles.d_t[k], profiles.d_e[k])
        trace.x.append(x.copy())
        trace.u.append(u.copy())
        trace.p_nodes.append(p_n)
        trace.p_lines.append(p_e)
        trace.costs.append(stage_costs(model, cfg, x, u, u_prev))
        trace.horizon_cost.append(cqp.horizon_cost(sol.x))
        trace.solver.append(
            {"iterations": sol.iterations, "polished": sol.polished, "status": sol.status, "seconds": elapsed}
        )
        logger.debug("step %d: %d iterations, %.3f s", k, sol.iterations, elapsed)
        warm = (*cqp.shift(sol), sol.rho) if np.isfinite(sol.rho) else None
        u_prev = u[d.u_hp]
        x = x_next
    trace.final_state = x
    return trace


def trace_violations(model: EtmgModel, cfg: MpcConfig, trace: SimulationTrace) -> dict[str, float]:
    """Largest violation per constraint family over a trace (0 when satisfied).

    States are checked at every recorded step and at the final state.
    """
    d = model.dims
    out = {"power_balance": 0.0, "controls": 0.0, "ess_energy": 0.0, "temperatures": 0.0, "line_flows": 0.0}
    if not len(trace):
        return out
    U = trace.array("u")
    X = trace.array("x")
    if trace.final_state is not None:
        X = np.vstack([X, trace.final_state])
    P = trace.array("p_lines")

    def excess(values, lo, hi):
        return float(np.max(np.maximum(np.asarray(lo) - values, values - np.asarray(hi)), initial=0.0))

    out["power_balance"] = float(np.max(np.abs(trace.array("p_nodes").sum(axis=1))))
    out["controls"] = max(0.0, excess(U, cfg.u_min, cfg.u_max))
    out["ess_energy"] = max(0.0, excess(X[:, d.x_ess], np.zeros(d.n_ess), cfg.ess_max))
    out["temperatures"] = max(0.0, excess(X[:, d.x_thermal], cfg.temperature_min, cfg.temperature_max))
    out["line_flows"] = max(0.0, excess(P, cfg.line_min, cfg.line_max))
    return out
