"""Dense convex QP solver.

Solves::

    minimize    1/2 x'Hx + g'x
    subject to  A_eq x = b_eq
                lb <= A_in x <= ub

with an operator-splitting (ADMM) iteration in the style of OSQP: modified
Ruiz equilibration, over-relaxation, residual-balancing step-size updates and
infeasibility certificates from iterate differences. Once the iterates are
close, the active set is guessed from the duals and an equality-constrained
KKT system is solved ("polishing"), which usually yields the exact optimum.
Problems without inequalities are solved directly from the KKT system.

Dual sign convention: the stationarity condition is
``Hx + g + A_eq' y_eq + A_in' y_in = 0``; ``y_in > 0`` marks an active upper
bound and ``y_in < 0`` an active lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max_iterations"


class QpError(ValueError):
    pass


class IndefiniteHessianError(QpError):
    pass


def _as_matrix(a, rows_hint: int, n: int) -> np.ndarray:
    if a is None:
        return np.zeros((rows_hint, n))
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, n) if a.size else np.zeros((0, n))


def _as_vector(v, size: int, fill: float = 0.0) -> np.ndarray:
    if v is None:
        return np.full(size, fill)
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise QpError(f"H must be square, got {self.H.shape}")
        self.g = _as_vector(self.g, n)
        self.A_eq = _as_matrix(self.A_eq, 0, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.A_in = _as_matrix(self.A_in, 0, n)
        m = self.A_in.shape[0]
        self.lb = _as_vector(self.lb, m, -np.inf)
        self.ub = _as_vector(self.ub, m, np.inf)
        if self.g.shape != (n,):
            raise QpError(f"g has length {self.g.size}, expected {n}")
        if self.b_eq.shape != (self.A_eq.shape[0],):
            raise QpError("b_eq does not match the rows of A_eq")
        if self.lb.shape != (m,) or self.ub.shape != (m,):
            raise QpError("lb/ub do not match the rows of A_in")
        scale = max(1.0, float(np.max(np.abs(self.H)))) if self.H.size else 1.0
        if np.max(np.abs(self.H - self.H.T), initial=0.0) > 1e-12 * scale:
            raise QpError("H is not symmetric")
        bad = np.flatnonzero(self.lb > self.ub)
        if bad.size:
            raise QpError(f"inconsistent bounds lb > ub at inequality rows {bad[:10].tolist()}")

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.g @ x)


@dataclass
class KktResiduals:
    stationarity: float
    primal_eq: float
    primal_in: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal_eq, self.primal_in, self.complementarity)


@dataclass
class QpSolution:
    x: np.ndarray
    y_eq: np.ndarray
    y_in: np.ndarray
    status: str
    objective: float
    iterations: int
    polished: bool = False
    residuals: KktResiduals | None = field(default=None, repr=False)
    rho: float = float("nan")  # final ADMM step size, reusable for warm starts

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _complementarity(y: np.ndarray, Ax: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> float:
    y_up = np.maximum(y, 0.0)
    y_lo = np.maximum(-y, 0.0)
    gap_up = np.where(np.isfinite(ub), np.abs(ub - Ax), 1.0)
    gap_lo = np.where(np.isfinite(lb), np.abs(Ax - lb), 1.0)
    terms = np.concatenate([y_up * gap_up, y_lo * gap_lo])
    return float(np.max(terms, initial=0.0))


def kkt_residuals(p: QpProblem, s: QpSolution) -> KktResiduals:
    """Infinity-norm KKT residuals of a candidate primal-dual pair.

    A multiplier pushing against an infinite bound counts at full magnitude in
    the complementarity term.
    """
    x = np.asarray(s.x, dtype=float)
    grad = p.H @ x + p.g + p.A_eq.T @ s.y_eq + p.A_in.T @ s.y_in
    eq = p.A_eq @ x - p.b_eq
    Ax = p.A_in @ x
    viol = np.maximum(np.maximum(p.lb - Ax, Ax - p.ub), 0.0)
    return KktResiduals(
        stationarity=float(np.max(np.abs(grad), initial=0.0)),
        primal_eq=float(np.max(np.abs(eq), initial=0.0)),
        primal_in=float(np.max(viol, initial=0.0)),
        complementarity=_complementarity(s.y_in, Ax, p.lb, p.ub),
    )


def check_psd(H: np.ndarray, rel_tol: float = 1e-9) -> None:
    """Raise ``IndefiniteHessianError`` unless ``H`` is positive semidefinite.

    A Cholesky factorization of ``H + shift*I`` with a small relative shift is
    attempted first; the eigenvalue test only runs when it fails.
    """
    n = H.shape[0]
    if n == 0:
        return
    scale = max(1.0, float(np.max(np.abs(H))))
    try:
        np.linalg.cholesky(H + rel_tol * scale * np.eye(n))
        return
    except np.linalg.LinAlgError:
        pass
    lam = np.linalg.eigvalsh(H)
    if lam[0] < -rel_tol * scale:
        raise IndefiniteHessianError(f"H is indefinite (smallest eigenvalue {lam[0]:.3g})")


@dataclass
class AdmmSettings:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_prim_inf: float = 1e-7
    eps_dual_inf: float = 1e-7
    scaling_iter: int = 15
    check_every: int = 10
    adapt_every: int = 50
    adapt_tolerance: float = 5.0
    polish: bool = True
    polish_delta: float = 1e-9
    polish_refine: int = 10
    polish_sweeps: int = 5
    polish_shrink: float = 4.0
    polish_feas: float = 1e-9
    polish_ratio: float = 1e3  # attempt polishing once residuals are within this factor of tolerance
    rho_eq_scale: float = 1e3
    rho_min: float = 1e-6
    rho_max: float = 1e6


class _Scaled:
    """Ruiz-equilibrated copy of the stacked problem ``l <= A x <= u``."""

    def __init__(self, P, q, A, l, u, iterations: int):
        n, m = P.shape[0], A.shape[0]
        D = np.ones(n)
        Einv_rows = np.ones(m)
        c = 1.0
        P = P.copy()
        q = q.copy()
        A = A.copy()
        for _ in range(iterations):
            col = np.maximum(np.max(np.abs(P), axis=0, initial=0.0), np.max(np.abs(A), axis=0, initial=0.0))
            d = 1.0 / np.sqrt(np.clip(np.where(col > 0, col, 1.0), 1e-4, 1e4))
            row = np.max(np.abs(A), axis=1, initial=0.0) if m else np.zeros(0)
            e = 1.0 / np.sqrt(np.clip(np.where(row > 0, row, 1.0), 1e-4, 1e4))
            P = d[:, None] * P * d[None, :]
            A = e[:, None] * A * d[None, :]
            q = d * q
            D *= d
            Einv_rows *= e
            mean_col = np.mean(np.max(np.abs(P), axis=0, initial=0.0)) if n else 0.0
            cost = max(mean_col, float(np.max(np.abs(q), initial=0.0)))
            cost = 1.0 if cost < 1e-4 else cost
            ct = 1.0 / min(cost, 1e4)
            P *= ct
            q *= ct
            c *= ct
        self.P, self.q, self.A = P, q, A
        self.D, self.E, self.c = D, Einv_rows, c
        self.l = Einv_rows * l
        self.u = Einv_rows * u

    def unscale(self, x, z, y):
        return self.D * x, z / self.E, self.E * y / self.c


def _equality_only(p: QpProblem) -> QpSolution:
    n, m = p.n, p.A_eq.shape[0]
    K = np.block([[p.H, p.A_eq.T], [p.A_eq, np.zeros((m, m))]])
    rhs = np.concatenate([-p.g, p.b_eq])
    try:
        sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    s = QpSolution(x=sol[:n], y_eq=sol[n:], y_in=np.zeros(0), status=OPTIMAL, objective=0.0, iterations=0)
    s.residuals = kkt_residuals(p, s)
    s.objective = p.objective(s.x)
    scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
    if s.residuals.primal_eq > 1e-8 * scale:
        s.status = INFEASIBLE
    elif s.residuals.stationarity > 1e-8 * scale or not np.all(np.isfinite(s.x)):
        s.status = UNBOUNDED
    return s


class _Admm:
    def __init__(self, p: QpProblem, tol: float, settings: AdmmSettings):
        self.p = p
        self.tol = tol
        self.cfg = settings
        self.n_eq = p.A_eq.shape[0]
        A = np.vstack([p.A_eq, p.A_in])
        l = np.concatenate([p.b_eq, p.lb])
        u = np.concatenate([p.b_eq, p.ub])
        self.A_full, self.l_full, self.u_full = A, l, u
        self.s = _Scaled(p.H, p.g, A, l, u, settings.scaling_iter)
        self.is_eq = np.abs(u - l) < 1e-12
        self.is_loose = ~np.isfinite(l) & ~np.isfinite(u)
        self.rho = settings.rho
        self._factor()

    def _rho_vector(self):
        rv = np.full(self.A_full.shape[0], self.rho)
        rv[self.is_eq] = min(self.rho * self.cfg.rho_eq_scale, self.cfg.rho_max)
        rv[self.is_loose] = self.cfg.rho_min
        return rv

    def _factor(self):
        s = self.s
        self.rho_vec = self._rho_vector()
        K = s.P + self.cfg.sigma * np.eye(s.P.shape[0]) + s.A.T @ (self.rho_vec[:, None] * s.A)
        self.chol = scipy.linalg.cho_factor(K)

    def _unscaled_residuals(self, x, z, y):
        s = self.s
        Ax = s.A @ x
        prim = float(np.max(np.abs((Ax - z) / s.E), initial=0.0))
        Px = s.P @ x
        Aty = s.A.T @ y
        dual = float(np.max(np.abs((Px + s.q + Aty) / s.D), initial=0.0)) / s.c
        eps_prim = self.tol + self.tol * max(
            float(np.max(np.abs(Ax / s.E), initial=0.0)), float(np.max(np.abs(z / s.E), initial=0.0))
        )
        eps_dual = self.tol + self.tol / s.c * max(
            float(np.max(np.abs(Px / s.D), initial=0.0)),
            float(np.max(np.abs(Aty / s.D), initial=0.0)),
            float(np.max(np.abs(s.q / s.D), initial=0.0)),
        )
        return prim, dual, eps_prim, eps_dual

    def _primal_infeasible(self, dy) -> bool:
        s = self.s
        norm = float(np.max(np.abs(s.E * dy), initial=0.0))
        if norm < 1e-12:
            return False
        eps = self.cfg.eps_prim_inf * norm
        if np.max(np.abs((s.A.T @ dy) / s.D), initial=0.0) > eps:
            return False
        up = np.where(dy > 0, np.where(np.isfinite(s.u), s.u * dy, np.inf), 0.0)
        lo = np.where(dy < 0, np.where(np.isfinite(s.l), s.l * dy, np.inf), 0.0)
        support = float(np.sum(up) + np.sum(lo))
        return support < -eps

    def _dual_infeasible(self, dx) -> bool:
        s = self.s
        norm = float(np.max(np.abs(s.D * dx), initial=0.0))
        if norm < 1e-12:
            return False
        eps = self.cfg.eps_dual_inf * norm
        if float(s.q @ dx) / s.c >= -eps:
            return False
        if np.max(np.abs((s.P @ dx) / s.D), initial=0.0) / s.c > eps:
            return False
        Adx = (s.A @ dx) / s.E
        ok_up = np.where(np.isfinite(s.u), Adx <= eps, True)
        ok_lo = np.where(np.isfinite(s.l), Adx >= -eps, True)
        return bool(np.all(ok_up & ok_lo))

    def _polish(self, x, z, y):
        """Solve the KKT system of the guessed active set (scaled data).

        The guess comes from the ADMM duals. It is then corrected by a few
        primal-dual active-set sweeps: violated rows are added at the violated
        bound and rows whose multiplier has the wrong sign are released.
        """
        s = self.s
        lower = (z - s.l < -y) & ~self.is_eq
        upper = (s.u - z < y) & ~self.is_eq
        best = None
        seen = set()
        for _ in range(self.cfg.polish_sweeps):
            key = (lower.tobytes(), upper.tobytes())
            if key in seen:
                break
            seen.add(key)
            sol = self._solve_active(lower, upper)
            if sol is None:
                break
            xp, zp, yp = sol
            viol_lo = (s.l - zp > self.cfg.polish_feas) & ~self.is_eq & ~lower
            viol_up = (zp - s.u > self.cfg.polish_feas) & ~self.is_eq & ~upper
            dual_tol = self.cfg.polish_feas * max(1.0, float(np.max(np.abs(yp), initial=0.0)))
            wrong_lo = lower & (yp > dual_tol)
            wrong_up = upper & (yp < -dual_tol)
            best = sol
            if not (viol_lo.any() or viol_up.any() or wrong_lo.any() or wrong_up.any()):
                break
            lower = (lower & ~wrong_lo) | viol_lo
            upper = (upper & ~wrong_up) | viol_up
        return best

    def _solve_active(self, lower, upper):
        s = self.s
        active = np.flatnonzero(self.is_eq | lower | upper)
        target = np.where(upper, s.u, s.l)[active]
        A_act = s.A[active]
        n, k = s.P.shape[0], active.size
        delta = self.cfg.polish_delta
        K0 = np.block([[s.P, A_act.T], [A_act, np.zeros((k, k))]])
        Kd = K0 + np.diag(np.concatenate([np.full(n, delta), np.full(k, -delta)]))
        rhs = np.concatenate([-s.q, target])
        try:
            lu = scipy.linalg.lu_factor(Kd, check_finite=False)
        except (ValueError, scipy.linalg.LinAlgError):
            return None
        sol = scipy.linalg.lu_solve(lu, rhs)
        for _ in range(self.cfg.polish_refine):
            r = rhs - K0 @ sol
            if np.max(np.abs(r)) < 1e-14 * max(1.0, np.max(np.abs(rhs))):
                break
            sol = sol + scipy.linalg.lu_solve(lu, r)
        if not np.all(np.isfinite(sol)):
            return None
        xp = sol[:n]
        yp = np.zeros(s.A.shape[0])
        yp[active] = sol[n:]
        zp = s.A @ xp
        return xp, zp, yp

    def _try_polish(self, x, z, y, k, sol):
        if not self.cfg.polish:
            return sol
        pol = self._polish(x, z, y)
        if pol is None:
            return sol
        psol = self._candidate(*pol, True, k)
        if self._acceptable(psol) and psol.residuals.max() <= sol.residuals.max():
            psol.status = OPTIMAL
            return psol
        return sol

    def _candidate(self, x, z, y, polished, iterations):
        xs, _, ys = self.s.unscale(x, z, y)
        sol = QpSolution(
            x=xs,
            y_eq=ys[: self.n_eq],
            y_in=ys[self.n_eq :],
            status=MAX_ITERATIONS,
            objective=self.p.objective(xs),
            iterations=iterations,
            polished=polished,
            rho=self.rho,
        )
        sol.residuals = kkt_residuals(self.p, sol)
        return sol

    def _acceptable(self, sol: QpSolution) -> bool:
        """Absolute KKT test scaled by the problem data magnitudes."""
        p, r, tol = self.p, sol.residuals, self.tol
        x, y = sol.x, np.concatenate([sol.y_eq, sol.y_in])
        grad_scale = max(
            1.0,
            float(np.max(np.abs(p.H @ x), initial=0.0)),
            float(np.max(np.abs(p.g), initial=0.0)),
            float(np.max(np.abs(self.A_full.T @ y), initial=0.0)),
        )
        return (
            r.primal_eq <= tol
            and r.primal_in <= tol
            and r.stationarity <= tol * grad_scale
            and r.complementarity <= tol * grad_scale
        )

    def solve(self, max_iter: int, x0=None, y0=None) -> QpSolution:
        s, cfg = self.s, self.cfg
        n, m = s.P.shape[0], s.A.shape[0]
        x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n) / s.D
        z = np.clip(s.A @ x, s.l, s.u)
        y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=float).reshape(m) * s.c / s.E
        polish_gap = cfg.polish_ratio
        k = 0
        for k in range(1, max_iter + 1):
            x_prev, y_prev = x, y
            rhs = cfg.sigma * x - s.q + s.A.T @ (self.rho_vec * z - y)
            xt = scipy.linalg.cho_solve(self.chol, rhs)
            zt = s.A @ xt
            x = cfg.alpha * xt + (1.0 - cfg.alpha) * x
            z_relax = cfg.alpha * zt + (1.0 - cfg.alpha) * z
            z = np.clip(z_relax + y / self.rho_vec, s.l, s.u)
            y = y + self.rho_vec * (z_relax - z)

            if k % cfg.check_every and k != max_iter:
                continue
            prim, dual, eps_p, eps_d = self._unscaled_residuals(x, z, y)
            converged = prim <= eps_p and dual <= eps_d
            if converged:
                sol = self._candidate(x, z, y, False, k)
                if self._acceptable(sol):
                    sol.status = OPTIMAL
                    return self._try_polish(x, z, y, k, sol)
            gap = max(prim / eps_p, dual / eps_d)
            if cfg.polish and gap <= polish_gap:
                # geometric schedule: retry only after the residuals shrank further
                polish_gap = gap / cfg.polish_shrink
                pol = self._polish(x, z, y)
                if pol is not None:
                    psol = self._candidate(*pol, True, k)
                    if self._acceptable(psol):
                        psol.status = OPTIMAL
                        return psol
            if self._primal_infeasible(y - y_prev):
                sol = self._candidate(x, z, y, False, k)
                sol.status = INFEASIBLE
                return sol
            if self._dual_infeasible(x - x_prev):
                sol = self._candidate(x, z, y, False, k)
                sol.status = UNBOUNDED
                return sol
            if k % cfg.adapt_every == 0:
                self._adapt_rho(x, z, y)
        best = self._candidate(x, z, y, False, k)
        best.status = MAX_ITERATIONS
        return best

    def _adapt_rho(self, x, z, y):
        s = self.s
        Ax = s.A @ x
        Px = s.P @ x
        Aty = s.A.T @ y
        prim = np.max(np.abs(Ax - z), initial=0.0) / max(np.max(np.abs(Ax), initial=0.0), np.max(np.abs(z), initial=0.0), 1e-12)
        dual = np.max(np.abs(Px + s.q + Aty), initial=0.0) / max(
            np.max(np.abs(Px), initial=0.0), np.max(np.abs(Aty), initial=0.0), np.max(np.abs(s.q), initial=0.0), 1e-12
        )
        new_rho = float(np.clip(self.rho * np.sqrt(prim / max(dual, 1e-12)), self.cfg.rho_min, self.cfg.rho_max))
        if new_rho > self.cfg.adapt_tolerance * self.rho or new_rho < self.rho / self.cfg.adapt_tolerance:
            self.rho = new_rho
            self._factor()


def solve_qp(
    p: QpProblem,
    tol: float = 1e-6,
    max_iter: int = 20000,
    x0: np.ndarray | None = None,
    settings: AdmmSettings | None = None,
    y0: np.ndarray | None = None,
) -> QpSolution:
    """Solve a convex QP; see the module docstring for the formulation.

    ``status`` is ``optimal`` (KKT residuals within ``tol``), ``infeasible``,
    ``unbounded`` or ``max_iterations`` (last iterate returned). ``x0`` warm
    starts the primal iterate and ``y0`` (``[y_eq; y_in]``) the multipliers.
    """
    check_psd(p.H)
    if p.A_in.shape[0] == 0:
        return _equality_only(p)
    return _Admm(p, tol, settings or AdmmSettings()).solve(max_iter, x0, y0)


def dump_qp(p: QpProblem, path) -> None:
    """Write a problem as plain text: a header line, then one labelled block per array in row-major order."""

    def block(name, arr):
        arr = np.atleast_2d(arr) if np.ndim(arr) == 2 else np.asarray(arr).reshape(1, -1)
        rows = [" ".join(repr(float(v)) for v in row) for row in arr] if arr.size else []
        return [f"{name} {arr.shape[0] if arr.size else 0}"] + rows

    lines = [f"etmg-qp 1 n={p.n} m_eq={p.A_eq.shape[0]} m_in={p.A_in.shape[0]}"]
    lines += block("H", p.H)
    lines += block("g", p.g)
    lines += block("A_eq", p.A_eq)
    lines += block("b_eq", p.b_eq)
    lines += block("A_in", p.A_in)
    lines += block("lb", p.lb)
    lines += block("ub", p.ub)
    Path(path).write_text("\n".join(lines) + "\n")


def load_qp(path) -> QpProblem:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split()
    if header[:2] != ["etmg-qp", "1"]:
        raise QpError(f"{path}: not an etmg-qp v1 file")
    dims = dict(tok.split("=") for tok in header[2:])
    n, m_eq, m_in = int(dims["n"]), int(dims["m_eq"]), int(dims["m_in"])
    arrays = {}
    i = 1
    while i < len(lines):
        name, count = lines[i].split()
        count = int(count)
        rows = [[float(v) for v in lines[i + 1 + r].split()] for r in range(count)]
        arrays[name] = np.array(rows, dtype=float)
        i += 1 + count

    def vec(name, size):
        a = arrays[name]
        return a.reshape(-1) if a.size else np.zeros(size)

    return QpProblem(
        H=arrays["H"].reshape(n, n),
        g=vec("g", n),
        A_eq=arrays["A_eq"].reshape(m_eq, n) if m_eq else np.zeros((0, n)),
        b_eq=vec("b_eq", 0),
        A_in=arrays["A_in"].reshape(m_in, n) if m_in else np.zeros((0, n)),
        lb=vec("lb", 0),
        ub=vec("ub", 0),
    )
