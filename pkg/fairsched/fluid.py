"""
Fluid (continuous) oracle: solves the concave allocation programs
over the capacity polytope

    sum_n x[n,i] B[n,i,r] <= 1   for every server i, resource r
    x[n,i] >= 0, x[n,i] = 0 where delta[n,i] = 0

and checks the optimality conditions the progressive filling results
are compared against.

Objectives (ObjectiveMode):
PF_A   sum_n phi_n g_a(x_n), g_a(X) = X^(1-a)/(1-a) (log X for a = 1)
MMF_G  sum_n phi_n g(U_n), U_n = (1/phi_n) sum_i u[n,i] x[n,i];
       g = log1p, or "maxmin" for the lexicographic max-min limit
U_PF   sum_n phi_n log U_n

Multipliers are recovered after the solve (per server, non-negative
least squares over the active constraints) and the KKT residual is
the largest of the stationarity, complementary slackness and
feasibility errors.

Before that the solver's point is polished: Newton steps on the
equality KKT system of its active set take it to machine precision,
so the checks do not depend on the solver's stopping tolerances.
"""

import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import cvxpy as cp
import numpy as np
import numpy.typing as npt
from scipy.optimize import linprog, nnls

from fairsched.app import AppException
from fairsched.criteria import CriterionKind, CriterionSpec, criterion_weights
from fairsched.scenario import Matrix, Scenario, Vector, check_valid

logger = logging.getLogger(__name__)

G_LOG1P = "log1p"
G_MAXMIN = "maxmin"
G_NAMES = (G_LOG1P, G_MAXMIN)

ACCEPTED_STATUS = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


class FluidError(AppException):
    """
    Class for all fluid oracle exceptions
    """


class FluidInfeasibleError(FluidError):
    """
    log objective with a framework held at x_n = 0
    """


class FluidConvergenceError(FluidError):
    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


class ObjectiveMode(Enum):
    MMF_G = "mmf"
    PF_A = "pf"
    U_PF = "upf"


@dataclass(frozen=True)
class ObjectiveSpec:
    mode: ObjectiveMode
    a: float = 1.0  # PF_A
    g: str = G_LOG1P  # MMF_G
    # source of u[n,i] for MMF_G and U_PF
    criterion: CriterionSpec = CriterionSpec(CriterionKind.DRF)

    def validate(self) -> None:
        if not (math.isfinite(self.a) and self.a > 0):
            raise FluidError(f"a = {self.a} must be positive")
        if self.g not in G_NAMES:
            raise FluidError(f"unknown g {self.g!r} (expected one of {G_NAMES})")
        if self.g == G_MAXMIN and self.mode is not ObjectiveMode.MMF_G:
            raise FluidError("g=maxmin only applies to the mmf objective")

    def weights(self, scenario: Scenario) -> Matrix:
        return criterion_weights(scenario, self.criterion)


def _solver_name() -> str:
    return os.environ.get("FLUID_SOLVER", "CLARABEL")


@dataclass(frozen=True)
class FluidSettings:
    solver: str = field(default_factory=_solver_name)
    feas_tol: float = 1e-8
    kkt_tol: float = 1e-6
    # constraint counted as active when utilization >= 1 - active_tol
    active_tol: float = 1e-7
    # coordinate counted as zero (and snapped to 0) when x[n,i] <= zero_tol
    zero_tol: float = 1e-6
    log_floor: float = 1e-12
    solver_tol: float = 1e-10
    max_iter: int = 500
    uniqueness_tol: float = 1e-5
    # active-set Newton refinement of the solver's point
    polish: bool = True
    # constraints start active when utilization >= 1 - polish_active_tol
    polish_active_tol: float = 1e-5
    polish_tol: float = 1e-10
    polish_steps: int = 20
    polish_rounds: int = 10

    def solver_options(self) -> dict[str, Any]:
        if self.solver.upper() == "CLARABEL":
            return {
                "tol_gap_abs": self.solver_tol,
                "tol_gap_rel": self.solver_tol,
                "tol_feas": self.solver_tol,
                "max_iter": self.max_iter,
            }
        return {}


def _nan_to_none(a: npt.NDArray[Any] | None) -> Any:
    if a is None:
        return None
    return [[None if math.isnan(v) else float(v) for v in row] for row in a.tolist()]


@dataclass
class FluidSolution:
    objective: ObjectiveSpec
    x_star: Matrix  # [n,i]
    objective_value: float
    lambda_: Matrix | None  # [i,r]
    nu: Matrix | None  # [n,i]
    stationarity: float = math.nan
    slackness: float = math.nan
    infeasibility: float = 0.0
    status: str = ""

    @property
    def kkt_residual(self) -> float:
        """
        NaN when no multipliers are defined (maxmin limit)
        """
        if self.lambda_ is None:
            return math.nan
        return max(self.stationarity, self.slackness, self.infeasibility)

    def totals(self) -> Vector:
        return np.asarray(self.x_star.sum(axis=1), dtype=float)

    def to_json(self) -> dict[str, Any]:
        def num(v: float) -> float | None:
            return None if math.isnan(v) else float(v)

        return {
            "mode": self.objective.mode.value,
            "a": self.objective.a,
            "g": self.objective.g,
            "criterion": self.objective.criterion.kind.value,
            "status": self.status,
            "x_star": self.x_star.tolist(),
            "totals": self.totals().tolist(),
            "objective_value": num(self.objective_value),
            "lambda": _nan_to_none(self.lambda_),
            "nu": _nan_to_none(self.nu),
            "residuals": {
                "kkt": num(self.kkt_residual),
                "stationarity": num(self.stationarity),
                "slackness": num(self.slackness),
                "infeasibility": num(self.infeasibility),
            },
        }


################ polytope helpers


def utilization(scenario: Scenario, x: npt.ArrayLike) -> Matrix:
    """
    [i,r]: sum over n of x[n,i] B[n,i,r]
    """
    arr = np.asarray(x, dtype=float)
    return np.asarray(np.einsum("ni,nir->ir", arr, scenario.normalized), dtype=float)


def _allocation(solution_or_x: "FluidSolution | npt.ArrayLike") -> Matrix:
    if isinstance(solution_or_x, FluidSolution):
        return solution_or_x.x_star
    return np.asarray(solution_or_x, dtype=float)


def _cleanup(scenario: Scenario, x: Matrix, zero_tol: float = 0.0) -> Matrix:
    """
    clip solver noise: cells <= zero_tol and disallowed cells to 0,
    overbooked servers scaled back onto the polytope
    """
    x = np.where(scenario.allowed & (x > zero_tol), x, 0.0)
    util = utilization(scenario, x).max(axis=1)
    over = util > 1.0
    if np.any(over):
        logger.debug("scaling overbooked servers by %s", util[over])
        x[:, over] /= util[over]
    return x


def _u_scores(scenario: Scenario, u: Matrix, x: Matrix) -> Vector:
    return np.asarray((u * x).sum(axis=1) / scenario.priority, dtype=float)


def _objective_weights(scenario: Scenario, objective: ObjectiveSpec) -> Matrix:
    if objective.mode is ObjectiveMode.PF_A:
        return np.asarray(scenario.allowed, dtype=float)
    return objective.weights(scenario)


################ solvers


def _objective_expr(
    scenario: Scenario, objective: ObjectiveSpec, u: Matrix, X: cp.Variable
) -> Any:
    phi = scenario.priority
    if objective.mode is ObjectiveMode.PF_A:
        totals = cp.sum(X, axis=1)
        a = objective.a
        if a == 1:
            terms = cp.log(totals)
        elif a < 1:
            terms = cp.power(totals, 1 - a) / (1 - a)
        elif a == 2:
            terms = -cp.inv_pos(totals)
        else:
            terms = -cp.power(totals, 1 - a) / (a - 1)
        return cp.sum(cp.multiply(phi, terms))

    scores = cp.multiply(1.0 / phi, cp.sum(cp.multiply(u, X), axis=1))
    if objective.mode is ObjectiveMode.U_PF:
        return cp.sum(cp.multiply(phi, cp.log(scores)))
    return cp.sum(cp.multiply(phi, cp.log(1 + scores)))


def _objective_value(
    scenario: Scenario, objective: ObjectiveSpec, u: Matrix, x: Matrix
) -> float:
    phi = scenario.priority
    with np.errstate(divide="ignore"):
        if objective.mode is ObjectiveMode.PF_A:
            totals = x.sum(axis=1)
            a = objective.a
            if a == 1:
                return float(phi @ np.log(totals))
            return float(phi @ (np.power(totals, 1 - a) / (1 - a)))
        scores = _u_scores(scenario, u, x)
        if objective.mode is ObjectiveMode.U_PF:
            return float(phi @ np.log(scores))
        if objective.g == G_MAXMIN:
            return float(scores.min())
        return float(phi @ np.log1p(scores))


def _gradient(
    scenario: Scenario, objective: ObjectiveSpec, u: Matrix, x: Matrix
) -> Matrix:
    """
    d objective / d x[n,i]
    """
    phi = scenario.priority
    if objective.mode is ObjectiveMode.PF_A:
        totals = x.sum(axis=1)
        per_n = phi * np.power(totals, -objective.a)
        return np.repeat(per_n[:, None], scenario.num_servers, axis=1)
    scores = _u_scores(scenario, u, x)
    if objective.mode is ObjectiveMode.U_PF:
        return np.asarray(u / scores[:, None], dtype=float)
    return np.asarray(u / (1 + scores[:, None]), dtype=float)


def _curvature(
    scenario: Scenario, objective: ObjectiveSpec, u: Matrix, x: Matrix
) -> tuple[Matrix, Vector]:
    """
    Hessian of the objective as blocks -k[n] w[n] w[n]^T, one per
    framework; returns (w[n,i], k[n])
    """
    phi = scenario.priority
    if objective.mode is ObjectiveMode.PF_A:
        totals = x.sum(axis=1)
        k = objective.a * phi * np.power(totals, -objective.a - 1)
        return np.ones_like(x), np.asarray(k, dtype=float)
    scores = _u_scores(scenario, u, x)
    if objective.mode is ObjectiveMode.U_PF:
        return u, np.asarray(1.0 / (phi * scores**2), dtype=float)
    return u, np.asarray(1.0 / (phi * (1 + scores) ** 2), dtype=float)


def _solve_convex(
    scenario: Scenario, objective: ObjectiveSpec, u: Matrix, settings: FluidSettings
) -> tuple[Matrix, str]:
    N, I = scenario.num_frameworks, scenario.num_servers
    X = cp.Variable((N, I), nonneg=True)
    constraints = [
        scenario.normalized[:, i, :].T @ X[:, i] <= 1 for i in range(I)
    ]
    blocked = ~scenario.allowed
    if np.any(blocked):
        constraints.append(X[blocked] == 0)

    problem = cp.Problem(
        cp.Maximize(_objective_expr(scenario, objective, u, X)), constraints
    )
    try:
        problem.solve(solver=settings.solver, **settings.solver_options())
    except cp.SolverError as e:
        raise FluidConvergenceError(f"{settings.solver}: {e}")
    status = str(problem.status)
    if status in (cp.INFEASIBLE, cp.UNBOUNDED):
        raise FluidError(f"solver status {status}")
    if status not in ACCEPTED_STATUS or X.value is None:
        raise FluidConvergenceError(f"solver status {status}")
    if status != cp.OPTIMAL:
        logger.warning("solver status %s", status)
    return np.asarray(X.value, dtype=float), status


class _WaterFill:
    """
    lexicographic max-min of U by repeated LPs: raise the common
    level of the unfrozen frameworks, freeze those that cannot go
    higher, repeat; then maximize total tasks at the frozen levels.
    variables: x[n,i] row-major, then the level t.
    """

    def __init__(self, scenario: Scenario, u: Matrix, settings: FluidSettings):
        self.scenario = scenario
        self.settings = settings
        N, I, R = scenario.num_frameworks, scenario.num_servers, scenario.num_resources
        self.cells = N * I
        cap = np.zeros((I * R, self.cells + 1))
        for i in range(I):
            for r in range(R):
                for n in range(N):
                    cap[i * R + r, n * I + i] = scenario.normalized[n, i, r]
        self.cap = cap
        self.score_rows = np.zeros((N, self.cells + 1))
        for n in range(N):
            self.score_rows[n, n * I : (n + 1) * I] = u[n] / scenario.priority[n]
        self.x_bounds = [
            (0.0, None) if scenario.allowed[n, i] else (0.0, 0.0)
            for n in range(N)
            for i in range(I)
        ]

    def _lp(
        self,
        c: Vector,
        rows: list[Vector],
        rhs: list[float],
        level_free: bool,
    ) -> Any:
        A = np.vstack([self.cap] + rows) if rows else self.cap
        b = np.concatenate([np.ones(len(self.cap)), np.asarray(rhs, dtype=float)])
        t_bounds = (None, None) if level_free else (0.0, 0.0)
        bounds = self.x_bounds + [t_bounds]
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status != 0:
            raise FluidConvergenceError(f"water-filling LP: {res.message}")
        return res

    def _held(self, levels: dict[int, float]) -> tuple[list[Vector], list[float]]:
        slack = self.settings.feas_tol
        rows = [-self.score_rows[m] for m in levels]
        rhs = [-(lvl - slack) for lvl in levels.values()]
        return rows, rhs

    def solve(self) -> Matrix:
        N = self.scenario.num_frameworks
        levels: dict[int, float] = {}
        free = list(range(N))
        t_col = np.zeros(self.cells + 1)
        t_col[-1] = 1.0
        while free:
            rows, rhs = self._held(levels)
            c = -t_col
            res = self._lp(
                c,
                rows + [t_col - self.score_rows[n] for n in free],
                rhs + [0.0] * len(free),
                True,
            )
            t = float(res.x[-1])
            slack = self.settings.feas_tol
            saturated = []
            for n in free:
                others = [-self.score_rows[m] for m in free]
                res_n = self._lp(
                    -self.score_rows[n],
                    rows + others,
                    rhs + [-(t - slack)] * len(free),
                    False,
                )
                if -res_n.fun <= t + 1e3 * slack:
                    saturated.append(n)
            if not saturated:
                saturated = list(free)
            for n in saturated:
                levels[n] = t
                free.remove(n)
            logger.debug("water level %g: froze %s", t, saturated)

        rows, rhs = self._held(levels)
        total = np.zeros(self.cells + 1)
        total[: self.cells] = -1.0
        res = self._lp(total, rows, rhs, False)
        return np.asarray(res.x[: self.cells], dtype=float).reshape(
            N, self.scenario.num_servers
        )


################ multipliers


def _multipliers(
    scenario: Scenario,
    x: Matrix,
    grad: Matrix,
    settings: FluidSettings,
) -> tuple[Matrix, Matrix, float, float]:
    """
    lambda[i,r], nu[n,i] >= 0 fitting
        grad[n,i] = sum_r lambda[i,r] B[n,i,r] - nu[n,i]
    over the active constraints of each server.
    returns (lambda, nu, stationarity, slackness)
    """
    N, I, R = scenario.num_frameworks, scenario.num_servers, scenario.num_resources
    lam = np.zeros((I, R))
    nu = np.zeros((N, I))
    util = utilization(scenario, x)
    stationarity = 0.0
    for i in range(I):
        users = scenario.users(i)
        if not users:
            continue
        active = [r for r in range(R) if util[i, r] >= 1 - settings.active_tol]
        zeros = [n for n in users if x[n, i] <= settings.zero_tol]
        A = np.zeros((len(users), len(active) + len(zeros)))
        for row, n in enumerate(users):
            for col, r in enumerate(active):
                A[row, col] = scenario.normalized[n, i, r]
            if n in zeros:
                A[row, len(active) + zeros.index(n)] = -1.0
        b = grad[users, i]
        if A.shape[1] == 0:
            stationarity = max(stationarity, float(np.max(np.abs(b))))
            continue
        z, _ = nnls(A, b)
        stationarity = max(stationarity, float(np.max(np.abs(A @ z - b))))
        for col, r in enumerate(active):
            lam[i, r] = z[col]
        for k, n in enumerate(zeros):
            nu[n, i] = z[len(active) + k]

    slackness = max(
        float(np.max(lam * np.maximum(1 - util, 0.0))),
        float(np.max(nu * x)),
    )
    return lam, nu, stationarity, slackness


################ polishing

Cell = tuple[int, int]


def _newton(
    scenario: Scenario,
    objective: ObjectiveSpec,
    u: Matrix,
    x: Matrix,
    cells: list[Cell],
    active: list[Cell],
    settings: FluidSettings,
) -> tuple[Matrix, Matrix] | None:
    """
    Newton steps on the equality KKT system of a fixed active set:
        grad[n,i] = sum_r lambda[i,r] B[n,i,r]   for (n,i) in cells
        sum_n x[n,i] B[n,i,r] = 1               for (i,r) in active
    with every cell outside `cells` held at 0.
    returns (x, lambda[i,r]), or None without convergence
    """
    if not cells:
        return None
    B = scenario.normalized
    S, A = len(cells), len(active)
    rows = np.array([n for n, _ in cells])
    cols = np.array([i for _, i in cells])
    G = np.zeros((A, S))
    for a, (i, r) in enumerate(active):
        on_i = cols == i
        G[a, on_i] = B[rows[on_i], i, r]
    same = rows[:, None] == rows[None, :]

    y = np.zeros_like(x)
    y[rows, cols] = x[rows, cols]
    mult = np.zeros(A)
    for _ in range(settings.polish_steps):
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = _gradient(scenario, objective, u, y)[rows, cols]
            w, k = _curvature(scenario, objective, u, y)
        F = np.concatenate([grad - G.T @ mult, G @ y[rows, cols] - 1])
        curv = k[rows]
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(curv))):
            return None
        if np.max(np.abs(F)) <= settings.polish_tol:
            lam = np.zeros((scenario.num_servers, scenario.num_resources))
            for a, (i, r) in enumerate(active):
                lam[i, r] = mult[a]
            return y, lam
        ws = w[rows, cols]
        H = -curv[:, None] * np.outer(ws, ws) * same
        J = np.block([[H, -G.T], [G, np.zeros((A, A))]])
        # minimum-norm step: J is singular when x* is not unique
        try:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        y[rows, cols] += step[:S]
        mult += step[S:]
    return None


def _pairs(mask: npt.NDArray[np.bool_]) -> list[Cell]:
    return [(int(a), int(b)) for a, b in zip(*np.nonzero(mask))]


def polish(
    scenario: Scenario,
    objective: ObjectiveSpec,
    x: npt.ArrayLike,
    settings: FluidSettings | None = None,
) -> Matrix:
    """
    Refine an approximate optimum x to machine precision.

    The active set (positive cells, booked constraints) is read off x
    and its equality KKT system solved by Newton steps.  The guess is
    then corrected until every sign condition holds: cells that went
    negative leave, constraints with a negative multiplier are
    released, overbooked constraints join, and zero cells with a
    positive reduced gradient join.  x comes back unchanged when the
    refinement fails.
    """
    settings = settings or FluidSettings()
    x = np.asarray(x, dtype=float)
    u = _objective_weights(scenario, objective)
    tol = settings.polish_tol
    cells = _pairs(x > settings.zero_tol)
    booked = utilization(scenario, x)
    active = _pairs(booked >= 1 - settings.polish_active_tol)
    start = x
    for _ in range(settings.polish_rounds):
        # a constraint can only be tight on a server that runs something
        active = [c for c in active if any(j == c[0] for _, j in cells)]
        refined = _newton(scenario, objective, u, start, cells, active, settings)
        if refined is None:
            # near-booked constraints may be inconsistent with the tight ones
            loose = [c for c in active if booked[c] < 1 - settings.active_tol]
            if loose:
                active = [c for c in active if c not in loose]
                continue
            logger.debug(
                "polish: no convergence (%d cells, %d constraints)",
                len(cells),
                len(active),
            )
            return x
        y, lam = refined
        start = np.maximum(y, 0.0)

        negative = [c for c in cells if y[c] < -tol]
        if negative:
            cells = [c for c in cells if c not in negative]
            continue
        released = [c for c in active if lam[c] < -tol]
        if released:
            active = [c for c in active if c not in released]
            continue
        util = utilization(scenario, y)
        over = [c for c in _pairs(util > 1 + tol) if c not in active]
        if over:
            active += over
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            reduced = _gradient(scenario, objective, u, y) - np.einsum(
                "ir,nir->ni", lam, scenario.normalized
            )
        entering = [
            c for c in _pairs(scenario.allowed & (reduced > tol)) if c not in cells
        ]
        if entering:
            cells += entering
            for _, i in entering:
                if not any(c[0] == i for c in active):
                    active.append((i, int(np.argmax(util[i]))))
            continue
        return start
    logger.debug("polish: active set did not settle")
    return x


def solve(
    scenario: Scenario,
    objective: ObjectiveSpec,
    settings: FluidSettings | None = None,
) -> FluidSolution:
    settings = settings or FluidSettings()
    check_valid(scenario)
    objective.validate()
    u = _objective_weights(scenario, objective)

    if objective.g == G_MAXMIN:
        x = _WaterFill(scenario, u, settings).solve()
        x = _cleanup(scenario, x, settings.zero_tol)
        util = utilization(scenario, x)
        return FluidSolution(
            objective,
            x,
            _objective_value(scenario, objective, u, x),
            None,
            None,
            infeasibility=float(max(0.0, util.max() - 1)),
            status="optimal",
        )

    x_raw, status = _solve_convex(scenario, objective, u, settings)
    x = _cleanup(scenario, x_raw, settings.zero_tol)

    log_mode = objective.mode is ObjectiveMode.U_PF or (
        objective.mode is ObjectiveMode.PF_A and objective.a >= 1
    )
    if log_mode:
        measure = x.sum(axis=1) if objective.mode is ObjectiveMode.PF_A else _u_scores(
            scenario, u, x
        )
        low = np.flatnonzero(measure <= settings.log_floor)
        starved = [scenario.frameworks[n].id for n in low]
        if starved:
            raise FluidInfeasibleError(f"frameworks {starved} held at zero")

    if settings.polish:
        x = _cleanup(scenario, polish(scenario, objective, x, settings))

    grad = _gradient(scenario, objective, u, x)
    lam, nu, stationarity, slackness = _multipliers(scenario, x, grad, settings)
    infeasibility = float(max(0.0, utilization(scenario, x).max() - 1))
    solution = FluidSolution(
        objective,
        x,
        _objective_value(scenario, objective, u, x),
        lam,
        nu,
        stationarity,
        slackness,
        infeasibility,
        status,
    )
    logger.info(
        "%s solve: totals %s, kkt residual %.3g",
        objective.mode.value,
        np.round(solution.totals(), 6).tolist(),
        solution.kkt_residual,
    )
    if solution.kkt_residual > settings.kkt_tol:
        raise FluidConvergenceError(
            f"KKT residual {solution.kkt_residual:.3g} > {settings.kkt_tol:g}",
            solution.kkt_residual,
        )
    return solution


################ checks


def check_full_booking(
    scenario: Scenario,
    solution: "FluidSolution | npt.ArrayLike",
    tol: float = 1e-6,
) -> list[bool]:
    """
    per server: some resource utilized to within tol of capacity
    """
    util = utilization(scenario, _allocation(solution))
    return [bool(np.any(util[i] >= 1 - tol)) for i in range(scenario.num_servers)]


def _totals(x: npt.ArrayLike) -> Vector:
    arr = np.asarray(x, dtype=float)
    return arr.sum(axis=1) if arr.ndim == 2 else arr


def prop_gap(
    scenario: Scenario,
    x: npt.ArrayLike,
    x_star: "FluidSolution | npt.ArrayLike",
    a: float,
    phi: npt.ArrayLike | None = None,
) -> float:
    """
    sum_n phi_n (x_n - x*_n) / (x*_n)^a; allocations or per-framework totals
    """
    xn = _totals(x)
    xs = _totals(_allocation(x_star))
    if np.any(xs <= 0):
        raise FluidError("x* has a zero total; gap undefined")
    weights = scenario.priority if phi is None else np.asarray(phi, dtype=float)
    return float(np.sum(weights * (xn - xs) / np.power(xs, a)))


def prop_gap_u(U: npt.ArrayLike, U_star: npt.ArrayLike, phi: npt.ArrayLike) -> float:
    """
    sum_n phi_n (U_n - U*_n) / U*_n
    """
    u, us = np.asarray(U, dtype=float), np.asarray(U_star, dtype=float)
    if np.any(us <= 0):
        raise FluidError("U* has a zero entry; gap undefined")
    return float(np.sum(np.asarray(phi, dtype=float) * (u - us) / us))


@dataclass
class UmmfReport:
    holds: bool
    # (l, m, server) ids: l has the higher score yet runs on a
    # booked server shared with m
    violations: list[tuple[int, int, int]]


def check_ummf(
    scenario: Scenario,
    x: npt.ArrayLike,
    u: npt.ArrayLike,
    phi: npt.ArrayLike | None = None,
    tol: float = 1e-6,
) -> UmmfReport:
    arr = np.asarray(x, dtype=float)
    weights = np.asarray(u, dtype=float)
    priority = scenario.priority if phi is None else np.asarray(phi, dtype=float)
    scores = (weights * arr).sum(axis=1) / priority
    util = utilization(scenario, arr)
    violations = []
    for i in range(scenario.num_servers):
        if not np.any(util[i] >= 1 - tol):
            continue
        for ell in range(scenario.num_frameworks):
            if arr[ell, i] <= tol:
                continue
            for m in range(scenario.num_frameworks):
                if arr[m, i] > tol and scores[ell] > scores[m] + tol:
                    violations.append(
                        (
                            scenario.frameworks[ell].id,
                            scenario.frameworks[m].id,
                            scenario.servers[i].id,
                        )
                    )
    return UmmfReport(not violations, violations)


@dataclass
class UniquenessReport:
    holds: bool
    # (framework id, framework id, shared server id)
    conflicts: list[tuple[int, int, int]]


def check_uniqueness_condition(
    scenario: Scenario, u: npt.ArrayLike
) -> UniquenessReport:
    """
    frameworks sharing a server must agree on demand, allowed
    servers and weights for the U-MMF allocation to be unique
    """
    weights = np.asarray(u, dtype=float)
    conflicts = []
    for i in range(scenario.num_servers):
        users = scenario.users(i)
        for k, m in enumerate(users):
            for ell in users[k + 1 :]:
                same = (
                    np.array_equal(scenario.demand[m], scenario.demand[ell])
                    and np.array_equal(scenario.allowed[m], scenario.allowed[ell])
                    and np.allclose(weights[m], weights[ell])
                )
                if not same:
                    conflicts.append(
                        (
                            scenario.frameworks[m].id,
                            scenario.frameworks[ell].id,
                            scenario.servers[i].id,
                        )
                    )
    return UniquenessReport(not conflicts, conflicts)


def sample_feasible(scenario: Scenario, count: int, seed: int) -> list[Matrix]:
    """
    random feasible allocations: a random non-negative direction,
    scaled to the polytope boundary, then shrunk by uniform(0,1)
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        direction = rng.random(scenario.allowed.shape) * scenario.allowed
        load = utilization(scenario, direction)
        t = float(np.min(1.0 / load[load > 0]))
        samples.append(direction * t * rng.random())
    return samples


def relabeled_totals_gap(
    scenario: Scenario,
    objective: ObjectiveSpec,
    settings: FluidSettings | None = None,
) -> float:
    """
    solve again with frameworks and servers in reverse order;
    largest difference in per-framework totals (matched by id)
    """
    N, I = scenario.num_frameworks, scenario.num_servers
    f_order = list(reversed(range(N)))
    s_order = list(reversed(range(I)))
    relabeled = scenario.permuted(f_order, s_order)
    criterion = objective.criterion
    if criterion.kind is CriterionKind.GENERIC and criterion.weights is not None:
        w = np.asarray(criterion.weights)[np.ix_(f_order, s_order)]
        criterion = CriterionSpec(criterion.kind, tuple(map(tuple, w.tolist())))
    other = ObjectiveSpec(objective.mode, objective.a, objective.g, criterion)

    first = solve(scenario, objective, settings).totals()
    second = solve(relabeled, other, settings).totals()
    by_id = {f.id: second[k] for k, f in enumerate(relabeled.frameworks)}
    return float(
        max(abs(first[n] - by_id[f.id]) for n, f in enumerate(scenario.frameworks))
    )


def parse_objective(
    mode: str,
    a: float = 1.0,
    g: str = G_LOG1P,
    criterion: CriterionSpec | None = None,
) -> ObjectiveSpec:
    try:
        kind = ObjectiveMode(mode.lower())
    except ValueError:
        names = ", ".join(m.value for m in ObjectiveMode)
        raise FluidError(f"unknown objective {mode!r} (expected one of {names})")
    spec = ObjectiveSpec(kind, a, g, criterion or CriterionSpec(CriterionKind.DRF))
    spec.validate()
    return spec


