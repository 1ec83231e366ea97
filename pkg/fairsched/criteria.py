"""
Fairness criteria: functions of (scenario, state, framework[, server])
that the progressive filling engine minimizes.

framework-level: GENERIC (U_n), DRF (M_n), PSDSF_GLOBAL (K_n), TSF
server-specific:  PSDSF_SERVER (K_n,j), RPSDSF (residual K_n,j)

All scores are computed from scratch on each call.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from fairsched.allocation import AllocationState
from fairsched.app import AppException
from fairsched.scenario import Matrix, Scenario, Vector

logger = logging.getLogger(__name__)

# rPS-DSF value for a server with a demanded resource exhausted
INELIGIBLE = math.inf


class CriterionError(AppException):
    """
    Class for all exceptions raised evaluating criteria
    """


class CriterionKind(Enum):
    GENERIC = "generic"
    DRF = "drf"
    PSDSF_GLOBAL = "psdsf"
    PSDSF_SERVER = "psdsf-server"
    RPSDSF = "rpsdsf"
    TSF = "tsf"

    @property
    def server_specific(self) -> bool:
        return self in (CriterionKind.PSDSF_SERVER, CriterionKind.RPSDSF)


@dataclass(frozen=True)
class CriterionSpec:
    kind: CriterionKind
    # u[n][i], GENERIC only; entries for disallowed servers are ignored
    weights: tuple[tuple[float, ...], ...] | None = None

    @property
    def server_specific(self) -> bool:
        return self.kind.server_specific

    def weight_matrix(self, scenario: Scenario) -> Matrix:
        """
        GENERIC weights as an [n,i] array, checked against the scenario
        """
        if self.kind is not CriterionKind.GENERIC:
            raise CriterionError(f"{self.kind.value} criterion has no explicit weights")
        if self.weights is None:
            raise CriterionError("generic criterion requires weights")
        u = np.array(self.weights, dtype=float)
        if u.shape != (scenario.num_frameworks, scenario.num_servers):
            raise CriterionError(
                f"generic weights shape {u.shape} != "
                f"{(scenario.num_frameworks, scenario.num_servers)}"
            )
        if np.any(scenario.allowed & ~(u > 0)):
            raise CriterionError("generic weights must be > 0 on allowed servers")
        return np.where(scenario.allowed, u, 0.0)


@dataclass(frozen=True)
class Score:
    value: float
    framework: int
    server: int | None = None


def parse_criterion(
    name: str, weights: tuple[tuple[float, ...], ...] | None = None
) -> CriterionSpec:
    """
    criterion by its config/CLI name:
    drf, psdsf, psdsf-server, rpsdsf, tsf, generic
    """
    try:
        kind = CriterionKind(name.lower())
    except ValueError:
        names = ", ".join(k.value for k in CriterionKind)
        raise CriterionError(f"unknown criterion {name!r} (expected one of {names})")
    return CriterionSpec(kind, weights)


def _check_allowed(scenario: Scenario, n: int, j: int) -> None:
    if not scenario.allowed[n, j]:
        raise CriterionError(
            f"framework {scenario.frameworks[n].id} "
            f"not allowed on server {scenario.servers[j].id}"
        )


def _x_n(state: AllocationState, n: int) -> float:
    return float(state.x[n].sum())


def score_generic(
    scenario: Scenario, state: AllocationState, spec: CriterionSpec, n: int
) -> Score:
    """
    U_n = (1/phi_n) sum_i u[n,i] x[n,i]
    """
    u = spec.weight_matrix(scenario)
    value = float(u[n] @ state.x[n].astype(float)) / scenario.priority[n]
    return Score(value, n)


def score_drf(scenario: Scenario, state: AllocationState, n: int) -> Score:
    """
    M_n: dominant share against pooled cluster capacity
    """
    share = float(np.max(scenario.demand[n] / scenario.pooled_capacity))
    return Score(_x_n(state, n) * share / scenario.priority[n], n)


def dominant_index(scenario: Scenario, n: int, j: int) -> int:
    """
    rho(n,j): argmax over r of B[n,j,r] (lowest r on ties)
    """
    _check_allowed(scenario, n, j)
    return int(np.argmax(scenario.normalized[n, j]))


def score_psdsf_server(
    scenario: Scenario, state: AllocationState, n: int, j: int
) -> Score:
    """
    K_n,j = B[n,j,rho(n,j)] x_n / phi_n
    """
    rho = dominant_index(scenario, n, j)
    b = float(scenario.normalized[n, j, rho])
    return Score(_x_n(state, n) / scenario.priority[n] * b, n, j)


def score_psdsf_global(scenario: Scenario, state: AllocationState, n: int) -> Score:
    """
    K_n = sum over allowed servers of K_n,i
    """
    k = float(np.max(scenario.normalized[n], axis=1) @ scenario.allowed[n])
    return Score(_x_n(state, n) / scenario.priority[n] * k, n)


def score_rpsdsf(scenario: Scenario, state: AllocationState, n: int, j: int) -> Score:
    """
    K_n,j with server j's residual capacity as the denominator;
    INELIGIBLE when a demanded resource on j is exhausted.
    """
    _check_allowed(scenario, n, j)
    demand = scenario.demand[n]
    wanted = demand > 0
    residual = state.residual[j][wanted]
    if np.any(residual <= 0):
        return Score(INELIGIBLE, n, j)
    ratio = float(np.max(demand[wanted] / residual))
    return Score(_x_n(state, n) / scenario.priority[n] * ratio, n, j)


def task_capacity(scenario: Scenario, n: int) -> float:
    """
    T_n: tasks framework n could run (fluid) given its allowed
    servers to itself; resources it doesn't demand are ignored.
    """
    demand = scenario.demand[n]
    wanted = demand > 0
    per_server = np.min(scenario.capacity[:, wanted] / demand[wanted], axis=1)
    return float(per_server @ scenario.allowed[n])


def score_tsf(scenario: Scenario, state: AllocationState, n: int) -> Score:
    """
    task share: x_n / (phi_n T_n)
    """
    return Score(
        _x_n(state, n) / (scenario.priority[n] * task_capacity(scenario, n)), n
    )


def framework_score(
    scenario: Scenario, state: AllocationState, spec: CriterionSpec, n: int
) -> float:
    kind = spec.kind
    if kind is CriterionKind.DRF:
        return score_drf(scenario, state, n).value
    if kind is CriterionKind.TSF:
        return score_tsf(scenario, state, n).value
    if kind is CriterionKind.PSDSF_GLOBAL:
        return score_psdsf_global(scenario, state, n).value
    if kind is CriterionKind.GENERIC:
        return score_generic(scenario, state, spec, n).value
    raise CriterionError(f"{kind.value} is a server-specific criterion")


def pair_score(
    scenario: Scenario, state: AllocationState, spec: CriterionSpec, n: int, j: int
) -> float:
    kind = spec.kind
    if kind is CriterionKind.PSDSF_SERVER:
        return score_psdsf_server(scenario, state, n, j).value
    if kind is CriterionKind.RPSDSF:
        return score_rpsdsf(scenario, state, n, j).value
    raise CriterionError(f"{kind.value} is not a server-specific criterion")


def criterion_weights(scenario: Scenario, spec: CriterionSpec) -> Matrix:
    """
    u[n,i] such that the criterion equals U_n = (1/phi_n) sum_i u x,
    zero on disallowed servers.  PSDSF_SERVER yields the per-server
    weights max_r B[n,i,r]; PSDSF_GLOBAL yields k_n on every server,
    so that U_n == K_n.
    """
    kind = spec.kind
    b_max = np.max(scenario.normalized, axis=2)  # [n,i]
    if kind is CriterionKind.GENERIC:
        return spec.weight_matrix(scenario)
    if kind is CriterionKind.DRF:
        share = np.max(scenario.demand / scenario.pooled_capacity, axis=1)
        u = np.repeat(share[:, None], scenario.num_servers, axis=1)
    elif kind is CriterionKind.PSDSF_SERVER:
        u = b_max.copy()
    elif kind is CriterionKind.PSDSF_GLOBAL:
        k: Vector = np.sum(b_max * scenario.allowed, axis=1)
        u = np.repeat(k[:, None], scenario.num_servers, axis=1)
    elif kind is CriterionKind.TSF:
        N = scenario.num_frameworks
        t = np.array([task_capacity(scenario, n) for n in range(N)])
        u = np.repeat((1.0 / t)[:, None], scenario.num_servers, axis=1)
    else:
        raise CriterionError(f"{kind.value} depends on the state; no static weights")
    return np.where(scenario.allowed, u, 0.0)
