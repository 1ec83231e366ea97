"""
Exhaustive integer max-min oracle for tiny instances.
"""

import logging
import math

import numpy as np
import numpy.typing as npt

from fairsched.fluid import FluidError
from fairsched.scenario import Scenario, check_valid

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 1_000_000

# decimals kept when comparing score vectors
SCORE_DECIMALS = 9


class EnumerationLimitError(FluidError):
    pass


def cell_bounds(scenario: Scenario) -> npt.NDArray[np.int64]:
    """
    [n,i]: most tasks of framework n server i could hold alone
    (0 where delta[n,i] = 0)
    """
    N, I = scenario.num_frameworks, scenario.num_servers
    bounds = np.zeros((N, I), dtype=np.int64)
    for n in range(N):
        wanted = scenario.demand[n] > 0
        for i in range(I):
            if scenario.allowed[n, i]:
                ratio = scenario.capacity[i, wanted] / scenario.demand[n, wanted]
                bounds[n, i] = int(math.floor(float(ratio.min()) + 1e-9))
    return bounds


def brute_force_mmf(
    scenario: Scenario,
    u: npt.ArrayLike,
    phi: npt.ArrayLike | None = None,
    limit: int = ENUMERATION_LIMIT,
) -> npt.NDArray[np.int64]:
    """
    feasible integer allocation maximizing the ascending score vector
    U lexicographically; ties go to more total tasks, then to the
    lexicographically smallest x (row-major).
    """
    check_valid(scenario)
    N, I = scenario.num_frameworks, scenario.num_servers
    weights = np.asarray(u, dtype=float)
    priority = scenario.priority if phi is None else np.asarray(phi, dtype=float)

    bounds = cell_bounds(scenario).ravel()
    points = math.prod(int(b) + 1 for b in bounds)
    if points > limit:
        raise EnumerationLimitError(
            f"{points} allocations to enumerate (limit {limit})"
        )
    logger.debug("enumerating %d allocations", points)

    # row-major cell order, lexicographic point order
    axes = [np.arange(int(b) + 1) for b in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, N, I)

    usage = np.einsum("pni,nr->pir", grid.astype(float), scenario.demand)
    feasible = np.all(usage <= scenario.capacity + 1e-9, axis=(1, 2))
    grid = grid[feasible]

    scores = np.einsum("pni,ni->pn", grid.astype(float), weights) / priority
    ranked = np.round(np.sort(scores, axis=1), SCORE_DECIMALS)
    totals = grid.sum(axis=(1, 2))

    # np.lexsort: last key is primary
    keys = [np.arange(len(grid)), -totals] + [-ranked[:, k] for k in reversed(range(N))]
    best = int(np.lexsort(keys)[0])
    return np.asarray(grid[best], dtype=np.int64)
