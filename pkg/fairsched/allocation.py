"""
AllocationState: the task matrix x[n,i] plus residual capacities.

Task mode (integer=True) counts whole tasks; fluid mode holds real
allocations.  Residuals are maintained incrementally and compared
against demands with an absolute tolerance of FIT_TOL.
"""

import logging
import math
from typing import Any

import numpy as np
import numpy.typing as npt

from fairsched.scenario import Matrix, Scenario, ScenarioError, Vector

logger = logging.getLogger(__name__)

FIT_TOL = 1e-9


class AllocationError(ScenarioError):
    """
    rejected change to an AllocationState (state left untouched)
    """


class OverbookError(AllocationError):
    pass


class PlacementError(AllocationError):
    """
    framework not allowed on server (delta[n,i] == 0)
    """


class IncrementError(AllocationError):
    """
    non-positive, non-finite or (in task mode) fractional count
    """


class AllocationState:
    def __init__(
        self,
        scenario: Scenario,
        integer: bool = True,
        x: npt.ArrayLike | None = None,
    ):
        self.scenario = scenario
        self.integer = integer
        shape = (scenario.num_frameworks, scenario.num_servers)
        self.x: npt.NDArray[Any] = np.zeros(shape, dtype=np.int64 if integer else float)
        self.residual: Matrix = np.array(scenario.capacity, dtype=float)
        if x is not None:
            self._load(x)

    def _load(self, x: npt.ArrayLike) -> None:
        arr = np.asarray(x, dtype=float)
        if arr.shape != self.x.shape:
            raise AllocationError(f"allocation shape {arr.shape} != {self.x.shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise IncrementError("allocation entries must be finite and >= 0")
        if self.integer and not np.all(arr == np.round(arr)):
            raise IncrementError("task mode allocation must be integral")
        if np.any((arr > 0) & ~self.scenario.allowed):
            raise PlacementError("allocation on a server outside allowed_servers")
        residual = self.scenario.capacity - arr.T @ self.scenario.demand
        if np.any(residual < -FIT_TOL):
            raise OverbookError("allocation overbooks a server")
        self.x = arr.astype(self.x.dtype)
        self.residual = np.maximum(residual, 0.0)

    @classmethod
    def from_matrix(cls, scenario: Scenario, x: npt.ArrayLike) -> "AllocationState":
        """
        task-mode state if x is integral, fluid otherwise
        """
        arr = np.asarray(x, dtype=float)
        return cls(scenario, integer=bool(np.all(arr == np.round(arr))), x=arr)

    def copy(self) -> "AllocationState":
        other = AllocationState.__new__(AllocationState)
        other.scenario = self.scenario
        other.integer = self.integer
        other.x = self.x.copy()
        other.residual = self.residual.copy()
        return other

    def totals(self) -> Vector:
        """x_n = sum over servers of x[n,i]"""
        return np.asarray(self.x.sum(axis=1), dtype=float)

    def fits(self, n: int, i: int, count: float = 1) -> bool:
        """
        True iff framework n is allowed on server i and `count` more
        tasks fit in the residual capacity.
        """
        if not self.scenario.allowed[n, i]:
            return False
        need = count * self.scenario.demand[n]
        return bool(np.all(self.residual[i] >= need - FIT_TOL))

    def fits_anywhere(self, n: int, count: float = 1) -> bool:
        return any(self.fits(n, i, count) for i in range(self.scenario.num_servers))

    def maximal(self) -> bool:
        """
        True when no framework fits on any server
        """
        return not any(
            self.fits_anywhere(n) for n in range(self.scenario.num_frameworks)
        )

    def apply_increment(self, n: int, i: int, count: float = 1) -> "AllocationState":
        """
        place `count` tasks of framework n on server i.
        raises (without modifying the state) on overbooking,
        placement outside delta, or a bad count.
        """
        numeric = isinstance(count, (int, float, np.integer, np.floating))
        if not (numeric and math.isfinite(count)):
            raise IncrementError(f"count {count!r} not a finite number")
        if count <= 0:
            raise IncrementError(f"count {count} must be positive")
        if self.integer and float(count) != round(float(count)):
            raise IncrementError(f"count {count} must be integral in task mode")
        if not self.scenario.allowed[n, i]:
            f, s = self.scenario.frameworks[n], self.scenario.servers[i]
            raise PlacementError(f"framework {f.id} not allowed on server {s.id}")

        need = count * self.scenario.demand[n]
        short = need - self.residual[i]
        if np.any(short > FIT_TOL):
            r = int(np.argmax(short))
            raise OverbookError(
                f"{count} tasks of framework {self.scenario.frameworks[n].id} "
                f"need {need[r]:g} of {self.scenario.resources[r]} "
                f"on server {self.scenario.servers[i].id}, "
                f"only {self.residual[i, r]:g} left"
            )

        self.x[n, i] += int(round(count)) if self.integer else count
        residual = self.residual[i] - need
        residual[(residual < 0) & (residual > -FIT_TOL)] = 0.0
        self.residual[i] = residual
        return self

    def release(self, n: int) -> None:
        """
        return all of framework n's tasks to the servers
        """
        self.residual += np.outer(self.x[n], self.scenario.demand[n])
        self.x[n, :] = 0

    def recompute_residual(self) -> Matrix:
        """
        residual from scratch: c[i,r] - sum_n x[n,i] d[n,r]
        """
        return np.asarray(
            self.scenario.capacity - self.x.T.astype(float) @ self.scenario.demand,
            dtype=float,
        )

    def utilization(self) -> Matrix:
        """
        [i,r]: sum over n of x[n,i] * B[n,i,r] (1.0 == fully booked)
        """
        return np.asarray(
            np.einsum("ni,nir->ir", self.x.astype(float), self.scenario.normalized),
            dtype=float,
        )

    def fully_booked(self, i: int, tol: float = FIT_TOL) -> set[int]:
        """
        R_i: resources of server i whose utilization is >= 1 - tol
        """
        util = self.utilization()[i]
        return {int(r) for r in np.flatnonzero(util >= 1 - tol)}

    def unused(self) -> Matrix:
        """
        unused capacity [i,r]; exact (recomputed) in task mode
        """
        if self.integer:
            return np.maximum(self.recompute_residual(), 0.0)
        return self.residual.copy()

    def efficiency(self) -> float:
        """
        weighted total tasks: sum over n of phi[n] * x_n
        """
        return float(self.scenario.priority @ self.totals())

    def __repr__(self) -> str:
        return f"AllocationState(x={self.x.tolist()})"
