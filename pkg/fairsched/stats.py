"""
Cross-trial aggregates: mean, sample standard deviation (n-1) and
the two-sigma confidence interval mean -/+ 2 std / sqrt(n).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fairsched.allocation import AllocationState
from fairsched.app import AppException

logger = logging.getLogger(__name__)

CI_SIGMAS = 2.0


class StatsError(AppException):
    """
    too few samples, or mismatched runs
    """


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    ci_low: float
    ci_high: float


def confidence_interval(mean: float, std: float, count: int) -> tuple[float, float]:
    half = CI_SIGMAS * std / math.sqrt(count)
    return (mean - half, mean + half)


def stats(samples: Sequence[float]) -> Summary:
    if len(samples) < 2:
        raise StatsError(f"need at least 2 samples, got {len(samples)}")
    arr = np.asarray(samples, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1))
    low, high = confidence_interval(mean, std, len(arr))
    return Summary(mean, std, low, high)


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    count: int

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "CellStats":
        """
        like stats(), but a single (deterministic) run is allowed: std 0
        """
        if len(samples) == 0:
            raise StatsError("no samples")
        if len(samples) == 1:
            return cls(float(samples[0]), 0.0, 1)
        s = stats(samples)
        return cls(s.mean, s.std, len(samples))

    def ci(self) -> tuple[float, float]:
        return confidence_interval(self.mean, self.std, self.count)


AllocationKey = tuple[int, int]  # (framework id, server id)
UnusedKey = tuple[int, str]  # (server id, resource name)


@dataclass
class PolicyStats:
    """
    one StatsTable row: a policy's cells over its trials
    """

    label: str
    trials: int
    allocations: dict[AllocationKey, CellStats]
    unused: dict[UnusedKey, CellStats]
    total: CellStats

    @classmethod
    def from_states(
        cls, label: str, states: Sequence[AllocationState]
    ) -> "PolicyStats":
        if not states:
            raise StatsError(f"{label}: no runs")
        scenario = states[0].scenario
        if any(s.scenario != scenario for s in states):
            raise StatsError(f"{label}: runs over different scenarios")

        xs = np.stack([s.x.astype(float) for s in states])  # [trial,n,i]
        unused = np.stack([s.unused() for s in states])  # [trial,i,r]

        allocations = {
            (f.id, srv.id): CellStats.from_samples(xs[:, n, i].tolist())
            for n, f in enumerate(scenario.frameworks)
            for i, srv in enumerate(scenario.servers)
        }
        unused_cells = {
            (srv.id, res): CellStats.from_samples(unused[:, i, r].tolist())
            for i, srv in enumerate(scenario.servers)
            for r, res in enumerate(scenario.resources)
        }
        total = CellStats.from_samples([s.efficiency() for s in states])
        return cls(label, len(states), allocations, unused_cells, total)


@dataclass
class StatsTable:
    rows: dict[str, PolicyStats] = field(default_factory=dict)

    def add(self, row: PolicyStats) -> None:
        if row.label in self.rows:
            raise StatsError(f"duplicate row label {row.label!r}")
        self.rows[row.label] = row

    def extend(self, rows: Iterable[PolicyStats]) -> None:
        for row in rows:
            self.add(row)

    def __getitem__(self, label: str) -> PolicyStats:
        return self.rows[label]

    def labels(self) -> list[str]:
        return list(self.rows)

    def allocation_columns(self) -> list[AllocationKey]:
        """
        columns of the first row (all rows share one scenario)
        """
        for row in self.rows.values():
            return list(row.allocations)
        return []

    def unused_columns(self) -> list[UnusedKey]:
        for row in self.rows.values():
            return list(row.unused)
        return []
