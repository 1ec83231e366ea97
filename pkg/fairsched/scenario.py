"""
Problem instances for multi-resource, multi-server scheduling.

A Scenario holds servers (capacity c[i,r]), frameworks (per-task
demand d[n,r], priority phi[n], allowed servers delta[n,i]) and resource
names.  Scenarios are immutable; derived numpy arrays are computed once
and marked read-only.

Indices n, i, r used throughout the package are positions in the
Scenario's tuples; "id" fields are the labels from the scenario file.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence, TypeAlias

import numpy as np
import numpy.typing as npt

from fairsched.app import AppException

logger = logging.getLogger(__name__)

Vector: TypeAlias = npt.NDArray[np.float64]  # a ResourceVector, indexed by r
Matrix: TypeAlias = npt.NDArray[np.float64]

# validation codes
NONPOSITIVE_CAPACITY = "nonpositive_capacity"
NEGATIVE_DEMAND = "negative_demand"
ZERO_DEMAND = "zero_demand"
NONPOSITIVE_PRIORITY = "nonpositive_priority"
NO_ALLOWED_SERVER = "no_allowed_server"
UNKNOWN_SERVER = "unknown_server"
DIMENSION_MISMATCH = "dimension_mismatch"
DUPLICATE_ID = "duplicate_id"
NO_SERVERS = "no_servers"
NO_RESOURCES = "no_resources"


class ScenarioError(AppException):
    """
    Class for all exceptions about scenarios and allocations
    """


class ScenarioParseError(ScenarioError):
    """
    scenario text malformed, or missing required keys
    """


class ScenarioValidationError(ScenarioError):
    """
    scenario parsed, but breaks an invariant
    """

    def __init__(self, report: "ValidationReport"):
        super().__init__(report.render())
        self.report = report


@dataclass(frozen=True)
class ServerSpec:
    id: int
    capacity: tuple[float, ...]


@dataclass(frozen=True)
class FrameworkSpec:
    id: int
    demand: tuple[float, ...]
    priority: float = 1.0
    # None means every server in the scenario
    allowed_servers: frozenset[int] | None = None


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def add(self, code: str, message: str) -> None:
        self.violations.append(Violation(code, message))

    def render(self) -> str:
        if self.valid:
            return "scenario valid"
        lines = [f"{len(self.violations)} scenario violation(s):"]
        lines.extend(f"  {v.code}: {v.message}" for v in self.violations)
        return "\n".join(lines)


def _readonly(a: npt.NDArray[Any]) -> npt.NDArray[Any]:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Scenario:
    resources: tuple[str, ...]
    servers: tuple[ServerSpec, ...]
    frameworks: tuple[FrameworkSpec, ...]

    @property
    def num_frameworks(self) -> int:
        return len(self.frameworks)

    @property
    def num_servers(self) -> int:
        return len(self.servers)

    @property
    def num_resources(self) -> int:
        return len(self.resources)

    @cached_property
    def capacity(self) -> Matrix:
        """c[i,r]"""
        return _readonly(np.array([s.capacity for s in self.servers], dtype=float))

    @cached_property
    def demand(self) -> Matrix:
        """d[n,r]"""
        return _readonly(np.array([f.demand for f in self.frameworks], dtype=float))

    @cached_property
    def priority(self) -> Vector:
        """phi[n]"""
        return _readonly(np.array([f.priority for f in self.frameworks], dtype=float))

    @cached_property
    def allowed(self) -> npt.NDArray[np.bool_]:
        """delta[n,i] as booleans"""
        ids = [s.id for s in self.servers]
        rows = [
            [f.allowed_servers is None or sid in f.allowed_servers for sid in ids]
            for f in self.frameworks
        ]
        return _readonly(np.array(rows, dtype=bool).reshape(len(rows), len(ids)))

    @cached_property
    def pooled_capacity(self) -> Vector:
        """sum over servers of c[i,r]"""
        return _readonly(self.capacity.sum(axis=0))

    @cached_property
    def normalized(self) -> npt.NDArray[np.float64]:
        """B[n,i,r] = d[n,r] / c[i,r]"""
        return _readonly(self.demand[:, None, :] / self.capacity[None, :, :])

    def normalized_demand(self, n: int, i: int) -> Vector:
        """
        B[n,i,:], the demand of one task of framework n as
        fractions of server i's capacities.
        """
        return self.normalized[n, i]

    def framework_index(self, framework_id: int) -> int:
        for n, f in enumerate(self.frameworks):
            if f.id == framework_id:
                return n
        raise ScenarioError(f"unknown framework id {framework_id}")

    def server_index(self, server_id: int) -> int:
        for i, s in enumerate(self.servers):
            if s.id == server_id:
                return i
        raise ScenarioError(f"unknown server id {server_id}")

    def users(self, i: int) -> list[int]:
        """N_i: frameworks allowed on server i"""
        return [int(n) for n in np.flatnonzero(self.allowed[:, i])]

    def with_framework(self, spec: FrameworkSpec) -> "Scenario":
        if any(f.id == spec.id for f in self.frameworks):
            raise ScenarioError(f"duplicate framework id {spec.id}")
        return Scenario(self.resources, self.servers, self.frameworks + (spec,))

    def without_framework(self, framework_id: int) -> "Scenario":
        n = self.framework_index(framework_id)
        return Scenario(
            self.resources, self.servers, self.frameworks[:n] + self.frameworks[n + 1 :]
        )

    def permuted(
        self,
        framework_order: Sequence[int],
        server_order: Sequence[int],
        resource_order: Sequence[int] | None = None,
    ) -> "Scenario":
        """
        relabeled copy: position k of the result holds framework
        framework_order[k] (likewise servers, resources).  ids are kept.
        """
        if resource_order is None:
            resource_order = range(self.num_resources)

        def reorder(values: Sequence[float]) -> tuple[float, ...]:
            return tuple(values[r] for r in resource_order)

        servers = tuple(
            ServerSpec(self.servers[i].id, reorder(self.servers[i].capacity))
            for i in server_order
        )
        frameworks = tuple(
            FrameworkSpec(
                f.id, reorder(f.demand), f.priority, f.allowed_servers
            )
            for f in (self.frameworks[n] for n in framework_order)
        )
        resources = tuple(self.resources[r] for r in resource_order)
        return Scenario(resources, servers, frameworks)


def validate(scenario: Scenario) -> ValidationReport:
    """
    Check every Scenario invariant; violations are returned, not raised.
    """
    report = ValidationReport()
    nres = scenario.num_resources
    if nres == 0:
        report.add(NO_RESOURCES, "scenario has no resources")
    if not scenario.servers:
        report.add(NO_SERVERS, "scenario has no servers")

    server_ids = [s.id for s in scenario.servers]
    for dup in sorted({sid for sid in server_ids if server_ids.count(sid) > 1}):
        report.add(DUPLICATE_ID, f"server id {dup} used more than once")
    framework_ids = [f.id for f in scenario.frameworks]
    for dup in sorted({fid for fid in framework_ids if framework_ids.count(fid) > 1}):
        report.add(DUPLICATE_ID, f"framework id {dup} used more than once")

    for s in scenario.servers:
        if len(s.capacity) != nres:
            report.add(
                DIMENSION_MISMATCH,
                f"server {s.id} capacity has {len(s.capacity)} entries, expected {nres}",
            )
            continue
        for r, c in enumerate(s.capacity):
            if not (math.isfinite(c) and c > 0):
                report.add(
                    NONPOSITIVE_CAPACITY,
                    f"nonpositive capacity c[{s.id},{scenario.resources[r]}]={c}",
                )

    known = set(server_ids)
    for f in scenario.frameworks:
        if len(f.demand) != nres:
            report.add(
                DIMENSION_MISMATCH,
                f"framework {f.id} demand has {len(f.demand)} entries, expected {nres}",
            )
        else:
            for r, d in enumerate(f.demand):
                if not (math.isfinite(d) and d >= 0):
                    report.add(
                        NEGATIVE_DEMAND,
                        f"negative demand d[{f.id},{scenario.resources[r]}]={d}",
                    )
            if nres and all(d == 0 for d in f.demand):
                report.add(ZERO_DEMAND, f"framework {f.id} demands nothing")

        if not (math.isfinite(f.priority) and f.priority > 0):
            report.add(
                NONPOSITIVE_PRIORITY, f"framework {f.id} priority {f.priority} not > 0"
            )

        if f.allowed_servers is not None:
            for sid in sorted(f.allowed_servers - known):
                report.add(
                    UNKNOWN_SERVER, f"framework {f.id} allows unknown server {sid}"
                )
            if not f.allowed_servers & known:
                report.add(
                    NO_ALLOWED_SERVER, f"framework {f.id} has no allowed server"
                )
        elif not scenario.servers:
            report.add(NO_ALLOWED_SERVER, f"framework {f.id} has no allowed server")

    return report


def check_valid(scenario: Scenario) -> None:
    """
    raise ScenarioValidationError if scenario breaks any invariant
    """
    report = validate(scenario)
    if not report.valid:
        raise ScenarioValidationError(report)


################ JSON scenario files


def _number_list(value: Any, what: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ScenarioParseError(f"{what}: expected an array of numbers")
    return tuple(float(v) for v in value)


def _get(obj: Any, key: str, what: str) -> Any:
    if not isinstance(obj, dict):
        raise ScenarioParseError(f"{what}: expected an object")
    if key not in obj:
        raise ScenarioParseError(f"{what}: missing key {key!r}")
    return obj[key]


def _int_id(value: Any, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ScenarioParseError(f"{what}: id must be an integer")
    return value


def parse_scenario(obj: Any) -> Scenario:
    """
    build a Scenario from decoded JSON; does NOT validate
    """
    resources = _get(obj, "resources", "scenario")
    if not isinstance(resources, list) or not all(
        isinstance(r, str) for r in resources
    ):
        raise ScenarioParseError("resources: expected an array of names")

    servers_in = _get(obj, "servers", "scenario")
    frameworks_in = _get(obj, "frameworks", "scenario")
    if not isinstance(servers_in, list) or not isinstance(frameworks_in, list):
        raise ScenarioParseError("servers and frameworks must be arrays")

    servers = []
    for k, s in enumerate(servers_in):
        what = f"servers[{k}]"
        servers.append(
            ServerSpec(
                id=_int_id(_get(s, "id", what), what),
                capacity=_number_list(_get(s, "capacity", what), what),
            )
        )

    frameworks = []
    for k, f in enumerate(frameworks_in):
        what = f"frameworks[{k}]"
        priority = f.get("priority", 1.0) if isinstance(f, dict) else None
        if not isinstance(priority, (int, float)) or isinstance(priority, bool):
            raise ScenarioParseError(f"{what}: priority must be a number")
        allowed = f.get("allowed_servers") if isinstance(f, dict) else None
        if allowed is not None:
            if not isinstance(allowed, list):
                raise ScenarioParseError(f"{what}: allowed_servers must be an array")
            allowed = frozenset(_int_id(a, what) for a in allowed)
        frameworks.append(
            FrameworkSpec(
                id=_int_id(_get(f, "id", what), what),
                demand=_number_list(_get(f, "demand", what), what),
                priority=float(priority),
                allowed_servers=allowed,
            )
        )

    return Scenario(tuple(resources), tuple(servers), tuple(frameworks))


def loads_scenario(text: str, checked: bool = True) -> Scenario:
    """
    parse (and unless checked=False, validate) scenario JSON text
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"invalid JSON: {e}") from e
    scenario = parse_scenario(obj)
    if checked:
        check_valid(scenario)
    return scenario


def load_scenario(path: str, checked: bool = True) -> Scenario:
    """
    read, parse and validate a scenario file
    """
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ScenarioParseError(f"{path}: {e}") from e
    scenario = loads_scenario(text, checked)
    logger.info(
        "loaded %s: %d frameworks, %d servers, %d resources",
        path,
        scenario.num_frameworks,
        scenario.num_servers,
        scenario.num_resources,
    )
    return scenario


def _plain(v: float) -> float | int:
    return int(v) if float(v).is_integer() else v


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    frameworks: list[dict[str, Any]] = []
    for f in scenario.frameworks:
        entry: dict[str, Any] = {
            "id": f.id,
            "demand": [_plain(d) for d in f.demand],
            "priority": _plain(f.priority),
        }
        if f.allowed_servers is not None:
            entry["allowed_servers"] = sorted(f.allowed_servers)
        frameworks.append(entry)
    return {
        "resources": list(scenario.resources),
        "servers": [
            {"id": s.id, "capacity": [_plain(c) for c in s.capacity]}
            for s in scenario.servers
        ],
        "frameworks": frameworks,
    }


def make_scenario(
    capacities: Iterable[Sequence[float]],
    demands: Iterable[Sequence[float]],
    priorities: Sequence[float] | None = None,
    allowed: Sequence[Sequence[int]] | None = None,
    resources: Sequence[str] | None = None,
) -> Scenario:
    """
    convenience constructor with ids 1..N / 1..I;
    allowed[n] lists the 1-based server ids framework n may use.
    """
    servers = tuple(
        ServerSpec(i + 1, tuple(float(c) for c in cap))
        for i, cap in enumerate(capacities)
    )
    demand_rows = [tuple(float(d) for d in dem) for dem in demands]
    if priorities is None:
        priorities = [1.0] * len(demand_rows)
    frameworks = tuple(
        FrameworkSpec(
            n + 1,
            dem,
            float(priorities[n]),
            None if allowed is None else frozenset(allowed[n]),
        )
        for n, dem in enumerate(demand_rows)
    )
    if resources is None:
        nres = len(servers[0].capacity) if servers else 0
        resources = [f"r{r + 1}" for r in range(nres)]
    return Scenario(tuple(resources), servers, frameworks)


def random_scenario(
    seed: int, frameworks: int, servers: int, resources: int
) -> Scenario:
    """
    random instance with every normalized demand B[n,i,r] > 0:
    integer demands in 1..10, capacities in 10..100, priorities 1..3.
    """
    rng = np.random.default_rng(seed)
    capacities = rng.integers(10, 101, size=(servers, resources))
    demands = rng.integers(1, 11, size=(frameworks, resources))
    priorities = rng.integers(1, 4, size=frameworks)
    return make_scenario(
        capacities.tolist(), demands.tolist(), priorities.astype(float).tolist()
    )
