"""
Experiments: a scenario plus a list of labeled policies, each run
either as a Monte Carlo over seeds (RRR) or once (deterministic).

Config file (JSON):
{
  "scenario": "s0.json",          # relative to the config file
  "seed": 20181106,
  "trials": 200,
  "output": "results/s0",         # optional
  "policies": [
    {"label": "DRF", "criterion": "drf", "server_policy": "rrr"},
    {"label": "PS-DSF", "criterion": "psdsf-server", "server_policy": "joint-min"}
  ]
}
"""

import importlib.resources
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any

from fairsched.app import AppException
from fairsched.criteria import parse_criterion
from fairsched.filling import PolicySpec, ServerPolicy, run
from fairsched.montecarlo import run_trials
from fairsched.rng import MASK64
from fairsched.scenario import Scenario, load_scenario
from fairsched.stats import PolicyStats, StatsTable

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20181106
DEFAULT_TRIALS = 200


class ExperimentError(AppException):
    """
    bad experiment configuration
    """


def bundled_scenario_path(name: str = "s0") -> str:
    return str(importlib.resources.files("fairsched") / "scenarios" / f"{name}.json")


@dataclass(frozen=True)
class PolicyEntry:
    label: str
    policy: PolicySpec

    @property
    def stochastic(self) -> bool:
        return self.policy.stochastic


@dataclass
class ExperimentConfig:
    scenario_path: str
    entries: list[PolicyEntry]
    trials: int = DEFAULT_TRIALS
    base_seed: int = DEFAULT_SEED
    output_dir: str | None = None

    def validate(self) -> None:
        labels = [e.label for e in self.entries]
        dups = sorted({x for x in labels if labels.count(x) > 1})
        if dups:
            raise ExperimentError(f"duplicate policy labels {dups}")
        if not self.entries:
            raise ExperimentError("no policies")
        if any(e.stochastic for e in self.entries) and self.trials < 2:
            raise ExperimentError(f"trials {self.trials} < 2 for RRR policies")
        if not 0 <= self.base_seed <= MASK64:
            raise ExperimentError(
                f"seed {self.base_seed} not a 64-bit unsigned integer"
            )
        for e in self.entries:
            e.policy.validate()

    def trials_for(self, entry: PolicyEntry) -> int:
        return self.trials if entry.stochastic else 1


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    scenario: Scenario
    table: StatsTable = field(default_factory=StatsTable)


def _policy(obj: Any) -> PolicyEntry:
    if not isinstance(obj, dict):
        raise ExperimentError(f"policy entry {obj!r} is not an object")
    try:
        label = str(obj["label"])
        criterion = parse_criterion(str(obj["criterion"]))
        server_policy = ServerPolicy(str(obj.get("server_policy", "rrr")))
        epsilon = float(obj.get("epsilon", 1))
    except KeyError as e:
        raise ExperimentError(f"policy entry missing {e}")
    except (TypeError, ValueError) as e:
        raise ExperimentError(f"policy entry {obj!r}: {e}")
    return PolicyEntry(label, PolicySpec(criterion, server_policy, epsilon))


def _integer(obj: dict[str, Any], key: str, default: int) -> int:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ExperimentError(f"{key} {value!r} is not an integer")
    return value


def load_experiment(path: str) -> ExperimentConfig:
    try:
        with open(path) as f:
            obj = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ExperimentError(f"{path}: {e}")
    if not isinstance(obj, dict) or "scenario" not in obj or "policies" not in obj:
        raise ExperimentError(f"{path}: needs 'scenario' and 'policies'")

    if not isinstance(obj["policies"], list):
        raise ExperimentError(f"{path}: 'policies' must be a list")

    scenario_path = str(obj["scenario"])
    if not os.path.isabs(scenario_path):
        base = os.path.dirname(os.path.abspath(path))
        scenario_path = os.path.join(base, scenario_path)
    config = ExperimentConfig(
        scenario_path,
        [_policy(p) for p in obj["policies"]],
        trials=_integer(obj, "trials", DEFAULT_TRIALS),
        base_seed=_integer(obj, "seed", DEFAULT_SEED),
        output_dir=obj.get("output"),
    )
    config.validate()
    return config


# (label, criterion, server policy) rows of the standard s0 comparison
COMPARISON_ROWS = [
    ("DRF", "drf", ServerPolicy.RRR),
    ("TSF", "tsf", ServerPolicy.RRR),
    ("RRR-PS-DSF", "psdsf-server", ServerPolicy.RRR),
    ("RRR-rPS-DSF", "rpsdsf", ServerPolicy.RRR),
    ("BF-DRF", "drf", ServerPolicy.BEST_FIT),
    ("PS-DSF", "psdsf-server", ServerPolicy.JOINT_MIN),
    ("rPS-DSF", "rpsdsf", ServerPolicy.JOINT_MIN),
]


def parse_policy(label: str, seed: int = 0) -> PolicySpec:
    """
    a row label ("DRF", "RRR-PS-DSF", "rPS-DSF", ...)
    or CRITERION/SERVER_POLICY ("tsf/best-fit")
    """
    for row_label, name, server_policy in COMPARISON_ROWS:
        if label.lower() == row_label.lower():
            return PolicySpec(parse_criterion(name), server_policy, seed=seed)
    if "/" not in label:
        labels = ", ".join(row[0] for row in COMPARISON_ROWS)
        raise ExperimentError(
            f"unknown policy {label!r} (one of {labels} or CRITERION/POLICY)"
        )
    name, _, server = label.partition("/")
    try:
        server_policy = ServerPolicy(server.lower())
    except ValueError:
        names = ", ".join(p.value for p in ServerPolicy)
        raise ExperimentError(f"unknown server policy {server!r} (one of {names})")
    policy = PolicySpec(parse_criterion(name), server_policy, seed=seed)
    policy.validate()
    return policy


def comparison_experiment(
    scenario_path: str | None = None,
    seed: int = DEFAULT_SEED,
    trials: int = DEFAULT_TRIALS,
    output_dir: str | None = None,
) -> ExperimentConfig:
    """
    the two-server, two-framework comparison on the bundled scenario
    """
    entries = [
        PolicyEntry(label, PolicySpec(parse_criterion(name), server_policy))
        for label, name, server_policy in COMPARISON_ROWS
    ]
    config = ExperimentConfig(
        scenario_path or bundled_scenario_path("s0"), entries, trials, seed, output_dir
    )
    config.validate()
    return config


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    config.validate()
    scenario = load_scenario(config.scenario_path)
    result = ExperimentResult(config, scenario)
    for entry in config.entries:
        if entry.stochastic:
            states = run_trials(
                scenario, entry.policy, config.trials, config.base_seed, workers
            )
        else:
            policy = entry.policy.with_seed(config.base_seed)
            states = [run(scenario, policy).final_state]
        row = PolicyStats.from_states(entry.label, states)
        result.table.add(row)
        logger.info(
            "%s: total %g over %d run(s)", entry.label, row.total.mean, row.trials
        )
    return result
