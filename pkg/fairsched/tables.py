"""
CSV/JSON output for experiments and runs.

Numbers are written as integers when integral, otherwise as the
shortest decimal that round-trips; LF line endings, no timestamps,
so identical experiments give byte-identical files.
"""

import csv
import json
import logging
import os
from typing import Any, Callable, Sequence

from fairsched import __version__
from fairsched.experiment import ExperimentResult
from fairsched.filling import TraceStep
from fairsched.scenario import scenario_to_dict
from fairsched.stats import CI_SIGMAS, CellStats, PolicyStats

logger = logging.getLogger(__name__)

ALLOCATIONS_MEAN = "allocations-mean.csv"
ALLOCATIONS_STD = "allocations-std.csv"
UNUSED_MEAN = "unused-mean.csv"
UNUSED_STD = "unused-std.csv"
MANIFEST = "manifest.json"


def format_number(value: float) -> str:
    v = float(value)
    if v.is_integer():
        return str(int(v))  # also maps -0.0 to "0"
    return repr(v)


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("wrote %s (%d rows)", path, len(rows))


Pick = Callable[[CellStats], float]


def _allocation_rows(rows: Sequence[PolicyStats], pick: Pick) -> list[list[str]]:
    return [
        [row.label]
        + [format_number(pick(cell)) for cell in row.allocations.values()]
        + [format_number(pick(row.total))]
        for row in rows
    ]


def _unused_rows(rows: Sequence[PolicyStats], pick: Pick) -> list[list[str]]:
    return [
        [row.label] + [format_number(pick(cell)) for cell in row.unused.values()]
        for row in rows
    ]


def manifest(result: ExperimentResult) -> dict[str, Any]:
    config = result.config
    return {
        "tool": "fairsched",
        "version": __version__,
        "seed": config.base_seed,
        "ci": f"mean -/+ {CI_SIGMAS:g} std / sqrt(trials)",
        "std": "sample (n-1)",
        "policies": [
            {
                "label": e.label,
                "criterion": e.policy.criterion.kind.value,
                "server_policy": e.policy.server_policy.value,
                "epsilon": e.policy.epsilon,
                "trials": config.trials_for(e),
            }
            for e in config.entries
        ],
        "scenario": scenario_to_dict(result.scenario),
    }


def emit_tables(result: ExperimentResult, outdir: str) -> list[str]:
    """
    write the four tables and the manifest into outdir;
    returns the paths written
    """
    os.makedirs(outdir, exist_ok=True)
    table = result.table
    rows = [table[label] for label in table.labels()]

    alloc_header = ["scheduler"] + [
        f"({n},{i})" for n, i in table.allocation_columns()
    ] + ["total"]
    unused_header = ["scheduler"] + [f"({i},{r})" for i, r in table.unused_columns()]

    def mean(c: CellStats) -> float:
        return c.mean

    def std(c: CellStats) -> float:
        return c.std

    outputs = [
        (ALLOCATIONS_MEAN, alloc_header, _allocation_rows(rows, mean)),
        (ALLOCATIONS_STD, alloc_header, _allocation_rows(rows, std)),
        (UNUSED_MEAN, unused_header, _unused_rows(rows, mean)),
        (UNUSED_STD, unused_header, _unused_rows(rows, std)),
    ]
    paths = []
    for name, header, body in outputs:
        path = os.path.join(outdir, name)
        _write_csv(path, header, body)
        paths.append(path)

    path = os.path.join(outdir, MANIFEST)
    with open(path, "w", newline="\n") as f:
        json.dump(manifest(result), f, indent=2, sort_keys=True)
        f.write("\n")
    paths.append(path)
    return paths


def write_trace(path: str, trace: Sequence[TraceStep]) -> None:
    _write_csv(
        path,
        ["step", "framework_id", "server_id", "criterion_value"],
        [
            [str(s.step), str(s.framework_id), str(s.server_id), f"{s.score:.9g}"]
            for s in trace
        ],
    )
