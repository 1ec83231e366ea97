"""
Fair scheduling simulator command line

python -mfairsched.scripts.schedsim COMMAND [ TARGET ] [ options ]

TARGET is a scenario file (default: the bundled two-server scenario),
an output directory (repro-paper, compare) or an experiment config (experiment).
"""

import argparse
import json
import logging
import sys
from typing import Callable, List, cast

from fairsched import filling
from fairsched.app import App
from fairsched.criteria import criterion_weights, parse_criterion
from fairsched.experiment import (
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    ExperimentConfig,
    ExperimentError,
    bundled_scenario_path,
    comparison_experiment,
    load_experiment,
    parse_policy,
    run_experiment,
)
from fairsched.fluid import (
    G_NAMES,
    ObjectiveMode,
    check_full_booking,
    parse_objective,
    solve,
)
from fairsched.montecarlo import MC_WORKERS, monte_carlo
from fairsched.path import results_dir
from fairsched.scenario import Scenario, load_scenario
from fairsched.scenario import validate as validate_scenario
from fairsched.tables import emit_tables, format_number, write_trace

logger = logging.getLogger("schedsim")

COMMANDS: List[str] = []

CommandMethod = Callable


def command(func: CommandMethod) -> CommandMethod:
    """decorator for SchedSim command methods"""
    COMMANDS.append(func.__name__.replace("_", "-"))
    return func


def _row(values: object) -> str:
    return " ".join(format_number(v) for v in cast(List[float], values))


class SchedSim(App):
    def define_options(self, ap: argparse.ArgumentParser) -> None:
        super().define_options(ap)
        ap.add_argument(
            "--policy",
            "-p",
            default="DRF",
            help="policy label (DRF, TSF, RRR-PS-DSF, RRR-rPS-DSF, BF-DRF, "
            "PS-DSF, rPS-DSF) or CRITERION/SERVER_POLICY (default: DRF)",
        )
        ap.add_argument(
            "--seed", "-s", type=int, default=DEFAULT_SEED, help="64-bit base seed"
        )
        ap.add_argument(
            "--trials",
            "-t",
            type=int,
            default=DEFAULT_TRIALS,
            help=f"Monte Carlo trials (default {DEFAULT_TRIALS})",
        )
        workers = MC_WORKERS()
        ap.add_argument(
            "--workers",
            "-W",
            type=int,
            default=workers,
            help=f"Monte Carlo worker processes (default {workers})",
        )
        ap.add_argument("--trace", metavar="FILE", help="run: write trace CSV")
        ap.add_argument(
            "--mode",
            choices=[m.value for m in ObjectiveMode],
            default=ObjectiveMode.PF_A.value,
            help="oracle objective (default pf)",
        )
        ap.add_argument("--a", type=float, default=1.0, help="oracle pf exponent")
        ap.add_argument("--g", choices=G_NAMES, default=G_NAMES[0], help="oracle mmf g")
        ap.add_argument(
            "--criterion",
            default="drf",
            help="oracle mmf/upf criterion weights (default drf)",
        )
        ap.add_argument("--json", action="store_true", help="oracle: print JSON")

        ap.add_argument(
            "command",
            type=str,
            choices=COMMANDS,
            nargs="?",
            default="help",
            help="Command",
        )
        ap.add_argument(
            "target", type=str, nargs="?", help="scenario, outdir or config"
        )

    def main_loop(self) -> None:
        assert self.args

        cmd = self.args.command or "help"
        self.get_command_func(cmd)()

    #### commands (in alphabetical order, docstring is help)

    @command
    def compare(self) -> None:
        """same as repro-paper"""
        self.repro_paper()

    @command
    def experiment(self) -> None:
        """run an experiment config, write tables"""
        assert self.args
        if not self.args.target:
            raise ExperimentError("need experiment config file")
        config = load_experiment(self.args.target)
        self._experiment(config, config.output_dir or results_dir("experiment"))

    @command
    def help(self) -> None:
        """give this output"""
        print("Commands (use --help for options):")
        for cmd in COMMANDS:
            descr = self.get_command_func(cmd).__doc__
            print(f"{cmd:16.16} {descr}")

    @command
    def montecarlo(self) -> None:
        """Monte Carlo of one policy: cell means, std, CI"""
        assert self.args
        scenario = self.get_scenario()
        policy = parse_policy(self.args.policy)
        table = monte_carlo(
            scenario,
            policy,
            self.args.trials,
            self.args.seed,
            label=self.args.policy,
            workers=self.args.workers,
        )
        row = table[self.args.policy]
        self.incr("trials", self.args.trials)
        self.gauge("efficiency", row.total.mean, labels=[("policy", self.args.policy)])

        print("cell mean std ci_low ci_high")
        cells = [(f"x{n},{i}", c) for (n, i), c in row.allocations.items()]
        cells += [(f"unused{i},{r}", c) for (i, r), c in row.unused.items()]
        cells.append(("total", row.total))
        for name, c in cells:
            low, high = c.ci()
            print(name, _row([c.mean, c.std, low, high]))

    @command
    def oracle(self) -> None:
        """fluid oracle solve"""
        assert self.args
        scenario = self.get_scenario()
        objective = parse_objective(
            self.args.mode,
            self.args.a,
            self.args.g,
            parse_criterion(self.args.criterion),
        )
        solution = solve(scenario, objective)
        self.incr("solves", labels=[("mode", objective.mode.value)])
        if self.args.json:
            print(json.dumps(solution.to_json(), indent=2))
            return
        for n, f in enumerate(scenario.frameworks):
            total = solution.totals()[n]
            cells = solution.x_star[n].tolist()
            print(f"framework {f.id}: total {total:.9g} x {cells}")
        print(f"objective {solution.objective_value:.9g}")
        print(f"kkt residual {solution.kkt_residual:.3g}")
        print(f"full booking {check_full_booking(scenario, solution)}")
        if objective.mode is not ObjectiveMode.PF_A:
            weights = criterion_weights(scenario, objective.criterion)
            print(f"weights {weights.tolist()}")

    @command
    def repro_paper(self) -> None:
        """seven-policy comparison on the bundled scenario, all tables"""
        assert self.args
        outdir = self.args.target or results_dir("repro-paper")
        config = comparison_experiment(seed=self.args.seed, trials=self.args.trials)
        self._experiment(config, outdir)

    @command
    def run(self) -> None:
        """one progressive filling run"""
        assert self.args
        scenario = self.get_scenario()
        policy = parse_policy(self.args.policy, seed=self.args.seed)
        result = filling.run(scenario, policy)
        labels = [("policy", self.args.policy)]
        self.incr("runs", labels=labels)
        self.gauge("efficiency", result.total_efficiency, labels=labels)

        state = result.final_state
        print(f"{len(result.trace)} steps")
        for n, f in enumerate(scenario.frameworks):
            print(f"x framework {f.id}: {_row(state.x[n].tolist())}")
        for i, s in enumerate(scenario.servers):
            print(f"unused server {s.id}: {_row(state.unused()[i].tolist())}")
        print(f"total {format_number(result.total_efficiency)}")
        if self.args.trace:
            write_trace(self.args.trace, result.trace)

    @command
    def validate(self) -> None:
        """check a scenario, list violations"""
        report = validate_scenario(self.get_scenario(checked=False))
        print(report.render())
        if not report.valid:
            sys.exit(1)

    #### utilities

    def _experiment(self, config: ExperimentConfig, outdir: str) -> None:
        assert self.args
        result = run_experiment(config, self.args.workers)
        for path in emit_tables(result, outdir):
            print(path)
        self.incr("experiments")

    def get_command_func(self, cmd: str) -> Callable[[], None]:
        """returns command function as a bound method"""
        meth = getattr(self, cmd.replace("-", "_"))
        assert callable(meth)
        return cast(Callable[[], None], meth)

    def get_scenario(self, checked: bool = True) -> Scenario:
        assert self.args
        path = self.args.target or bundled_scenario_path("s0")
        return load_scenario(path, checked=checked)


def main(argv: List[str] | None = None) -> None:
    app = SchedSim("schedsim", "Fair scheduling simulator")
    app.main(argv)


if __name__ == "__main__":
    main()
