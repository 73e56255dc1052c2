import logging
from argparse import ArgumentParser, Namespace
from dataclasses import replace
from pathlib import Path
from typing import List

from hybridisland.cli.registry import Command, cli_register
from hybridisland.formats.csv_tables import (
    FLOAT_FORMAT,
    EstimatesCsvOutput,
    PowerFlowCsvOutput,
    SeriesCsvOutput,
    SweepCsvOutput,
    TimelineCsvOutput,
    WaveformCsvInput,
    WaveformCsvOutput,
    report_frame,
)
from hybridisland.formats.network_table import (
    NetworkTableInput,
    format_power_flow,
    format_snapshots,
)
from hybridisland.formats.report import format_matrix, format_report
from hybridisland.formats.scenario_yaml import (
    DEFAULTS_FILE,
    NETWORK_FILE,
    ScenarioYamlInput,
)
from hybridisland.gridsim.powerflow import solve_power_flow
from hybridisland.harmonic_ekf import HarmonicTracker
from hybridisland.measures import arcv_track
from hybridisland.pipeline import run_pipeline
from hybridisland.sweep import run_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NONCONVERGENCE = 3
EXIT_ISLANDING = 10


def _add_config_arguments(parser: ArgumentParser) -> None:
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a scenario key, e.g. 'thresholds.arcv_min=2'. Repeatable.",
    )
    parser.add_argument("--seed", type=int, help="Noise seed.")
    parser.add_argument("--monitor-bus", type=int, help="Monitored bus id.")


def _overrides(args: Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.monitor_bus is not None:
        overrides.append(f"monitor_bus={args.monitor_bus}")
    return overrides


def _add_format_argument(parser: ArgumentParser, default: str) -> None:
    parser.add_argument(
        "--format",
        choices=["csv", "text"],
        default=default,
        help=f"Report format (default: {default}).",
    )


@cli_register(name="run")
class RunCommand(Command):
    """Simulate one scenario with the detector in the loop and write its artifacts.

    Exits with 10 when islanding is confirmed, 0 otherwise.
    """

    help = "Run one scenario."

    @staticmethod
    def add_cli_arguments(parser: ArgumentParser) -> None:
        parser.add_argument(
            "--scenario", type=Path, required=True, help="Scenario YAML file."
        )
        parser.add_argument(
            "--out", type=Path, default=Path("out"), help="Output directory."
        )
        _add_config_arguments(parser)
        _add_format_argument(parser, default="text")

    def execute(self, args: Namespace) -> int:
        scenario = ScenarioYamlInput(
            input_file=args.scenario, overrides=_overrides(args)
        ).get_scenario()
        outcome = run_pipeline(scenario)
        out: Path = args.out
        report_file = out / ("report.csv" if args.format == "csv" else "report.txt")
        artifacts = [
            out / "waveform.csv",
            out / "rms.csv",
            out / "arcv.csv",
            out / "estimates.csv",
            out / "timeline.csv",
            out / "powerflow.txt",
            report_file,
        ]
        WaveformCsvOutput(artifacts[0]).save(outcome.result.waveform)
        SeriesCsvOutput(artifacts[1]).save_rms(outcome.rms)
        SeriesCsvOutput(artifacts[2]).save_arcv(
            arcv_track(outcome.rms, window=scenario.timing.arcv_window)
        )
        EstimatesCsvOutput(
            artifacts[3], amplitude_scale=scenario.estimator.amplitude_scale
        ).save(outcome.estimates)
        TimelineCsvOutput(artifacts[4]).save(outcome.report.timeline)
        artifacts[5].write_text(
            format_snapshots(scenario.network, outcome.result.snapshots) + "\n"
        )
        report = replace(outcome.report, artifacts=artifacts)
        if args.format == "csv":
            SweepCsvOutput(report_file).append(report)
        else:
            report_file.write_text(format_report(report) + "\n")
        print(format_report(report))
        return EXIT_ISLANDING if report.is_islanding else EXIT_OK


@cli_register(name="sweep")
class SweepCommand(Command):
    """Run the bundled 4 cases x 4 events (or the given scenarios) and tabulate them."""

    help = "Run a batch of scenarios."

    @staticmethod
    def add_cli_arguments(parser: ArgumentParser) -> None:
        parser.add_argument(
            "--scenario",
            dest="scenarios",
            type=Path,
            action="append",
            help="Scenario YAML file. Repeatable; defaults to the bundled scenarios.",
        )
        parser.add_argument(
            "--out",
            type=Path,
            help="Directory for sweep.csv and sweep.txt.",
        )
        parser.add_argument(
            "--jobs", type=int, default=1, help="Worker processes (default: 1)."
        )
        _add_config_arguments(parser)
        _add_format_argument(parser, default="text")

    def execute(self, args: Namespace) -> int:
        reports = run_sweep(
            paths=args.scenarios,
            overrides=_overrides(args),
            jobs=args.jobs,
            out_dir=args.out,
        )
        if args.format == "csv":
            frame = report_frame(reports)
            print(frame.to_csv(index=False, float_format=FLOAT_FORMAT), end="")
        else:
            print(format_matrix(reports))
        return EXIT_OK


@cli_register(name="estimate")
class EstimateCommand(Command):
    """Track the harmonic content of a recorded waveform.

    The input is a two-column CSV (time_s, value_pu) with uniform spacing; the
    estimator runs at the file's sampling interval.
    """

    help = "Run the harmonic estimator on a waveform CSV."

    @staticmethod
    def add_cli_arguments(parser: ArgumentParser) -> None:
        parser.add_argument(
            "--input", type=Path, required=True, help="Waveform CSV file."
        )
        parser.add_argument(
            "--out",
            type=Path,
            default=Path("estimates.csv"),
            help="Estimates CSV file (default: estimates.csv).",
        )
        parser.add_argument(
            "--scenario",
            type=Path,
            default=DEFAULTS_FILE,
            help="Scenario YAML file whose estimator section is used.",
        )
        parser.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override an estimator key, e.g. 'estimator.measurement_noise_r=1e-3'.",
        )

    def execute(self, args: Namespace) -> int:
        signal = WaveformCsvInput(input_file=args.input).get_signal()
        config = ScenarioYamlInput(
            input_file=args.scenario, overrides=args.overrides
        ).get_estimator()
        tracker = HarmonicTracker(replace(config, ts=signal.ts))
        logger.info(
            f"Estimating {len(signal)} samples at {1.0 / signal.ts:.1f} Hz "
            f"from '{args.input}'."
        )
        EstimatesCsvOutput(args.out, amplitude_scale=config.amplitude_scale).save(
            tracker.track(signal)
        )
        logger.info(f"Estimates written to '{args.out}'.")
        return EXIT_OK


@cli_register(name="powerflow")
class PowerFlowCommand(Command):
    """Solve the power flow of a network table.

    Exits with 3 when the Newton iteration does not converge.
    """

    help = "Solve the power flow of a network file."

    @staticmethod
    def add_cli_arguments(parser: ArgumentParser) -> None:
        parser.add_argument(
            "--network",
            type=Path,
            default=NETWORK_FILE,
            help="Network table file (default: the bundled nine-bus network).",
        )
        parser.add_argument(
            "--islanded",
            action="store_true",
            help="Solve with the grid breaker open.",
        )
        parser.add_argument(
            "--out", type=Path, help="Also write the result to this file."
        )
        _add_format_argument(parser, default="text")

    def execute(self, args: Namespace) -> int:
        net = NetworkTableInput(input_file=args.network).get_network()
        if args.islanded:
            net = net.with_breaker(False)
        solution = solve_power_flow(net)
        if args.format == "csv":
            PowerFlowCsvOutput(args.out or Path("powerflow.csv")).save(solution)
            return EXIT_OK
        text = format_power_flow(net, solution)
        print(text)
        if args.out is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(text + "\n")
        return EXIT_OK
