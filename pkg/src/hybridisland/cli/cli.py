import logging
from argparse import ArgumentParser, RawTextHelpFormatter
from typing import Optional, Sequence

from hybridisland.cli.commands import EXIT_ERROR, EXIT_NONCONVERGENCE
from hybridisland.cli.registry import _REGISTRY
from hybridisland.errors import (
    DivergenceError,
    EmptySeriesError,
    InsufficientDataError,
    InvalidArgumentError,
    NetworkValidationError,
    PowerFlowConvergenceError,
    ScenarioError,
    StreamGapError,
)
from hybridisland.types import ParseError

logger = logging.getLogger(__name__)

INPUT_ERRORS = (
    ScenarioError,
    ParseError,
    InvalidArgumentError,
    NetworkValidationError,
    DivergenceError,
    StreamGapError,
    InsufficientDataError,
    EmptySeriesError,
    OSError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = ArgumentParser(
        prog="hybridisland",
        formatter_class=RawTextHelpFormatter,
        description="""\
Hybridisland detects islanding of inverter-based distributed generation.
A 5/4 inter-harmonic gate and an average-rate-of-change-of-voltage filter
flag candidate events; a commanded DG power shift confirms them.

Commands:
- run:       simulate one scenario of the nine-bus test grid with the detector in the loop
- sweep:     run the bundled 4 cases x 4 events and print a summary matrix
- estimate:  run the harmonic estimator on a recorded waveform CSV
- powerflow: solve the power flow of a network table

Exit codes: 0 success or no islanding, 2 invalid input or internal error,
3 power flow did not converge, 10 islanding confirmed.
""",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug messages."
    )
    subparsers = parser.add_subparsers(dest="command")
    for name, command_cls in sorted(_REGISTRY.commands.items()):
        command_parser = subparsers.add_parser(
            name=name,
            help=command_cls.help,
            description=command_cls.__doc__,
            formatter_class=RawTextHelpFormatter,
        )
        command_cls.add_cli_arguments(parser=command_parser)
    args = parser.parse_args(argv)

    package_logger = logging.getLogger("hybridisland")
    if not package_logger.handlers:
        package_logger.addHandler(logging.StreamHandler())
    package_logger.setLevel(logging.DEBUG if args.verbose else logging.INFO)

    if args.command is None:
        parser.print_help()
        return EXIT_ERROR

    command = _REGISTRY.commands[args.command]()
    try:
        return command.execute(args)
    except PowerFlowConvergenceError as ex:
        logger.error(
            f"Power flow did not converge after {ex.iterations} iterations "
            f"(largest mismatch {ex.max_mismatch:.3e} pu): {ex}"
        )
        return EXIT_NONCONVERGENCE
    except INPUT_ERRORS as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        return EXIT_ERROR
    except Exception as ex:
        logger.exception(f"Unexpected {type(ex).__name__}: {ex}")
        return EXIT_ERROR
