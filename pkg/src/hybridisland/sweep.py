"""Batch runs over scenario files with a case-by-event summary matrix."""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

from tqdm import tqdm

from hybridisland.errors import InvalidArgumentError
from hybridisland.formats.csv_tables import SweepCsvOutput
from hybridisland.formats.report import format_matrix
from hybridisland.formats.scenario_yaml import ScenarioYamlInput, bundled_scenarios
from hybridisland.model.scenario import RunReport
from hybridisland.pipeline import run_pipeline

logger = logging.getLogger(__name__)

SWEEP_CSV = "sweep.csv"
SWEEP_TABLE = "sweep.txt"


def run_file(path: Path, overrides: Sequence[str] = ()) -> RunReport:
    scenario = ScenarioYamlInput(input_file=path, overrides=overrides).get_scenario()
    return run_pipeline(scenario, drain=False).report


def _reports(
    paths: Sequence[Path], overrides: Tuple[str, ...], jobs: int
) -> Iterator[RunReport]:
    if jobs == 1:
        for path in paths:
            yield run_file(path, overrides)
        return
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        # map() yields in submission order.
        yield from executor.map(run_file, paths, itertools.repeat(overrides))


def run_sweep(
    paths: Optional[Sequence[Path]] = None,
    overrides: Sequence[str] = (),
    jobs: int = 1,
    out_dir: Optional[Path] = None,
) -> List[RunReport]:
    """Run every scenario file and collect the reports in input order.

    With ``out_dir`` the sweep CSV grows by one row per finished scenario and
    the text matrix is written once all scenarios succeeded. The first
    failing scenario aborts the sweep with its exception.
    """
    if jobs < 1:
        raise InvalidArgumentError(f"jobs must be >= 1, got {jobs}.")
    paths = list(paths) if paths is not None else bundled_scenarios()
    csv_output = SweepCsvOutput(out_dir / SWEEP_CSV) if out_dir is not None else None
    reports: List[RunReport] = []
    logger.info(f"Sweeping {len(paths)} scenarios with {jobs} job(s).")
    progress = tqdm(_reports(paths, tuple(overrides), jobs), total=len(paths), unit="run")
    try:
        for report in progress:
            reports.append(report)
            if csv_output is not None:
                csv_output.append(report)
    finally:
        progress.close()
    if out_dir is not None:
        (out_dir / SWEEP_TABLE).write_text(format_matrix(reports) + "\n")
    islanding = sum(report.is_islanding for report in reports)
    logger.info(f"Sweep done: {islanding} of {len(reports)} runs flagged islanding.")
    return reports

