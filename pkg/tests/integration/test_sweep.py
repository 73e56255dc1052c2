from pathlib import Path

import pandas as pd
import pytest

from hybridisland.errors import InvalidArgumentError, ScenarioError
from hybridisland.formats.scenario_yaml import CASES, bundled_scenarios
from hybridisland.model.detection import Verdict
from hybridisland.sweep import SWEEP_CSV, SWEEP_TABLE, run_sweep

from .integration_utils import scenario_file


def test_bundled_sweep(tmp_path: Path) -> None:
    reports = run_sweep(out_dir=tmp_path)
    assert [report.scenario for report in reports] == [
        path.stem for path in bundled_scenarios()
    ]
    islanding = {
        (report.case, report.event_label) for report in reports if report.is_islanding
    }
    assert islanding == {(case, "islanding") for case in CASES}

    frame = pd.read_csv(tmp_path / SWEEP_CSV)
    assert len(frame) == 16
    assert (frame["verdict"] == Verdict.ISLANDING.value).sum() == 4
    table = (tmp_path / SWEEP_TABLE).read_text().splitlines()
    assert table[0].split() == ["event"] + CASES
    assert len(table) == 5


def test_unreachable_confirmation_threshold() -> None:
    paths = [scenario_file(case, "islanding") for case in CASES]
    reports = run_sweep(paths=paths, overrides=["thresholds.arcv_min=100"])
    assert not any(report.is_islanding for report in reports)


def test_failing_scenario_keeps_finished_rows(tmp_path: Path) -> None:
    bad = tmp_path / "bad.yaml"
    bad.write_text("thresholds:\n  arcv_mni: 1\n")
    paths = [
        scenario_file("case1", "load_decrease"),
        bad,
        scenario_file("case2", "load_decrease"),
    ]
    out_dir = tmp_path / "out"
    with pytest.raises(ScenarioError, match="arcv_mni"):
        run_sweep(paths=paths, out_dir=out_dir)
    frame = pd.read_csv(out_dir / SWEEP_CSV)
    assert frame["scenario"].tolist() == ["case1_load_decrease"]
    assert not (out_dir / SWEEP_TABLE).exists()


def test_parallel_sweep_keeps_input_order() -> None:
    paths = [
        scenario_file("case3", "load_decrease"),
        scenario_file("case1", "load_decrease"),
        scenario_file("case2", "single_phase_fault"),
    ]
    reports = run_sweep(paths=paths, jobs=2)
    assert [report.scenario for report in reports] == [path.stem for path in paths]


def test_invalid_jobs() -> None:
    with pytest.raises(InvalidArgumentError):
        run_sweep(paths=[], jobs=0)
