"""CSV artifacts: waveforms, estimates, RMS/ARCV series and timelines.

Floats are written with 9 significant digits.
"""
import logging
import math
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from hybridisland.model.detection import DetectionTimeline
from hybridisland.model.estimation import TRACKED_ORDERS, HarmonicEstimates
from hybridisland.model.measures import ArcvValue, RmsSeries
from hybridisland.model.network import PowerFlowSolution
from hybridisland.model.scenario import RunReport
from hybridisland.model.waveform import SampledSignal
from hybridisland.types import ParseError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"

# Relative deviation from the median spacing tolerated in input timestamps.
UNIFORM_SPACING_TOLERANCE = 1e-3


def estimate_columns() -> List[str]:
    names = []
    for order in TRACKED_ORDERS:
        if order.denominator == 1:
            names.append(f"a{order.numerator}")
        else:
            names.append(f"a_{order.numerator}_{order.denominator}")
    return ["time_s"] + names + ["f1_hz", "dc"]


def _write(frame: pd.DataFrame, output_file: Path) -> None:
    output_file.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output_file, index=False, float_format=FLOAT_FORMAT)


class WaveformCsvInput:
    """Two-column CSV ``time_s, value_pu`` with uniform spacing."""

    def __init__(self, input_file: Path) -> None:
        self._input_file = input_file

    def get_signal(self) -> SampledSignal:
        try:
            frame = pd.read_csv(self._input_file)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as ex:
            raise ParseError(f"Cannot read waveform '{self._input_file}': {ex}") from ex
        if frame.shape[1] != 2:
            raise ParseError(
                f"Waveform '{self._input_file}' must have two columns "
                f"(time_s, value_pu), got {list(frame.columns)}."
            )
        try:
            values = frame.to_numpy(dtype=np.float64)
        except ValueError as ex:
            raise ParseError(f"Non-numeric value in '{self._input_file}'.") from ex
        if len(values) < 2:
            raise ParseError(f"Waveform '{self._input_file}' needs at least two rows.")
        if not np.all(np.isfinite(values)):
            raise ParseError(f"Waveform '{self._input_file}' has missing values.")
        times, samples = values[:, 0], values[:, 1]
        spacing = np.diff(times)
        ts = float(np.median(spacing))
        if not ts > 0:
            raise ParseError(f"Timestamps in '{self._input_file}' are not increasing.")
        deviation = np.abs(spacing - ts)
        worst = int(np.argmax(deviation))
        if deviation[worst] > UNIFORM_SPACING_TOLERANCE * ts:
            raise ParseError(
                f"Non-uniform timestamps in '{self._input_file}': row {worst + 2} is "
                f"{spacing[worst]:.9g} s after the previous one, expected {ts:.9g} s."
            )
        return SampledSignal(ts=ts, t0=float(times[0]), samples=samples)


class WaveformCsvOutput:
    def __init__(self, output_file: Path) -> None:
        self._output_file = output_file

    def save(self, signal: SampledSignal) -> None:
        frame = pd.DataFrame({"time_s": signal.times(), "value_pu": signal.samples})
        _write(frame, self._output_file)


class EstimatesCsvOutput:
    """Per-step estimates with amplitudes and DC in pu.

    ``amplitude_scale`` is the scale the amplitudes were reported with; it is
    divided out before writing. The DC estimate is always in pu.
    """

    def __init__(self, output_file: Path, amplitude_scale: float = 1.0) -> None:
        self._output_file = output_file
        self._scale = amplitude_scale

    def save(self, estimates: Iterable[Tuple[float, HarmonicEstimates]]) -> None:
        rows = [
            [t]
            + [est.amplitudes[order] / self._scale for order in TRACKED_ORDERS]
            + [est.f1_est, est.dc_est]
            for t, est in estimates
        ]
        _write(pd.DataFrame(rows, columns=estimate_columns()), self._output_file)


class SeriesCsvOutput:
    """``time_s, value`` rows of an RMS or ARCV series."""

    def __init__(self, output_file: Path) -> None:
        self._output_file = output_file

    def save(self, times: Sequence[float], values: Sequence[float]) -> None:
        frame = pd.DataFrame({"time_s": list(times), "value": list(values)})
        _write(frame, self._output_file)

    def save_rms(self, series: RmsSeries) -> None:
        self.save(times=series.times().tolist(), values=series.values.tolist())

    def save_arcv(self, values: Sequence[ArcvValue]) -> None:
        self.save(
            times=[value.t_end for value in values],
            values=[value.value for value in values],
        )


class TimelineCsvOutput:
    def __init__(self, output_file: Path) -> None:
        self._output_file = output_file

    def save(self, timeline: DetectionTimeline) -> None:
        frame = pd.DataFrame(
            [
                (record.stage, record.t, record.measured_value, record.decision)
                for record in timeline.records
            ],
            columns=["stage", "t", "measured_value", "decision"],
        )
        _write(frame, self._output_file)


SWEEP_COLUMNS = [
    "event",
    "case",
    "scenario",
    "a75",
    "arcv1",
    "arcv2",
    "verdict",
    "latency_cycles",
]


def report_frame(reports: Sequence[RunReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (
                report.event_label,
                report.case,
                report.scenario,
                report.a75,
                report.arcv1,
                report.arcv2,
                report.verdict.value,
                report.latency_cycles,
            )
            for report in reports
        ],
        columns=SWEEP_COLUMNS,
    )


class SweepCsvOutput:
    """Sweep table written one row at a time; rows already written survive an abort."""

    def __init__(self, output_file: Path) -> None:
        self._output_file = output_file
        self._started = False

    def append(self, report: RunReport) -> None:
        frame = report_frame([report])
        if not self._started:
            self._output_file.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(
            self._output_file,
            mode="a" if self._started else "w",
            header=not self._started,
            index=False,
            float_format=FLOAT_FORMAT,
        )
        self._started = True


class PowerFlowCsvOutput:
    def __init__(self, output_file: Path) -> None:
        self._output_file = output_file

    def save(self, solution: PowerFlowSolution) -> None:
        buses = sorted(solution.voltages)
        frame = pd.DataFrame(
            {
                "bus": buses,
                "v_pu": [solution.magnitude(bus_id) for bus_id in buses],
                "angle_deg": [math.degrees(solution.angle(bus_id)) for bus_id in buses],
            }
        )
        _write(frame, self._output_file)
