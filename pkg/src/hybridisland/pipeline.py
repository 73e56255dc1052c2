"""Closed-loop run of one scenario through the detector.

The simulated monitored channel is tapped twice: once by the harmonic
tracker and once by the RMS tracker. The detector consumes both streams in
time order and may command the simulation's power shift while it is still
being generated.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Tuple

import numpy as np

from hybridisland import detector
from hybridisland.gridsim.scenario import RunningScenario
from hybridisland.harmonic_ekf import HarmonicTracker
from hybridisland.measures import UNIT_SINE_RMS, RmsTracker
from hybridisland.model.detection import DetectionTimeline
from hybridisland.model.estimation import HarmonicEstimates
from hybridisland.model.measures import RmsSeries
from hybridisland.model.scenario import RunReport, Scenario, ScenarioResult

logger = logging.getLogger(__name__)

Sample = Tuple[float, float]


@dataclass(frozen=True)
class PipelineOutcome:
    report: RunReport
    result: ScenarioResult
    estimates: List[Tuple[float, HarmonicEstimates]]
    rms: RmsSeries


def _estimate_stream(
    samples: Iterable[Sample],
    tracker: HarmonicTracker,
    sink: List[Tuple[float, HarmonicEstimates]],
) -> Iterator[Tuple[float, HarmonicEstimates]]:
    for t, v in samples:
        item = (t, tracker.step(v))
        sink.append(item)
        yield item


def _rms_stream(
    samples: Iterable[Sample], tracker: RmsTracker, sink: List[Sample]
) -> Iterator[Sample]:
    for t, value in tracker.track(samples):
        item = (t, value / UNIT_SINE_RMS)
        sink.append(item)
        yield item


def run_pipeline(scenario: Scenario, drain: bool = True) -> PipelineOutcome:
    """Simulate ``scenario`` with the detector in the loop.

    With ``drain`` the estimate and RMS streams are consumed to the end of the
    record after the verdict, so the returned traces cover the whole run.
    """
    running = RunningScenario.from_scenario(scenario)
    for_estimates, for_rms = itertools.tee(running.samples(), 2)
    estimates: List[Tuple[float, HarmonicEstimates]] = []
    rms_points: List[Sample] = []
    estimate_stream = _estimate_stream(
        for_estimates, HarmonicTracker(scenario.estimator), estimates
    )
    rms_stream = _rms_stream(
        for_rms,
        RmsTracker(ts=scenario.ts, window=scenario.rms_window, stride=scenario.rms_stride),
        rms_points,
    )
    logger.info(
        f"Running scenario '{scenario.name}' ({running.sample_total} samples, "
        f"monitored bus {scenario.monitor_bus})."
    )
    timeline = detector.run(
        estimate_stream,
        rms_stream,
        thresholds=scenario.thresholds,
        actuator=running,
        timing=scenario.timing,
    )
    if drain:
        for _ in itertools.chain(estimate_stream, rms_stream):
            pass
    result = running.result()
    report = _report(scenario, timeline)
    logger.info(
        f"Scenario '{scenario.name}': {report.verdict.value} "
        f"(a75 = {_fmt(report.a75)}, arcv1 = {_fmt(report.arcv1)}, "
        f"arcv2 = {_fmt(report.arcv2)})."
    )
    return PipelineOutcome(
        report=report,
        result=result,
        estimates=estimates,
        rms=_rms_series(rms_points, scenario.rms_stride),
    )


def _report(scenario: Scenario, timeline: DetectionTimeline) -> RunReport:
    t_event = scenario.script.first_time
    latency = timeline.latency(t_event) if t_event is not None else None
    return RunReport(
        scenario=scenario.name,
        verdict=timeline.verdict,
        a75=timeline.a75,
        arcv1=timeline.arcv1,
        arcv2=timeline.arcv2,
        latency_cycles=None if latency is None else latency * scenario.fundamental_hz,
        timeline=timeline,
        case=scenario.case,
        event_label=scenario.event_label,
    )


def _rms_series(points: List[Sample], stride: float) -> RmsSeries:
    if not points:
        return RmsSeries(stride=stride, t0=0.0, values=np.zeros(0))
    times, values = zip(*points)
    return RmsSeries(
        stride=float(times[1] - times[0]) if len(times) > 1 else stride,
        t0=float(times[0]),
        values=np.asarray(values, dtype=np.float64),
    )


def _fmt(value: object) -> str:
    return "n/a" if value is None else f"{value:.4g}"
