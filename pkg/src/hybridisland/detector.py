"""Three-stage hybrid islanding decision.

1. Inter-harmonic gate: the 5/4 amplitude must stay at or above ``a75_min``
   for the gate hold time.
2. Fault filter: the ARCV over the window that starts at the last RMS value
   known when the gate fires must not exceed ``arcv_max``; larger values are
   severe faults.
3. Confirmation: one DG is shifted to a fraction of its output and the ARCV
   measured after the settle delay must reach ``arcv_min``.
"""
import heapq
import logging
import math
from typing import Iterable, Iterator, List, Optional, Tuple, Union

from hybridisland import measures
from hybridisland.errors import ActuatorError, InvalidArgumentError, StreamGapError
from hybridisland.model.detection import (
    DetectionTimeline,
    DetectorTiming,
    Phase,
    PowerShiftAck,
    PowerShiftActuator,
    StageRecord,
    Thresholds,
    Verdict,
)
from hybridisland.model.estimation import HarmonicEstimates
from hybridisland.model.measures import RmsSeries

logger = logging.getLogger(__name__)

# Spacing beyond this multiple of the nominal interval is a gap.
GAP_TOLERANCE = 1.5

EstimateItem = Tuple[float, HarmonicEstimates]
RmsItem = Tuple[float, float]


def _check_measured(name: str, value: float) -> None:
    if math.isnan(value) or value < 0:
        raise InvalidArgumentError(f"{name} must be >= 0, got {value}.")


def stage1_harmonic_gate(a75: float, thresholds: Thresholds) -> bool:
    _check_measured("a75", a75)
    return a75 >= thresholds.a75_min


def stage2_fault_filter(arcv1: float, thresholds: Thresholds) -> bool:
    """Return True when the event passes, False when it is filtered as a fault."""
    _check_measured("arcv1", arcv1)
    return arcv1 <= thresholds.arcv_max


def stage3_confirm(arcv2: float, thresholds: Thresholds) -> Verdict:
    _check_measured("arcv2", arcv2)
    return Verdict.ISLANDING if arcv2 >= thresholds.arcv_min else Verdict.NON_ISLANDING


def classify(a75: float, arcv1: float, arcv2: float, thresholds: Thresholds) -> Verdict:
    """Decide from already measured stage values."""
    if not stage1_harmonic_gate(a75, thresholds):
        return Verdict.HARMONIC_REJECTED
    if not stage2_fault_filter(arcv1, thresholds):
        return Verdict.FAULT_FILTERED
    return stage3_confirm(arcv2, thresholds)


class _SpacingCheck:
    def __init__(self, name: str) -> None:
        self._name = name
        self._last: Optional[float] = None
        self.interval: Optional[float] = None

    def observe(self, t: float) -> None:
        if self._last is not None:
            spacing = t - self._last
            if self.interval is None:
                if not spacing > 0:
                    raise StreamGapError(
                        f"{self._name} stream is not increasing at t = {t:.6f} s."
                    )
                self.interval = spacing
            elif spacing > GAP_TOLERANCE * self.interval or not spacing > 0:
                raise StreamGapError(
                    f"{self._name} stream gap of {spacing:.6f} s at t = {t:.6f} s "
                    f"(expected {self.interval:.6f} s)."
                )
        self._last = t


class HybridDetector:
    """Sequential state machine for one monitored channel."""

    def __init__(
        self,
        thresholds: Thresholds,
        actuator: PowerShiftActuator,
        timing: DetectorTiming = DetectorTiming(),
    ) -> None:
        self._thresholds = thresholds
        self._actuator = actuator
        self._timing = timing
        self._estimate_spacing = _SpacingCheck("Estimate")
        self._rms_spacing = _SpacingCheck("RMS")

        self._phase = Phase.MONITORING
        self._verdict = Verdict.NONE
        self._t_start: Optional[float] = None
        self._hold_count = 0
        self._peak_a75 = 0.0
        self._a75: Optional[float] = None
        self._t_flagged: Optional[float] = None
        self._t_stage2: Optional[float] = None
        self._t_verdict: Optional[float] = None
        self._arcv1: Optional[float] = None
        self._arcv2: Optional[float] = None
        self._ack: Optional[PowerShiftAck] = None
        self._error: Optional[str] = None
        self._window_start: Optional[float] = None
        self._window: List[float] = []
        self._last_rms: Optional[float] = None
        self._records: List[StageRecord] = []

    @property
    def phase(self) -> Phase:
        return self._phase

    @property
    def done(self) -> bool:
        return self._phase == Phase.FINAL

    def timeline(self) -> DetectionTimeline:
        return DetectionTimeline(
            phase=self._phase,
            verdict=self._verdict,
            t_event_flagged=self._t_flagged,
            t_stage2=self._t_stage2,
            t_verdict=self._t_verdict,
            a75=self._a75 if self._a75 is not None else self._peak_a75,
            arcv1=self._arcv1,
            arcv2=self._arcv2,
            ack=self._ack,
            error=self._error,
            records=list(self._records),
        )

    def on_estimate(self, t: float, estimates: HarmonicEstimates) -> None:
        self._estimate_spacing.observe(t)
        if self._t_start is None:
            self._t_start = t
        if self.done:
            return
        self._check_deadline(t)
        if self._phase != Phase.MONITORING:
            return
        if t < self._t_start + self._timing.arming_delay_s:
            return
        a75 = estimates.interharmonic
        self._peak_a75 = max(self._peak_a75, a75)
        if not stage1_harmonic_gate(a75, self._thresholds):
            self._hold_count = 0
            return
        self._hold_count += 1
        ts = self._estimate_spacing.interval
        if ts is None:
            return
        if self._hold_count < max(1, int(round(self._timing.gate_hold / ts))):
            return
        self._a75 = a75
        self._t_flagged = t
        self._records.append(StageRecord("harmonic_gate", t, a75, "pass"))
        logger.info(f"Inter-harmonic gate passed at t = {t:.4f} s (a75 = {a75:.4g}).")
        self._start_window(Phase.ARCV_MEASUREMENT, t)
        if self._last_rms is not None:
            self._window.append(self._last_rms)

    def on_rms(self, t: float, rms: float) -> None:
        self._rms_spacing.observe(t)
        self._last_rms = rms
        if self.done:
            return
        self._check_deadline(t)
        if self._phase == Phase.AWAITING_POWER_SHIFT:
            self._await_power_shift(t)
        if self._phase not in (Phase.ARCV_MEASUREMENT, Phase.CONFIRMING):
            return
        assert self._window_start is not None
        if t < self._window_start:
            return
        self._window.append(rms)
        value = self._window_arcv()
        if value is None:
            return
        if self._phase == Phase.ARCV_MEASUREMENT:
            self._finish_fault_filter(t, value)
        else:
            self._finish_confirmation(t, value)

    def finish(self, t: Optional[float] = None) -> DetectionTimeline:
        """Close the timeline when the input streams end."""
        if self._phase not in (Phase.MONITORING, Phase.FINAL):
            self._fail(t, f"Streams ended during {self._phase.value}.")
        return self.timeline()

    def _start_window(self, phase: Phase, start: float) -> None:
        self._phase = phase
        self._window_start = start
        self._window = []

    def _window_arcv(self) -> Optional[float]:
        stride = self._rms_spacing.interval
        if stride is None or len(self._window) < 2:
            return None
        n_steps = max(1, int(round(self._timing.arcv_window / stride)))
        if len(self._window) < n_steps + 1:
            return None
        series = RmsSeries(stride=stride, t0=0.0, values=self._window)
        return measures.arcv(series, window=self._timing.arcv_window).value

    def _finish_fault_filter(self, t: float, arcv1: float) -> None:
        self._arcv1 = arcv1
        self._t_stage2 = t
        if not stage2_fault_filter(arcv1, self._thresholds):
            self._records.append(StageRecord("fault_filter", t, arcv1, "filtered"))
            logger.info(f"Fault filtered at t = {t:.4f} s (ARCV = {arcv1:.4f} pu/s).")
            self._final(t, Verdict.FAULT_FILTERED)
            return
        self._records.append(StageRecord("fault_filter", t, arcv1, "pass"))
        logger.info(f"Fault filter passed at t = {t:.4f} s (ARCV = {arcv1:.4f} pu/s).")
        self._phase = Phase.AWAITING_POWER_SHIFT
        self._window_start = None
        self._await_power_shift(t)

    def _await_power_shift(self, t: float) -> None:
        if self._ack is not None:
            assert self._window_start is not None
            if t >= self._window_start:
                self._start_window(Phase.CONFIRMING, self._window_start)
            return
        not_before = self._timing.shift_not_before_s
        if not_before is not None and t < not_before:
            return
        dg_id, fraction = self._timing.dg_id, self._timing.shift_fraction
        try:
            ack = self._actuator.apply_power_shift(dg_id, fraction, t)
        except ActuatorError as ex:
            self._fail(t, f"Power shift failed: {ex}")
            return
        if ack.t_effective - t > self._timing.ack_timeout:
            self._fail(
                t,
                f"Power shift not acknowledged within {self._timing.ack_timeout:.4f} s "
                f"(effective at {ack.t_effective:.4f} s).",
            )
            return
        self._ack = ack
        self._records.append(StageRecord("power_shift", ack.t_effective, fraction, "issued"))
        logger.info(
            f"DG {dg_id} shifted to {fraction:.0%} at t = {ack.t_effective:.4f} s."
        )
        self._window_start = ack.t_effective + self._timing.settle
        if t >= self._window_start:
            self._start_window(Phase.CONFIRMING, self._window_start)

    def _finish_confirmation(self, t: float, arcv2: float) -> None:
        self._arcv2 = arcv2
        verdict = stage3_confirm(arcv2, self._thresholds)
        self._records.append(StageRecord("confirmation", t, arcv2, verdict.value))
        logger.info(
            f"Confirmation at t = {t:.4f} s (ARCV = {arcv2:.4f} pu/s): {verdict.value}."
        )
        self._final(t, verdict)

    def _check_deadline(self, t: float) -> None:
        if self._t_flagged is None or self.done:
            return
        if t - self._t_flagged > self._timing.deadline_s:
            self._fail(t, f"No verdict within {self._timing.deadline_s} s.")

    def _fail(self, t: Optional[float], message: str) -> None:
        logger.warning(message)
        self._error = message
        self._final(t, Verdict.UNDETERMINED)

    def _final(self, t: Optional[float], verdict: Verdict) -> None:
        self._verdict = verdict
        self._phase = Phase.FINAL
        self._t_verdict = t


def _merged(
    estimates_stream: Iterable[EstimateItem], rms_stream: Iterable[RmsItem]
) -> Iterator[Tuple[float, int, Union[HarmonicEstimates, float]]]:
    estimates = ((t, 0, value) for t, value in estimates_stream)
    rms = ((t, 1, value) for t, value in rms_stream)
    return heapq.merge(estimates, rms, key=lambda item: (item[0], item[1]))


def run(
    estimates_stream: Iterable[EstimateItem],
    rms_stream: Iterable[RmsItem],
    thresholds: Thresholds,
    actuator: PowerShiftActuator,
    timing: DetectorTiming = DetectorTiming(),
) -> DetectionTimeline:
    """Drive a detector over two time-stamped streams until a final verdict.

    Items are consumed in time order (estimates first on ties), lazily, so
    the streams may be produced by a simulation that reacts to the actuator.
    """
    detector = HybridDetector(thresholds=thresholds, actuator=actuator, timing=timing)
    t_last: Optional[float] = None
    for t, kind, value in _merged(estimates_stream, rms_stream):
        t_last = t
        if kind == 0:
            assert isinstance(value, HarmonicEstimates)
            detector.on_estimate(t, value)
        else:
            assert not isinstance(value, HarmonicEstimates)
            detector.on_rms(t, float(value))
        if detector.done:
            return detector.timeline()
    return detector.finish(t_last)
