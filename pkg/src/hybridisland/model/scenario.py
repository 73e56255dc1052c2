from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

from hybridisland.errors import InvalidArgumentError
from hybridisland.model.detection import (
    DetectionTimeline,
    DetectorTiming,
    PowerShiftAck,
    Thresholds,
    Verdict,
)
from hybridisland.model.estimation import EstimatorConfig
from hybridisland.model.event import EventScript
from hybridisland.model.measures import RmsSeries
from hybridisland.model.network import NetworkModel, PowerFlowSnapshot
from hybridisland.model.waveform import SampledSignal


def _default_background() -> Dict[Fraction, float]:
    return {Fraction(5): 0.02, Fraction(7): 0.01}


@dataclass(frozen=True)
class EventTemplates:
    """Spectral and dynamic templates applied to the monitored waveform.

    Time constants are in seconds, amplitudes in pu of the nominal peak.
    Background harmonics are fractions of the fundamental amplitude.
    """

    grid_tau_s: float = 0.002
    island_tau_s: float = 0.05
    load_tau_s: float = 0.02
    fault_onset_tau_s: float = 0.001
    fault_burst_tau_s: float = 0.01
    interharmonic_tau_s: float = 0.002
    island_injection: float = 0.03
    three_phase_depth: float = 0.9
    three_phase_burst: float = 0.05
    single_phase_depth: float = 0.16
    single_phase_burst: float = 0.0
    single_phase_interharmonic: float = 0.0005
    load_decrease_fraction: float = 0.1
    dg_shift_fraction: float = 0.12
    background: Dict[Fraction, float] = field(default_factory=_default_background)

    def __post_init__(self) -> None:
        for name in (
            "grid_tau_s",
            "island_tau_s",
            "load_tau_s",
            "fault_onset_tau_s",
            "fault_burst_tau_s",
            "interharmonic_tau_s",
        ):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(
                    f"{name} must be > 0, got {getattr(self, name)}."
                )
        for name in ("load_decrease_fraction", "dg_shift_fraction"):
            if not 0 < getattr(self, name) <= 1:
                raise InvalidArgumentError(
                    f"{name} must be in (0, 1], got {getattr(self, name)}."
                )
        for name in ("three_phase_depth", "single_phase_depth"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidArgumentError(
                    f"{name} must be in [0, 1], got {getattr(self, name)}."
                )


@dataclass(frozen=True)
class EventLogEntry:
    t: float
    kind: str
    message: str


@dataclass(frozen=True)
class Scenario:
    name: str
    network: NetworkModel
    script: EventScript
    templates: EventTemplates = field(default_factory=EventTemplates)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    timing: DetectorTiming = field(default_factory=DetectorTiming)
    duration: float = 0.3
    monitor_bus: int = 8
    rms_window_cycles: float = 1.0
    rms_stride_cycles: float = 0.25
    noise_std: float = 0.0
    seed: int = 0
    case: Optional[str] = None
    event_label: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise InvalidArgumentError(f"duration must be > 0, got {self.duration}.")
        if not self.noise_std >= 0:
            raise InvalidArgumentError(
                f"noise_std must be >= 0, got {self.noise_std}."
            )
        self.network.bus(self.monitor_bus)
        self.script.validate(self.duration)

    @property
    def ts(self) -> float:
        return self.estimator.ts

    @property
    def fundamental_hz(self) -> float:
        return self.network.base.f_base

    @property
    def rms_window(self) -> float:
        return self.rms_window_cycles / self.fundamental_hz

    @property
    def rms_stride(self) -> float:
        return self.rms_stride_cycles / self.fundamental_hz


@dataclass(frozen=True)
class ScenarioResult:
    waveform: SampledSignal
    bus_rms: Dict[int, RmsSeries]
    snapshots: List[PowerFlowSnapshot]
    event_log: List[EventLogEntry]
    acks: List[PowerShiftAck]


@dataclass(frozen=True)
class RunReport:
    scenario: str
    verdict: Verdict
    a75: Optional[float]
    arcv1: Optional[float]
    arcv2: Optional[float]
    latency_cycles: Optional[float]
    timeline: DetectionTimeline
    artifacts: List[Path] = field(default_factory=list)
    case: Optional[str] = None
    event_label: Optional[str] = None

    @property
    def is_islanding(self) -> bool:
        return self.verdict == Verdict.ISLANDING
