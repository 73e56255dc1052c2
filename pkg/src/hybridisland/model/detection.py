import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from hybridisland.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class Phase(Enum):
    MONITORING = "monitoring"
    ARCV_MEASUREMENT = "arcv_measurement"
    AWAITING_POWER_SHIFT = "awaiting_power_shift"
    CONFIRMING = "confirming"
    FINAL = "final"


class Verdict(Enum):
    NONE = "none"
    HARMONIC_REJECTED = "harmonic_rejected"
    FAULT_FILTERED = "fault_filtered"
    NON_ISLANDING = "non_islanding"
    ISLANDING = "islanding"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Thresholds:
    """Decision thresholds.

    ``a75_min`` is in the estimator scale, the ARCV limits in pu/s. Zero and
    infinite values are accepted so that single stages can be disabled.
    """

    a75_min: float = 1.0
    arcv_max: float = 14.0
    arcv_min: float = 1.0

    def __post_init__(self) -> None:
        for name in ("a75_min", "arcv_max", "arcv_min"):
            value = float(getattr(self, name))
            if math.isnan(value) or value < 0:
                raise InvalidArgumentError(f"{name} must be >= 0, got {value}.")
            object.__setattr__(self, name, value)
        if self.arcv_min >= self.arcv_max:
            logger.warning(
                f"arcv_min ({self.arcv_min}) is not below arcv_max ({self.arcv_max}); "
                "no event can both pass the fault filter and confirm islanding "
                "with a steady voltage."
            )


@dataclass(frozen=True)
class DetectorTiming:
    """Timing of the decision pipeline, in fundamental cycles unless noted."""

    fundamental_hz: float = 60.0
    gate_hold_cycles: float = 0.25
    arcv_window_cycles: float = 2.0
    settle_cycles: float = 1.0
    ack_timeout_cycles: float = 2.0
    deadline_s: float = 2.0
    arming_delay_s: float = 0.08
    dg_id: int = 8
    shift_fraction: float = 0.12
    # Earliest simulated time for the power-shift command; None issues it as
    # soon as the fault filter passes.
    shift_not_before_s: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.fundamental_hz > 0:
            raise InvalidArgumentError(
                f"fundamental_hz must be > 0, got {self.fundamental_hz}."
            )
        for name in (
            "gate_hold_cycles",
            "settle_cycles",
            "ack_timeout_cycles",
            "arming_delay_s",
        ):
            if not getattr(self, name) >= 0:
                raise InvalidArgumentError(
                    f"{name} must be >= 0, got {getattr(self, name)}."
                )
        if not self.arcv_window_cycles > 0:
            raise InvalidArgumentError(
                f"arcv_window_cycles must be > 0, got {self.arcv_window_cycles}."
            )
        if not self.deadline_s > 0:
            raise InvalidArgumentError(
                f"deadline_s must be > 0, got {self.deadline_s}."
            )
        if not 0 < self.shift_fraction <= 1:
            raise InvalidArgumentError(
                f"shift_fraction must be in (0, 1], got {self.shift_fraction}."
            )

    @property
    def cycle(self) -> float:
        return 1.0 / self.fundamental_hz

    @property
    def gate_hold(self) -> float:
        return self.gate_hold_cycles * self.cycle

    @property
    def arcv_window(self) -> float:
        return self.arcv_window_cycles * self.cycle

    @property
    def settle(self) -> float:
        return self.settle_cycles * self.cycle

    @property
    def ack_timeout(self) -> float:
        return self.ack_timeout_cycles * self.cycle


@dataclass(frozen=True)
class StageRecord:
    """One row of the timeline CSV."""

    stage: str
    t: float
    measured_value: float
    decision: str


@dataclass(frozen=True)
class PowerShiftAck:
    dg_id: int
    fraction: float
    t_command: float
    t_effective: float


class PowerShiftActuator(ABC):
    """Command interface of the DG whose output is shifted for confirmation."""

    @abstractmethod
    def apply_power_shift(self, dg_id: int, fraction: float, t: float) -> PowerShiftAck:
        raise NotImplementedError()


@dataclass(frozen=True)
class DetectionTimeline:
    phase: Phase
    verdict: Verdict
    t_event_flagged: Optional[float] = None
    t_stage2: Optional[float] = None
    t_verdict: Optional[float] = None
    a75: Optional[float] = None
    arcv1: Optional[float] = None
    arcv2: Optional[float] = None
    ack: Optional[PowerShiftAck] = None
    error: Optional[str] = None
    records: List[StageRecord] = field(default_factory=list)

    def latency(self, t_event: float) -> Optional[float]:
        """Seconds from ``t_event`` until the fault filter decided."""
        if self.t_stage2 is None:
            return None
        return self.t_stage2 - t_event
