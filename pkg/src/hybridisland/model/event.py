from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from hybridisland.errors import InvalidArgumentError


class EventKind(Enum):
    ISLANDING = "islanding"
    THREE_PHASE_FAULT = "three_phase_fault"
    SINGLE_PHASE_FAULT = "single_phase_fault"
    LOAD_DECREASE = "load_decrease"
    DG_POWER_SHIFT = "dg_power_shift"


@dataclass(frozen=True)
class Event:
    """Scripted disturbance.

    Unset optional parameters fall back to the scenario's event templates:
    ``bus`` is the fault, load or DG bus; ``fraction`` the retained share of
    a load or DG output; ``depth`` the fault dip depth; ``injection`` the 5/4
    inter-harmonic amplitude in pu.
    """

    t: float
    kind: EventKind
    bus: Optional[int] = None
    fraction: Optional[float] = None
    depth: Optional[float] = None
    injection: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.t >= 0:
            raise InvalidArgumentError(f"Event time must be >= 0, got {self.t}.")
        if self.fraction is not None and not 0 < self.fraction <= 1:
            raise InvalidArgumentError(
                f"Event fraction must be in (0, 1], got {self.fraction}."
            )
        if self.depth is not None and not 0 <= self.depth <= 1:
            raise InvalidArgumentError(
                f"Dip depth must be in [0, 1], got {self.depth}."
            )
        if self.injection is not None and not self.injection >= 0:
            raise InvalidArgumentError(
                f"Injection amplitude must be >= 0, got {self.injection}."
            )
        if self.kind in (EventKind.LOAD_DECREASE, EventKind.DG_POWER_SHIFT) and (
            self.bus is None
        ):
            raise InvalidArgumentError(f"{self.kind.value} event needs a bus.")


@dataclass(frozen=True)
class EventScript:
    events: List[Event] = field(default_factory=list)

    def __post_init__(self) -> None:
        times = [event.t for event in self.events]
        if times != sorted(times):
            raise InvalidArgumentError("Events must be ordered by time.")
        islands = [e for e in self.events if e.kind == EventKind.ISLANDING]
        if len(islands) > 1:
            raise InvalidArgumentError("At most one islanding event is allowed.")

    def validate(self, duration: float) -> None:
        for event in self.events:
            if event.t >= duration:
                raise InvalidArgumentError(
                    f"{event.kind.value} event at {event.t} s lies outside the "
                    f"{duration} s record."
                )

    @property
    def first_time(self) -> Optional[float]:
        return self.events[0].t if self.events else None
