import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from hybridisland.errors import InvalidArgumentError, NetworkValidationError


class BusType(Enum):
    SLACK = "slack"
    PQ = "pq"
    PV = "pv"


@dataclass(frozen=True)
class BaseQuantities:
    v_base: float = 12.7e3
    s_base: float = 10e6
    f_base: float = 60.0

    def __post_init__(self) -> None:
        for name in ("v_base", "s_base", "f_base"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(
                    f"{name} must be > 0, got {getattr(self, name)}."
                )

    @property
    def z_base(self) -> float:
        return self.v_base**2 / self.s_base

    def impedance_to_per_unit(self, r_ohm: float, l_mh: float) -> complex:
        x_ohm = 2 * math.pi * self.f_base * l_mh * 1e-3
        return complex(r_ohm, x_ohm) / self.z_base

    def impedance_from_per_unit(self, z_pu: complex) -> Tuple[float, float]:
        """Return ``(r_ohm, l_mh)``."""
        z_ohm = z_pu * self.z_base
        return z_ohm.real, z_ohm.imag / (2 * math.pi * self.f_base) * 1e3

    def power_to_per_unit(self, p_mw: float, q_mvar: float) -> complex:
        return complex(p_mw, q_mvar) * 1e6 / self.s_base

    def power_from_per_unit(self, s_pu: complex) -> Tuple[float, float]:
        """Return ``(p_mw, q_mvar)``."""
        s_mva = s_pu * self.s_base / 1e6
        return s_mva.real, s_mva.imag


@dataclass(frozen=True)
class Bus:
    id: int
    pg_mw: float = 0.0
    qg_mvar: float = 0.0
    pl_mw: float = 0.0
    ql_mvar: float = 0.0
    type: BusType = BusType.PQ
    v_set: float = 1.0


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r_ohm: float
    l_mh: float

    def __post_init__(self) -> None:
        if self.from_bus == self.to_bus:
            raise NetworkValidationError(
                f"Line {self.from_bus}-{self.to_bus} connects a bus to itself."
            )
        if not self.r_ohm > 0 or not self.l_mh > 0:
            raise NetworkValidationError(
                f"Line {self.from_bus}-{self.to_bus} needs positive R and L, "
                f"got R = {self.r_ohm} ohm, L = {self.l_mh} mH."
            )


@dataclass(frozen=True)
class GridConnection:
    """Utility source bus and the tie line behind the breaker."""

    source_bus: int = 1
    tie_bus: int = 3
    r_ohm: float = 0.0161
    l_mh: float = 0.0428

    def tie_line(self) -> Line:
        return Line(self.source_bus, self.tie_bus, self.r_ohm, self.l_mh)


@dataclass(frozen=True)
class NetworkModel:
    buses: List[Bus]
    lines: List[Line]
    grid: GridConnection = field(default_factory=GridConnection)
    base: BaseQuantities = field(default_factory=BaseQuantities)
    breaker_closed: bool = True
    # Reference bus of the islanded network.
    island_slack_bus: int = 8

    def bus(self, bus_id: int) -> Bus:
        for bus in self.buses:
            if bus.id == bus_id:
                return bus
        raise InvalidArgumentError(f"Unknown bus {bus_id}.")

    @property
    def bus_ids(self) -> List[int]:
        return [bus.id for bus in self.buses]

    def branches(self) -> List[Line]:
        """Lines energized in the current breaker state."""
        if self.breaker_closed:
            return list(self.lines) + [self.grid.tie_line()]
        return list(self.lines)

    @property
    def slack_bus(self) -> int:
        if self.breaker_closed:
            return self.grid.source_bus
        return self.island_slack_bus

    def with_breaker(self, closed: bool) -> "NetworkModel":
        return replace(self, breaker_closed=closed)

    def with_bus(self, bus: Bus) -> "NetworkModel":
        self.bus(bus.id)
        return replace(
            self, buses=[bus if b.id == bus.id else b for b in self.buses]
        )

    def total_load_mw(self) -> float:
        return sum(bus.pl_mw for bus in self.buses)

    def total_generation_mw(self) -> float:
        return sum(
            bus.pg_mw for bus in self.buses if bus.id != self.grid.source_bus
        )


@dataclass(frozen=True)
class PowerFlowSolution:
    """Bus voltage phasors in pu; de-energized buses read 0."""

    voltages: Dict[int, complex]
    slack_bus: int
    slack_power: complex
    losses: complex
    iterations: int
    converged: bool
    max_mismatch: float
    energized: List[int]

    def magnitude(self, bus_id: int) -> float:
        return abs(self.voltages[bus_id])

    def angle(self, bus_id: int) -> float:
        return math.atan2(self.voltages[bus_id].imag, self.voltages[bus_id].real)


@dataclass(frozen=True)
class BranchFlow:
    from_bus: int
    to_bus: int
    s_from: complex
    s_to: complex

    @property
    def loss(self) -> complex:
        return self.s_from + self.s_to


@dataclass(frozen=True)
class PowerFlowSnapshot:
    t: float
    label: str
    solution: PowerFlowSolution
    island_scale: Optional[float] = None
