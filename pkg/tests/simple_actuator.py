from typing import List, Optional

from hybridisland.errors import ActuatorError
from hybridisland.model.detection import PowerShiftAck, PowerShiftActuator


class RecordingActuator(PowerShiftActuator):
    """Acknowledges every command after ``delay`` seconds and records it."""

    def __init__(self, delay: float = 0.0, fail: Optional[str] = None) -> None:
        self.delay = delay
        self.fail = fail
        self.commands: List[PowerShiftAck] = []

    def apply_power_shift(self, dg_id: int, fraction: float, t: float) -> PowerShiftAck:
        if self.fail is not None:
            raise ActuatorError(self.fail)
        ack = PowerShiftAck(
            dg_id=dg_id, fraction=fraction, t_command=t, t_effective=t + self.delay
        )
        self.commands.append(ack)
        return ack
