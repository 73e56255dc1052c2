from dataclasses import dataclass

import numpy as np

from hybridisland.errors import InvalidArgumentError
from hybridisland.model.waveform import FloatArray


@dataclass(frozen=True, eq=False)
class RmsSeries:
    """RMS values emitted every ``stride`` seconds, the first one at ``t0``."""

    stride: float
    t0: float
    values: FloatArray

    def __post_init__(self) -> None:
        if not self.stride > 0:
            raise InvalidArgumentError(f"stride must be > 0, got {self.stride}.")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise InvalidArgumentError("RMS values must be one-dimensional.")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidArgumentError("RMS values must be finite and >= 0.")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def times(self) -> FloatArray:
        return self.t0 + np.arange(len(self.values), dtype=np.float64) * self.stride

    def normalized(self, reference: float) -> "RmsSeries":
        if not reference > 0:
            raise InvalidArgumentError(f"reference must be > 0, got {reference}.")
        return RmsSeries(stride=self.stride, t0=self.t0, values=self.values / reference)


@dataclass(frozen=True)
class ArcvValue:
    value: float
    window: float
    t_end: float

    def __post_init__(self) -> None:
        if not self.value >= 0:
            raise InvalidArgumentError(f"ARCV must be >= 0, got {self.value}.")
        if not self.window > 0:
            raise InvalidArgumentError(f"ARCV window must be > 0, got {self.window}.")
