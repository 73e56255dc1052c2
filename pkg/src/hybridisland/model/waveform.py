import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Union

import numpy as np
import numpy.typing as npt

from hybridisland.errors import InvalidArgumentError

FloatArray = npt.NDArray[np.float64]

Order = Fraction

# Inter-harmonic tracked by the detector: 75 Hz on a 60 Hz system.
INTERHARMONIC_ORDER = Fraction(5, 4)


def parse_order(value: Union[int, float, str, Fraction]) -> Fraction:
    """Parse a harmonic order such as ``5``, ``"5/4"`` or ``1.25``."""
    try:
        order = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as ex:
        raise InvalidArgumentError(f"Invalid harmonic order '{value}'.") from ex
    if order <= 0:
        raise InvalidArgumentError(f"Harmonic order must be positive, got {order}.")
    return order


def format_order(order: Fraction) -> str:
    if order.denominator == 1:
        return str(order.numerator)
    return f"{order.numerator}/{order.denominator}"


@dataclass(frozen=True)
class HarmonicComponent:
    order: Fraction
    amplitude: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", parse_order(self.order))
        if not self.amplitude >= 0:
            raise InvalidArgumentError(
                f"Amplitude of order {self.order} must be >= 0, got {self.amplitude}."
            )
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))


@dataclass(frozen=True)
class WaveformSpec:
    """Stationary observation model: harmonics, decaying DC and noise."""

    fundamental_hz: float = 60.0
    components: List[HarmonicComponent] = field(default_factory=list)
    dc_amplitude: float = 0.0
    dc_decay: float = 0.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.fundamental_hz > 0:
            raise InvalidArgumentError(
                f"fundamental_hz must be > 0, got {self.fundamental_hz}."
            )
        if not self.dc_decay >= 0:
            raise InvalidArgumentError(f"dc_decay must be >= 0, got {self.dc_decay}.")
        if not self.noise_std >= 0:
            raise InvalidArgumentError(
                f"noise_std must be >= 0, got {self.noise_std}."
            )

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.fundamental_hz

    def noiseless(self) -> "WaveformSpec":
        return WaveformSpec(
            fundamental_hz=self.fundamental_hz,
            components=list(self.components),
            dc_amplitude=self.dc_amplitude,
            dc_decay=self.dc_decay,
            noise_std=0.0,
            seed=self.seed,
        )


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled waveform in per-unit.

    Sample ``k`` is taken at ``t0 + k * ts``.
    """

    ts: float
    t0: float
    samples: FloatArray

    def __post_init__(self) -> None:
        if not self.ts > 0:
            raise InvalidArgumentError(f"Sampling interval must be > 0, got {self.ts}.")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or len(samples) < 1:
            raise InvalidArgumentError("A signal needs at least one sample.")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError("Signal samples must be finite.")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) * self.ts

    def times(self) -> FloatArray:
        return self.t0 + np.arange(len(self.samples), dtype=np.float64) * self.ts
