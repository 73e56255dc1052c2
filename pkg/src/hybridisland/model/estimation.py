from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from hybridisland.errors import InvalidArgumentError
from hybridisland.model.waveform import INTERHARMONIC_ORDER, FloatArray

ComplexArray = npt.NDArray[np.complex128]

# Tracked orders in state-pair order: harmonics 1..9, then the inter-harmonic.
TRACKED_ORDERS: List[Fraction] = [Fraction(n) for n in range(1, 10)] + [
    INTERHARMONIC_ORDER
]

# Rotation state + one conjugate pair per tracked order + decaying DC.
STATE_SIZE = 1 + 2 * len(TRACKED_ORDERS) + 1


def default_process_noise(
    rotation: float = 1e-8, envelope: float = 1e-6
) -> Tuple[float, ...]:
    return (rotation,) + (envelope,) * (STATE_SIZE - 1)


@dataclass(frozen=True)
class EstimatorConfig:
    ts: float = 1.0 / 7680.0
    nominal_f1: float = 60.0
    process_noise_q: Tuple[float, ...] = field(default_factory=default_process_noise)
    measurement_noise_r: float = 1e-4
    initial_covariance_p0: float = 10.0
    # None uses initial_covariance_p0 for the rotation state as well.
    rotation_covariance_p0: Optional[float] = 1e-6
    dc_decay_alpha: float = 0.999
    conjugate_enforcement: bool = True
    initial_envelope: float = 1e-3
    # Extra variance along the fundamental envelope direction per sample.
    fundamental_amplitude_q: float = 5e-3
    # Reported amplitudes are amplitude_scale * pu.
    amplitude_scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.ts > 0:
            raise InvalidArgumentError(f"ts must be > 0, got {self.ts}.")
        if not self.nominal_f1 > 0:
            raise InvalidArgumentError(
                f"nominal_f1 must be > 0, got {self.nominal_f1}."
            )
        q = tuple(float(v) for v in self.process_noise_q)
        if len(q) != STATE_SIZE:
            raise InvalidArgumentError(
                f"process_noise_q needs {STATE_SIZE} entries, got {len(q)}."
            )
        if any(not v >= 0 for v in q):
            raise InvalidArgumentError("process_noise_q entries must be >= 0.")
        object.__setattr__(self, "process_noise_q", q)
        if not self.measurement_noise_r > 0:
            raise InvalidArgumentError(
                f"measurement_noise_r must be > 0, got {self.measurement_noise_r}."
            )
        if not self.initial_covariance_p0 > 0:
            raise InvalidArgumentError(
                f"initial_covariance_p0 must be > 0, got {self.initial_covariance_p0}."
            )
        if self.rotation_covariance_p0 is not None and not (
            self.rotation_covariance_p0 > 0
        ):
            raise InvalidArgumentError(
                f"rotation_covariance_p0 must be > 0, got {self.rotation_covariance_p0}."
            )
        if not self.conjugate_enforcement:
            raise InvalidArgumentError(
                "conjugate_enforcement cannot be disabled: envelope pairs are "
                "tracked through the real and imaginary parts of one envelope."
            )
        if not self.fundamental_amplitude_q >= 0:
            raise InvalidArgumentError(
                f"fundamental_amplitude_q must be >= 0, got {self.fundamental_amplitude_q}."
            )
        if not 0 < self.dc_decay_alpha <= 1:
            raise InvalidArgumentError(
                f"dc_decay_alpha must be in (0, 1], got {self.dc_decay_alpha}."
            )
        if not self.amplitude_scale > 0:
            raise InvalidArgumentError(
                f"amplitude_scale must be > 0, got {self.amplitude_scale}."
            )


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """EKF state.

    ``x[0]`` is the rotation ``exp(j w1 ts)``; ``x[2i+1], x[2i+2]`` is the
    conjugate envelope pair of ``TRACKED_ORDERS[i]``; ``x[-1]`` is the
    decaying DC. ``p`` is the covariance over the real coordinates
    ``(arg x[0], Re x[2i+1], Im x[2i+1], x[-1])``. ``k`` is the sample
    instant the state is aligned to (-1 before the first sample).
    """

    x: ComplexArray
    p: FloatArray
    k: int = -1


@dataclass(frozen=True)
class HarmonicEstimates:
    amplitudes: Dict[Fraction, float]
    phases: Dict[Fraction, float]
    f1_est: float
    dc_est: float

    @property
    def interharmonic(self) -> float:
        return self.amplitudes[INTERHARMONIC_ORDER]
