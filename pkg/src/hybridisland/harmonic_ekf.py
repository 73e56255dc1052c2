"""Extended Kalman Filter for harmonic and inter-harmonic tracking.

State layout (see ``EstimatorState``)::

    x[0]            rotation  exp(j w1 ts)
    x[2i+1]         a_n exp(+j(n k w1 ts + phi_n))   for n = TRACKED_ORDERS[i]
    x[2i+2]         a_n exp(-j(n k w1 ts + phi_n))
    x[21]           decaying DC

Transition: envelopes rotate by ``exp(j n arg(x[0]))``, the DC decays
linearly by ``dc_decay_alpha`` and the rotation is a random walk.
Measurement: ``h(x) = sum(-0.5j x_even + 0.5j x_odd) + x_dc``, which is real
and equal to ``sum a_n sin(.)`` for conjugate pairs.

The filter itself runs on the real coordinates of that state (``to_real``)::

    r[0]            theta = w1 ts, the rotation angle per sample
    r[2i+1]         Re x[2i+1]
    r[2i+2]         Im x[2i+1]
    r[21]           x[21]

so the rotation stays on the unit circle, every pair is an exact conjugate
and the covariance is a real symmetric matrix. In these coordinates the
measurement row is 1 on every imaginary part and on the DC.

The fundamental envelope gets extra process noise ``fundamental_amplitude_q``
along its own direction: amplitude steps of the fundamental (sags, load
steps) are absorbed by the fundamental instead of leaking into the
neighbouring 5/4 order, while its phase drift is left to the rotation.
"""
import logging
import math
from typing import Iterator, Tuple

import numpy as np

from hybridisland.errors import DivergenceError
from hybridisland.model.estimation import (
    STATE_SIZE,
    TRACKED_ORDERS,
    ComplexArray,
    EstimatorConfig,
    EstimatorState,
    HarmonicEstimates,
)
from hybridisland.model.waveform import FloatArray, SampledSignal

logger = logging.getLogger(__name__)

ORDERS = np.array([float(order) for order in TRACKED_ORDERS])
EVEN = 1 + 2 * np.arange(len(TRACKED_ORDERS))
ODD = EVEN + 1
DC_INDEX = STATE_SIZE - 1
FUNDAMENTAL = np.array([EVEN[0], ODD[0]])

MIN_ROTATION_MAGNITUDE = 1e-6
MIN_INNOVATION_VARIANCE = 1e-300

# Frequency estimates further than this share of nominal_f1 away are a lost lock.
MAX_FREQUENCY_DEVIATION = 0.5
FREQUENCY_WARNING_DEVIATION = 0.05


def _complex_measurement_row() -> ComplexArray:
    h = np.zeros(STATE_SIZE, dtype=np.complex128)
    h[EVEN] = -0.5j
    h[ODD] = 0.5j
    h[DC_INDEX] = 1.0
    return h


def measurement_row() -> FloatArray:
    """Return the measurement Jacobian ``H`` (1 x 22) in real coordinates."""
    h = np.zeros(STATE_SIZE, dtype=np.float64)
    h[ODD] = 1.0
    h[DC_INDEX] = 1.0
    return h


_H_COMPLEX = _complex_measurement_row()
_H = measurement_row()


def measure(x: ComplexArray) -> float:
    return float((_H_COMPLEX @ x).real)


def to_real(x: ComplexArray) -> FloatArray:
    if abs(x[0]) < MIN_ROTATION_MAGNITUDE:
        raise DivergenceError(
            f"Rotation state collapsed to |x1| = {abs(x[0]):.3e}."
        )
    r = np.empty(STATE_SIZE, dtype=np.float64)
    r[0] = float(np.angle(x[0]))
    r[EVEN] = x[EVEN].real
    r[ODD] = x[EVEN].imag
    r[DC_INDEX] = x[DC_INDEX].real
    return r


def to_complex(r: FloatArray) -> ComplexArray:
    x = np.empty(STATE_SIZE, dtype=np.complex128)
    x[0] = np.exp(1j * r[0])
    envelopes = r[EVEN] + 1j * r[ODD]
    x[EVEN] = envelopes
    x[ODD] = np.conj(envelopes)
    x[DC_INDEX] = r[DC_INDEX]
    return x


def transition(x: ComplexArray, dc_decay_alpha: float) -> ComplexArray:
    """Advance a complex state by one sample.

    Only the argument of ``x[0]`` is used, so ``x[0]**(5/4)`` is taken on the
    principal branch.
    """
    if abs(x[0]) < MIN_ROTATION_MAGNITUDE:
        raise DivergenceError(
            f"Rotation state collapsed to |x1| = {abs(x[0]):.3e}."
        )
    rotations = np.exp(1j * ORDERS * np.angle(x[0]))
    out = np.empty_like(x)
    out[0] = x[0]
    out[EVEN] = rotations * x[EVEN]
    out[ODD] = x[ODD] / rotations
    out[DC_INDEX] = dc_decay_alpha * x[DC_INDEX]
    return out


def transition_real(r: FloatArray, dc_decay_alpha: float) -> FloatArray:
    angles = ORDERS * r[0]
    cos, sin = np.cos(angles), np.sin(angles)
    out = r.copy()
    out[EVEN] = cos * r[EVEN] - sin * r[ODD]
    out[ODD] = sin * r[EVEN] + cos * r[ODD]
    out[DC_INDEX] = dc_decay_alpha * r[DC_INDEX]
    return out


def transition_jacobian(r: FloatArray, dc_decay_alpha: float) -> FloatArray:
    """Analytic ``F = df/dr`` of ``transition_real``."""
    angles = ORDERS * r[0]
    cos, sin = np.cos(angles), np.sin(angles)
    rotated = transition_real(r, dc_decay_alpha)
    jac = np.zeros((STATE_SIZE, STATE_SIZE), dtype=np.float64)
    jac[0, 0] = 1.0
    jac[EVEN, EVEN] = cos
    jac[EVEN, ODD] = -sin
    jac[ODD, EVEN] = sin
    jac[ODD, ODD] = cos
    jac[EVEN, 0] = -ORDERS * rotated[ODD]
    jac[ODD, 0] = ORDERS * rotated[EVEN]
    jac[DC_INDEX, DC_INDEX] = dc_decay_alpha
    return jac


def process_noise(r: FloatArray, config: EstimatorConfig) -> FloatArray:
    q = np.diag(np.array(config.process_noise_q, dtype=np.float64))
    fundamental = r[FUNDAMENTAL]
    magnitude = float(np.hypot(fundamental[0], fundamental[1]))
    if magnitude > 0:
        direction = fundamental / magnitude
        q[np.ix_(FUNDAMENTAL, FUNDAMENTAL)] += config.fundamental_amplitude_q * np.outer(
            direction, direction
        )
    return q


def init(config: EstimatorConfig) -> EstimatorState:
    x = np.full(STATE_SIZE, config.initial_envelope, dtype=np.complex128)
    x[0] = np.exp(1j * 2 * math.pi * config.nominal_f1 * config.ts)
    p = config.initial_covariance_p0 * np.eye(STATE_SIZE, dtype=np.float64)
    if config.rotation_covariance_p0 is not None:
        p[0, 0] = config.rotation_covariance_p0
    return EstimatorState(x=x, p=p, k=-1)


def predict(state: EstimatorState, config: EstimatorConfig) -> EstimatorState:
    r = to_real(state.x)
    jac = transition_jacobian(r, config.dc_decay_alpha)
    r = transition_real(r, config.dc_decay_alpha)
    p = jac @ state.p @ jac.T + process_noise(r, config)
    return EstimatorState(x=to_complex(r), p=p, k=state.k + 1)


def update(state: EstimatorState, z: float, config: EstimatorConfig) -> EstimatorState:
    r = to_real(state.x)
    p_ht = state.p @ _H
    innovation_variance = float(_H @ p_ht) + config.measurement_noise_r
    if not innovation_variance > MIN_INNOVATION_VARIANCE:
        raise DivergenceError(
            f"Innovation variance {innovation_variance:.3e} is not invertible."
        )
    gain = p_ht / innovation_variance
    r = r + gain * (z - float(_H @ r))
    # Joseph form keeps p symmetric positive semidefinite.
    i_kh = np.eye(STATE_SIZE) - np.outer(gain, _H)
    p = i_kh @ state.p @ i_kh.T + config.measurement_noise_r * np.outer(gain, gain)
    p = 0.5 * (p + p.T)
    f1 = r[0] / (2 * math.pi * config.ts)
    if not abs(f1 - config.nominal_f1) < MAX_FREQUENCY_DEVIATION * config.nominal_f1:
        raise DivergenceError(
            f"Fundamental frequency estimate {f1:.3f} Hz lost lock at sample "
            f"{state.k} (nominal {config.nominal_f1} Hz)."
        )
    return EstimatorState(x=to_complex(r), p=p, k=state.k)


def extract(state: EstimatorState, config: EstimatorConfig) -> HarmonicEstimates:
    x = state.x
    angle = float(np.angle(x[0]))
    amplitudes = config.amplitude_scale * np.abs(x[EVEN])
    phases = np.mod(np.angle(x[EVEN]) - state.k * ORDERS * angle, 2 * math.pi)
    return HarmonicEstimates(
        amplitudes={o: float(a) for o, a in zip(TRACKED_ORDERS, amplitudes)},
        phases={o: float(ph) for o, ph in zip(TRACKED_ORDERS, phases)},
        f1_est=angle / (2 * math.pi * config.ts),
        dc_est=float(x[DC_INDEX].real),
    )


def step(
    state: EstimatorState, sample: float, config: EstimatorConfig
) -> Tuple[EstimatorState, HarmonicEstimates]:
    state = update(predict(state, config), sample, config)
    return state, extract(state, config)


class HarmonicTracker:
    """Stateful wrapper advancing one estimator per monitored channel."""

    def __init__(self, config: EstimatorConfig) -> None:
        self._config = config
        self._state = init(config)
        self._warned = False

    @property
    def config(self) -> EstimatorConfig:
        return self._config

    @property
    def state(self) -> EstimatorState:
        return self._state

    def step(self, sample: float) -> HarmonicEstimates:
        self._state, estimates = step(self._state, sample, self._config)
        nominal = self._config.nominal_f1
        if (
            abs(estimates.f1_est - nominal) > FREQUENCY_WARNING_DEVIATION * nominal
            and not self._warned
        ):
            logger.warning(
                f"Frequency estimate {estimates.f1_est:.3f} Hz is far from "
                f"{nominal} Hz at sample {self._state.k}."
            )
            self._warned = True
        return estimates

    def track(self, signal: SampledSignal) -> Iterator[Tuple[float, HarmonicEstimates]]:
        for t, sample in zip(signal.times(), signal.samples):
            yield float(t), self.step(float(sample))
