"""Sliding-window linear least-squares fit of the harmonic basis.

Independent estimator used to cross-check the EKF: the fundamental frequency
is assumed known, so every tracked order contributes a ``sin``/``cos`` column
pair and the decaying DC contributes ``exp(-dc_decay * t)``. Phases are
referenced to ``t = 0``, matching ``harmonic_ekf.extract`` for a signal whose
first sample is taken at ``t = 0``.
"""
import math
from fractions import Fraction
from typing import Iterator, Sequence, Tuple

import numpy as np

from hybridisland.errors import InsufficientDataError, InvalidArgumentError
from hybridisland.model.estimation import TRACKED_ORDERS, HarmonicEstimates
from hybridisland.model.waveform import FloatArray, SampledSignal

# One period of the 15 Hz beat between the fundamental and the 5/4 order.
DEFAULT_WINDOW_CYCLES = 4


def design_matrix(
    times: FloatArray,
    fundamental_hz: float,
    orders: Sequence[Fraction] = TRACKED_ORDERS,
    dc_decay: float = 0.0,
) -> FloatArray:
    omega = 2 * math.pi * fundamental_hz
    columns = []
    for order in orders:
        angle = float(order) * omega * times
        columns.append(np.sin(angle))
        columns.append(np.cos(angle))
    columns.append(np.exp(-dc_decay * times))
    return np.column_stack(columns)


def fit_window(
    times: FloatArray,
    samples: FloatArray,
    fundamental_hz: float,
    orders: Sequence[Fraction] = TRACKED_ORDERS,
    dc_decay: float = 0.0,
) -> HarmonicEstimates:
    """Fit ``sum A_n sin(n w t + phi_n) + A_dc exp(-dc_decay t)`` to one window."""
    n_unknowns = 2 * len(orders) + 1
    if len(samples) < n_unknowns:
        raise InsufficientDataError(
            f"Least-squares fit needs at least {n_unknowns} samples, got {len(samples)}."
        )
    matrix = design_matrix(
        times=times, fundamental_hz=fundamental_hz, orders=orders, dc_decay=dc_decay
    )
    coefficients, _, _, _ = np.linalg.lstsq(matrix, samples, rcond=None)
    amplitudes = {}
    phases = {}
    for i, order in enumerate(orders):
        # A sin(x + phi) = A cos(phi) sin(x) + A sin(phi) cos(x)
        sin_part, cos_part = coefficients[2 * i], coefficients[2 * i + 1]
        amplitudes[order] = float(math.hypot(sin_part, cos_part))
        phases[order] = float(math.atan2(cos_part, sin_part) % (2 * math.pi))
    return HarmonicEstimates(
        amplitudes=amplitudes,
        phases=phases,
        f1_est=fundamental_hz,
        dc_est=float(coefficients[-1]),
    )


def sliding_fit(
    signal: SampledSignal,
    fundamental_hz: float = 60.0,
    window_cycles: float = DEFAULT_WINDOW_CYCLES,
    stride: int = 1,
    dc_decay: float = 0.0,
) -> Iterator[Tuple[float, HarmonicEstimates]]:
    """Yield ``(t_end, estimates)`` for every full window ending at a stride step."""
    if stride < 1:
        raise InvalidArgumentError(f"stride must be >= 1, got {stride}.")
    n_window = int(round(window_cycles / (fundamental_hz * signal.ts)))
    if n_window > len(signal):
        raise InsufficientDataError(
            f"Window of {n_window} samples is longer than the signal ({len(signal)})."
        )
    times = signal.times()
    for end in range(n_window, len(signal) + 1, stride):
        yield float(times[end - 1]), fit_window(
            times=times[end - n_window : end],
            samples=signal.samples[end - n_window : end],
            fundamental_hz=fundamental_hz,
            dc_decay=dc_decay,
        )
