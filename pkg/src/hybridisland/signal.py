"""Waveform synthesis for the monitored voltage channel.

The observation model is a sum of sinusoids at multiples of the fundamental
(integer harmonics and the 5/4 inter-harmonic), a decaying DC term and
additive Gaussian noise:

    v(t) = sum_n A_n sin(n w t + phi_n) + A_dc exp(-sigma t) + eps

Noise is drawn from numpy's PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(stream,))`` where ``stream`` is the segment
index (0 for a plain synthesis), as standard normal draws in sample order
scaled by ``noise_std``. Reimplementations must use the same generator and
seeding scheme to reproduce noisy records.
"""
import logging
import math
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from hybridisland.errors import InvalidArgumentError
from hybridisland.model.waveform import FloatArray, SampledSignal, WaveformSpec

logger = logging.getLogger(__name__)

Envelope = Union[float, FloatArray]


def noise_generator(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,)))
    )


def sample_count(duration: float, ts: float) -> int:
    if not ts > 0:
        raise InvalidArgumentError(f"Sampling interval must be > 0, got {ts}.")
    if not duration > 0:
        raise InvalidArgumentError(f"Duration must be > 0, got {duration}.")
    if duration < ts:
        raise InvalidArgumentError(
            f"Duration {duration} s is shorter than one sampling interval {ts} s."
        )
    return int(round(duration / ts))


def render(
    fundamental_hz: float,
    times: FloatArray,
    amplitudes: Mapping[Fraction, Envelope],
    phases: Optional[Mapping[Fraction, float]] = None,
    dc_amplitude: float = 0.0,
    dc_decay: float = 0.0,
) -> FloatArray:
    """Evaluate the noiseless observation model at the given times.

    Amplitudes may be scalars or per-sample envelopes of the same length as
    ``times``, which lets the grid simulator modulate each component while
    keeping one evaluation path.
    """
    omega = 2 * math.pi * fundamental_hz
    phases = phases or {}
    values = np.zeros_like(times, dtype=np.float64)
    for order, amplitude in amplitudes.items():
        phase = phases.get(order, 0.0)
        values += amplitude * np.sin(float(order) * omega * times + phase)
    if dc_amplitude != 0.0:
        values += dc_amplitude * np.exp(-dc_decay * times)
    return values


def synthesize(
    spec: WaveformSpec,
    duration: float,
    ts: float,
    start_index: int = 0,
    stream: int = 0,
) -> SampledSignal:
    """Sample ``spec`` for ``duration`` seconds at interval ``ts``.

    Sample ``k`` is taken at ``(start_index + k) * ts`` so that consecutive
    segments share one continuous time index.
    """
    n = sample_count(duration=duration, ts=ts)
    times = (start_index + np.arange(n, dtype=np.float64)) * ts
    values = render(
        fundamental_hz=spec.fundamental_hz,
        times=times,
        amplitudes={c.order: c.amplitude for c in spec.components},
        phases={c.order: c.phase for c in spec.components},
        dc_amplitude=spec.dc_amplitude,
        dc_decay=spec.dc_decay,
    )
    if spec.noise_std > 0:
        rng = noise_generator(seed=spec.seed, stream=stream)
        values = values + spec.noise_std * rng.standard_normal(n)
    return SampledSignal(ts=ts, t0=start_index * ts, samples=values)


def splice(
    segments: Sequence[Tuple[WaveformSpec, float]], ts: float
) -> SampledSignal:
    """Concatenate piecewise-stationary segments on a shared time index.

    Each segment duration is rounded to whole samples; segment ``i`` draws its
    noise from stream ``i`` of its own seed.
    """
    if len(segments) == 0:
        raise InvalidArgumentError("Cannot splice an empty list of segments.")
    parts = []
    start_index = 0
    for stream, (spec, duration) in enumerate(segments):
        part = synthesize(
            spec=spec,
            duration=duration,
            ts=ts,
            start_index=start_index,
            stream=stream,
        )
        logger.debug(
            f"Segment {stream}: {len(part)} samples from index {start_index}."
        )
        parts.append(part.samples)
        start_index += len(part)
    return SampledSignal(ts=ts, t0=0.0, samples=np.concatenate(parts))
