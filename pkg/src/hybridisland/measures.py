"""RMS tracking and average rate of change of voltage (ARCV).

ARCV is the total variation of the RMS series over a window divided by the
window length, in pu/s: ``sum |v[i] - v[i-1]| / window``.
"""
import logging
import math
from collections import deque
from typing import Deque, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from hybridisland.errors import (
    EmptySeriesError,
    InsufficientDataError,
    InvalidArgumentError,
)
from hybridisland.model.measures import ArcvValue, RmsSeries
from hybridisland.model.waveform import SampledSignal

logger = logging.getLogger(__name__)

# RMS of a unit-peak sine; dividing by it makes the nominal voltage read 1.0.
UNIT_SINE_RMS = 1.0 / math.sqrt(2.0)


def _samples_per(duration: float, ts: float, name: str) -> int:
    if not duration > 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {duration}.")
    return max(1, int(round(duration / ts)))


def rms_track(signal: SampledSignal, window: float, stride: float) -> RmsSeries:
    """Windowed RMS of ``signal``, one value per ``stride``.

    Each value covers the ``round(window / ts)`` samples ending at its time
    stamp; the first value is emitted once the first full window is available.
    """
    n_window = _samples_per(window, signal.ts, "window")
    n_stride = _samples_per(stride, signal.ts, "stride")
    if n_stride > n_window:
        raise InvalidArgumentError(
            f"stride ({stride} s) must not exceed window ({window} s)."
        )
    if n_window > len(signal):
        raise EmptySeriesError(
            f"RMS window of {n_window} samples does not fit in {len(signal)} samples."
        )
    squares = np.lib.stride_tricks.sliding_window_view(
        np.square(signal.samples), n_window
    )[::n_stride]
    values = np.sqrt(np.maximum(squares.mean(axis=1), 0.0))
    return RmsSeries(
        stride=n_stride * signal.ts,
        t0=signal.t0 + (n_window - 1) * signal.ts,
        values=values,
    )


class RmsTracker:
    """Streaming counterpart of ``rms_track``.

    ``push`` returns an RMS value whenever a stride boundary is reached and a
    full window is buffered; the emission instants match ``rms_track``.
    """

    def __init__(self, ts: float, window: float, stride: float) -> None:
        self._n_window = _samples_per(window, ts, "window")
        self._n_stride = _samples_per(stride, ts, "stride")
        if self._n_stride > self._n_window:
            raise InvalidArgumentError(
                f"stride ({stride} s) must not exceed window ({window} s)."
            )
        self._buffer: Deque[float] = deque(maxlen=self._n_window)
        self._count = 0

    def push(self, sample: float) -> Optional[float]:
        self._buffer.append(sample)
        self._count += 1
        since_full = self._count - self._n_window
        if since_full < 0 or since_full % self._n_stride != 0:
            return None
        buffered = np.fromiter(self._buffer, dtype=np.float64, count=self._n_window)
        return float(np.sqrt(np.mean(np.square(buffered))))

    def track(
        self, samples: Iterable[Tuple[float, float]]
    ) -> Iterator[Tuple[float, float]]:
        for t, sample in samples:
            value = self.push(sample)
            if value is not None:
                yield t, value


def arcv(series: RmsSeries, window: float) -> ArcvValue:
    """ARCV over the last ``window`` seconds of ``series``."""
    if not window > 0:
        raise InvalidArgumentError(f"ARCV window must be > 0, got {window}.")
    n_steps = max(1, int(round(window / series.stride)))
    if len(series) < n_steps + 1:
        raise InsufficientDataError(
            f"ARCV over {window} s needs {n_steps + 1} RMS points, got {len(series)}."
        )
    tail = series.values[-(n_steps + 1) :]
    total_variation = float(np.sum(np.abs(np.diff(tail))))
    return ArcvValue(
        value=total_variation / window,
        window=window,
        t_end=float(series.t0 + (len(series) - 1) * series.stride),
    )


def arcv_track(series: RmsSeries, window: float) -> List[ArcvValue]:
    """ARCV of every full window along ``series``, one value per RMS point."""
    n_steps = max(1, int(round(window / series.stride)))
    values = []
    for end in range(n_steps + 1, len(series) + 1):
        values.append(
            arcv(
                RmsSeries(
                    stride=series.stride, t0=series.t0, values=series.values[:end]
                ),
                window=window,
            )
        )
    return values
