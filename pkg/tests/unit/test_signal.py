import math
from fractions import Fraction

import numpy as np
import pytest

from hybridisland.errors import InvalidArgumentError
from hybridisland.model.waveform import (
    HarmonicComponent,
    WaveformSpec,
    format_order,
    parse_order,
)
from hybridisland.signal import render, sample_count, splice, synthesize

TS = 1.0 / 7680.0


def _spec(noise_std: float = 0.0, seed: int = 0) -> WaveformSpec:
    return WaveformSpec(
        components=[
            HarmonicComponent(order=Fraction(1), amplitude=1.0),
            HarmonicComponent(order=Fraction(5, 4), amplitude=0.05, phase=0.3),
        ],
        noise_std=noise_std,
        seed=seed,
    )


class TestOrders:
    def test_parse_order(self) -> None:
        assert parse_order("5/4") == Fraction(5, 4)
        assert parse_order(1.25) == Fraction(5, 4)
        assert parse_order(7) == Fraction(7)

    def test_parse_order__invalid(self) -> None:
        with pytest.raises(InvalidArgumentError):
            parse_order("abc")
        with pytest.raises(InvalidArgumentError):
            parse_order(0)

    def test_format_order(self) -> None:
        assert format_order(Fraction(5, 4)) == "5/4"
        assert format_order(Fraction(3)) == "3"


class TestSynthesize:
    def test_unit_sine(self) -> None:
        spec = WaveformSpec(components=[HarmonicComponent(Fraction(1), 1.0)])
        signal = synthesize(spec, duration=1.0 / 60.0, ts=TS)
        assert len(signal) == 128
        assert signal.samples[0] == pytest.approx(0.0, abs=1e-12)
        assert signal.samples[32] == pytest.approx(1.0, abs=1e-12)
        assert float(np.sqrt(np.mean(signal.samples**2))) == pytest.approx(
            1 / math.sqrt(2), rel=1e-9
        )

    def test_noiseless_is_deterministic(self) -> None:
        first = synthesize(_spec(), duration=0.05, ts=TS)
        second = synthesize(_spec(), duration=0.05, ts=TS)
        np.testing.assert_array_equal(first.samples, second.samples)

    def test_noise_reproducible_with_seed(self) -> None:
        first = synthesize(_spec(noise_std=0.01, seed=7), duration=0.05, ts=TS)
        second = synthesize(_spec(noise_std=0.01, seed=7), duration=0.05, ts=TS)
        other = synthesize(_spec(noise_std=0.01, seed=8), duration=0.05, ts=TS)
        np.testing.assert_array_equal(first.samples, second.samples)
        assert not np.array_equal(first.samples, other.samples)

    def test_noise_level(self) -> None:
        noisy = synthesize(_spec(noise_std=0.01, seed=1), duration=14.0, ts=TS)
        clean = synthesize(_spec(), duration=14.0, ts=TS)
        residual = noisy.samples - clean.samples
        assert len(residual) >= 100_000
        assert float(np.std(residual)) == pytest.approx(0.01, rel=0.05)

    def test_decaying_dc(self) -> None:
        spec = WaveformSpec(dc_amplitude=0.5, dc_decay=10.0)
        signal = synthesize(spec, duration=0.1, ts=TS)
        np.testing.assert_allclose(
            signal.samples, 0.5 * np.exp(-10.0 * signal.times()), rtol=1e-12
        )

    def test_start_index(self) -> None:
        signal = synthesize(_spec(), duration=0.01, ts=TS, start_index=100)
        assert signal.t0 == pytest.approx(100 * TS)

    def test_invalid_duration(self) -> None:
        with pytest.raises(InvalidArgumentError):
            synthesize(_spec(), duration=0.0, ts=TS)
        with pytest.raises(InvalidArgumentError):
            sample_count(duration=TS / 10, ts=TS)

    def test_duration_shorter_than_one_sample(self) -> None:
        with pytest.raises(InvalidArgumentError, match="shorter than one sampling"):
            sample_count(duration=0.6 * TS, ts=TS)
        assert sample_count(duration=TS, ts=TS) == 1
        assert sample_count(duration=1.6 * TS, ts=TS) == 2

    def test_linearity(self) -> None:
        first = WaveformSpec(
            components=[
                HarmonicComponent(Fraction(1), 1.0, phase=0.2),
                HarmonicComponent(Fraction(5), 0.1),
            ],
            dc_amplitude=0.3,
            dc_decay=5.0,
        )
        second = WaveformSpec(
            components=[
                HarmonicComponent(Fraction(5, 4), 0.05, phase=1.1),
                HarmonicComponent(Fraction(7), 0.02),
            ]
        )
        merged = WaveformSpec(
            components=first.components + second.components,
            dc_amplitude=0.3,
            dc_decay=5.0,
        )
        total = (
            synthesize(first, duration=0.1, ts=TS).samples
            + synthesize(second, duration=0.1, ts=TS).samples
        )
        np.testing.assert_allclose(
            synthesize(merged, duration=0.1, ts=TS).samples, total, rtol=0, atol=1e-12
        )


def test_render__envelope_amplitudes() -> None:
    times = np.arange(128, dtype=np.float64) * TS
    envelope = np.linspace(1.0, 0.5, 128)
    values = render(60.0, times, amplitudes={Fraction(1): envelope})
    np.testing.assert_allclose(
        values, envelope * np.sin(2 * math.pi * 60.0 * times), atol=1e-12
    )


class TestSplice:
    def test_continuous_time_index(self) -> None:
        spec = WaveformSpec(components=[HarmonicComponent(Fraction(1), 1.0)])
        spliced = splice([(spec, 0.05), (spec, 0.05)], ts=TS)
        whole = synthesize(spec, duration=0.1, ts=TS)
        np.testing.assert_array_equal(spliced.samples, whole.samples)

    def test_amplitude_step(self) -> None:
        low = WaveformSpec(components=[HarmonicComponent(Fraction(1), 0.5)])
        high = WaveformSpec(components=[HarmonicComponent(Fraction(1), 1.0)])
        spliced = splice([(high, 0.05), (low, 0.05)], ts=TS)
        n = sample_count(0.05, TS)
        assert np.max(np.abs(spliced.samples[:n])) == pytest.approx(1.0, abs=1e-3)
        assert np.max(np.abs(spliced.samples[n:])) == pytest.approx(0.5, abs=1e-3)

    def test_empty(self) -> None:
        with pytest.raises(InvalidArgumentError):
            splice([], ts=TS)
