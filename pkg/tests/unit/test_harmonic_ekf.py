import math
from dataclasses import replace
from fractions import Fraction
from typing import Dict, Optional

import numpy as np
import pytest

from hybridisland import harmonic_ekf
from hybridisland.errors import DivergenceError, InvalidArgumentError
from hybridisland.harmonic_ekf import (
    DC_INDEX,
    EVEN,
    ODD,
    HarmonicTracker,
    measure,
    measurement_row,
    to_complex,
    to_real,
    transition,
    transition_jacobian,
    transition_real,
)
from hybridisland.least_squares import fit_window
from hybridisland.model.estimation import (
    STATE_SIZE,
    TRACKED_ORDERS,
    ComplexArray,
    EstimatorConfig,
    EstimatorState,
)
from hybridisland.model.waveform import (
    FloatArray,
    HarmonicComponent,
    SampledSignal,
    WaveformSpec,
)
from hybridisland.signal import synthesize

CONFIG = EstimatorConfig()
CYCLE = 1.0 / 60.0
SAMPLES_PER_CYCLE = 128


def _signal(
    amplitudes: Dict[Fraction, float],
    cycles: float,
    phases: Optional[Dict[Fraction, float]] = None,
    noise_std: float = 0.0,
    seed: int = 0,
    fundamental_hz: float = 60.0,
) -> SampledSignal:
    spec = WaveformSpec(
        fundamental_hz=fundamental_hz,
        components=[
            HarmonicComponent(order, amplitude, (phases or {}).get(order, 0.0))
            for order, amplitude in amplitudes.items()
        ],
        noise_std=noise_std,
        seed=seed,
    )
    return synthesize(spec, duration=cycles * CYCLE, ts=CONFIG.ts)


def _final(tracker: HarmonicTracker, signal: SampledSignal) -> Dict[Fraction, float]:
    estimates = None
    for _, estimates in tracker.track(signal):
        pass
    assert estimates is not None
    return estimates.amplitudes


def _random_state(rng: np.random.Generator) -> ComplexArray:
    x = rng.normal(size=STATE_SIZE) + 1j * rng.normal(size=STATE_SIZE)
    x[0] = (1.0 + 0.01 * rng.normal()) * np.exp(1j * rng.uniform(0.01, 0.5))
    return x


def _random_real_state(rng: np.random.Generator) -> FloatArray:
    r = rng.normal(size=STATE_SIZE)
    r[0] = rng.uniform(0.01, 0.5)
    return r


class TestTransition:
    def test_jacobian_matches_finite_differences(self) -> None:
        rng = np.random.default_rng(0)
        h = 1e-6
        for _ in range(100):
            r = _random_real_state(rng)
            analytic = transition_jacobian(r, 0.999)
            numeric = np.zeros_like(analytic)
            for j in range(STATE_SIZE):
                step = np.zeros(STATE_SIZE)
                step[j] = h
                numeric[:, j] = (
                    transition_real(r + step, 0.999) - transition_real(r - step, 0.999)
                ) / (2 * h)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6)

    def test_full_cycle_rotation_is_identity(self) -> None:
        rng = np.random.default_rng(1)
        x = _random_state(rng)
        x[0] = np.exp(2j * math.pi / SAMPLES_PER_CYCLE)
        rotated = x.copy()
        # Four fundamental cycles are five cycles of the 5/4 order.
        for _ in range(4 * SAMPLES_PER_CYCLE):
            rotated = transition(rotated, 1.0)
        np.testing.assert_allclose(rotated, x, rtol=0, atol=1e-9)

    def test_real_coordinates_follow_the_complex_state(self) -> None:
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = to_complex(_random_real_state(rng))
            np.testing.assert_allclose(
                to_real(transition(x, 0.999)),
                transition_real(to_real(x), 0.999),
                atol=1e-12,
            )

    def test_dc_decays_linearly(self) -> None:
        x = np.zeros(STATE_SIZE, dtype=np.complex128)
        x[0] = 1.0
        x[DC_INDEX] = 2.0
        assert transition(x, 0.5)[DC_INDEX] == pytest.approx(1.0)

    def test_collapsed_rotation(self) -> None:
        x = np.zeros(STATE_SIZE, dtype=np.complex128)
        with pytest.raises(DivergenceError):
            transition(x, 0.999)
        with pytest.raises(DivergenceError):
            to_real(x)


class TestMeasure:
    def test_conjugate_pair_is_sine(self) -> None:
        x = np.zeros(STATE_SIZE, dtype=np.complex128)
        theta = 0.4
        x[EVEN[0]] = 0.8 * np.exp(1j * theta)
        x[ODD[0]] = 0.8 * np.exp(-1j * theta)
        x[DC_INDEX] = 0.1
        assert measure(x) == pytest.approx(0.8 * math.sin(theta) + 0.1)

    def test_real_row_matches_complex_measurement(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(20):
            r = _random_real_state(rng)
            assert float(measurement_row() @ r) == pytest.approx(
                measure(to_complex(r)), abs=1e-12
            )


def test_init() -> None:
    state = harmonic_ekf.init(CONFIG)
    assert state.k == -1
    assert state.x[0] == pytest.approx(np.exp(2j * math.pi * 60.0 * CONFIG.ts))
    np.testing.assert_allclose(state.p, state.p.T)
    assert state.p[0, 0] == pytest.approx(CONFIG.rotation_covariance_p0)
    assert state.p[1, 1] == pytest.approx(CONFIG.initial_covariance_p0)
    estimates = harmonic_ekf.extract(state, CONFIG)
    assert estimates.amplitudes[Fraction(1)] == pytest.approx(CONFIG.initial_envelope)
    assert estimates.f1_est == pytest.approx(60.0)


def test_disabled_conjugate_enforcement() -> None:
    with pytest.raises(InvalidArgumentError, match="conjugate_enforcement"):
        EstimatorConfig(conjugate_enforcement=False)


class TestPredictUpdate:
    def _sine_state(self, amplitude: float, phase: float) -> EstimatorState:
        x = np.zeros(STATE_SIZE, dtype=np.complex128)
        x[0] = np.exp(2j * math.pi * 60.0 * CONFIG.ts)
        x[EVEN[0]] = amplitude * np.exp(1j * phase)
        x[ODD[0]] = amplitude * np.exp(-1j * phase)
        return EstimatorState(x=x, p=harmonic_ekf.init(CONFIG).p, k=0)

    def test_predicted_measurement_is_next_sample(self) -> None:
        state = self._sine_state(0.9, 0.3)
        predicted = harmonic_ekf.predict(state, CONFIG)
        omega_ts = 2 * math.pi * 60.0 * CONFIG.ts
        assert measure(predicted.x) == pytest.approx(
            0.9 * math.sin(omega_ts + 0.3), abs=1e-10
        )
        assert predicted.k == 1

    def test_zero_innovation_keeps_state(self) -> None:
        state = self._sine_state(0.9, 0.3)
        updated = harmonic_ekf.update(state, measure(state.x), CONFIG)
        np.testing.assert_allclose(updated.x, state.x, rtol=0, atol=1e-12)

    def test_lost_frequency_lock(self) -> None:
        state = harmonic_ekf.init(replace(CONFIG, nominal_f1=100.0))
        with pytest.raises(DivergenceError, match="lost lock"):
            harmonic_ekf.update(state, 0.0, CONFIG)


class TestTracking:
    def test_unit_sine(self) -> None:
        tracker = HarmonicTracker(CONFIG)
        estimates = None
        for _, estimates in tracker.track(_signal({Fraction(1): 1.0}, cycles=2)):
            pass
        assert estimates is not None
        assert estimates.amplitudes[Fraction(1)] == pytest.approx(1.0, abs=0.02)
        assert estimates.f1_est == pytest.approx(60.0, abs=0.5)
        assert estimates.interharmonic < 0.005

    def test_phase_is_referenced_to_first_sample(self) -> None:
        tracker = HarmonicTracker(CONFIG)
        estimates = None
        signal = _signal({Fraction(1): 1.0}, cycles=2, phases={Fraction(1): 0.7})
        for _, estimates in tracker.track(signal):
            pass
        assert estimates is not None
        assert estimates.phases[Fraction(1)] == pytest.approx(0.7, abs=0.02)

    def test_interharmonic(self) -> None:
        signal = _signal({Fraction(1): 1.0, Fraction(5, 4): 0.05}, cycles=2)
        amplitudes = _final(HarmonicTracker(CONFIG), signal)
        assert amplitudes[Fraction(5, 4)] == pytest.approx(0.05, abs=0.005)

    def test_amplitude_scale(self) -> None:
        config = EstimatorConfig(amplitude_scale=100.0)
        signal = _signal({Fraction(1): 1.0, Fraction(5, 4): 0.05}, cycles=2)
        amplitudes = _final(HarmonicTracker(config), signal)
        assert amplitudes[Fraction(1)] == pytest.approx(100.0, abs=2.0)
        assert amplitudes[Fraction(5, 4)] == pytest.approx(5.0, abs=0.5)

    def test_dc_is_reported_in_pu(self) -> None:
        config = EstimatorConfig(amplitude_scale=100.0)
        spec = WaveformSpec(
            components=[HarmonicComponent(Fraction(1), 1.0)], dc_amplitude=0.2
        )
        signal = synthesize(spec, duration=3 * CYCLE, ts=config.ts)
        estimates = None
        for _, estimates in HarmonicTracker(config).track(signal):
            pass
        assert estimates is not None
        assert estimates.dc_est == pytest.approx(0.2, abs=0.05)

    def test_zero_signal(self) -> None:
        signal = _signal({Fraction(1): 0.0}, cycles=5)
        amplitudes = _final(HarmonicTracker(CONFIG), signal)
        assert max(amplitudes.values()) < 1e-6

    def test_prediction_residual_vanishes(self) -> None:
        signal = _signal(
            {Fraction(1): 1.0, Fraction(5): 0.1, Fraction(5, 4): 0.05}, cycles=4
        )
        state = harmonic_ekf.init(CONFIG)
        residuals = []
        for k, sample in enumerate(signal.samples):
            predicted = harmonic_ekf.predict(state, CONFIG)
            if k >= 2 * SAMPLES_PER_CYCLE:
                residuals.append(measure(predicted.x) - float(sample))
            state = harmonic_ekf.update(predicted, float(sample), CONFIG)
        assert float(np.sqrt(np.mean(np.square(residuals)))) < 1e-3

    def test_covariance_stays_symmetric_psd(self) -> None:
        signal = _signal(
            {Fraction(1): 1.0, Fraction(3): 0.05, Fraction(5, 4): 0.02},
            cycles=10_000 / SAMPLES_PER_CYCLE,
            noise_std=0.01,
            seed=3,
        )
        state = harmonic_ekf.init(CONFIG)
        for sample in signal.samples:
            state, _ = harmonic_ekf.step(state, float(sample), CONFIG)
        np.testing.assert_allclose(state.p, state.p.T, atol=1e-12)
        assert float(np.min(np.linalg.eigvalsh(state.p))) >= -1e-9
        assert state.k == len(signal) - 1

    @pytest.mark.parametrize("f1", [59.5, 60.5])
    def test_off_nominal_frequency(self, f1: float) -> None:
        signal = _signal(
            {Fraction(1): 1.0, Fraction(5): 0.05}, cycles=5, fundamental_hz=f1
        )
        estimates = None
        for _, estimates in HarmonicTracker(CONFIG).track(signal):
            pass
        assert estimates is not None
        assert estimates.f1_est == pytest.approx(f1, abs=0.01)
        assert estimates.amplitudes[Fraction(1)] == pytest.approx(1.0, abs=0.01)

    def test_noise_keeps_frequency_lock(self) -> None:
        # 40 dB below a unit fundamental over 20 cycles.
        signal = _signal(
            {Fraction(1): 1.0}, cycles=20, noise_std=0.01 / math.sqrt(2), seed=5
        )
        tail = []
        for k, (_, estimates) in enumerate(HarmonicTracker(CONFIG).track(signal)):
            assert 0 < estimates.f1_est < 90.0
            if k >= 18 * SAMPLES_PER_CYCLE:
                tail.append((estimates.f1_est, estimates.amplitudes[Fraction(1)]))
        f1, a1 = np.mean(tail, axis=0)
        assert f1 == pytest.approx(60.0, abs=0.3)
        assert a1 == pytest.approx(1.0, rel=0.01)


class TestOracleAgreement:
    def test_random_in_model_signals(self) -> None:
        rng = np.random.default_rng(42)
        window = 3 * SAMPLES_PER_CYCLE
        for trial in range(100):
            amplitudes = {
                order: float(rng.uniform(0.01, 1.0)) for order in TRACKED_ORDERS
            }
            phases = {
                order: float(rng.uniform(0, 2 * math.pi)) for order in TRACKED_ORDERS
            }
            signal = _signal(amplitudes, cycles=3, phases=phases)
            ekf = _final(HarmonicTracker(CONFIG), signal)
            oracle = fit_window(
                times=signal.times()[-window:],
                samples=signal.samples[-window:],
                fundamental_hz=60.0,
            )
            for order in TRACKED_ORDERS:
                assert ekf[order] == pytest.approx(
                    oracle.amplitudes[order], rel=0.01
                ), f"trial {trial}, order {order}"
                assert ekf[order] == pytest.approx(
                    amplitudes[order], rel=0.02
                ), f"trial {trial}, order {order}"

    @pytest.mark.parametrize("seed", range(10))
    def test_noisy_signals(self, seed: int) -> None:
        # 40 dB below a unit fundamental; estimates averaged over the third cycle.
        rng = np.random.default_rng(100 + seed)
        truth = {order: float(rng.uniform(0.2, 1.0)) for order in TRACKED_ORDERS}
        truth[Fraction(1)] = 1.0
        signal = _signal(truth, cycles=3, noise_std=0.01 / math.sqrt(2), seed=seed)
        tail = []
        for k, (_, estimates) in enumerate(HarmonicTracker(CONFIG).track(signal)):
            if k >= 2 * SAMPLES_PER_CYCLE:
                tail.append(estimates.amplitudes)
        for order, amplitude in truth.items():
            mean = float(np.mean([amplitudes[order] for amplitudes in tail]))
            assert mean == pytest.approx(amplitude, rel=0.05), f"order {order}"


def test_estimator_state_is_not_shared() -> None:
    state = harmonic_ekf.init(CONFIG)
    stepped, _ = harmonic_ekf.step(state, 0.5, CONFIG)
    assert isinstance(stepped, EstimatorState)
    assert state.k == -1
    assert stepped.k == 0
