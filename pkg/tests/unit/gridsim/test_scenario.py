import itertools
import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from hybridisland.errors import ActuatorError, InvalidArgumentError
from hybridisland.formats.scenario_yaml import CASES, SCENARIO_DIR, ScenarioYamlInput
from hybridisland.gridsim.network import network_from_tables
from hybridisland.gridsim.powerflow import solve_power_flow
from hybridisland.gridsim.scenario import (
    Relaxation,
    RunningScenario,
    island_voltage_scale,
    run_scenario,
)
from hybridisland.measures import UNIT_SINE_RMS, arcv, rms_track
from hybridisland.model.event import Event, EventKind, EventScript
from hybridisland.model.measures import RmsSeries
from hybridisland.model.network import NetworkModel

TS = 1.0 / 7680.0
SAMPLES_PER_CYCLE = 128


def _islanding_at(t: float) -> EventScript:
    return EventScript(events=[Event(t=t, kind=EventKind.ISLANDING)])


def _rms_at(running: RunningScenario, t: float, bus: int = 8) -> float:
    series = running.result().bus_rms[bus]
    return float(series.values[int(round(t / series.stride))])


class TestRelaxation:
    def test_constant_until_retarget(self) -> None:
        relaxation = Relaxation(1.0)
        assert relaxation.at(-5.0) == 1.0
        assert relaxation.at(5.0) == 1.0
        assert relaxation.target == 1.0

    def test_first_order_segment(self) -> None:
        relaxation = Relaxation(1.0)
        relaxation.retarget(0.1, 2.0, tau=0.01)
        assert relaxation.at(0.1) == pytest.approx(1.0)
        assert relaxation.at(0.11) == pytest.approx(2.0 - math.exp(-1.0))
        assert relaxation.at(1.0) == pytest.approx(2.0)
        assert relaxation.target == 2.0

    def test_retarget_starts_from_current_value(self) -> None:
        relaxation = Relaxation(1.0)
        relaxation.retarget(0.1, 2.0, tau=0.01)
        midway = relaxation.at(0.11)
        relaxation.retarget(0.11, 0.0, tau=0.02)
        assert relaxation.at(0.11) == pytest.approx(midway)
        assert relaxation.at(0.13) == pytest.approx(midway * math.exp(-1.0))

    def test_unchanged_target_is_ignored(self) -> None:
        relaxation = Relaxation(1.0)
        relaxation.retarget(0.1, 1.0, tau=0.01)
        relaxation.retarget(0.05, 1.0, tau=0.01)
        assert relaxation.at(0.2) == 1.0

    def test_past_retarget(self) -> None:
        relaxation = Relaxation(1.0)
        relaxation.retarget(0.1, 2.0, tau=0.01)
        with pytest.raises(InvalidArgumentError, match="past"):
            relaxation.retarget(0.05, 3.0, tau=0.01)


class TestIslandVoltageScale:
    def test_deficit_lowers_voltage(self) -> None:
        net = network_from_tables().with_breaker(False)
        solution = solve_power_flow(net)
        losses_mw, _ = net.base.power_from_per_unit(solution.losses)
        scale = island_voltage_scale(net, solution)
        assert scale == pytest.approx(math.sqrt(12.5 / (15.5 + losses_mw)))
        assert scale < 1.0

    def test_no_generation(self) -> None:
        net = network_from_tables().with_breaker(False)
        net = replace(net, buses=[replace(bus, pg_mw=0.0) for bus in net.buses])
        assert island_voltage_scale(net, solve_power_flow(net)) == 0.0


class TestRunningScenario:
    def test_empty_script_is_periodic(self) -> None:
        running = RunningScenario(network=network_from_tables(), script=EventScript())
        assert running.sample_total == 2304
        result = running.result()
        values = result.waveform.samples
        np.testing.assert_allclose(
            values[:SAMPLES_PER_CYCLE], values[-SAMPLES_PER_CYCLE:], atol=1e-9
        )
        rms = result.bus_rms[8].values
        np.testing.assert_allclose(rms, rms[0])
        assert result.event_log == []
        assert [snapshot.label for snapshot in result.snapshots] == ["initial"]

    def test_samples_match_result(self) -> None:
        running = RunningScenario(
            network=network_from_tables(), script=_islanding_at(0.1)
        )
        streamed = np.array([v for _, v in running.samples()])
        np.testing.assert_array_equal(streamed, running.result().waveform.samples)

    def test_full_output_shift_changes_nothing(self) -> None:
        net = network_from_tables()
        reference = RunningScenario(network=net, script=_islanding_at(0.1)).result()
        running = RunningScenario(network=net, script=_islanding_at(0.1))
        list(itertools.islice(running.samples(), 1000))
        running.apply_power_shift(8, 1.0, t=1000 * TS)
        np.testing.assert_allclose(
            running.result().waveform.samples, reference.waveform.samples, atol=1e-12
        )

    def test_effective_time_is_first_unrendered_sample(self) -> None:
        running = RunningScenario(network=network_from_tables(), script=EventScript())
        list(itertools.islice(running.samples(), 100))
        ack = running.apply_power_shift(8, 0.5, t=0.0)
        assert ack.t_command == 0.0
        assert ack.t_effective == pytest.approx(104 * TS)
        assert running.result().acks == [ack]

    def test_unknown_dg(self) -> None:
        running = RunningScenario(network=network_from_tables(), script=EventScript())
        with pytest.raises(ActuatorError, match="Unknown DG"):
            running.apply_power_shift(42, 0.12, t=0.0)

    def test_dg_without_output(self) -> None:
        running = RunningScenario(network=network_from_tables(), script=EventScript())
        with pytest.raises(ActuatorError, match="no active power"):
            running.apply_power_shift(9, 0.12, t=0.0)

    @pytest.mark.parametrize("case", CASES)
    def test_power_shift_response(self, case: str) -> None:
        scenario = ScenarioYamlInput(
            input_file=SCENARIO_DIR / f"{case}_islanding.yaml"
        ).get_scenario()
        timing = scenario.timing
        for islanded in (False, True):
            script = _islanding_at(0.05) if islanded else EventScript()
            running = RunningScenario(
                network=scenario.network,
                script=script,
                duration=0.4,
                templates=scenario.templates,
            )
            list(itertools.islice(running.samples(), int(0.2 / TS)))
            ack = running.apply_power_shift(
                timing.dg_id, timing.shift_fraction, t=0.2
            )
            assert running.islanded == islanded
            series = rms_track(
                running.result().waveform, window=1 / 60, stride=1 / 240
            ).normalized(UNIT_SINE_RMS)
            end = ack.t_effective + timing.settle + timing.arcv_window
            head = series.values[series.times() <= end + 1e-9]
            value = arcv(
                RmsSeries(stride=series.stride, t0=series.t0, values=head),
                window=timing.arcv_window,
            ).value
            if islanded:
                assert value >= scenario.thresholds.arcv_min
            else:
                assert value < scenario.thresholds.arcv_min

    def test_islanding_is_logged(self) -> None:
        running = RunningScenario(
            network=network_from_tables(), script=_islanding_at(0.1)
        )
        result = running.result()
        assert [entry.kind for entry in result.event_log] == ["islanding"]
        assert [snapshot.label for snapshot in result.snapshots] == [
            "initial",
            "islanding",
        ]
        assert result.snapshots[-1].island_scale is not None
        assert running.islanded

    def test_three_phase_fault_dip(self) -> None:
        script = EventScript(
            events=[Event(t=0.1, kind=EventKind.THREE_PHASE_FAULT, depth=0.5)]
        )
        running = RunningScenario(network=network_from_tables(), script=script)
        before = _rms_at(running, 0.05)
        after = _rms_at(running, 0.25)
        assert after == pytest.approx(0.5 * before, rel=1e-6)
        # Three-phase dips reach every bus.
        assert _rms_at(running, 0.25, bus=4) == pytest.approx(
            0.5 * _rms_at(running, 0.05, bus=4), rel=1e-6
        )

    def test_single_phase_fault_dips_the_monitored_channel(self) -> None:
        script = EventScript(
            events=[Event(t=0.1, kind=EventKind.SINGLE_PHASE_FAULT, depth=0.3)]
        )
        running = RunningScenario(network=network_from_tables(), script=script)
        assert _rms_at(running, 0.25) == pytest.approx(
            0.7 * _rms_at(running, 0.05), rel=1e-6
        )
        assert _rms_at(running, 0.25, bus=4) == pytest.approx(
            _rms_at(running, 0.05, bus=4)
        )

    def test_load_decrease_raises_voltage(self) -> None:
        script = EventScript(
            events=[Event(t=0.1, kind=EventKind.LOAD_DECREASE, bus=4, fraction=0.1)]
        )
        running = RunningScenario(network=network_from_tables(), script=script)
        assert _rms_at(running, 0.25) > _rms_at(running, 0.05)
        assert running.network.bus(4).pl_mw == pytest.approx(0.53)

    def test_island_without_generation_collapses(
        self, caplog: pytest.LogCaptureFixture
    ) -> None:
        net = network_from_tables()
        net = replace(net, buses=[replace(bus, pg_mw=0.0) for bus in net.buses])
        running = RunningScenario(network=net, script=_islanding_at(0.1))
        with caplog.at_level(logging.WARNING):
            result = running.result()
        assert "collapses" in caplog.text
        assert "collapse" in [entry.kind for entry in result.event_log]
        assert result.bus_rms[8].values[-1] < 0.05 * result.bus_rms[8].values[0]

    def test_event_outside_record(self) -> None:
        with pytest.raises(InvalidArgumentError, match="outside"):
            RunningScenario(
                network=network_from_tables(), script=_islanding_at(0.5), duration=0.3
            )

    def test_unknown_monitor_bus(self) -> None:
        with pytest.raises(InvalidArgumentError):
            RunningScenario(
                network=network_from_tables(), script=EventScript(), monitor_bus=42
            )

    def test_noise_is_seeded(self) -> None:
        net: NetworkModel = network_from_tables()
        first = run_scenario(net, EventScript(), noise_std=0.01, seed=4)
        second = run_scenario(net, EventScript(), noise_std=0.01, seed=4)
        clean = run_scenario(net, EventScript())
        np.testing.assert_array_equal(first.waveform.samples, second.waveform.samples)
        residual = first.waveform.samples - clean.waveform.samples
        assert float(np.std(residual)) == pytest.approx(0.01, rel=0.1)
