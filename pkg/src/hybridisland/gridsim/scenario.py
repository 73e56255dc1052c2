"""Quasi-static event simulation of the monitored bus voltage.

Every event re-solves the network (or, for faults, applies a dip template)
and moves each bus voltage magnitude toward its new operating point along a
first-order trajectory starting from the value it had at the event. The
monitored waveform is rendered from that envelope with the fundamental
phase held at its pre-event angle, background harmonics proportional to
the fundamental and the 5/4 inter-harmonic content of the event templates.

Inverter DGs are modelled as constant active-power sources and loads as
constant impedances, so an islanded network settles where the load
consumption ``P_demand * V**2`` equals the generation:
``V = sqrt(P_generation / P_demand)`` relative to the island's reference
power flow with the island slack bus at 1 pu.
"""
import logging
import math
from collections import deque
from dataclasses import replace
from fractions import Fraction
from typing import Deque, Dict, Iterator, List, Optional, Tuple

import numpy as np

from hybridisland.errors import ActuatorError, InvalidArgumentError
from hybridisland.gridsim.network import validate_network
from hybridisland.gridsim.powerflow import solve_power_flow
from hybridisland.model.detection import PowerShiftAck, PowerShiftActuator
from hybridisland.model.event import Event, EventKind, EventScript
from hybridisland.model.measures import RmsSeries
from hybridisland.model.network import (
    NetworkModel,
    PowerFlowSnapshot,
    PowerFlowSolution,
)
from hybridisland.model.scenario import (
    EventLogEntry,
    EventTemplates,
    Scenario,
    ScenarioResult,
)
from hybridisland.model.waveform import INTERHARMONIC_ORDER, FloatArray, SampledSignal
from hybridisland.signal import noise_generator, render, sample_count

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 8

# Change below which a re-solved operating point leaves a trajectory alone.
RETARGET_TOLERANCE = 1e-12


class Relaxation:
    """Piecewise first-order trajectory.

    ``retarget(t, target, tau)`` starts a new segment at ``t`` that relaxes
    from the current value toward ``target`` with time constant ``tau``.
    """

    def __init__(self, initial: float) -> None:
        # (start, value at start, target, tau)
        self._segments: List[Tuple[float, float, float, float]] = [
            (-math.inf, initial, initial, 1.0)
        ]

    @property
    def target(self) -> float:
        return self._segments[-1][2]

    def value(self, times: FloatArray) -> FloatArray:
        starts = np.array([segment[0] for segment in self._segments])
        owner = np.searchsorted(starts, times, side="right") - 1
        out = np.empty(len(times), dtype=np.float64)
        for k, (start, value, target, tau) in enumerate(self._segments):
            mask = owner == k
            if not np.any(mask):
                continue
            if k == 0:
                out[mask] = value
            else:
                out[mask] = target + (value - target) * np.exp(
                    -(times[mask] - start) / tau
                )
        return out

    def at(self, t: float) -> float:
        return float(self.value(np.array([t], dtype=np.float64))[0])

    def retarget(self, t: float, target: float, tau: float) -> None:
        if t < self._segments[-1][0]:
            raise InvalidArgumentError(
                f"Trajectory cannot be changed in the past ({t} s)."
            )
        if abs(target - self.target) < RETARGET_TOLERANCE:
            return
        self._segments.append((t, self.at(t), target, tau))


def island_voltage_scale(net: NetworkModel, solution: PowerFlowSolution) -> float:
    """Settled island voltage relative to the reference power flow.

    Returns 0 for an island without generation.
    """
    energized = set(solution.energized)
    generation = sum(
        bus.pg_mw
        for bus in net.buses
        if bus.id in energized and bus.id != net.grid.source_bus
    )
    losses_mw, _ = net.base.power_from_per_unit(solution.losses)
    demand = sum(bus.pl_mw for bus in net.buses if bus.id in energized) + losses_mw
    if not generation > 0:
        return 0.0
    if not demand > 0:
        logger.warning("Island without load; its voltage is held at 1 pu.")
        return 1.0
    return math.sqrt(generation / demand)


class RunningScenario(PowerShiftActuator):
    """Lazily generated scenario record that reacts to power-shift commands.

    Samples are rendered in chunks as they are consumed. A power shift takes
    effect at the command time, or at the first sample not yet rendered if
    that is later; the acknowledgment carries the effective time.
    """

    def __init__(
        self,
        network: NetworkModel,
        script: EventScript,
        monitor_bus: int = 8,
        ts: float = 1.0 / 7680.0,
        duration: float = 0.3,
        templates: EventTemplates = EventTemplates(),
        noise_std: float = 0.0,
        seed: int = 0,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
    ) -> None:
        validate_network(network)
        network.bus(monitor_bus)
        script.validate(duration)
        if chunk_size < 1:
            raise InvalidArgumentError(f"chunk_size must be >= 1, got {chunk_size}.")
        self._net = network
        self._monitor_bus = monitor_bus
        self._ts = ts
        self._duration = duration
        self._templates = templates
        self._noise_std = noise_std
        self._rng = noise_generator(seed) if noise_std > 0 else None
        self._chunk_size = chunk_size
        self._n = sample_count(duration=duration, ts=ts)
        self._values = np.zeros(self._n, dtype=np.float64)
        self._generated = 0
        self._pending: Deque[Event] = deque(script.events)

        self._snapshots: List[PowerFlowSnapshot] = []
        self._log: List[EventLogEntry] = []
        self._acks: List[PowerShiftAck] = []
        self._pre_shift_output: Dict[int, float] = {}

        targets, solution = self._operating_point(0.0, "initial")
        if monitor_bus not in targets:
            raise InvalidArgumentError(f"Monitored bus {monitor_bus} is not energized.")
        self._phase = solution.angle(monitor_bus)
        self._bus_v = {bus_id: Relaxation(v) for bus_id, v in targets.items()}
        # Three-phase dips scale every bus, single-phase dips the monitored channel.
        self._network_dip = Relaxation(1.0)
        self._channel_dip = Relaxation(1.0)
        self._interharmonic = Relaxation(0.0)
        self._bursts: List[Tuple[float, float, float]] = []

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "RunningScenario":
        return cls(
            network=scenario.network,
            script=scenario.script,
            monitor_bus=scenario.monitor_bus,
            ts=scenario.ts,
            duration=scenario.duration,
            templates=scenario.templates,
            noise_std=scenario.noise_std,
            seed=scenario.seed,
        )

    @property
    def network(self) -> NetworkModel:
        return self._net

    @property
    def islanded(self) -> bool:
        return not self._net.breaker_closed

    @property
    def sample_total(self) -> int:
        return self._n

    def samples(self) -> Iterator[Tuple[float, float]]:
        """Yield ``(t, v)`` of the monitored channel, rendering on demand."""
        for k in range(self._n):
            while k >= self._generated:
                self._render_chunk()
            yield k * self._ts, float(self._values[k])

    def apply_power_shift(self, dg_id: int, fraction: float, t: float) -> PowerShiftAck:
        if not 0 < fraction <= 1:
            raise InvalidArgumentError(f"fraction must be in (0, 1], got {fraction}.")
        t_effective = max(t, self._generated * self._ts)
        self._apply_events_until(t_effective, inclusive=True)
        self._shift(dg_id, fraction, t_effective, label="power_shift")
        ack = PowerShiftAck(
            dg_id=dg_id, fraction=fraction, t_command=t, t_effective=t_effective
        )
        self._acks.append(ack)
        self._record(
            t_effective,
            "power_shift_ack",
            f"DG {dg_id} at {fraction:.0%} (commanded at {t:.6f} s).",
        )
        return ack

    def result(self, trajectory_stride: Optional[float] = None) -> ScenarioResult:
        """Finish the record and collect it with the per-bus trajectories."""
        while self._generated < self._n:
            self._render_chunk()
        stride = trajectory_stride or 0.25 / self._net.base.f_base
        times = np.arange(0.0, self._duration, stride, dtype=np.float64)
        network_dip = self._network_dip.value(times)
        bus_rms = {}
        for bus_id, relaxation in self._bus_v.items():
            values = relaxation.value(times) * network_dip
            if bus_id == self._monitor_bus:
                values = values * self._channel_dip.value(times)
            bus_rms[bus_id] = RmsSeries(stride=stride, t0=0.0, values=values)
        return ScenarioResult(
            waveform=SampledSignal(ts=self._ts, t0=0.0, samples=self._values.copy()),
            bus_rms=bus_rms,
            snapshots=list(self._snapshots),
            event_log=list(self._log),
            acks=list(self._acks),
        )

    def _render_chunk(self) -> None:
        k0 = self._generated
        k1 = min(k0 + self._chunk_size, self._n)
        self._apply_events_until(k1 * self._ts, inclusive=False)
        times = np.arange(k0, k1, dtype=np.float64) * self._ts
        fundamental = (
            self._bus_v[self._monitor_bus].value(times)
            * self._network_dip.value(times)
            * self._channel_dip.value(times)
        )
        interharmonic = self._interharmonic.value(times)
        for start, amplitude, tau in self._bursts:
            active = times >= start
            interharmonic[active] += amplitude * np.exp(-(times[active] - start) / tau)
        amplitudes: Dict[Fraction, FloatArray] = {
            Fraction(1): fundamental,
            INTERHARMONIC_ORDER: interharmonic,
        }
        for order, share in self._templates.background.items():
            amplitudes[order] = share * fundamental
        values = render(
            fundamental_hz=self._net.base.f_base,
            times=times,
            amplitudes=amplitudes,
            phases={Fraction(1): self._phase},
        )
        if self._rng is not None:
            values = values + self._noise_std * self._rng.standard_normal(len(times))
        self._values[k0:k1] = values
        self._generated = k1

    def _apply_events_until(self, t: float, inclusive: bool) -> None:
        while self._pending and (
            self._pending[0].t < t or (inclusive and self._pending[0].t == t)
        ):
            self._apply(self._pending.popleft())

    def _apply(self, event: Event) -> None:
        templates = self._templates
        t = event.t
        if event.kind == EventKind.ISLANDING:
            self._net = self._net.with_breaker(False)
            targets, _ = self._operating_point(t, "islanding")
            self._retarget_buses(t, targets, templates.island_tau_s)
            injection = (
                event.injection
                if event.injection is not None
                else templates.island_injection
            )
            self._interharmonic.retarget(
                t, self._interharmonic.target + injection, templates.interharmonic_tau_s
            )
            self._record(t, event.kind.value, "Breaker opened.")
        elif event.kind == EventKind.THREE_PHASE_FAULT:
            depth = event.depth if event.depth is not None else templates.three_phase_depth
            self._network_dip.retarget(t, 1.0 - depth, templates.fault_onset_tau_s)
            self._add_burst(t, event.injection, templates.three_phase_burst)
            self._record(t, event.kind.value, f"Dip to {1.0 - depth:.2f} pu.")
        elif event.kind == EventKind.SINGLE_PHASE_FAULT:
            depth = event.depth if event.depth is not None else templates.single_phase_depth
            self._channel_dip.retarget(t, 1.0 - depth, templates.fault_onset_tau_s)
            self._add_burst(t, event.injection, templates.single_phase_burst)
            self._interharmonic.retarget(
                t,
                self._interharmonic.target + templates.single_phase_interharmonic,
                templates.fault_onset_tau_s,
            )
            self._record(t, event.kind.value, f"Channel dip to {1.0 - depth:.2f} pu.")
        elif event.kind == EventKind.LOAD_DECREASE:
            assert event.bus is not None
            fraction = (
                event.fraction
                if event.fraction is not None
                else templates.load_decrease_fraction
            )
            bus = self._net.bus(event.bus)
            self._net = self._net.with_bus(
                replace(bus, pl_mw=bus.pl_mw * fraction, ql_mvar=bus.ql_mvar * fraction)
            )
            targets, _ = self._operating_point(t, "load_decrease")
            self._retarget_buses(t, targets, templates.load_tau_s)
            self._record(t, event.kind.value, f"Load at bus {bus.id} to {fraction:.0%}.")
        elif event.kind == EventKind.DG_POWER_SHIFT:
            assert event.bus is not None
            fraction = (
                event.fraction
                if event.fraction is not None
                else templates.dg_shift_fraction
            )
            self._shift(event.bus, fraction, t, label="scripted_power_shift")

    def _add_burst(self, t: float, override: Optional[float], default: float) -> None:
        amplitude = override if override is not None else default
        if amplitude > 0:
            self._bursts.append((t, amplitude, self._templates.fault_burst_tau_s))

    def _shift(self, dg_id: int, fraction: float, t: float, label: str) -> None:
        try:
            bus = self._net.bus(dg_id)
        except InvalidArgumentError as ex:
            raise ActuatorError(f"Unknown DG {dg_id}.") from ex
        pre_shift = self._pre_shift_output.setdefault(dg_id, bus.pg_mw)
        if not pre_shift > 0:
            raise ActuatorError(f"DG {dg_id} has no active power to shift.")
        output = fraction * pre_shift
        self._record(t, label, f"DG {dg_id}: {bus.pg_mw:.3f} MW -> {output:.3f} MW.")
        if output == bus.pg_mw:
            return
        self._net = self._net.with_bus(replace(bus, pg_mw=output))
        targets, _ = self._operating_point(t, label)
        tau = self._templates.island_tau_s if self.islanded else self._templates.grid_tau_s
        self._retarget_buses(t, targets, tau)

    def _operating_point(
        self, t: float, label: str
    ) -> Tuple[Dict[int, float], PowerFlowSolution]:
        solution = solve_power_flow(self._net)
        scale: Optional[float] = None
        if self.islanded:
            scale = island_voltage_scale(self._net, solution)
            if scale == 0.0:
                logger.warning(f"Island without generation collapses at t = {t:.4f} s.")
                self._record(t, "collapse", "Island without generation.")
        factor = 1.0 if scale is None else scale
        targets = {
            bus_id: factor * solution.magnitude(bus_id) for bus_id in solution.energized
        }
        self._snapshots.append(
            PowerFlowSnapshot(t=t, label=label, solution=solution, island_scale=scale)
        )
        return targets, solution

    def _retarget_buses(self, t: float, targets: Dict[int, float], tau: float) -> None:
        for bus_id, target in targets.items():
            self._bus_v[bus_id].retarget(t, target, tau)

    def _record(self, t: float, kind: str, message: str) -> None:
        logger.debug(f"t = {t:.6f} s {kind}: {message}")
        self._log.append(EventLogEntry(t=t, kind=kind, message=message))


def run_scenario(
    net: NetworkModel,
    script: EventScript,
    monitor_bus: int = 8,
    ts: float = 1.0 / 7680.0,
    duration: float = 0.3,
    templates: EventTemplates = EventTemplates(),
    noise_std: float = 0.0,
    seed: int = 0,
) -> ScenarioResult:
    running = RunningScenario(
        network=net,
        script=script,
        monitor_bus=monitor_bus,
        ts=ts,
        duration=duration,
        templates=templates,
        noise_std=noise_std,
        seed=seed,
    )
    return running.result()
