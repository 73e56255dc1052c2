"""YAML scenario files.

A scenario file is deep-merged over the bundled ``defaults.yaml``; dotted
``key=value`` overrides are merged last. Override values are parsed as YAML
and strings that read as numbers (``inf`` included) become floats.
Configuration errors raise ``ScenarioError`` naming the dotted key and, when
the key comes from a file, its line.
"""
import logging
import math
from contextlib import contextmanager
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import yaml

from hybridisland.errors import (
    InvalidArgumentError,
    NetworkValidationError,
    ScenarioError,
)
from hybridisland.formats.network_table import NetworkTableInput
from hybridisland.gridsim.network import network_from_tables, validate_network
from hybridisland.model.detection import DetectorTiming, Thresholds
from hybridisland.model.estimation import EstimatorConfig, default_process_noise
from hybridisland.model.event import Event, EventKind, EventScript
from hybridisland.model.network import BaseQuantities, GridConnection, NetworkModel
from hybridisland.model.scenario import EventTemplates, Scenario
from hybridisland.model.waveform import parse_order
from hybridisland.types import ConfigDict, ConfigValue, Converter, ParseError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
SCENARIO_DIR = DATA_DIR / "scenarios"
DEFAULTS_FILE = SCENARIO_DIR / "defaults.yaml"
NETWORK_FILE = DATA_DIR / "nine_bus.txt"

CASES = ["case1", "case2", "case3", "case4"]
EVENTS = ["islanding", "three_phase_fault", "single_phase_fault", "load_decrease"]

Location = Tuple[str, int]


def bundled_scenarios() -> List[Path]:
    """The 4 x 4 bundled scenarios, case by case in event order."""
    return [SCENARIO_DIR / f"{case}_{event}.yaml" for case in CASES for event in EVENTS]


def _to_float(value: object) -> float:
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    return float(value)  # type: ignore[arg-type]


def _to_int(value: object) -> int:
    number = _to_float(value)
    if not math.isfinite(number) or number != int(number):
        raise ValueError(f"expected an integer, got {value}")
    return int(number)


def _to_bool(value: object) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def _to_str(value: object) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _optional(convert: Converter) -> Converter:
    def converter(value: object) -> object:
        return None if value is None else convert(value)

    return converter


LEAF_TYPES: Dict[str, Converter] = {
    "name": _optional(_to_str),
    "case": _optional(_to_str),
    "event": _optional(_to_str),
    "duration_s": _to_float,
    "monitor_bus": _to_int,
    "seed": _to_int,
    "noise_std": _to_float,
    "network.file": _optional(_to_str),
    "network.breaker_closed": _to_bool,
    "network.island_slack_bus": _to_int,
    "network.grid.source_bus": _to_int,
    "network.grid.tie_bus": _to_int,
    "network.grid.r_ohm": _to_float,
    "network.grid.l_mh": _to_float,
    "network.bases.v_base": _to_float,
    "network.bases.s_base": _to_float,
    "network.bases.f_base": _to_float,
    "estimator.samples_per_cycle": _to_int,
    "estimator.nominal_f1": _to_float,
    "estimator.process_noise_rotation": _to_float,
    "estimator.process_noise_envelope": _to_float,
    "estimator.measurement_noise_r": _to_float,
    "estimator.initial_covariance_p0": _to_float,
    "estimator.rotation_covariance_p0": _optional(_to_float),
    "estimator.dc_decay_alpha": _to_float,
    "estimator.conjugate_enforcement": _to_bool,
    "estimator.initial_envelope": _to_float,
    "estimator.fundamental_amplitude_q": _to_float,
    "estimator.amplitude_scale": _to_float,
    "thresholds.a75_min": _to_float,
    "thresholds.arcv_max": _to_float,
    "thresholds.arcv_min": _to_float,
    "timing.gate_hold_cycles": _to_float,
    "timing.arcv_window_cycles": _to_float,
    "timing.settle_cycles": _to_float,
    "timing.ack_timeout_cycles": _to_float,
    "timing.deadline_s": _to_float,
    "timing.arming_delay_s": _to_float,
    "timing.dg_id": _to_int,
    "timing.shift_fraction": _to_float,
    "timing.shift_not_before_s": _optional(_to_float),
    "measures.rms_window_cycles": _to_float,
    "measures.rms_stride_cycles": _to_float,
    "templates.grid_tau_s": _to_float,
    "templates.island_tau_s": _to_float,
    "templates.load_tau_s": _to_float,
    "templates.fault_onset_tau_s": _to_float,
    "templates.fault_burst_tau_s": _to_float,
    "templates.interharmonic_tau_s": _to_float,
    "templates.island_injection": _to_float,
    "templates.three_phase_depth": _to_float,
    "templates.three_phase_burst": _to_float,
    "templates.single_phase_depth": _to_float,
    "templates.single_phase_burst": _to_float,
    "templates.single_phase_interharmonic": _to_float,
    "templates.load_decrease_fraction": _to_float,
    "templates.dg_shift_fraction": _to_float,
}

# Mappings whose keys are data (bus ids, harmonic orders) rather than schema.
FREE_MAPPINGS = {"network.load_overrides", "templates.background"}
LOAD_OVERRIDE_KEYS: Dict[str, Converter] = {
    "pl_mw": _to_float,
    "ql_mvar": _to_float,
    "pg_mw": _to_float,
    "qg_mvar": _to_float,
}
EVENT_KEYS: Dict[str, Converter] = {
    "t": _to_float,
    "kind": _to_str,
    "bus": _optional(_to_int),
    "fraction": _optional(_to_float),
    "depth": _optional(_to_float),
    "injection": _optional(_to_float),
}


def deep_merge(base: ConfigDict, override: ConfigDict) -> ConfigDict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_override(item: str) -> Tuple[List[str], object]:
    """Split ``dotted.key=value`` into its key path and parsed value."""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ScenarioError(f"Override '{item}' is not of the form key=value.")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as ex:
        raise ScenarioError(f"Override '{item}' has an unparsable value.") from ex
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            pass
    return key.strip().split("."), value


def apply_overrides(config: ConfigDict, overrides: Sequence[str]) -> ConfigDict:
    for item in overrides:
        path, value = parse_override(item)
        patch: ConfigDict = {path[-1]: value}
        for part in reversed(path[:-1]):
            patch = {part: patch}
        config = deep_merge(config, patch)
    return config


def line_map(path: Path) -> Dict[str, int]:
    """Map every dotted key in a YAML file to its 1-based line."""
    with path.open() as file:
        root = yaml.compose(file)
    lines: Dict[str, int] = {}

    def walk(node: yaml.Node, prefix: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                dotted = f"{prefix}{key_node.value}"
                lines[dotted] = key_node.start_mark.line + 1
                walk(value_node, dotted + ".")
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                dotted = f"{prefix}{i}"
                lines[dotted] = item.start_mark.line + 1
                walk(item, dotted + ".")

    if root is not None:
        walk(root, "")
    return lines


def _load_yaml(path: Path) -> Tuple[ConfigDict, Dict[str, int]]:
    try:
        with path.open() as file:
            data = yaml.safe_load(file)
        lines = line_map(path)
    except OSError as ex:
        raise ScenarioError(f"Cannot read scenario file '{path}': {ex}") from ex
    except yaml.YAMLError as ex:
        mark = getattr(ex, "problem_mark", None)
        raise ScenarioError(
            f"{path.name}: invalid YAML: {getattr(ex, 'problem', ex)}",
            line=None if mark is None else mark.line + 1,
        ) from ex
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{path.name}: top level must be a mapping.", line=1)
    return data, lines


class ScenarioYamlInput:
    def __init__(
        self,
        input_file: Path,
        overrides: Sequence[str] = (),
        defaults_file: Path = DEFAULTS_FILE,
    ) -> None:
        self._input_file = input_file
        defaults, default_lines = _load_yaml(defaults_file)
        data, lines = _load_yaml(input_file)
        self._locations: Dict[str, Location] = {
            key: (defaults_file.name, line) for key, line in default_lines.items()
        }
        self._locations.update(
            {key: (input_file.name, line) for key, line in lines.items()}
        )
        self._config = apply_overrides(deep_merge(defaults, data), overrides)

    def get_config(self) -> ConfigDict:
        return self._config

    def get_scenario(self) -> Scenario:
        self._check_keys(self._config, "")
        with self._section("network"):
            network = self._network()
        with self._section("events"):
            script = EventScript(events=self._events())
        with self._section("templates"):
            templates = EventTemplates(
                background=self._background(), **self._leaves("templates")
            )
        with self._section("estimator"):
            estimator = self._estimator()
        with self._section("thresholds"):
            thresholds = Thresholds(**self._leaves("thresholds"))
        with self._section("timing"):
            timing = DetectorTiming(
                fundamental_hz=network.base.f_base, **self._leaves("timing")
            )
        with self._section("monitor_bus"):
            network.bus(self._value("monitor_bus"))
        with self._section("events"):
            scenario = Scenario(
                name=self._value("name") or self._input_file.stem,
                network=network,
                script=script,
                templates=templates,
                estimator=estimator,
                thresholds=thresholds,
                timing=timing,
                duration=self._value("duration_s"),
                monitor_bus=self._value("monitor_bus"),
                rms_window_cycles=self._value("measures.rms_window_cycles"),
                rms_stride_cycles=self._value("measures.rms_stride_cycles"),
                noise_std=self._value("noise_std"),
                seed=self._value("seed"),
                case=self._value("case"),
                event_label=self._value("event"),
            )
        logger.debug(f"Loaded scenario '{scenario.name}' from '{self._input_file}'.")
        return scenario

    def get_estimator(self) -> EstimatorConfig:
        """Only the estimator section, for runs on recorded waveforms."""
        self._check_keys(self._config, "")
        with self._section("estimator"):
            return self._estimator()

    def _error(self, key: str, message: str) -> ScenarioError:
        location = self._locate(key)
        if location is None:
            return ScenarioError(f"'{key}': {message}")
        file_name, line = location
        return ScenarioError(f"{file_name}: '{key}': {message}", line=line)

    def _locate(self, key: str) -> Optional[Location]:
        parts = key.split(".")
        while parts:
            location = self._locations.get(".".join(parts))
            if location is not None:
                return location
            parts.pop()
        return None

    @contextmanager
    def _section(self, key: str) -> Iterator[None]:
        try:
            yield
        except ScenarioError:
            raise
        except (
            InvalidArgumentError,
            NetworkValidationError,
            ParseError,
            TypeError,
            ValueError,
        ) as ex:
            raise self._error(key, str(ex)) from ex

    def _lookup(self, key: str) -> object:
        node: object = self._config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                raise self._error(key, "missing value")
            node = node[part]
        return node

    def _convert(self, key: str, value: object, convert: Converter) -> ConfigValue:
        try:
            return convert(value)
        except (TypeError, ValueError) as ex:
            raise self._error(key, str(ex)) from ex

    def _value(self, key: str) -> ConfigValue:
        return self._convert(key, self._lookup(key), LEAF_TYPES[key])

    def _leaves(self, section: str) -> ConfigDict:
        """Converted leaf values of a flat section, keyed by field name."""
        prefix = f"{section}."
        return {
            key[len(prefix) :]: self._value(key)
            for key in LEAF_TYPES
            if key.startswith(prefix)
        }

    def _check_keys(self, node: object, prefix: str) -> None:
        if not isinstance(node, dict):
            return
        for key, value in node.items():
            dotted = f"{prefix}{key}"
            if dotted in LEAF_TYPES or dotted in FREE_MAPPINGS or dotted == "events":
                continue
            if not any(known.startswith(dotted + ".") for known in LEAF_TYPES):
                raise self._error(dotted, "unknown key")
            if not isinstance(value, dict):
                raise self._error(dotted, "expected a mapping")
            self._check_keys(value, dotted + ".")

    def _network(self) -> NetworkModel:
        grid = GridConnection(**self._leaves("network.grid"))
        base = BaseQuantities(**self._leaves("network.bases"))
        network_file = self._value("network.file")
        if network_file is None:
            net = network_from_tables(grid=grid, base=base)
        else:
            path = self._input_file.parent / str(network_file)
            if not path.exists():
                path = DATA_DIR / str(network_file)
            try:
                net = NetworkTableInput(input_file=path).get_network()
            except OSError as ex:
                raise self._error("network.file", f"cannot read '{path}'") from ex
        net = replace(
            net,
            breaker_closed=self._value("network.breaker_closed"),
            island_slack_bus=self._value("network.island_slack_bus"),
        )
        overrides = self._lookup("network.load_overrides") or {}
        if not isinstance(overrides, dict):
            raise self._error("network.load_overrides", "expected a mapping")
        for bus_key, fields in overrides.items():
            key = f"network.load_overrides.{bus_key}"
            bus_id = self._convert(key, bus_key, _to_int)
            if not isinstance(fields, dict):
                raise self._error(key, "expected a mapping of load fields")
            changes: ConfigDict = {}
            for field_name, value in fields.items():
                if field_name not in LOAD_OVERRIDE_KEYS:
                    raise self._error(f"{key}.{field_name}", "unknown key")
                changes[field_name] = self._convert(
                    f"{key}.{field_name}", value, LOAD_OVERRIDE_KEYS[field_name]
                )
            with self._section(key):
                net = net.with_bus(replace(net.bus(bus_id), **changes))
        validate_network(net)
        return net

    def _events(self) -> List[Event]:
        raw_events = self._lookup("events") or []
        if not isinstance(raw_events, list):
            raise self._error("events", "expected a list")
        events = []
        for i, raw in enumerate(raw_events):
            key = f"events.{i}"
            if not isinstance(raw, dict):
                raise self._error(key, "expected a mapping")
            fields: ConfigDict = {}
            for field_name, value in raw.items():
                if field_name not in EVENT_KEYS:
                    raise self._error(f"{key}.{field_name}", "unknown key")
                fields[field_name] = self._convert(
                    f"{key}.{field_name}", value, EVENT_KEYS[field_name]
                )
            for required in ("t", "kind"):
                if required not in fields:
                    raise self._error(key, f"missing '{required}'")
            try:
                fields["kind"] = EventKind(fields["kind"])
            except ValueError as ex:
                choices = ", ".join(kind.value for kind in EventKind)
                raise self._error(f"{key}.kind", f"expected one of {choices}") from ex
            with self._section(key):
                events.append(Event(**fields))
        return events

    def _background(self) -> Dict[Fraction, float]:
        raw = self._lookup("templates.background") or {}
        if not isinstance(raw, dict):
            raise self._error("templates.background", "expected a mapping")
        background = {}
        for order, share in raw.items():
            key = f"templates.background.{order}"
            with self._section(key):
                background[parse_order(order)] = _to_float(share)
        return background

    def _estimator(self) -> EstimatorConfig:
        values = self._leaves("estimator")
        samples_per_cycle = values.pop("samples_per_cycle")
        if samples_per_cycle < 1:
            raise self._error("estimator.samples_per_cycle", "must be >= 1")
        values["ts"] = 1.0 / (samples_per_cycle * values["nominal_f1"])
        values["process_noise_q"] = default_process_noise(
            rotation=values.pop("process_noise_rotation"),
            envelope=values.pop("process_noise_envelope"),
        )
        return EstimatorConfig(**values)
