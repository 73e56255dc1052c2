"""Plain-text network tables.

The file has ``[bases]``, ``[grid]``, ``[buses]`` and ``[lines]`` sections.
Bases and grid hold ``name value`` pairs; buses and lines are whitespace
separated tables with a header row (``bus PG_MW QG_Mvar PL_MW QL_Mvar`` and
``from to R_ohm L_mH``). ``#`` starts a comment.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from hybridisland.errors import NetworkValidationError
from hybridisland.gridsim.network import validate_network
from hybridisland.gridsim.powerflow import branch_flows
from hybridisland.model.network import (
    BaseQuantities,
    Bus,
    BusType,
    GridConnection,
    Line,
    NetworkModel,
    PowerFlowSnapshot,
    PowerFlowSolution,
)
from hybridisland.types import ParseError

logger = logging.getLogger(__name__)

BUS_HEADER = ["bus", "PG_MW", "QG_Mvar", "PL_MW", "QL_Mvar"]
LINE_HEADER = ["from", "to", "R_ohm", "L_mH"]
BASES_KEYS = {"v_base_V": "v_base", "s_base_VA": "s_base", "f_base_Hz": "f_base"}
GRID_KEYS = {
    "source_bus": "source_bus",
    "tie_bus": "tie_bus",
    "R_ohm": "r_ohm",
    "L_mH": "l_mh",
}

Row = Tuple[int, List[str]]


class NetworkTableInput:
    def __init__(self, input_file: Path) -> None:
        self._input_file = input_file

    def get_network(self) -> NetworkModel:
        sections = self._read_sections()
        for required in ("buses", "lines"):
            if required not in sections:
                raise ParseError(
                    f"Missing [{required}] section in '{self._input_file}'."
                )
        bases = _pairs(sections.get("bases", []), BASES_KEYS)
        grid_values = _pairs(
            sections.get("grid", []),
            dict(GRID_KEYS, island_slack_bus="island_slack_bus"),
        )
        island_slack_bus = int(grid_values.pop("island_slack_bus", 8))
        grid = GridConnection(
            source_bus=int(grid_values.pop("source_bus", 1)),
            tie_bus=int(grid_values.pop("tie_bus", 3)),
            **grid_values,
        )
        buses = [Bus(id=grid.source_bus, type=BusType.SLACK)]
        for line_no, tokens in _table(sections["buses"], BUS_HEADER):
            bus_id, pg, qg, pl, ql = _numbers(line_no, tokens, len(BUS_HEADER))
            buses.append(
                Bus(id=int(bus_id), pg_mw=pg, qg_mvar=qg, pl_mw=pl, ql_mvar=ql)
            )
        lines = []
        for line_no, tokens in _table(sections["lines"], LINE_HEADER):
            from_bus, to_bus, r_ohm, l_mh = _numbers(line_no, tokens, len(LINE_HEADER))
            try:
                lines.append(Line(int(from_bus), int(to_bus), r_ohm, l_mh))
            except NetworkValidationError as ex:
                raise ParseError(f"line {line_no}: {ex}") from ex
        net = NetworkModel(
            buses=buses,
            lines=lines,
            grid=grid,
            base=BaseQuantities(**bases),
            island_slack_bus=island_slack_bus,
        )
        validate_network(net)
        logger.debug(
            f"Loaded {len(buses)} buses and {len(lines)} lines from '{self._input_file}'."
        )
        return net

    def _read_sections(self) -> Dict[str, List[Row]]:
        sections: Dict[str, List[Row]] = {}
        current = None
        with self._input_file.open() as file:
            for line_no, raw in enumerate(file, start=1):
                text = raw.split("#", 1)[0].strip()
                if not text:
                    continue
                if text.startswith("[") and text.endswith("]"):
                    current = text[1:-1].strip().lower()
                    sections[current] = []
                    continue
                if current is None:
                    raise ParseError(f"line {line_no}: content before the first section.")
                sections[current].append((line_no, text.split()))
        return sections


class NetworkTableOutput:
    def __init__(self, output_file: Path) -> None:
        self._output_file = output_file

    def save(self, net: NetworkModel) -> None:
        self._output_file.parent.mkdir(parents=True, exist_ok=True)
        rows = ["[bases]"]
        for name, attr in BASES_KEYS.items():
            rows.append(f"{name} {getattr(net.base, attr)!r}")
        rows += ["", "[grid]"]
        for name, attr in GRID_KEYS.items():
            rows.append(f"{name} {getattr(net.grid, attr)!r}")
        rows.append(f"island_slack_bus {net.island_slack_bus}")
        rows += ["", "[buses]", " ".join(BUS_HEADER)]
        for bus in net.buses:
            if bus.id == net.grid.source_bus:
                continue
            rows.append(
                f"{bus.id} {bus.pg_mw!r} {bus.qg_mvar!r} {bus.pl_mw!r} {bus.ql_mvar!r}"
            )
        rows += ["", "[lines]", " ".join(LINE_HEADER)]
        for line in net.lines:
            rows.append(f"{line.from_bus} {line.to_bus} {line.r_ohm!r} {line.l_mh!r}")
        self._output_file.write_text("\n".join(rows) + "\n")


def format_power_flow(net: NetworkModel, solution: PowerFlowSolution) -> str:
    """Per-bus voltage table with losses and iteration count."""
    rows = [f"{'bus':>5} {'|V| pu':>10} {'angle deg':>10}"]
    for bus_id in net.bus_ids:
        rows.append(
            f"{bus_id:>5} {solution.magnitude(bus_id):>10.6f} "
            f"{math.degrees(solution.angle(bus_id)):>10.4f}"
        )
    loss_p, loss_q = net.base.power_from_per_unit(solution.losses)
    slack_p, slack_q = net.base.power_from_per_unit(solution.slack_power)
    rows.append("")
    rows.append(f"slack bus {solution.slack_bus}: {slack_p:.6f} MW, {slack_q:.6f} Mvar")
    rows.append(f"total losses: {loss_p:.6f} MW, {loss_q:.6f} Mvar")
    rows.append(
        f"iterations: {solution.iterations}, max mismatch: {solution.max_mismatch:.3e} pu"
    )
    flows = branch_flows(net, solution)
    rows.append("")
    rows.append(f"{'from':>5} {'to':>5} {'P MW':>10} {'Q Mvar':>10} {'loss kW':>10}")
    for flow in flows:
        p, q = net.base.power_from_per_unit(flow.s_from)
        loss, _ = net.base.power_from_per_unit(flow.loss)
        rows.append(
            f"{flow.from_bus:>5} {flow.to_bus:>5} {p:>10.4f} {q:>10.4f} {loss * 1e3:>10.3f}"
        )
    return "\n".join(rows)


def format_snapshots(net: NetworkModel, snapshots: Sequence[PowerFlowSnapshot]) -> str:
    """The operating points a scenario went through, one block per solve."""
    blocks = []
    for snapshot in snapshots:
        solution = snapshot.solution
        loss_p, _ = net.base.power_from_per_unit(solution.losses)
        header = (
            f"t = {snapshot.t:.6f} s  {snapshot.label}: slack bus {solution.slack_bus}, "
            f"{solution.iterations} iterations, losses {loss_p:.6f} MW"
        )
        if snapshot.island_scale is not None:
            header += f", island voltage scale {snapshot.island_scale:.6f}"
        rows = [header]
        for bus_id in sorted(solution.voltages):
            if bus_id in solution.energized:
                rows.append(
                    f"{bus_id:>5} {solution.magnitude(bus_id):>10.6f} "
                    f"{math.degrees(solution.angle(bus_id)):>10.4f}"
                )
            else:
                rows.append(f"{bus_id:>5} {'off':>10}")
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks)


def _pairs(rows: List[Row], keys: Dict[str, str]) -> Dict[str, float]:
    values = {}
    for line_no, tokens in rows:
        if len(tokens) != 2 or tokens[0] not in keys:
            raise ParseError(
                f"line {line_no}: expected one of {sorted(keys)} followed by a value."
            )
        try:
            values[keys[tokens[0]]] = float(tokens[1])
        except ValueError as ex:
            raise ParseError(f"line {line_no}: '{tokens[1]}' is not a number.") from ex
    return values


def _table(rows: List[Row], header: List[str]) -> List[Row]:
    if not rows or rows[0][1] != header:
        line_no = rows[0][0] if rows else 0
        raise ParseError(f"line {line_no}: expected header '{' '.join(header)}'.")
    return rows[1:]


def _numbers(line_no: int, tokens: List[str], count: int) -> List[float]:
    if len(tokens) != count:
        raise ParseError(f"line {line_no}: expected {count} columns, got {len(tokens)}.")
    try:
        return [float(token) for token in tokens]
    except ValueError as ex:
        raise ParseError(f"line {line_no}: non-numeric value in {tokens}.") from ex
