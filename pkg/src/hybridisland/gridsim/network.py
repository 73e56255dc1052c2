"""Nine-bus distribution test network.

Line data (resistance in ohm, inductance in mH) and bus load/generation data
of the radial feeder with three inverter-based DGs at buses 8, 10 and 11 and
a fixed 5 Mvar capacitor at bus 6. The utility is modelled as source bus 1
behind a breaker tied to bus 3, the head of the feeder.
"""
import logging
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np
import numpy.typing as npt

from hybridisland.errors import NetworkValidationError
from hybridisland.model.network import (
    BaseQuantities,
    Bus,
    BusType,
    GridConnection,
    Line,
    NetworkModel,
)

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]

# (from, to, R ohm, L mH)
LINE_TABLE: List[Tuple[int, int, float, float]] = [
    (3, 4, 1.3825, 2.62),
    (4, 5, 0.18825, 0.262),
    (5, 6, 0.11295, 0.1572),
    (6, 7, 0.26355, 0.3668),
    (7, 8, 0.09036, 0.12576),
    (7, 9, 1.09185, 1.5196),
    (9, 10, 0.33885, 0.4716),
    (10, 11, 0.3765, 0.524),
]

# (bus, PG MW, QG Mvar, PL MW, QL Mvar)
BUS_TABLE: List[Tuple[int, float, float, float, float]] = [
    (3, 0.0, 0.0, 1.5, 0.0),
    (4, 0.0, 0.0, 5.3, 0.0),
    (5, 0.0, 0.0, 1.0, 0.0),
    (6, 0.0, 5.0, 0.7, 0.0),
    (7, 0.0, 0.0, 5.0, 4.0),
    (8, 6.0, 0.0, 0.0, 0.0),
    (9, 0.0, 0.0, 2.0, 0.0),
    (10, 1.5, 0.0, 0.0, 0.0),
    (11, 5.0, 0.0, 0.0, 0.0),
]


def network_from_tables(
    grid: GridConnection = GridConnection(),
    base: BaseQuantities = BaseQuantities(),
) -> NetworkModel:
    """Build the built-in network, grid-connected."""
    buses = [Bus(id=grid.source_bus, type=BusType.SLACK)]
    buses += [
        Bus(id=bus_id, pg_mw=pg, qg_mvar=qg, pl_mw=pl, ql_mvar=ql)
        for bus_id, pg, qg, pl, ql in BUS_TABLE
    ]
    lines = [Line(*row) for row in LINE_TABLE]
    net = NetworkModel(buses=buses, lines=lines, grid=grid, base=base)
    validate_network(net)
    return net


def graph(net: NetworkModel) -> nx.Graph:
    """Topology of the energizable network in its current breaker state."""
    g: nx.Graph = nx.Graph()
    g.add_nodes_from(net.bus_ids)
    g.add_edges_from((line.from_bus, line.to_bus) for line in net.branches())
    return g


def energized_buses(net: NetworkModel) -> List[int]:
    """Buses connected to the active slack, in network order."""
    component = nx.node_connected_component(graph(net), net.slack_bus)
    return [bus_id for bus_id in net.bus_ids if bus_id in component]


def validate_network(net: NetworkModel) -> None:
    ids = net.bus_ids
    if len(set(ids)) != len(ids):
        raise NetworkValidationError(f"Duplicate bus ids in {ids}.")
    known = set(ids)
    for line in net.lines + [net.grid.tie_line()]:
        for bus_id in (line.from_bus, line.to_bus):
            if bus_id not in known:
                raise NetworkValidationError(
                    f"Line {line.from_bus}-{line.to_bus} references unknown bus {bus_id}."
                )
    pairs = [frozenset((line.from_bus, line.to_bus)) for line in net.lines]
    if len(set(pairs)) != len(pairs):
        raise NetworkValidationError("Parallel lines are not supported.")

    slacks = [bus.id for bus in net.buses if bus.type == BusType.SLACK]
    if slacks != [net.grid.source_bus]:
        raise NetworkValidationError(
            f"Exactly one slack bus, the grid source {net.grid.source_bus}, "
            f"is required; found {slacks}."
        )
    if net.island_slack_bus not in known:
        raise NetworkValidationError(
            f"Island reference bus {net.island_slack_bus} does not exist."
        )
    closed = net.with_breaker(True)
    if not nx.is_connected(graph(closed)):
        parts = [sorted(c) for c in nx.connected_components(graph(closed))]
        raise NetworkValidationError(
            f"Network is not connected with the breaker closed: {parts}."
        )


def bus_index(buses: List[int]) -> Dict[int, int]:
    return {bus_id: i for i, bus_id in enumerate(buses)}


def admittance_matrix(net: NetworkModel, buses: List[int]) -> ComplexMatrix:
    """Bus admittance matrix (pu) over ``buses``; lines have no shunt branch."""
    index = bus_index(buses)
    y = np.zeros((len(buses), len(buses)), dtype=np.complex128)
    for line in net.branches():
        if line.from_bus not in index or line.to_bus not in index:
            continue
        i, j = index[line.from_bus], index[line.to_bus]
        y_series = 1.0 / net.base.impedance_to_per_unit(line.r_ohm, line.l_mh)
        y[i, i] += y_series
        y[j, j] += y_series
        y[i, j] -= y_series
        y[j, i] -= y_series
    return y
