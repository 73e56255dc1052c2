import logging
from typing import List, Tuple

import numpy as np
import numpy.typing as npt

from hybridisland.errors import InvalidArgumentError, PowerFlowConvergenceError
from hybridisland.gridsim.network import (
    ComplexMatrix,
    admittance_matrix,
    bus_index,
    energized_buses,
)
from hybridisland.model.network import (
    BranchFlow,
    BusType,
    NetworkModel,
    PowerFlowSolution,
)

logger = logging.getLogger(__name__)

ComplexVector = npt.NDArray[np.complex128]
IndexArray = npt.NDArray[np.int64]


class _Problem:
    """Per-unit power-flow data over the energized part of a network."""

    def __init__(self, net: NetworkModel) -> None:
        self.buses = energized_buses(net)
        index = bus_index(self.buses)
        self.y = admittance_matrix(net, self.buses)
        self.slack = index[net.slack_bus]
        pv, pq = [], []
        for bus_id in self.buses:
            i = index[bus_id]
            if i == self.slack:
                continue
            if net.bus(bus_id).type == BusType.PV:
                pv.append(i)
            else:
                pq.append(i)
        self.pv: IndexArray = np.array(pv, dtype=np.int64)
        self.pq: IndexArray = np.array(pq, dtype=np.int64)
        self.pvpq: IndexArray = np.array(pv + pq, dtype=np.int64)
        self.s_bus = np.array(
            [
                net.base.power_to_per_unit(
                    net.bus(b).pg_mw - net.bus(b).pl_mw,
                    net.bus(b).qg_mvar - net.bus(b).ql_mvar,
                )
                for b in self.buses
            ],
            dtype=np.complex128,
        )
        self.v0 = np.ones(len(self.buses), dtype=np.complex128)
        self.v0[self.slack] = net.bus(net.slack_bus).v_set
        for i in pv:
            self.v0[i] = net.bus(self.buses[i]).v_set
        self.net = net

    def mismatch(self, v: ComplexVector) -> ComplexVector:
        mis: ComplexVector = v * np.conj(self.y @ v) - self.s_bus
        return mis

    def residual(self, v: ComplexVector) -> npt.NDArray[np.float64]:
        mis = self.mismatch(v)
        return np.concatenate([mis[self.pvpq].real, mis[self.pq].imag])

    def solution(
        self, v: ComplexVector, iterations: int, max_mismatch: float
    ) -> PowerFlowSolution:
        injections = v * np.conj(self.y @ v)
        voltages = {bus_id: 0j for bus_id in self.net.bus_ids}
        voltages.update({bus_id: complex(v[i]) for i, bus_id in enumerate(self.buses)})
        return PowerFlowSolution(
            voltages=voltages,
            slack_bus=self.buses[self.slack],
            slack_power=complex(injections[self.slack]),
            losses=complex(np.sum(injections)),
            iterations=iterations,
            converged=True,
            max_mismatch=max_mismatch,
            energized=list(self.buses),
        )


def power_derivatives(
    y: ComplexMatrix, v: ComplexVector
) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """Return ``(dS/dVm, dS/dVa)`` of the bus injections ``S = V conj(Y V)``."""
    current = y @ v
    diag_v = np.diag(v)
    diag_current = np.diag(current)
    diag_v_norm = np.diag(v / np.abs(v))
    ds_dvm = diag_v @ np.conj(y @ diag_v_norm) + np.conj(diag_current) @ diag_v_norm
    ds_dva = 1j * diag_v @ np.conj(diag_current - y @ diag_v)
    return ds_dvm, ds_dva


def solve_power_flow(
    net: NetworkModel, tol: float = 1e-8, max_iterations: int = 50
) -> PowerFlowSolution:
    """Newton-Raphson power flow in polar coordinates.

    The slack is the grid source with the breaker closed and the island
    reference bus otherwise; buses outside the slack's component read 0 V.
    """
    problem = _Problem(net)
    v = problem.v0.copy()
    vm, va = np.abs(v), np.angle(v)
    n_pvpq = len(problem.pvpq)
    for iteration in range(max_iterations + 1):
        f = problem.residual(v)
        max_mismatch = float(np.max(np.abs(f))) if len(f) else 0.0
        logger.debug(f"Newton iteration {iteration}: mismatch {max_mismatch:.3e} pu.")
        if max_mismatch < tol:
            return problem.solution(v, iteration, max_mismatch)
        if iteration == max_iterations:
            break
        ds_dvm, ds_dva = power_derivatives(problem.y, v)
        pvpq, pq = problem.pvpq, problem.pq
        jacobian = np.block(
            [
                [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
                [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
            ]
        )
        try:
            dx = np.linalg.solve(jacobian, -f)
        except np.linalg.LinAlgError as ex:
            raise PowerFlowConvergenceError(
                f"Singular power-flow Jacobian at iteration {iteration}.",
                iterations=iteration,
                max_mismatch=max_mismatch,
            ) from ex
        va[pvpq] += dx[:n_pvpq]
        vm[pq] += dx[n_pvpq:]
        v = vm * np.exp(1j * va)
    raise PowerFlowConvergenceError(
        f"Newton power flow did not converge in {max_iterations} iterations "
        f"(max mismatch {max_mismatch:.3e} pu).",
        iterations=max_iterations,
        max_mismatch=max_mismatch,
    )


def solve_power_flow_gauss_seidel(
    net: NetworkModel,
    tol: float = 1e-10,
    max_sweeps: int = 200_000,
    acceleration: float = 1.4,
    check_every: int = 10,
) -> PowerFlowSolution:
    """Gauss-Seidel power flow for slack and PQ buses."""
    problem = _Problem(net)
    if len(problem.pv):
        raise InvalidArgumentError("Gauss-Seidel solver supports slack and PQ buses only.")
    if not 0 < acceleration < 2:
        raise InvalidArgumentError(
            f"acceleration must be in (0, 2), got {acceleration}."
        )
    y = problem.y
    v = [complex(value) for value in problem.v0]
    s_conj = [complex(value).conjugate() for value in problem.s_bus]
    pq = [int(i) for i in problem.pq]
    neighbors = {
        i: [(j, complex(y[i, j])) for j in range(len(v)) if j != i and y[i, j] != 0]
        for i in pq
    }
    diagonal = {i: complex(y[i, i]) for i in pq}
    max_mismatch = float("inf")
    for sweep in range(1, max_sweeps + 1):
        for i in pq:
            coupling = sum(y_ij * v[j] for j, y_ij in neighbors[i])
            target = (s_conj[i] / v[i].conjugate() - coupling) / diagonal[i]
            v[i] += acceleration * (target - v[i])
        if sweep % check_every == 0 or sweep == max_sweeps:
            f = problem.residual(np.array(v, dtype=np.complex128))
            max_mismatch = float(np.max(np.abs(f))) if len(f) else 0.0
            if max_mismatch < tol:
                logger.debug(f"Gauss-Seidel converged after {sweep} sweeps.")
                return problem.solution(
                    np.array(v, dtype=np.complex128), sweep, max_mismatch
                )
    raise PowerFlowConvergenceError(
        f"Gauss-Seidel power flow did not converge in {max_sweeps} sweeps "
        f"(max mismatch {max_mismatch:.3e} pu).",
        iterations=max_sweeps,
        max_mismatch=max_mismatch,
    )


def branch_flows(net: NetworkModel, solution: PowerFlowSolution) -> List[BranchFlow]:
    flows = []
    for line in net.branches():
        v_from = solution.voltages[line.from_bus]
        v_to = solution.voltages[line.to_bus]
        current = (v_from - v_to) / net.base.impedance_to_per_unit(line.r_ohm, line.l_mh)
        flows.append(
            BranchFlow(
                from_bus=line.from_bus,
                to_bus=line.to_bus,
                s_from=v_from * current.conjugate(),
                s_to=-v_to * current.conjugate(),
            )
        )
    return flows
