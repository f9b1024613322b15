"""CSV export and reload of states, inflow profiles and slot solutions.

Exact values are written as ``p/q`` text, so a reload in exact mode gives
back the very same rationals.
"""

from __future__ import annotations

from collections import defaultdict

from .kinematics import TrafficState, exit_time, state_from_rates
from .network import Scenario
from .piecewise import StepFunction, as_number, snap_points
from .report import read_csv, write_csv
from .solver import LpSolution, discretize

STATE_HEADER = ("link", "time", "A", "D", "x", "w_lagrangian")
INFLOW_HEADER = ("origin", "start", "end", "rate")
SOLUTION_HEADER = ("origin", "slot_start", "slot_end", "q_star", "rho_i")
PRICE_HEADER = ("link", "slot_start", "p_ik")


def state_rows(state: TrafficState) -> list:
    """One row per link and breakpoint of its cumulative curves.

    ``x`` is the departure rate just after ``time``; ``w_lagrangian`` is the
    queueing delay of the commuter reaching the bottleneck at ``time``.
    """
    rows = []
    exact = state.scenario.exact
    for i in state.network.nodes:
        xs = snap_points(set(state.A[i].xs) | set(state.D[i].xs)
                         | set(state.departure_rate[i].breakpoints), exact)
        for s in xs:
            rows.append((i, s, state.A[i](s), state.D[i](s), state.departure_rate[i](s),
                         exit_time(state, i, s) - s))
    return rows


def write_state_csv(path, state: TrafficState):
    return write_csv(path, STATE_HEADER, state_rows(state))


def read_departures_csv(path, exact: bool) -> dict:
    """Departure-rate step functions from a state CSV."""
    series = defaultdict(list)
    for row in read_csv(path):
        series[int(row["link"])].append((as_number(row["time"], exact), as_number(row["x"], exact)))
    out = {}
    for i, pts in series.items():
        pieces = [(a, b, v) for (a, v), (b, _) in zip(pts, pts[1:]) if b > a]
        out[i] = StepFunction.from_pieces(pieces).simplified()
    return out


def write_inflows_csv(path, inflows: dict):
    rows = [(i, a, b, v) for i, f in sorted(inflows.items()) for a, b, v in f.pieces()]
    return write_csv(path, INFLOW_HEADER, rows)


def read_inflows_csv(path, exact: bool) -> dict:
    pieces = defaultdict(list)
    for row in read_csv(path):
        pieces[int(row["origin"])].append(
            tuple(as_number(row[k], exact) for k in ("start", "end", "rate")))
    return {i: StepFunction.from_pieces(p).simplified() for i, p in pieces.items()}


def read_state(scenario: Scenario, state_path, inflow_path) -> TrafficState:
    """Rebuild a state from exported files without re-running the queues."""
    exact = scenario.exact
    return state_from_rates(scenario, read_inflows_csv(inflow_path, exact),
                            read_departures_csv(state_path, exact))


def write_solution_csv(solution_path, price_path, solution: LpSolution):
    net = solution.scenario.network
    rows = [(i, a, b, solution.q_star[(i, k)], solution.rho[i])
            for i in net.nodes for k, (a, b) in enumerate(solution.slots)]
    write_csv(solution_path, SOLUTION_HEADER, rows)
    prices = [(i, a, solution.p[(i, k)]) for i in net.nodes for k, (a, _) in enumerate(solution.slots)]
    write_csv(price_path, PRICE_HEADER, prices)


def read_solution(scenario: Scenario, solution_path, price_path) -> LpSolution:
    """Slot volumes and prices from exported CSVs; objective recomputed."""
    exact = scenario.exact
    ten = discretize(scenario)
    slot_of = {a: k for k, (a, _) in enumerate(ten.slots)}

    def slot(text):
        t = as_number(text, exact)
        if t in slot_of:
            return slot_of[t]
        return min(slot_of.items(), key=lambda kv: abs(kv[0] - t))[1]

    q, rho, p = {}, {}, {}
    for row in read_csv(solution_path):
        i = int(row["origin"])
        q[(i, slot(row["slot_start"]))] = as_number(row["q_star"], exact)
        rho[i] = as_number(row["rho_i"], exact)
    for row in read_csv(price_path):
        p[(int(row["link"]), slot(row["slot_start"]))] = as_number(row["p_ik"], exact)
    net = scenario.network
    zero = 0 * scenario.total_demand
    schedule = sum((ten.slot_cost[k] * v for (i, k), v in q.items()), zero)
    free_flow = sum((net.path_free_flow(i) * v for (i, k), v in q.items()), zero)
    return LpSolution(scenario, ten, q, schedule + free_flow, schedule, free_flow, rho, p, 0, exact)
