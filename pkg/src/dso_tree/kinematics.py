"""Point-queue dynamics on a tree, destination-time views, feasibility and cost.

The simulated state is Eulerian (clock time ``s``): arrival rate ``u_i`` at
bottleneck ``i``, departure rate ``x_i`` and their cumulative curves ``A_i``
and ``D_i``.  The Lagrangian view indexes everything by the destination
arrival time ``t`` of the commuters concerned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from .errors import DemandError, DomainError, NonMonotoneError
from .network import ROOT, Scenario
from .piecewise import (
    INF,
    SNAP,
    CumulativeCurve,
    PiecewiseLinear,
    StepFunction,
    is_exact,
    snap_points,
)

log = logging.getLogger(__name__)

TOL = 1e-9
TOL_STRICT = 1e-9


def point_queue(u: StepFunction, mu) -> StepFunction:
    """Departure rate of a point queue with capacity ``mu`` fed at rate ``u``."""
    pieces = []
    queue = 0 * mu
    for a, b, r in u.pieces():
        if queue > 0 or r > mu:
            if r >= mu:
                pieces.append((a, b, mu))
                queue += (r - mu) * (b - a)
                continue
            te = a + queue / (mu - r)
            if te <= a:
                pieces.append((a, b, r))
                queue = 0 * mu
            elif te < b:
                pieces.append((a, te, mu))
                pieces.append((te, b, r))
                queue = 0 * mu
            else:
                pieces.append((a, b, mu))
                queue = max(0 * mu, queue - (mu - r) * (b - a))
        else:
            pieces.append((a, b, r))
    if queue > 0:
        end = u.breakpoints[-1]
        tail = end + queue / mu
        if tail > end:
            pieces.append((end, tail, mu))
    return StepFunction.from_pieces(pieces).simplified()


@dataclass(frozen=True)
class TrafficState:
    """Eulerian traffic state; build with :func:`simulate` or :func:`state_from_rates`."""

    scenario: Scenario
    inflows: Mapping[int, StepFunction]
    arrival_rate: Mapping[int, StepFunction]
    departure_rate: Mapping[int, StepFunction]
    A: Mapping[int, CumulativeCurve] = field(default_factory=dict)
    D: Mapping[int, CumulativeCurve] = field(default_factory=dict)

    def __post_init__(self):
        if not self.A:
            object.__setattr__(self, "A", {i: f.cumulative() for i, f in self.arrival_rate.items()})
        if not self.D:
            object.__setattr__(self, "D", {i: f.cumulative() for i, f in self.departure_rate.items()})

    @property
    def network(self):
        return self.scenario.network

    @property
    def volume_eps(self):
        """Queue volume treated as zero (0 for exact states)."""
        eps = self.__dict__.get("_volume_eps")
        if eps is None:
            sc = self.scenario
            exact = sc.exact and all(f.exact for f in self.inflows.values())
            eps = 0 if exact else 1e-12 * max(1.0, float(sc.total_demand))
            object.__setattr__(self, "_volume_eps", eps)
        return eps

    def queue_length(self, i, s):
        return self.A[i](s) - self.D[i](s)

    def destination_rate(self) -> StepFunction:
        net = self.network
        return StepFunction.combine([self.departure_rate[j] for j in net.root_children])

    def arrival_span(self):
        """(first, last) destination arrival times, or None with no flow."""
        spans = [self.departure_rate[j].support() for j in self.network.root_children]
        spans = [s for s in spans if s is not None]
        if not spans:
            return None
        return min(s[0] for s in spans), max(s[1] for s in spans)

    def max_queue(self):
        worst = 0
        for i in self.network.nodes:
            xs = snap_points(set(self.A[i].xs) | set(self.D[i].xs))
            for s in xs:
                worst = max(worst, self.queue_length(i, s))
        return worst


def _arrival_rate(net, i, inflow: StepFunction, departure: Mapping[int, StepFunction]) -> StepFunction:
    d = net.free_flow[i]
    parts = [inflow.shift(d)] + [departure[j].shift(d) for j in net.children[i]]
    return StepFunction.combine(parts)


def _check_inflows(scenario: Scenario, inflows: Mapping[int, StepFunction]):
    net = scenario.network
    for i in net.nodes:
        f = inflows.get(i, StepFunction())
        if f.values and f.min_value() < 0:
            raise DomainError(f"origin {i} has a negative inflow rate")
        total = f.integral()
        q = scenario.demand[i]
        exact = is_exact(total, q)
        if (total != q) if exact else abs(total - q) > TOL * max(1.0, abs(q)):
            raise DemandError(f"origin {i}: inflow integrates to {total}, demand is {q}")
        span = f.support()
        if span is None:
            continue
        lo, hi = scenario.entry_window(i)
        slack = 0 if exact else SNAP * max(1.0, abs(lo), abs(hi)) * 10
        if span[0] < lo - slack or span[1] > hi + slack:
            raise DomainError(
                f"origin {i}: inflow on [{span[0]}, {span[1]}] leaves entry window [{lo}, {hi}]"
            )


def simulate(scenario: Scenario, origin_inflows: Mapping[int, StepFunction] | None = None,
             *, validate: bool = True) -> TrafficState:
    """Propagate origin inflows through the tree, leaves first.

    ``origin_inflows[i]`` is the rate at which commuters enter the network at
    node ``i``; they reach bottleneck ``i`` after ``d_i``, as do departures
    from the child bottlenecks of ``i``.
    """
    if origin_inflows is None:
        origin_inflows = scenario.inflows or {}
    net = scenario.network
    inflows = {i: origin_inflows.get(i, StepFunction()) for i in net.nodes}
    if validate:
        _check_inflows(scenario, inflows)
    arrival, departure = {}, {}
    for i in net.order:
        arrival[i] = _arrival_rate(net, i, inflows[i], departure)
        departure[i] = point_queue(arrival[i], net.capacity[i])
    return TrafficState(scenario, inflows, arrival, departure)


def state_from_rates(scenario: Scenario, inflows: Mapping[int, StepFunction],
                     departure_rates: Mapping[int, StepFunction]) -> TrafficState:
    """Assemble a state from given departure rates without queue dynamics.

    Arrival rates still follow node conservation; nothing forces the
    departures to respect the point-queue law, so the result may be
    infeasible.  Used to build counterexamples.
    """
    net = scenario.network
    inflows = {i: inflows.get(i, StepFunction()) for i in net.nodes}
    departure = {i: departure_rates.get(i, StepFunction()) for i in net.nodes}
    arrival = {i: _arrival_rate(net, i, inflows[i], departure) for i in net.order}
    return TrafficState(scenario, inflows, arrival, departure)


def exit_time(state: TrafficState, i, s):
    """Time at which the commuter reaching bottleneck ``i`` at ``s`` leaves it."""
    v = state.A[i](s)
    if v - state.D[i](s) <= state.volume_eps:
        return s
    return max(s, state.D[i].inverse_left(v))


def push_forward(state: TrafficState, i, s):
    """Destination arrival time of a commuter reaching bottleneck ``i`` at ``s``."""
    net = state.network
    while True:
        s = exit_time(state, i, s)
        p = net.parent[i]
        if p == ROOT:
            return s
        s = s + net.free_flow[p]
        i = p


def trace_back(state: TrafficState, t) -> tuple[dict, dict]:
    """Bottleneck arrival and departure times of commuters reaching the
    destination at ``t``; returns ``(tau, sigma)`` keyed by link."""
    net = state.network
    eps = state.volume_eps
    tau, sigma = {}, {}
    for i in reversed(net.order):
        p = net.parent[i]
        s = t if p == ROOT else tau[p] - net.free_flow[p]
        sigma[i] = s
        v = state.D[i](s)
        if state.A[i](s) - v <= eps:
            tau[i] = s
        else:
            tau[i] = min(s, state.A[i].inverse_right(v))
    return tau, sigma


@dataclass(frozen=True)
class LagrangianView:
    """Trip variables as functions of destination arrival time on ``times``.

    ``q[i]`` is constant on each grid interval; ``cumulative[i][k]`` counts
    origin-``i`` commuters arrived by ``times[k]``.
    """

    state: TrafficState
    times: tuple
    tau: Mapping[int, PiecewiseLinear]
    sigma: Mapping[int, PiecewiseLinear]
    w: Mapping[int, PiecewiseLinear]
    q: Mapping[int, StepFunction]
    cumulative: Mapping[int, tuple]

    @property
    def network(self):
        return self.state.network

    def intervals(self):
        return list(zip(self.times, self.times[1:]))

    def q_values(self, i) -> tuple:
        return self.q[i].values if self.q[i].values else (0,) * (len(self.times) - 1)

    def subtree_inflow(self, i) -> list:
        """Per interval, total inflow of commuters passing bottleneck ``i``."""
        cols = [self.q_values(j) for j in self.network.upstream[i]]
        return [sum(vals, 0) for vals in zip(*cols)]

    def demand(self, i):
        return self.cumulative[i][-1] - self.cumulative[i][0]


def _lagrangian_grid(state: TrafficState) -> list:
    net = state.network
    sc = state.scenario
    t0, t1 = sc.horizon
    pts = {t0, t1, sc.cost.t_star}
    for i in net.nodes:
        for s in state.A[i].xs:
            pts.add(push_forward(state, i, s))
        p = net.parent[i]
        for s in state.D[i].xs:
            pts.add(s if p == ROOT else push_forward(state, p, s + net.free_flow[p]))
    span = state.arrival_span()
    lo, hi = t0, t1
    if span is not None:
        lo, hi = min(lo, span[0]), max(hi, span[1])
    exact = sc.exact and all(f.exact for f in state.arrival_rate.values())
    return [t for t in snap_points(pts, exact) if lo <= t <= hi]


def lagrangian_view(state: TrafficState) -> LagrangianView:
    """Trace every commuter cohort backwards from the destination.

    Between consecutive grid times every traced quantity is affine in ``t``;
    each piece is recovered from two interior samples, so jumps at grid
    times (a bottleneck releasing the last commuter before an arrival gap)
    are represented exactly.
    """
    net = state.network
    times = _lagrangian_grid(state)
    nodes = net.nodes
    starts = {k: {i: [] for i in nodes} for k in ("tau", "sigma")}
    ends = {k: {i: [] for i in nodes} for k in ("tau", "sigma")}
    for a, b in zip(times, times[1:]):
        h = (b - a) / 3
        tau1, sig1 = trace_back(state, a + h)
        tau2, sig2 = trace_back(state, b - h)
        for i in nodes:
            starts["tau"][i].append(2 * tau1[i] - tau2[i])
            ends["tau"][i].append(2 * tau2[i] - tau1[i])
            starts["sigma"][i].append(2 * sig1[i] - sig2[i])
            ends["sigma"][i].append(2 * sig2[i] - sig1[i])

    ts = tuple(times)
    tau = {i: PiecewiseLinear(ts, tuple(starts["tau"][i]), tuple(ends["tau"][i])) for i in nodes}
    sigma = {i: PiecewiseLinear(ts, tuple(starts["sigma"][i]), tuple(ends["sigma"][i])) for i in nodes}
    w = {
        i: PiecewiseLinear(
            ts,
            tuple(s - u for s, u in zip(sigma[i].starts, tau[i].starts)),
            tuple(s - u for s, u in zip(sigma[i].ends, tau[i].ends)),
        )
        for i in nodes
    }

    exact = all(is_exact(*f.starts) for f in tau.values())
    for i in nodes:
        for k, slope in enumerate(tau[i].slopes()):
            if (slope <= 0) if exact else slope < -TOL_STRICT:
                raise NonMonotoneError(
                    f"arrival time at bottleneck {i} is not increasing on [{ts[k]}, {ts[k + 1]}]"
                )

    q, cumulative = {}, {}
    for i in nodes:
        R = state.inflows[i].cumulative()
        d = net.free_flow[i]
        if len(ts) < 2:
            q[i], cumulative[i] = StepFunction(), (0,)
            continue
        # cumulative origin inflow is continuous in t even where tau jumps
        cum = [R(tau[i].starts[0] - d)]
        vals = []
        for k, (a, b) in enumerate(zip(ts, ts[1:])):
            lo, hi = R(tau[i].starts[k] - d), R(tau[i].ends[k] - d)
            vals.append((hi - lo) / (b - a))
            cum.append(hi)
        q[i] = StepFunction(ts, tuple(vals))
        cumulative[i] = tuple(cum)
    return LagrangianView(state, ts, tau, sigma, w, q, cumulative)


@dataclass
class Check:
    name: str
    passed: bool = True
    worst: object = 0
    where: tuple | None = None

    def record(self, violation, where, tol):
        if violation > self.worst:
            self.worst, self.where = violation, where
        if violation > tol:
            self.passed = False

    def as_dict(self) -> dict:
        from .report import jsonable

        return {"passed": self.passed, "worst": jsonable(self.worst),
                "where": [jsonable(v) for v in self.where] if self.where else None}


@dataclass
class FeasibilityReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name) -> Check:
        return self.checks[name]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": {k: c.as_dict() for k, c in self.checks.items()}}


def check_feasibility(state: TrafficState, scenario: Scenario | None = None, tol=TOL,
                      view: LagrangianView | None = None,
                      tol_strict=TOL_STRICT) -> FeasibilityReport:
    """Evaluate the queueing, demand, sign, slope and horizon conditions.

    Conditions are checked per grid interval of the Lagrangian view, where
    every rate is constant and every delay affine.  Rate mismatches are
    integrated over the interval (volume units, tolerance scaled by total
    demand): floating-point grids contain very short intervals on which a
    rate is only known to within breakpoint error / interval length.
    """
    scenario = scenario or state.scenario
    view = view or lagrangian_view(state)
    net = scenario.network
    t0, t1 = scenario.horizon
    checks = {name: Check(name) for name in
              ("complementarity", "demand", "nonnegativity", "slope", "horizon")}
    ivals = view.intervals()
    vol = max(1, scenario.total_demand)
    wslopes = {i: view.w[i].slopes() for i in net.nodes}
    sslopes = {i: view.sigma[i].slopes() for i in net.nodes}
    for i in net.nodes:
        mu = net.capacity[i]
        flow = view.subtree_inflow(i)
        wmeans = view.w[i].means()
        for k, (a, b) in enumerate(ivals):
            length = b - a
            cap = mu * sslopes[i][k]
            if wmeans[k] > tol:
                viol = abs(flow[k] - cap) * length
            else:
                viol = max(0, flow[k] - cap) * length
            checks["complementarity"].record(viol, (i, a, b), tol * vol)

            qv = view.q_values(i)[k]
            checks["nonnegativity"].record(max(0, -qv) * length, (i, a, b), tol * vol)

            margin = 1 - sum((wslopes[j][k] for j in net.downstream[i]), 0)
            checks["slope"].record(max(0, tol_strict - margin), (i, a, b), 0)

        total = view.demand(i)
        q = scenario.demand[i]
        checks["demand"].record(abs(total - q), (i,), tol * max(1, abs(q)))

        late = 0
        for k, (a, b) in enumerate(ivals):
            if b > t1:
                late += max(0, view.q_values(i)[k]) * (b - max(a, t1))
            if a < t0:
                late += max(0, view.q_values(i)[k]) * (min(b, t0) - a)
        checks["horizon"].record(late, (i,), tol * max(1, abs(q)))
    return FeasibilityReport(checks)


@dataclass(frozen=True)
class CostBreakdown:
    schedule: object
    queueing: object
    free_flow: object

    @property
    def total(self):
        return self.schedule + self.queueing + self.free_flow

    def as_dict(self) -> dict:
        from .report import jsonable

        return {"schedule": jsonable(self.schedule), "queueing": jsonable(self.queueing),
                "free_flow": jsonable(self.free_flow), "total": jsonable(self.total)}


def total_cost(state: TrafficState, view: LagrangianView | None = None) -> CostBreakdown:
    """Total system cost accumulated over destination arrival times.

    Each commuter pays the schedule delay at arrival plus queueing and
    free-flow time on every link of the path (unit value of time).
    """
    view = view or lagrangian_view(state)
    net = state.network
    cost = state.scenario.cost
    ivals = view.intervals()
    sched_per_interval = [cost.integral(a, b) for a, b in ivals]
    wmeans = {i: view.w[i].means() for i in net.nodes}
    schedule = queueing = free_flow = 0
    for i in net.nodes:
        qv = view.q_values(i)
        pd = net.path_free_flow(i)
        for k, (a, b) in enumerate(ivals):
            if qv[k] == 0:
                continue
            mass = qv[k] * (b - a)
            schedule += qv[k] * sched_per_interval[k]
            queueing += mass * sum((wmeans[j][k] for j in net.downstream[i]), 0)
            free_flow += mass * pd
    return CostBreakdown(schedule, queueing, free_flow)


def eulerian_cost(state: TrafficState) -> CostBreakdown:
    """Same cost from clock-time bookkeeping: schedule delay of the
    destination arrival stream plus the area between every link's
    cumulative arrival and departure curves."""
    net = state.network
    cost = state.scenario.cost
    schedule = 0
    for j in net.root_children:
        for a, b, v in state.departure_rate[j].pieces():
            schedule += v * cost.integral(a, b)
    queueing = 0
    for i in net.nodes:
        A, D = state.A[i], state.D[i]
        xs = sorted(set(A.xs) | set(D.xs))
        for a, b in zip(xs, xs[1:]):
            queueing += (b - a) * ((A(a) - D(a)) + (A(b) - D(b))) / 2
    free_flow = sum((state.inflows[i].integral() * net.path_free_flow(i) for i in net.nodes), 0)
    return CostBreakdown(schedule, queueing, free_flow)


def binned_cost(state: TrafficState, dt=None) -> CostBreakdown:
    """Cost with destination arrivals priced at slot-averaged schedule cost.

    Slots are the ``dt`` grid of the scenario horizon, as in the
    time-expanded optimisation; arrivals outside the horizon keep their
    exact schedule cost.  For any feasible state this is bounded below by
    the discretised optimum, because the queue-free counterpart has the same
    per-slot arrivals and respects every slot capacity.
    """
    sc = state.scenario
    cost = sc.cost
    dt = sc.dt if dt is None else dt
    t0, t1 = sc.horizon
    arrivals = state.destination_rate().cumulative()
    K = int(round((t1 - t0) / dt))
    schedule = 0
    for k in range(K):
        a, b = t0 + k * dt, t0 + (k + 1) * dt
        schedule += cost.slot_average(a, b) * (arrivals(b) - arrivals(a))
    for a, b, v in state.destination_rate().pieces():
        if a < t0:
            schedule += v * cost.integral(a, min(b, t0))
        if b > t1:
            schedule += v * cost.integral(max(a, t1), b)
    eul = eulerian_cost(state)
    return CostBreakdown(schedule, eul.queueing, eul.free_flow)
