"""Rooted tree networks, schedule-delay costs and scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .errors import CapacityError, CycleError, ValidationError
from .piecewise import StepFunction, as_number, is_exact

ROOT = 0


@dataclass(frozen=True)
class TreeNetwork:
    """Directed in-tree towards the destination node 0.

    Link ``i`` leaves origin ``i`` towards ``parent[i]`` and carries a point
    bottleneck of capacity ``capacity[i]`` at its downstream end, reached
    after the free-flow time ``free_flow[i]``.  Construct with
    :func:`build_network`, which fills the derived sets.
    """

    parent: Mapping[int, int]
    capacity: Mapping[int, object]
    free_flow: Mapping[int, object]
    children: Mapping[int, tuple] = field(default_factory=dict)
    downstream: Mapping[int, tuple] = field(default_factory=dict)
    upstream: Mapping[int, tuple] = field(default_factory=dict)
    order: tuple = ()

    @property
    def nodes(self) -> tuple:
        return tuple(sorted(self.parent))

    @property
    def node_count(self) -> int:
        return len(self.parent)

    @property
    def root_children(self) -> tuple:
        return self.children.get(ROOT, ())

    @property
    def exact(self) -> bool:
        return is_exact(*self.capacity.values(), *self.free_flow.values())

    def path_free_flow(self, i):
        """Free-flow time from origin ``i`` to the destination."""
        return sum((self.free_flow[j] for j in self.downstream[i]), 0)

    def depth(self) -> int:
        return max((len(p) for p in self.downstream.values()), default=0)

    def to_dict(self) -> dict:
        return {
            "parent": dict(self.parent),
            "mu": dict(self.capacity),
            "d": dict(self.free_flow),
        }


def build_network(parent_map: Mapping[int, int], capacities: Mapping[int, object],
                  free_flow_times: Mapping[int, object]) -> TreeNetwork:
    """Validate a parent map and precompute the tree's derived sets.

    Origins may carry any distinct positive labels; they need not be in
    topological order.
    """
    parent = {int(k): int(v) for k, v in parent_map.items()}
    if set(parent) != set(capacities) or set(parent) != set(free_flow_times):
        raise ValidationError("parent, capacity and free-flow maps must cover the same origins")
    if ROOT in parent:
        raise ValidationError("node 0 is the destination and has no outgoing link")
    for i, p in parent.items():
        if i <= 0:
            raise ValidationError(f"origin labels must be positive, got {i}")
        if p != ROOT and p not in parent:
            raise ValidationError(f"parent {p} of node {i} is not a known node")
    mu = {i: capacities[i] for i in parent}
    d = {i: free_flow_times[i] for i in parent}
    for i in parent:
        if not mu[i] > 0:
            raise ValidationError(f"capacity of link {i} must be positive")
        if d[i] < 0:
            raise ValidationError(f"free-flow time of link {i} must be nonnegative")

    downstream = {}
    for i in parent:
        path, seen, j = [], set(), i
        while j != ROOT:
            if j in seen:
                raise CycleError(f"parent map has a cycle through node {j}")
            seen.add(j)
            path.append(j)
            j = parent[j]
        downstream[i] = tuple(path)

    children = {ROOT: []}
    for i in parent:
        children.setdefault(i, [])
    for i in sorted(parent):
        children[parent[i]].append(i)
    children = {k: tuple(v) for k, v in children.items()}

    for i in parent:
        inflow_cap = sum((mu[j] for j in children[i]), 0)
        if inflow_cap > mu[i]:
            raise CapacityError(
                f"children of node {i} have total capacity {inflow_cap} > mu_{i} = {mu[i]}"
            )

    upstream = {i: [] for i in parent}
    for i, path in downstream.items():
        for j in path:
            upstream[j].append(i)
    upstream = {i: tuple(sorted(v)) for i, v in upstream.items()}

    # leaves first, root children last
    order = tuple(sorted(parent, key=lambda i: (-len(downstream[i]), i)))
    return TreeNetwork(parent, mu, d, children, downstream, upstream, order)


def downstream_free_flow(net: TreeNetwork, i):
    """Free-flow time strictly downstream of bottleneck ``i``."""
    if i not in net.parent:
        raise IndexError(f"unknown node {i}")
    return sum((net.free_flow[j] for j in net.downstream[i][1:]), 0)


@dataclass(frozen=True)
class ScheduleCost:
    """Two-slope schedule-delay cost around a shared preferred arrival time."""

    t_star: object = 0
    beta: object = 1
    gamma: object = 1

    def __post_init__(self):
        if not (self.beta >= 0 and self.gamma >= 0):
            raise ValidationError("schedule cost slopes must be nonnegative")

    def __call__(self, t):
        return self.beta * max(0 * t, self.t_star - t) + self.gamma * max(0 * t, t - self.t_star)

    def integral(self, a, b):
        """Exact integral of the cost over ``[a, b]``."""
        if b <= a:
            return 0 * a
        ts = self.t_star
        early = 0 * a
        if a < ts:
            hi = min(b, ts)
            early = (ts - a + ts - hi) * (hi - a) / 2
        late = 0 * a
        if b > ts:
            lo = max(a, ts)
            late = (lo - ts + b - ts) * (b - lo) / 2
        return self.beta * early + self.gamma * late

    def slot_average(self, a, b):
        return self.integral(a, b) / (b - a)

    @property
    def delta(self):
        """Combined slope beta*gamma/(beta+gamma)."""
        total = self.beta + self.gamma
        return self.beta * self.gamma / total if total else 0 * total


def schedule_cost(cost_spec: ScheduleCost, t):
    return cost_spec(t)


@dataclass(frozen=True)
class Scenario:
    network: TreeNetwork
    demand: Mapping[int, object]
    cost: ScheduleCost
    horizon: tuple
    dt: object
    inflows: Mapping[int, StepFunction] | None = None

    def __post_init__(self):
        net = self.network
        if set(self.demand) != set(net.parent):
            raise ValidationError("demand must be given for every origin")
        if any(q < 0 for q in self.demand.values()):
            raise ValidationError("demands must be nonnegative")
        t0, t1 = self.horizon
        if not t1 > t0:
            raise ValidationError("horizon must have positive length")
        if not self.dt > 0:
            raise ValidationError("time step must be positive")
        ratio = (t1 - t0) / self.dt
        if is_exact(t0, t1, self.dt):
            if Fraction(ratio).denominator != 1:
                raise ValidationError("horizon length is not a multiple of dt")
        elif abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
            raise ValidationError("horizon length is not a multiple of dt")

    @property
    def slot_count(self) -> int:
        t0, t1 = self.horizon
        return int(round((t1 - t0) / self.dt))

    @property
    def total_demand(self):
        return sum(self.demand.values(), 0)

    @property
    def exact(self) -> bool:
        return self.network.exact and is_exact(
            *self.demand.values(), *self.horizon, self.dt,
            self.cost.t_star, self.cost.beta, self.cost.gamma,
        )

    def admissible(self) -> bool:
        """Necessary condition: root-adjacent capacity can carry all demand."""
        t0, t1 = self.horizon
        cap = sum((self.network.capacity[j] for j in self.network.root_children), 0)
        return self.total_demand <= cap * (t1 - t0)

    def entry_window(self, i) -> tuple:
        """Entry times at origin ``i`` that reach the destination inside the
        horizon at free-flow speed."""
        pd = self.network.path_free_flow(i)
        return self.horizon[0] - pd, self.horizon[1] - pd

    def with_dt(self, dt) -> "Scenario":
        return replace(self, dt=dt)

    def with_horizon(self, horizon) -> "Scenario":
        return replace(self, horizon=tuple(horizon))

    def with_inflows(self, inflows) -> "Scenario":
        return replace(self, inflows=dict(inflows) if inflows is not None else None)


def _parse_step(data: dict, exact: bool) -> StepFunction:
    bps = [as_number(b, exact) for b in data["breakpoints"]]
    rates = [as_number(r, exact) for r in data["rates"]]
    return StepFunction(tuple(bps), tuple(rates)).simplified()


def scenario_from_dict(data: dict, exact: bool = False) -> Scenario:
    """Build a scenario from the JSON layout (see README)."""
    try:
        nodes = data["nodes"]
        parent = {int(n["id"]): int(n["parent"]) for n in nodes}
        mu = {int(n["id"]): as_number(n["mu"], exact) for n in nodes}
        d = {int(n["id"]): as_number(n.get("d", 0), exact) for n in nodes}
        q = {int(n["id"]): as_number(n.get("Q", 0), exact) for n in nodes}
        c = data.get("cost", {})
        cost = ScheduleCost(
            as_number(c.get("t_star", 0), exact),
            as_number(c.get("beta", 1), exact),
            as_number(c.get("gamma", 1), exact),
        )
        t0, t1 = (as_number(h, exact) for h in data["horizon"])
        dt = as_number(data["dt"], exact)
        inflows = None
        if "inflows" in data:
            inflows = {int(k): _parse_step(v, exact) for k, v in data["inflows"].items()}
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scenario: {exc!r}") from exc
    net = build_network(parent, mu, d)
    return Scenario(net, q, cost, (t0, t1), dt, inflows)


def load_scenario(path, exact: bool = False, dt=None) -> Scenario:
    """Read a scenario JSON file.

    Decimal literals are parsed from their text, so ``exact=True`` keeps
    ``0.1`` as ``1/10`` rather than the nearest binary float.
    """
    text = Path(path).read_text()
    data = json.loads(text, parse_float=str if exact else float)
    scenario = scenario_from_dict(data, exact=exact)
    if dt is not None:
        scenario = scenario.with_dt(as_number(dt, exact))
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    from .report import jsonable

    net = scenario.network
    out = {
        "nodes": [
            {"id": i, "parent": net.parent[i], "mu": jsonable(net.capacity[i]),
             "d": jsonable(net.free_flow[i]), "Q": jsonable(scenario.demand[i])}
            for i in net.nodes
        ],
        "cost": {"t_star": jsonable(scenario.cost.t_star), "beta": jsonable(scenario.cost.beta),
                 "gamma": jsonable(scenario.cost.gamma)},
        "horizon": [jsonable(h) for h in scenario.horizon],
        "dt": jsonable(scenario.dt),
    }
    if scenario.inflows:
        out["inflows"] = {
            str(i): {"breakpoints": [jsonable(b) for b in f.breakpoints],
                     "rates": [jsonable(v) for v in f.values]}
            for i, f in sorted(scenario.inflows.items())
        }
    return out
