"""Queue-free system optimum as a min-cost flow on a time-expanded tree.

Destination arrival time is cut into slots of length ``dt``.  Every slot
holds a copy of the tree; origin ``i`` may send volume into its copy in any
slot at cost ``cbar_k + path free-flow time``, and link ``i`` carries at most
``mu_i * dt`` per slot.  Successive shortest paths with node potentials give
the optimum; capacity and demand prices come from a shortest-path pass over
the final residual network.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from .errors import InfeasibleError, SolverError, TooLargeError
from .network import ROOT, Scenario
from .piecewise import StepFunction, is_exact

EPS = 1e-12


@dataclass(frozen=True)
class TimeExpandedNet:
    scenario: Scenario
    slots: tuple                 # (start, end) per slot
    slot_cost: tuple             # average schedule cost per slot
    entry_cost: dict             # (origin, k) -> cost per unit volume
    slot_capacity: dict          # link -> mu * dt
    node_names: tuple
    arcs: tuple                  # (tail, head, capacity, cost), indices into node_names

    @property
    def node_count(self) -> int:
        return len(self.node_names)

    @property
    def exact(self) -> bool:
        return self.scenario.exact


def discretize(scenario: Scenario) -> TimeExpandedNet:
    """Build the time-expanded network; node ids are ``"source"``,
    ``("origin", i)``, ``("slot", i, k)`` and ``"sink"``."""
    net = scenario.network
    t0, _ = scenario.horizon
    K = scenario.slot_count
    dt = scenario.dt
    slots = tuple((t0 + k * dt, t0 + (k + 1) * dt) for k in range(K))
    slot_cost = tuple(scenario.cost.slot_average(a, b) for a, b in slots)
    entry_cost = {
        (i, k): slot_cost[k] + net.path_free_flow(i) for i in net.nodes for k in range(K)
    }
    cap = {i: net.capacity[i] * dt for i in net.nodes}

    names = ["source"] + [("origin", i) for i in net.nodes]
    names += [("slot", i, k) for k in range(K) for i in net.nodes]
    names.append("sink")
    index = {n: j for j, n in enumerate(names)}
    big = scenario.total_demand
    arcs = []
    for i in net.nodes:
        arcs.append((index["source"], index[("origin", i)], scenario.demand[i], 0 * big))
    for k in range(K):
        for i in net.nodes:
            arcs.append((index[("origin", i)], index[("slot", i, k)], big, entry_cost[(i, k)]))
    for k in range(K):
        for i in net.nodes:
            p = net.parent[i]
            head = index["sink"] if p == ROOT else index[("slot", p, k)]
            arcs.append((index[("slot", i, k)], head, cap[i], 0 * big))
    return TimeExpandedNet(scenario, slots, slot_cost, entry_cost, cap, tuple(names), tuple(arcs))


class _Residual:
    """Adjacency-list residual graph with paired arcs."""

    def __init__(self, n):
        self.adj = [[] for _ in range(n)]
        self.to, self.cap, self.cost, self.flow, self.orig = [], [], [], [], []

    def add(self, u, v, cap, cost):
        e = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0 * cap]
        self.cost += [cost, -cost]
        self.flow += [0 * cap, 0 * cap]
        self.orig += [cap, 0 * cap]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e


@dataclass
class LpSolution:
    scenario: Scenario
    net: TimeExpandedNet
    q_star: dict                 # (origin, k) -> volume
    objective: object
    schedule_cost: object
    free_flow_cost: object
    rho: dict                    # origin -> demand price
    p: dict                      # (link, k) -> capacity price
    iterations: int
    exact: bool
    stats: dict = field(default_factory=dict)

    @property
    def slots(self):
        return self.net.slots

    def slot_flow(self, i, k):
        """Volume crossing bottleneck ``i`` in slot ``k``."""
        return sum((self.q_star[(j, k)] for j in self.scenario.network.upstream[i]), 0)

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "schedule_cost": self.schedule_cost,
            "free_flow_cost": self.free_flow_cost,
            "solver_iterations": self.iterations,
            "exact_mode": self.exact,
        }


def _slot_rank(name):
    if name == "source":
        return (0,)
    if name == "sink":
        return (3,)
    if name[0] == "origin":
        return (1, name[1])
    return (2, name[2], name[1])     # earliest slot, then lowest origin id


def solve(scenario: Scenario) -> LpSolution:
    """Route all demand at minimum cost; raises InfeasibleError when the
    horizon or the capacities cannot carry it."""
    ten = discretize(scenario)
    exact = scenario.exact
    n = ten.node_count
    g = _Residual(n)
    arc_ids = [g.add(*arc) for arc in ten.arcs]
    src, sink = 0, n - 1
    rank = [_slot_rank(name) for name in ten.node_names]
    eps = 0 if exact else EPS * max(1.0, float(scenario.total_demand))

    zero = 0 * scenario.total_demand
    pot = [zero] * n
    required = scenario.total_demand
    sent = zero
    iterations = 0
    while (required - sent) > eps:
        dist = [None] * n
        prev = [-1] * n
        dist[src] = zero
        heap = [(zero, rank[src], src)]
        done = [False] * n
        while heap:
            du, _, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in g.adj[u]:
                if g.cap[e] <= eps:
                    continue
                v = g.to[e]
                if done[v]:
                    continue
                nd = du + g.cost[e] + pot[u] - pot[v]
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    prev[v] = e
                    heapq.heappush(heap, (nd, rank[v], v))
        if dist[sink] is None:
            raise InfeasibleError(
                f"only {sent} of {required} units can be routed; lengthen the horizon"
            )
        for v in range(n):
            if dist[v] is not None:
                pot[v] += dist[v]
        push = required - sent
        v = sink
        while v != src:
            e = prev[v]
            push = min(push, g.cap[e])
            v = g.to[e ^ 1]
        v = sink
        while v != src:
            e = prev[v]
            g.cap[e] -= push
            g.cap[e ^ 1] += push
            v = g.to[e ^ 1]
        sent += push
        iterations += 1

    flows = [g.orig[e] - g.cap[e] for e in arc_ids]
    net = scenario.network
    K = len(ten.slots)
    q_star = {}
    for (tail, head, _, _), f in zip(ten.arcs, flows):
        name = ten.node_names[head]
        if ten.node_names[tail] != "source" and name[0] == "slot" and ten.node_names[tail][0] == "origin":
            q_star[(name[1], name[2])] = f if exact else (f if abs(f) > eps else 0.0)
    schedule = sum((ten.slot_cost[k] * q_star[(i, k)] for i in net.nodes for k in range(K)), zero)
    free_flow = sum((net.path_free_flow(i) * q_star[(i, k)] for i in net.nodes for k in range(K)), zero)
    rho, p = _prices(ten, flows, q_star, eps)
    return LpSolution(scenario, ten, q_star, schedule + free_flow, schedule, free_flow, rho, p,
                      iterations, exact, {"augmentations": iterations, "nodes": n, "arcs": len(ten.arcs)})


def _prices(ten: TimeExpandedNet, flows, q_star, eps):
    """Smallest nonnegative capacity prices consistent with the optimum.

    Unknowns are ``phi`` per node (price to reach the sink) with
    ``phi(sink) = 0``; a link's price is ``phi(tail) - phi(head)``.  The
    conditions are difference constraints ``phi(a) <= phi(b) + w``; the
    componentwise smallest solution is minus the shortest-path distance
    from the sink along edges ``a -> b`` of weight ``w``.
    """
    n = ten.node_count
    names = ten.node_names
    edges = [[] for _ in range(n)]
    for (tail, head, cap, cost), f in zip(ten.arcs, flows):
        if names[tail] == "source":
            continue
        if names[tail][0] == "origin":
            edges[tail].append((head, cost))          # phi(o) <= phi(slot) + C
            if f > eps:
                edges[head].append((tail, -cost))     # tight when used
        else:
            if cap - f > eps:
                edges[tail].append((head, 0 * cost))  # unsaturated: price 0
            edges[head].append((tail, 0 * cost))      # prices are nonnegative
    sink = n - 1
    dist = [None] * n
    dist[sink] = 0 * ten.scenario.total_demand
    queue, queued = deque([sink]), [False] * n
    queued[sink] = True
    relax = [0] * n
    while queue:
        a = queue.popleft()
        queued[a] = False
        for b, w in edges[a]:
            nd = dist[a] + w
            if dist[b] is None or nd < dist[b] - (0 if is_exact(nd) else eps):
                dist[b] = nd
                relax[b] += 1
                if relax[b] > n:
                    raise SolverError("negative cycle in price graph: flow is not optimal")
                if not queued[b]:
                    queued[b] = True
                    queue.append(b)

    phi = {name: (-d if d is not None else None) for name, d in zip(names, dist)}
    net = ten.scenario.network
    K = len(ten.slots)
    p = {}
    for k in range(K):
        for i in net.nodes:
            par = net.parent[i]
            head = 0 if par == ROOT else phi[("slot", par, k)]
            p[(i, k)] = phi[("slot", i, k)] - head
    rho = {}
    for i in net.nodes:
        val = phi[("origin", i)]
        if val is None:
            val = min(ten.entry_cost[(i, k)] + phi[("slot", i, k)] for k in range(K))
        rho[i] = val
    return rho, p


@dataclass
class OptimalityReport:
    checks: dict
    duality_gap: object

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def as_dict(self) -> dict:
        from .report import jsonable

        return {"passed": self.passed, "duality_gap": jsonable(self.duality_gap),
                "checks": jsonable(self.checks)}


def check_optimality(solution: LpSolution, scenario: Scenario | None = None, tol=None) -> OptimalityReport:
    """Demand, reduced-cost and capacity complementarity conditions per
    (origin or link, slot).  Exact solutions are checked with equality."""
    scenario = scenario or solution.scenario
    ten = solution.net
    net = scenario.network
    K = len(ten.slots)
    if tol is None:
        tol = 0 if solution.exact else 1e-9
    q, p, rho = solution.q_star, solution.p, solution.rho

    def new(name):
        return {"passed": True, "worst": 0, "where": None, "name": name}

    checks = {k: new(k) for k in ("demand", "reduced_cost", "capacity", "price_sign", "duality")}

    def record(chk, viol, where):
        if viol > chk["worst"]:
            chk["worst"], chk["where"] = viol, where
        if viol > tol:
            chk["passed"] = False

    for i in net.nodes:
        total = sum((q[(i, k)] for k in range(K)), 0)
        record(checks["demand"], abs(total - scenario.demand[i]), [i])
        for k in range(K):
            reduced = ten.entry_cost[(i, k)] + sum((p[(j, k)] for j in net.downstream[i]), 0) - rho[i]
            viol = abs(reduced) if q[(i, k)] > tol else max(0, -reduced)
            record(checks["reduced_cost"], viol, [i, k])
            if q[(i, k)] < -tol:
                record(checks["demand"], -q[(i, k)], [i, k])
    for i in net.nodes:
        capk = ten.slot_capacity[i]
        for k in range(K):
            flow = solution.slot_flow(i, k)
            viol = abs(flow - capk) if p[(i, k)] > tol else max(0, flow - capk)
            record(checks["capacity"], viol, [i, k])
            record(checks["price_sign"], max(0, -p[(i, k)]), [i, k])
    dual = sum((rho[i] * scenario.demand[i] for i in net.nodes), 0) - sum(
        (p[(i, k)] * ten.slot_capacity[i] for i in net.nodes for k in range(K)), 0
    )
    gap = solution.objective - dual
    record(checks["duality"], abs(gap), [])
    return OptimalityReport(checks, gap)


def perturb(solution: LpSolution, origin, from_slot, to_slot, amount) -> LpSolution:
    """Copy of ``solution`` with ``amount`` volume of ``origin`` moved
    between slots; prices are left unchanged."""
    q = dict(solution.q_star)
    q[(origin, from_slot)] -= amount
    q[(origin, to_slot)] += amount
    ten = solution.net
    net = solution.scenario.network
    schedule = sum((ten.slot_cost[k] * v for (i, k), v in q.items()), 0)
    free_flow = sum((net.path_free_flow(i) * v for (i, k), v in q.items()), 0)
    return LpSolution(solution.scenario, ten, q, schedule + free_flow, schedule, free_flow,
                      solution.rho, solution.p, solution.iterations, solution.exact)


def _quantum(values):
    fr = [Fraction(v) for v in values if v != 0]
    if not fr:
        return Fraction(1)
    num = 0
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    for f in fr:
        num = math.gcd(num, f.numerator * (den // f.denominator))
    return Fraction(num, den)


def brute_force_lp(scenario: Scenario, limit: int = 10**7) -> dict:
    """Exhaustive search over integral slot allocations.

    Volumes are counted in the largest unit dividing every demand and every
    per-slot capacity.  Branches are cut when they break a capacity or
    cannot beat the incumbent, so the result is the exact optimum.
    """
    ten = discretize(scenario)
    net = scenario.network
    K = len(ten.slots)
    caps = [ten.slot_capacity[i] for i in net.nodes] + [scenario.demand[i] for i in net.nodes]
    if not is_exact(*caps):
        caps = [Fraction(repr(c)) for c in caps]
    unit = _quantum(caps)
    origins = [i for i in net.nodes if scenario.demand[i] > 0]
    units = {i: int(Fraction(scenario.demand[i] if is_exact(scenario.demand[i])
                             else repr(scenario.demand[i])) / unit) for i in origins}
    candidates = 1
    for i in origins:
        candidates *= comb(units[i] + K - 1, K - 1)
        if candidates > limit:
            raise TooLargeError(f"more than {limit} candidate allocations")
    cap_units = {}
    for i in net.nodes:
        c = ten.slot_capacity[i]
        c = Fraction(c) if is_exact(c) else Fraction(repr(c))
        cap_units[i] = int(c // unit)
    exact_costs = {key: (Fraction(v) if is_exact(v) else Fraction(repr(v))) for key, v in ten.entry_cost.items()}

    remaining = {(i, k): cap_units[i] for i in net.nodes for k in range(K)}
    best = {"obj": None, "q": None}
    alloc = {(i, k): 0 for i in net.nodes for k in range(K)}
    min_cost = {i: min(exact_costs[(i, k)] for k in range(K)) for i in origins}
    tail_bound = [sum((units[j] * min_cost[j] for j in origins[n:]), Fraction(0))
                  for n in range(len(origins) + 1)]

    def room(i, k):
        return min(remaining[(j, k)] for j in net.downstream[i])

    def place(i, k, amount):
        for j in net.downstream[i]:
            remaining[(j, k)] -= amount
        alloc[(i, k)] += amount

    def rec(oi, k, left, cost):
        if best["obj"] is not None and cost + left * min_cost[origins[oi]] + tail_bound[oi + 1] >= best["obj"]:
            return
        i = origins[oi]
        if k == K - 1:
            if left > room(i, k):
                return
            place(i, k, left)
            c = cost + left * exact_costs[(i, k)]
            if oi + 1 == len(origins):
                if best["obj"] is None or c < best["obj"]:
                    best["obj"], best["q"] = c, dict(alloc)
            else:
                rec(oi + 1, 0, units[origins[oi + 1]], c)
            place(i, k, -left)
            return
        for amount in range(min(left, room(i, k)), -1, -1):
            place(i, k, amount)
            rec(oi, k + 1, left - amount, cost + amount * exact_costs[(i, k)])
            place(i, k, -amount)

    if not origins:
        return {"objective": Fraction(0), "q": {key: Fraction(0) for key in alloc}, "unit": unit}
    rec(0, 0, units[origins[0]], Fraction(0))
    if best["obj"] is None:
        raise InfeasibleError("no integral allocation satisfies the capacities")
    return {"objective": best["obj"] * unit,
            "q": {key: v * unit for key, v in best["q"].items()}, "unit": unit}


def solution_inflows(solution: LpSolution) -> dict:
    """Origin entry-rate profiles that realise the slot volumes without
    queues: slot volume spread uniformly, shifted back by path free-flow."""
    sc = solution.scenario
    net = sc.network
    dt = sc.dt
    out = {}
    for i in net.nodes:
        pd = net.path_free_flow(i)
        pieces = [(a - pd, b - pd, solution.q_star[(i, k)] / dt)
                  for k, (a, b) in enumerate(solution.slots) if solution.q_star[(i, k)] != 0]
        out[i] = StepFunction.from_pieces(pieces).simplified()
    return out


def refine_study(scenario: Scenario, dt_list) -> list[tuple]:
    """Optimum at each time step in ``dt_list``."""
    rows = []
    for dt in dt_list:
        sol = solve(scenario.with_dt(dt))
        rows.append((dt, sol.objective))
    return rows


def vickrey_optimum(cost, demand, capacity):
    """Continuous single-bottleneck optimum: ``delta * Q**2 / (2 * mu)``."""
    return cost.delta * demand * demand / (2 * capacity)
