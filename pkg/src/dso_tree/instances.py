"""Random and canonical test instances."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .network import ScheduleCost, Scenario, build_network


def random_parent_map(rng: np.random.Generator, n: int, shuffle: bool = True) -> dict:
    """Random in-tree on labels ``1..n``; labels are permuted so they carry
    no topological meaning."""
    labels = list(range(1, n + 1))
    if shuffle:
        labels = [int(v) for v in rng.permutation(labels)]
    parent = {}
    for pos, lab in enumerate(labels):
        j = int(rng.integers(0, pos + 1))
        parent[lab] = 0 if j == 0 else labels[j - 1]
    return parent


def _capacities(parent, leaf_caps, rng, tight_prob, slack_scale=0.5):
    children = {}
    for i, p in parent.items():
        children.setdefault(p, []).append(i)
    depth = {}

    def d(i):
        if i not in depth:
            depth[i] = 0 if parent[i] == 0 else d(parent[i]) + 1
        return depth[i]

    mu = {}
    for i in sorted(parent, key=lambda i: -d(i)):
        kids = children.get(i, [])
        if not kids:
            mu[i] = leaf_caps()
            continue
        base = sum(mu[j] for j in kids)
        mu[i] = base if rng.random() < tight_prob else base + leaf_caps() * slack_scale
    return mu


def random_tree_scenario(rng: np.random.Generator, n_max: int = 10, slots: int = 40,
                         tight_prob: float = 0.3) -> Scenario:
    """Float scenario on a random tree with capacities satisfying the
    children-capacity condition, some of them with equality.

    The horizon is long enough for sampled states to clear their queues.
    """
    n = int(rng.integers(1, n_max + 1))
    parent = random_parent_map(rng, n)
    mu = _capacities(parent, lambda: float(rng.uniform(0.5, 2.0)), rng, tight_prob)
    d = {i: float(rng.choice([0.0, rng.uniform(0.0, 1.5)])) for i in parent}
    q = {i: float(rng.choice([0.0, rng.uniform(0.2, 3.0)], p=[0.15, 0.85])) for i in parent}
    if sum(q.values()) == 0:
        q[next(iter(q))] = 1.0
    net = build_network(parent, mu, d)
    total = sum(q.values())
    mu_min = min(mu.values())
    # entry spread over half the horizon; worst case every level queues everything
    length = 2 * total / mu_min + (net.depth() + 1) * total / mu_min + max(net.path_free_flow(i) for i in parent)
    length = float(math.ceil(length))
    dt = length / slots
    cost = ScheduleCost(float(length * rng.uniform(0.35, 0.65)), float(rng.uniform(0.5, 2.0)),
                        float(rng.uniform(0.5, 4.0)))
    return Scenario(net, q, cost, (0.0, length), dt)


def random_integral_instance(rng: np.random.Generator, n_max: int = 4, k_max: int = 8,
                             q_max: int = 10) -> Scenario:
    """Exact instance whose demands and per-slot capacities are integers."""
    n = int(rng.integers(1, n_max + 1))
    K = int(rng.integers(1, k_max + 1))
    parent = random_parent_map(rng, n)
    mu = _capacities(parent, lambda: Fraction(int(rng.integers(1, 3))), rng, 0.4, slack_scale=1)
    d = {i: Fraction(int(rng.integers(0, 3))) for i in parent}
    net = build_network(parent, mu, d)
    root_cap = sum(net.capacity[j] for j in net.root_children)
    budget = min(q_max, int(root_cap * K))
    total = int(rng.integers(0, budget + 1))
    q = {i: Fraction(0) for i in parent}
    labels = list(parent)
    for _ in range(total):
        q[labels[int(rng.integers(0, n))]] += 1
    t_star = Fraction(int(rng.integers(0, 2 * K + 1)), 2)
    cost = ScheduleCost(t_star, Fraction(int(rng.integers(1, 4))), Fraction(int(rng.integers(1, 4))))
    return Scenario(net, q, cost, (Fraction(0), Fraction(K)), Fraction(1))


def single_bottleneck(mu=1, demand=2, t_star=0, beta=1, gamma=1, horizon=(-2, 2), dt=Fraction(1, 2),
                      d=0, exact=True) -> Scenario:
    conv = Fraction if exact else float
    net = build_network({1: 0}, {1: conv(mu)}, {1: conv(d)})
    return Scenario(net, {1: conv(demand)}, ScheduleCost(conv(t_star), conv(beta), conv(gamma)),
                    (conv(horizon[0]), conv(horizon[1])), conv(dt))


def three_link_tree(demand=(1, 1), d=(1, 2, 1), mu=(1, 1, 2), horizon=(-4, 4), dt=Fraction(1, 2),
                    exact=True) -> Scenario:
    """Origins 1 and 2 merge at node 3, which feeds the destination."""
    conv = Fraction if exact else float
    net = build_network({1: 3, 2: 3, 3: 0}, {1: conv(mu[0]), 2: conv(mu[1]), 3: conv(mu[2])},
                        {1: conv(d[0]), 2: conv(d[1]), 3: conv(d[2])})
    dem = {1: conv(demand[0]), 2: conv(demand[1]), 3: conv(0)}
    return Scenario(net, dem, ScheduleCost(conv(0), conv(1), conv(1)),
                    (conv(horizon[0]), conv(horizon[1])), conv(dt))
