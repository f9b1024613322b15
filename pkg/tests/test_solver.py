from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dso_tree.errors import InfeasibleError, TooLargeError, ValidationError
from dso_tree.instances import random_integral_instance, single_bottleneck, three_link_tree
from dso_tree.kinematics import lagrangian_view, simulate, total_cost
from dso_tree.solver import (
    brute_force_lp,
    check_optimality,
    discretize,
    perturb,
    refine_study,
    solution_inflows,
    solve,
    vickrey_optimum,
)


def test_slot_costs_single_link():
    ten = discretize(single_bottleneck(horizon=(-1, 1)))
    assert ten.slot_cost == (F(3, 4), F(1, 4), F(1, 4), F(3, 4))


def test_time_expanded_size():
    sc = three_link_tree()
    ten = discretize(sc)
    K = sc.slot_count
    assert ten.node_count == 1 + 3 + 3 * K + 1
    tree_arcs = [a for a in ten.arcs if ten.node_names[a[0]][0] == "slot"]
    assert sorted({a[2] for a in tree_arcs}) == [F(1, 2), 1]
    assert len(tree_arcs) == 3 * K


def test_zero_length_horizon():
    with pytest.raises(ValidationError):
        single_bottleneck(horizon=(0, 0))


def test_single_link_optimum():
    sol = solve(single_bottleneck())
    assert sol.objective == 1
    assert [sol.q_star[(1, k)] for k in range(8)] == [0, 0, F(1, 2), F(1, 2), F(1, 2), F(1, 2), 0, 0]
    assert sol.rho[1] == F(3, 4)
    assert [sol.p[(1, k)] for k in range(2, 6)] == [0, F(1, 2), F(1, 2), 0]
    assert check_optimality(sol).passed
    assert brute_force_lp(single_bottleneck())["objective"] == 1


def test_zero_demand():
    sc = single_bottleneck(demand=0)
    sol = solve(sc)
    assert sol.objective == 0
    assert all(v == 0 for v in sol.q_star.values())
    assert all(v == 0 for v in sol.p.values())
    assert sol.rho[1] == min(sol.net.entry_cost.values())
    assert check_optimality(sol).passed
    assert brute_force_lp(sc)["objective"] == 0


def test_three_link_objective_splits():
    sc = three_link_tree()
    sol = solve(sc)
    assert sol.free_flow_cost == 2 + 3
    assert sol.objective == sol.schedule_cost + 5
    assert brute_force_lp(sc)["objective"] == sol.objective


def test_perturbed_solution_fails_reduced_cost():
    sol = solve(single_bottleneck())
    bad = perturb(sol, 1, 3, 0, F(1, 2))
    rep = check_optimality(bad)
    assert not rep.checks["reduced_cost"]["passed"]
    assert rep.checks["reduced_cost"]["where"] == [1, 0]


def test_infeasible_horizon():
    with pytest.raises(InfeasibleError):
        solve(single_bottleneck(demand=5, horizon=(-1, 1)))


def test_brute_force_guard():
    sc = single_bottleneck(demand=40, horizon=(-20, 20), dt=F(1, 4))
    with pytest.raises(TooLargeError):
        brute_force_lp(sc, limit=1000)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_strong_duality_and_integrality(seed):
    sc = random_integral_instance(np.random.default_rng(seed))
    try:
        sol = solve(sc)
    except InfeasibleError:
        with pytest.raises(InfeasibleError):
            brute_force_lp(sc)
        return
    rep = check_optimality(sol)
    assert rep.passed and rep.duality_gap == 0
    assert all(v.denominator == 1 for v in sol.q_star.values())


def test_round_trip_through_simulation(tree3_scenario):
    sol = solve(tree3_scenario)
    state = simulate(tree3_scenario, solution_inflows(sol))
    assert state.max_queue() == 0
    assert total_cost(state).total == sol.objective


def test_round_trip_float_mode():
    sc = three_link_tree(exact=False)
    sol = solve(sc)
    state = simulate(sc, solution_inflows(sol))
    view = lagrangian_view(state)
    assert max(max(map(abs, w.starts + w.ends), default=0) for w in view.w.values()) <= 1e-9
    assert total_cost(state, view).total == pytest.approx(sol.objective, abs=1e-9)


def test_refinement_on_grid():
    rows = refine_study(single_bottleneck(), [F(1, 2), F(1, 4), F(1, 8)])
    assert [v for _, v in rows] == [1, 1, 1]
    assert refine_study(single_bottleneck(), []) == []


def test_refinement_off_grid():
    sc = single_bottleneck(t_star=F(3, 10), horizon=(-3, 3))
    exact = vickrey_optimum(sc.cost, 2, 1)
    (_, coarse), (_, fine) = refine_study(sc, [F(1, 2), F(1, 4)])
    assert coarse > fine >= exact
    assert coarse - exact <= 2 * F(1, 4)
    # fine-step oracle by exhaustive search agrees with the finer optimum
    assert brute_force_lp(sc.with_dt(F(1, 4)))["objective"] == fine


def test_longer_horizon_never_worse():
    sc = three_link_tree(horizon=(-2, 2))
    assert solve(sc.with_horizon((-4, 4))).objective <= solve(sc).objective


def test_float_matches_exact():
    a = solve(three_link_tree()).objective
    b = solve(three_link_tree(exact=False)).objective
    assert b == pytest.approx(float(a), abs=1e-12)


def test_optimum_bounds_sampled_costs_up_to_vanishing_slack():
    from dso_tree.elimination import sample_state

    sc = single_bottleneck(t_star=0.3, beta=1.0, gamma=2.0, demand=2.0, mu=1.0, horizon=(-3.0, 3.0),
                           dt=0.5, exact=False)
    rng = np.random.default_rng(21)
    costs = [float(total_cost(sample_state(sc, rng)).total) for _ in range(40)]
    slacks = []
    for dt in (0.5, 0.25, 0.125):
        lp = solve(sc.with_dt(dt)).objective
        eps = 2 * 2.0 * 1.0 * dt * dt
        assert min(costs) >= lp - eps
        slacks.append(lp - vickrey_optimum(sc.cost, 2.0, 1.0))
    assert slacks[0] >= slacks[1] >= slacks[2] >= -1e-12
