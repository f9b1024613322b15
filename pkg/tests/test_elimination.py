from fractions import Fraction as F

import numpy as np
import pytest

from conftest import step
from dso_tree.elimination import (
    check_transform,
    eliminate_queues,
    predicted_cost_delta,
    random_inflows,
    sample_state,
    verify_nonexistence,
)
from dso_tree.errors import HorizonError, InfeasibleInputError
from dso_tree.instances import random_tree_scenario, single_bottleneck, three_link_tree
from dso_tree.kinematics import (
    LagrangianView,
    check_feasibility,
    lagrangian_view,
    simulate,
    state_from_rates,
)
from dso_tree.piecewise import PiecewiseLinear
from dso_tree.solver import solve


def test_single_link_transform(queued_link):
    sc, inflow = queued_link
    res = eliminate_queues(simulate(sc, inflow))
    assert res.transformed.inflows[1] == step(0, 2, 1)
    assert res.max_w_star == 0
    assert res.cost_delta == -1
    assert res.predicted_delta == -1
    assert res.schedule_delta == 0
    assert all(check_transform(res).values())


def test_queue_free_state_is_fixed_point(tree3_scenario):
    st_ = simulate(tree3_scenario, {1: step(-3, -2, 1), 2: step(-5, -4, 1)})
    res = eliminate_queues(st_)
    assert res.cost_delta == 0 and res.predicted_delta == 0
    view0, view1 = res.original_lagrangian, res.transformed_lagrangian
    for i in (1, 2, 3):
        assert view0.q[i] == view1.q[i]


def test_joint_capacity_exactly_met():
    sc = three_link_tree(d=(0, 0, 0))
    st_ = simulate(sc, {1: step(0, 1, 1), 2: step(0, 1, 1)})
    assert st_.A[3](F(1, 2)) == st_.D[3](F(1, 2))
    res = eliminate_queues(st_)
    assert res.cost_delta == 0
    assert res.transformed.inflows[1] == st_.inflows[1]


def test_predicted_delta_is_linear_in_delay(queued_link):
    sc, inflow = queued_link
    view = lagrangian_view(simulate(sc, inflow))
    doubled = {i: PiecewiseLinear(w.ts, tuple(2 * v for v in w.starts), tuple(2 * v for v in w.ends))
               for i, w in view.w.items()}
    twice = LagrangianView(view.state, view.times, view.tau, view.sigma, doubled, view.q, view.cumulative)
    assert predicted_cost_delta(twice) == 2 * predicted_cost_delta(view)


def test_infeasible_input_rejected():
    sc = single_bottleneck(demand=2, horizon=(-4, 4))
    state = state_from_rates(sc, {1: step(0, 1, 1)}, {1: step(0, 1, 1)})
    with pytest.raises(InfeasibleInputError):
        eliminate_queues(state)


def test_horizon_overflow_rejected():
    # the queue pushes arrivals past the end of the horizon
    sc = single_bottleneck(demand=2, horizon=(-2, 2))
    with pytest.raises(HorizonError):
        eliminate_queues(simulate(sc, {1: step(1, 2, 2)}))


def test_transformed_inflows_are_exact_in_exact_mode(tree3_scenario):
    st_ = simulate(tree3_scenario, {1: step(-4, -3, 1), 2: step(F(-11, 2), -5, 2)})
    res = eliminate_queues(st_)
    assert res.transformed.scenario.exact
    assert all(f.exact for f in res.transformed.inflows.values())
    assert res.cost_delta == res.predicted_delta < 0
    assert res.schedule_delta == 0


def test_random_inflows_integrate_to_demand():
    rng = np.random.default_rng(5)
    sc = random_tree_scenario(rng)
    inflows = random_inflows(sc, rng)
    for i in sc.network.nodes:
        assert inflows[i].integral() == pytest.approx(sc.demand[i], rel=1e-12)
        if inflows[i]:
            assert inflows[i].min_value() >= 0


def test_empty_verification():
    rep = verify_nonexistence(three_link_tree(), 0, seed=1)
    assert rep.passed and rep.records == []
    assert rep.summary()["samples"] == 0


def test_single_link_verification_above_optimum():
    sc = single_bottleneck(demand=2, horizon=(-3, 3))
    lp = solve(sc).objective
    assert lp == 1
    rep = verify_nonexistence(sc.with_horizon((-3.0, 3.0)), 100, seed=7, lp_objective=lp)
    assert rep.passed, rep.summary()
    assert min(r.original_total for r in rep.records) >= 1 - 1e-9
    assert min(r.transformed_total for r in rep.records) >= 1 - 1e-9


def test_three_link_verification():
    rep = verify_nonexistence(three_link_tree(), 100, seed=42, lp_objective=solve(three_link_tree()).objective)
    assert rep.passed, rep.summary()
    assert rep.summary()["queued_samples"] > 0


def test_verification_is_reproducible():
    sc = three_link_tree()
    a = verify_nonexistence(sc, 5, seed=3).as_dict()
    b = verify_nonexistence(sc, 5, seed=3).as_dict()
    assert a == b


def test_sampled_states_fit_horizon():
    rng = np.random.default_rng(9)
    sc = random_tree_scenario(rng)
    state = sample_state(sc, rng)
    assert state.arrival_span()[1] <= sc.horizon[1]
    assert check_feasibility(state).passed
