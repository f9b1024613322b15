"""Queue elimination: rebuild any feasible state without queues.

Given a feasible state, every origin ``i`` is made to release, at each
instant, exactly the departures bottleneck ``i`` produced minus what its
child bottlenecks produced, shifted so that no one waits.  Link departure
patterns and the destination arrival stream are unchanged, so only the
queueing delay disappears from the total cost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DsoTreeError,
    HorizonError,
    InfeasibleInputError,
    SamplingError,
    TransformError,
)
from .kinematics import (
    TOL,
    CostBreakdown,
    LagrangianView,
    TrafficState,
    binned_cost,
    check_feasibility,
    lagrangian_view,
    simulate,
    total_cost,
)
from .network import Scenario
from .piecewise import StepFunction, is_exact

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransformResult:
    original: TrafficState
    transformed: TrafficState
    original_lagrangian: LagrangianView
    transformed_lagrangian: LagrangianView
    original_cost: CostBreakdown
    transformed_cost: CostBreakdown
    cost_delta: object
    predicted_delta: object
    max_q_star_violation: object
    max_w_star: object

    @property
    def schedule_delta(self):
        return self.transformed_cost.schedule - self.original_cost.schedule

    def as_dict(self) -> dict:
        from .report import jsonable

        return jsonable({
            "original_cost": self.original_cost.as_dict(),
            "transformed_cost": self.transformed_cost.as_dict(),
            "cost_delta": self.cost_delta,
            "predicted_delta": self.predicted_delta,
            "schedule_delta": self.schedule_delta,
            "max_q_star_violation": self.max_q_star_violation,
            "max_w_star": self.max_w_star,
            "transformed_inflows": {
                str(i): {"breakpoints": list(f.breakpoints), "rates": list(f.values)}
                for i, f in sorted(self.transformed.inflows.items())
            },
        })


def predicted_cost_delta(view: LagrangianView):
    """Minus the queueing delay carried by all commuters."""
    net = view.network
    total = 0
    ivals = view.intervals()
    for i in net.nodes:
        flow = view.subtree_inflow(i)
        wmeans = view.w[i].means()
        for k, (a, b) in enumerate(ivals):
            total += wmeans[k] * flow[k] * (b - a)
    return -total


def queue_free_inflows(state: TrafficState) -> dict:
    """Entry profiles releasing, at node ``i``, bottleneck ``i``'s departures
    net of its children's, ``d_i`` ahead of the bottleneck."""
    net = state.network
    x = state.departure_rate
    out = {}
    for i in net.nodes:
        parts = [x[i].shift(-net.free_flow[i])] + [x[j] for j in net.children[i]]
        coeffs = [1] + [-1] * len(net.children[i])
        out[i] = StepFunction.combine(parts, coeffs)
    return out


def eliminate_queues(state: TrafficState, tol=TOL) -> TransformResult:
    """Build the queue-free counterpart of ``state`` and re-simulate it."""
    scenario = state.scenario
    view = lagrangian_view(state)
    report = check_feasibility(state, view=view, tol=tol)
    if not report["horizon"].passed:
        raise HorizonError("destination arrivals leave the horizon; pad the horizon first")
    if not report.passed:
        bad = [k for k, c in report.checks.items() if not c.passed]
        raise InfeasibleInputError(f"input state violates: {', '.join(bad)}")

    raw = queue_free_inflows(state)
    worst_negative = 0
    inflows = {}
    for i, f in raw.items():
        low = f.min_value() if f.values else 0
        worst_negative = max(worst_negative, -low)
        if low < 0:
            if is_exact(low) or -low > tol:
                raise TransformError(f"origin {i} would need a negative inflow {low}")
            f = f.map_values(lambda v: v if v > 0 else 0 * v).simplified()
        inflows[i] = f

    new_state = simulate(scenario, inflows, validate=True)
    new_view = lagrangian_view(new_state)
    max_w = max((max(abs(v) for v in w.starts + w.ends) for w in new_view.w.values() if w.starts),
                default=0)
    if max_w > (0 if new_state.scenario.exact else tol):
        raise TransformError(f"re-simulated state still queues (max delay {max_w})")

    before = total_cost(state, view)
    after = total_cost(new_state, new_view)
    return TransformResult(
        original=state,
        transformed=new_state,
        original_lagrangian=view,
        transformed_lagrangian=new_view,
        original_cost=before,
        transformed_cost=after,
        cost_delta=after.total - before.total,
        predicted_delta=predicted_cost_delta(view),
        max_q_star_violation=worst_negative,
        max_w_star=max_w,
    )


def random_inflows(scenario: Scenario, rng: np.random.Generator, max_pieces: int = 4,
                   window: float = 0.5) -> dict:
    """Random piecewise-constant entry profiles integrating to the demands.

    Each origin releases its demand over a random sub-window of the first
    ``window`` share of its entry window, split into up to ``max_pieces``
    pieces with Dirichlet weights.  Short sub-windows overload bottlenecks,
    long ones stay below capacity.
    """
    out = {}
    t0, t1 = (float(h) for h in scenario.horizon)
    span = (t1 - t0) * window
    for i in scenario.network.nodes:
        q = float(scenario.demand[i])
        if q <= 0:
            out[i] = StepFunction()
            continue
        lo, _ = (float(v) for v in scenario.entry_window(i))
        length = span * rng.uniform(0.05, 1.0)
        start = lo + rng.uniform(0.0, span - length)
        n = int(rng.integers(1, max_pieces + 1))
        cuts = np.sort(rng.uniform(0.0, length, size=n - 1))
        bps = [start] + [start + float(c) for c in cuts] + [start + length]
        widths = np.diff(bps)
        if np.any(widths <= 1e-6 * length):
            bps, widths = [start, start + length], np.array([length])
        weights = rng.dirichlet(np.ones(len(widths)))
        rates = tuple(float(w * q / wd) for w, wd in zip(weights, widths))
        f = StepFunction(tuple(float(b) for b in bps), rates)
        # renormalise so the integral matches the demand to rounding
        f = f.map_values(lambda v, s=q / f.integral(): v * s)
        out[i] = f
    return out


def sample_state(scenario: Scenario, rng: np.random.Generator, retries: int = 50, **kw) -> TrafficState:
    """A simulated random state whose arrivals all fall inside the horizon."""
    t1 = float(scenario.horizon[1])
    for _ in range(retries):
        state = simulate(scenario, random_inflows(scenario, rng, **kw))
        span = state.arrival_span()
        if span is None or span[1] <= t1:
            return state
    raise SamplingError(f"no sample fitted the horizon after {retries} tries")


@dataclass
class SampleRecord:
    sample_id: int
    feasible: bool
    schedule_delta: float
    cost_delta: float
    predicted_delta: float
    max_q_star_violation: float
    max_w_star: float
    original_total: float
    transformed_total: float
    lp_gap: float | None
    checks: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())


@dataclass
class VerificationReport:
    records: list
    lp_objective: float | None
    parameters: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def summary(self) -> dict:
        recs = self.records
        failed = [r.sample_id for r in recs if not r.passed]
        names = sorted({k for r in recs for k in r.checks})
        return {
            "samples": len(recs),
            "passed": len(recs) - len(failed),
            "failed": failed,
            "queued_samples": sum(1 for r in recs if r.cost_delta < 0),
            "check_counts": {n: sum(1 for r in recs if r.checks.get(n)) for n in names},
            "worst_schedule_delta": max((abs(r.schedule_delta) for r in recs), default=0.0),
            "worst_delta_mismatch": max((abs(r.cost_delta - r.predicted_delta) for r in recs), default=0.0),
            "max_cost_delta": max((r.cost_delta for r in recs), default=0.0),
            "max_q_star_violation": max((r.max_q_star_violation for r in recs), default=0.0),
            "min_lp_gap": min((r.lp_gap for r in recs if r.lp_gap is not None), default=None),
            "lp_objective": self.lp_objective,
        }

    def as_dict(self) -> dict:
        from .report import jsonable

        rows = []
        for r in self.records:
            rows.append({
                "sample_id": r.sample_id, "feasible": r.feasible,
                "schedule_delta": r.schedule_delta, "cost_delta": r.cost_delta,
                "predicted_delta": r.predicted_delta,
                "max_q_star_violation": r.max_q_star_violation,
                "original_total": r.original_total, "transformed_total": r.transformed_total,
                "lp_gap": r.lp_gap, "checks": r.checks, "error": r.error,
            })
        return jsonable({"passed": self.passed, "parameters": self.parameters,
                         "summary": self.summary(), "samples": rows})


def check_transform(res: TransformResult, lp_objective=None, tol=TOL) -> dict:
    """Per-sample verdicts of the verification harness."""
    scale = max(1.0, abs(float(res.original_cost.total)))
    sched_scale = max(1.0, abs(float(res.original_cost.schedule)))
    fr = check_feasibility(res.transformed, view=res.transformed_lagrangian, tol=tol)
    checks = {
        "transformed_feasible": fr.passed and float(res.max_w_star) <= tol,
        "schedule_preserved": abs(float(res.schedule_delta)) <= tol * sched_scale,
        "cost_decreases": float(res.cost_delta) <= tol * scale,
        "delta_matches_prediction": abs(float(res.cost_delta - res.predicted_delta)) <= tol * scale,
        "q_star_nonnegative": float(res.max_q_star_violation) <= tol,
    }
    if lp_objective is not None:
        binned = float(binned_cost(res.transformed).total)
        checks["above_lp_optimum"] = binned >= float(lp_objective) - 1e-6
    return checks


def verify_nonexistence(scenario: Scenario, n_samples: int, seed: int, lp_objective=None,
                        tol=TOL, seed_states=(), **sampler) -> VerificationReport:
    """Sample random feasible states, eliminate their queues, and record
    whether each reconstruction is queue-free and cheaper by exactly its
    queueing delay.

    ``lp_objective`` (if given) is the discretised optimum that no
    reconstruction may beat once its arrivals are priced per slot.
    ``seed_states`` are extra states checked first (for instance the
    simulated optimum itself).
    """
    records = []
    states = list(seed_states)
    for idx in range(n_samples):
        rng = np.random.default_rng([seed, idx])
        states.append(sample_state(scenario, rng, **sampler))
    for idx, state in enumerate(states):
        try:
            res = eliminate_queues(state, tol=tol)
        except DsoTreeError as exc:
            log.warning("sample %d failed: %s", idx, exc)
            records.append(SampleRecord(idx, False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, None,
                                        {}, error=f"{type(exc).__name__}: {exc}"))
            continue
        checks = check_transform(res, lp_objective, tol)
        gap = None
        if lp_objective is not None:
            gap = float(binned_cost(state).total) - float(lp_objective)
        records.append(SampleRecord(
            idx, checks["transformed_feasible"], float(res.schedule_delta), float(res.cost_delta),
            float(res.predicted_delta), float(res.max_q_star_violation), float(res.max_w_star),
            float(res.original_cost.total), float(res.transformed_cost.total), gap, checks,
        ))
    params = {"n_samples": n_samples, "seed": seed, "seed_states": len(seed_states),
              "tol": tol, "sampler": {"max_pieces": 4, "window": 0.5, **sampler}}
    return VerificationReport(records, None if lp_objective is None else float(lp_objective), params)
