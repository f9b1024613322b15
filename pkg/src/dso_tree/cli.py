"""Command-line front end: ``dso-tree <command> --scenario FILE --out DIR``.

Exit codes: 0 ok, 2 unreadable input or bad flags, 3 invalid scenario,
4 infeasible or untransformable input, 5 a check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import elimination, kinematics, solver
from .errors import DsoTreeError, ValidationError
from .export import write_inflows_csv, write_solution_csv, write_state_csv, read_solution
from .network import load_scenario, scenario_to_dict
from .piecewise import as_number
from .report import jsonable, write_csv, write_json

log = logging.getLogger("dso_tree")

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_CHECK = 0, 2, 3, 4, 5
COMMANDS = ("validate", "simulate", "transform", "solve", "check-oc", "verify", "refine")


class CheckFailed(Exception):
    pass


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _count(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dso-tree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--dt", type=str, default=None, help="override the scenario time step")
    common.add_argument("--exact", action="store_true", help="rational arithmetic throughout")
    common.add_argument("--tol", type=_positive_float, default=kinematics.TOL)
    common.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    helps = {
        "validate": "check structure, horizon and any given inflows",
        "simulate": "run the point-queue dynamics and account costs",
        "transform": "eliminate the queues of a simulated state",
        "solve": "queue-free optimum on the time-expanded network",
        "check-oc": "optimality conditions of the optimum (or of --solution)",
        "verify": "sample states and check queue elimination on each",
        "refine": "optimum for a list of time steps",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "verify":
            p.add_argument("--n-samples", type=_count, default=100)
        if name == "refine":
            p.add_argument("--dt-list", type=str, default="", help="comma-separated time steps")
        if name == "check-oc":
            p.add_argument("--solution", type=Path, default=None,
                           help="directory holding solution.csv and prices.csv to check instead")
    return parser


def _inflows(scenario, seed):
    if scenario.inflows:
        return dict(scenario.inflows)
    log.info("scenario has no inflows; drawing a random profile with seed %d", seed)
    return elimination.random_inflows(scenario, np.random.default_rng(seed))


def _plot(args, fn, *a, **kw):
    if args.no_plots:
        return
    from . import plotting

    getattr(plotting, fn)(*a, **kw)


def cmd_validate(args, scenario) -> dict:
    net = scenario.network
    payload = {
        "nodes": net.node_count,
        "depth": net.depth(),
        "root_children": list(net.root_children),
        "total_demand": scenario.total_demand,
        "slots": scenario.slot_count,
        "horizon_admissible": scenario.admissible(),
        "capacity_slack": {str(i): net.capacity[i] - sum((net.capacity[j] for j in net.children[i]), 0)
                           for i in net.nodes},
        "entry_windows": {str(i): list(scenario.entry_window(i)) for i in net.nodes},
    }
    ok = True
    if scenario.inflows:
        state = kinematics.simulate(scenario, scenario.inflows)
        report = kinematics.check_feasibility(state, tol=args.tol)
        payload["feasibility"] = report.as_dict()
        ok = report.passed
    write_json(args.out / "validation.json", payload)
    if not ok:
        raise CheckFailed("given inflows do not produce a feasible state")
    return payload


def cmd_simulate(args, scenario) -> dict:
    state = kinematics.simulate(scenario, _inflows(scenario, args.seed))
    view = kinematics.lagrangian_view(state)
    report = kinematics.check_feasibility(state, view=view, tol=args.tol)
    write_state_csv(args.out / "state.csv", state)
    write_inflows_csv(args.out / "inflows.csv", state.inflows)
    payload = {
        "lagrangian": kinematics.total_cost(state, view).as_dict(),
        "eulerian": kinematics.eulerian_cost(state).as_dict(),
        "max_queue": state.max_queue(),
        "feasibility": report.as_dict(),
    }
    write_json(args.out / "cost.json", payload)
    _plot(args, "plot_cumulative", state, args.out / "cumulative.png", title="simulated state")
    if not report.passed:
        raise CheckFailed("simulated state fails the feasibility checks")
    return payload


def cmd_transform(args, scenario) -> dict:
    state = kinematics.simulate(scenario, _inflows(scenario, args.seed))
    res = elimination.eliminate_queues(state, tol=args.tol)
    checks = elimination.check_transform(res, tol=args.tol)
    payload = res.as_dict()
    payload["checks"] = checks
    write_json(args.out / "transform.json", payload)
    write_state_csv(args.out / "original_state.csv", res.original)
    write_state_csv(args.out / "transformed_state.csv", res.transformed)
    write_inflows_csv(args.out / "original_inflows.csv", res.original.inflows)
    write_inflows_csv(args.out / "transformed_inflows.csv", res.transformed.inflows)
    _plot(args, "plot_cumulative", res.original, args.out / "original_cumulative.png", title="original")
    _plot(args, "plot_cumulative", res.transformed, args.out / "transformed_cumulative.png",
          title="queues eliminated")
    if not all(checks.values()):
        raise CheckFailed("transform checks failed: " + ", ".join(k for k, v in checks.items() if not v))
    return payload


def _solve_outputs(args, sol):
    write_solution_csv(args.out / "solution.csv", args.out / "prices.csv", sol)
    write_json(args.out / "summary.json", sol.summary())
    _plot(args, "plot_solution", sol, args.out / "solution.png")


def cmd_solve(args, scenario) -> dict:
    sol = solver.solve(scenario)
    _solve_outputs(args, sol)
    return sol.summary()


def cmd_check_oc(args, scenario) -> dict:
    if args.solution is not None:
        sol = read_solution(scenario, args.solution / "solution.csv", args.solution / "prices.csv")
    else:
        sol = solver.solve(scenario)
        _solve_outputs(args, sol)
    tol = 0 if scenario.exact else args.tol
    report = solver.check_optimality(sol, tol=tol)
    payload = report.as_dict()
    write_json(args.out / "optimality.json", payload)
    if not report.passed:
        raise CheckFailed("optimality conditions violated")
    return payload


def cmd_verify(args, scenario) -> dict:
    seeds, lp = [], None
    try:
        sol = solver.solve(scenario)
        lp = sol.objective
        seeds.append(kinematics.simulate(scenario, solver.solution_inflows(sol)))
    except DsoTreeError as exc:
        log.warning("no discretised optimum to compare against: %s", exc)
    report = elimination.verify_nonexistence(scenario, args.n_samples, args.seed, lp_objective=lp,
                                             tol=args.tol, seed_states=seeds)
    payload = report.as_dict()
    write_json(args.out / "verification.json", payload)
    write_csv(args.out / "verification.csv",
              ("sample_id", "feasible", "schedule_delta", "cost_delta", "predicted_delta",
               "max_q_star_violation", "passed"),
              [(r.sample_id, r.feasible, r.schedule_delta, r.cost_delta, r.predicted_delta,
                r.max_q_star_violation, r.passed) for r in report.records])
    _plot(args, "plot_verification", report, args.out / "verification.png")
    if not report.passed:
        raise CheckFailed(f"{len(report.summary()['failed'])} samples failed")
    return payload["summary"]


def cmd_refine(args, scenario) -> dict:
    dts = [as_number(v, scenario.exact) for v in args.dt_list.split(",") if v.strip()]
    rows = solver.refine_study(scenario, dts)
    write_csv(args.out / "convergence.csv", ("dt", "objective"), rows)
    ref = None
    if scenario.network.node_count == 1:
        i = scenario.network.nodes[0]
        ref = solver.vickrey_optimum(scenario.cost, scenario.demand[i], scenario.network.capacity[i])
    if rows:
        _plot(args, "plot_convergence", rows, args.out / "convergence.png", reference=ref)
    return {"rows": len(rows)}


HANDLERS = {
    "validate": cmd_validate, "simulate": cmd_simulate, "transform": cmd_transform,
    "solve": cmd_solve, "check-oc": cmd_check_oc, "verify": cmd_verify, "refine": cmd_refine,
}


def _exit_code(exc) -> int:
    if isinstance(exc, CheckFailed):
        return EXIT_CHECK
    if isinstance(exc, (json.JSONDecodeError, OSError)):
        return EXIT_PARSE
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    return EXIT_INFEASIBLE


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DSO_TREE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        scenario = load_scenario(args.scenario, exact=args.exact, dt=args.dt)
        write_json(args.out / "scenario.json", scenario_to_dict(scenario))
        result = HANDLERS[args.command](args, scenario)
    except (DsoTreeError, CheckFailed, json.JSONDecodeError, OSError) as exc:
        code = _exit_code(exc)
        write_json(args.out / "error.json", {"command": args.command, "error": type(exc).__name__,
                                             "message": str(exc), "exit_code": code})
        print(f"dso-tree {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    print(json.dumps(jsonable(result), sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
