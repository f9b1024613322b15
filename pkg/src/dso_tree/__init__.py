"""Dynamic system-optimal traffic on tree networks with point-queue bottlenecks."""

from .elimination import (
    TransformResult,
    VerificationReport,
    eliminate_queues,
    predicted_cost_delta,
    random_inflows,
    sample_state,
    verify_nonexistence,
)
from .errors import (
    CapacityError,
    CycleError,
    DemandError,
    DomainError,
    DsoTreeError,
    HorizonError,
    InfeasibleError,
    InfeasibleInputError,
    NonMonotoneError,
    SamplingError,
    SolverError,
    TooLargeError,
    TransformError,
    ValidationError,
)
from .kinematics import (
    CostBreakdown,
    FeasibilityReport,
    LagrangianView,
    TrafficState,
    binned_cost,
    check_feasibility,
    eulerian_cost,
    lagrangian_view,
    simulate,
    state_from_rates,
    total_cost,
    trace_back,
)
from .network import (
    ROOT,
    Scenario,
    ScheduleCost,
    TreeNetwork,
    build_network,
    downstream_free_flow,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    schedule_cost,
)
from .piecewise import CumulativeCurve, PiecewiseLinear, StepFunction
from .solver import (
    LpSolution,
    OptimalityReport,
    brute_force_lp,
    check_optimality,
    discretize,
    perturb,
    refine_study,
    solution_inflows,
    solve,
    vickrey_optimum,
)

__version__ = "0.1.0"
