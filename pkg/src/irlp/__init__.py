"""Iteratively reweighted l1/l2 solvers for lp-regularized (0 < p < 1)
unconstrained minimization, with stationarity certificates and a fixed-eps
reweighting method whose approximation parameter never needs to shrink."""

from .approx import EpsApprox, F_eps, eps_bound_satisfied, eps_threshold, h_u, h_u_subdiff
from .core import (
    ConfigurationError,
    InternalSolverError,
    LeastSquaresObjective,
    LpProblem,
    NonConvergenceError,
    SmoothObjective,
    conjugate_exponent,
    estimate_lipschitz,
    lp_norm_p,
    objective_F,
)
from .harness import (
    ExperimentSpec,
    Instance,
    check_trace,
    generate_orthonormal_instance,
    generate_uniform_instance,
    load_instance,
    make_problem,
    run_experiment,
    save_instance,
)
from .solvers import (
    Method,
    SolverConfig,
    SolverRun,
    Status,
    solve,
    solve_lasso_warmstart,
    solve_new_irl1,
    solve_type1,
    solve_type2,
)
from .stationarity import (
    StationarityReport,
    build_report,
    first_order_residual,
    lower_bound_first,
    lower_bound_second,
    second_order_check,
)
from .subproblems import (
    ProxConfig,
    Weights,
    bb_initial_L,
    exact_weighted_subproblem,
    line_search_step,
    minimize_weighted,
    prox_weighted_l1,
    prox_weighted_l2,
    smoothed_lp_objective,
    weights_new_irl1,
    weights_type12,
)

__version__ = "0.1.0"
