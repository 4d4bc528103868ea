"""Topology inference for networked SIR(S) epidemics.

Generate synthetic contact networks, simulate discrete-time epidemics on
them, and recover the network from the observed state trajectory with
l1-penalized box-constrained per-node likelihood fits (plus a logistic
regression baseline and an evaluation/experiment harness).
"""

__version__ = "0.1.0"

from .errors import NumericalError, ValidationError
from .netgen import (
    GenSpec,
    Topology,
    gen_scale_free,
    gen_small_world,
    load_topology,
    save_topology,
    topology_from_edges,
)
from .simulate import (
    EpidemicParams,
    Trajectory,
    check_transition_invariants,
    load_trajectory,
    save_trajectory,
    simulate,
    step,
    transmission_prob,
)
from .likelihood import (
    EPS_FLOOR,
    IndicatorCache,
    ThetaVector,
    build_indicators,
    gradient,
    hessian,
    load_theta_matrix,
    neg_loglik,
    save_theta_matrix,
    surrogate_alpha,
)
from .optimize import (
    FitConfig,
    FitResult,
    NodeFit,
    NodeFitReport,
    PriorConstraints,
    coordinate_update,
    fit_all,
    fit_neighborhood,
    line_search,
    solve_quadratic_subproblem,
    symmetrize,
)
from .model_select import (
    AUTO_GLOBAL,
    AUTO_PER_NODE,
    BicScore,
    EstimateResult,
    LambdaGrid,
    SelectionResult,
    bic_node,
    estimate_topology,
    lambda_grid,
    refit_known_omega,
    select_lambda,
)
from .baseline_lr import (
    LrDataset,
    LrModel,
    binarize,
    estimate_topology_lr,
    fit_l1_logistic,
    lambda_grid_lr,
    lr_lambda_max,
)
from .evaluate import (
    DegreeBreakdown,
    DetectionStats,
    RocCurve,
    confusion,
    edge_frequency,
    per_degree_stats,
    roc,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    child_seed,
    emit_reports,
    load_config,
    run_experiment,
)
