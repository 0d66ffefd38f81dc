"""Primal-dual solvers for nonconvex minimax problems whose inner and outer
variables are tied together by linear constraints.

The package solves

    min over x in X  max over {y in Y : A x + B y <= / = c}  f(x, y) + h(x) - g(y)

through its Lagrangian saddle formulation.  ``pdapg_solve`` alternates
proximal steps and handles strongly concave or merely concave inner problems;
``pdpg_l_solve`` exploits objectives linear in y to update the outer variable
and the multiplier simultaneously.  Both report a prox-gradient stationarity
measure whose norm bounds the constraint violation row by row, so every
iterate carries its own feasibility certificate.

``validation`` holds brute-force grid oracles for small instances and
``experiments`` the built-in instances, the simultaneous-gradient baseline
and the network interdiction study.  The ``couplemax`` console script drives
both experiments from presets or JSON configs.
"""

from .sets import (
    AffineSubspace,
    Ball,
    Box,
    ConvexSet,
    DykstraIntersection,
    FullSpace,
    Halfspace,
    MultiplierCone,
    NonnegOrthant,
    ProductSet,
    Sense,
    Simplex,
    project_affine,
    project_ball,
    project_box,
    project_dykstra,
    project_multiplier_cone,
    project_simplex,
)
from .prox import (
    IterativeProx,
    L1Norm,
    ProxFunction,
    QuadraticDistance,
    ZeroFunction,
    prox_iterative,
    prox_l1,
    prox_zero,
)
from .model import (
    CouplingConstraints,
    MinimaxProblem,
    SmoothFunction,
    estimate_lipschitz,
    lagrangian_grads,
    lagrangian_value,
    linear_y_coefficient,
    regularized_lagrangian_value,
)
from .linalg import spectral_norm
from .stationarity import (
    PotentialValue,
    StationarityReport,
    UntrustedPotentialError,
    constraint_violation,
    grad_G,
    inner_max_value,
    potential_M,
    potential_S,
    potential_V,
)
from .trace import IterateState, SolveResult, SolveTrace, TraceRow, first_hit_iteration
from .pdapg import (
    ConcaveRegime,
    PdapgParams,
    StronglyConcaveRegime,
    check_strongly_concave_weights,
    descent_constant,
    pdapg_schedule,
    pdapg_solve,
    pdapg_step,
    pdapg_theory_params,
    strongly_concave_bounds,
)
from .pdpgl import (
    ManualSchedule,
    PdpgLParams,
    TheorySchedule,
    pdpg_l_solve,
    pdpg_l_step,
    pdpg_l_y_step,
    pdpgl_schedule,
    vdescent_coefficient,
)
from .validation import (
    GridSpec,
    brute_dual_value,
    brute_primal_value,
    check_grid_interior_feasibility,
    scsc_diagnostic_constants,
    suggest_multiplier_extent,
)
from .experiments import (
    AttackMetric,
    AttackStudyConfig,
    AttackStudyRow,
    FlowAttackData,
    FlowNetwork,
    attacked_min_cost,
    baseline_sim_gda,
    default_init,
    flow_polytope,
    gen_bilinear,
    gen_flow_attack,
    make_ncsc_quadratic,
    make_random_ncsc,
    max_flow_value,
    min_cost_flow_lp,
    run_attack_study,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace", "Ball", "Box", "ConvexSet", "DykstraIntersection",
    "FullSpace", "Halfspace", "MultiplierCone", "NonnegOrthant", "ProductSet",
    "Sense", "Simplex", "project_affine", "project_ball", "project_box",
    "project_dykstra", "project_multiplier_cone", "project_simplex",
    "IterativeProx", "L1Norm", "ProxFunction", "QuadraticDistance",
    "ZeroFunction", "prox_iterative", "prox_l1", "prox_zero",
    "CouplingConstraints", "MinimaxProblem", "SmoothFunction",
    "estimate_lipschitz", "lagrangian_grads", "lagrangian_value",
    "linear_y_coefficient", "regularized_lagrangian_value", "spectral_norm",
    "PotentialValue", "StationarityReport", "UntrustedPotentialError",
    "constraint_violation", "grad_G", "inner_max_value", "potential_M",
    "potential_S", "potential_V",
    "IterateState", "SolveResult", "SolveTrace", "TraceRow",
    "first_hit_iteration",
    "ConcaveRegime", "PdapgParams", "StronglyConcaveRegime",
    "check_strongly_concave_weights", "descent_constant", "pdapg_schedule",
    "pdapg_solve", "pdapg_step", "pdapg_theory_params",
    "strongly_concave_bounds",
    "ManualSchedule", "PdpgLParams", "TheorySchedule", "pdpg_l_solve",
    "pdpg_l_step", "pdpg_l_y_step", "pdpgl_schedule", "vdescent_coefficient",
    "GridSpec", "brute_dual_value", "brute_primal_value",
    "check_grid_interior_feasibility", "scsc_diagnostic_constants",
    "suggest_multiplier_extent",
    "AttackMetric", "AttackStudyConfig", "AttackStudyRow", "FlowAttackData",
    "FlowNetwork", "attacked_min_cost", "baseline_sim_gda", "default_init",
    "flow_polytope", "gen_bilinear", "gen_flow_attack", "make_ncsc_quadratic",
    "make_random_ncsc", "max_flow_value", "min_cost_flow_lp",
    "run_attack_study",
]
