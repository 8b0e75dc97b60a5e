"""Finite abstractions of sampled control systems on uniform grids.

Predict transition counts before building, build and stream the transitions,
and choose the grid aspect ratio at fixed cell volume by solving the convex
log-coordinate reformulation globally.
"""

from .abstraction import (
    INSIDE,
    OVERFLOW,
    AbstractionStats,
    ComparisonReport,
    IntegrationBlowup,
    Plant,
    SuccessorBox,
    TransitionWriter,
    UniformGrid,
    build_abstraction,
    compare_counts,
    count_transitions,
    default_substeps,
    integrate,
    successors,
)
from .growth import (
    GrowthBound,
    PredictorTerm,
    check_growth_monotone,
    disturbance_offset,
    eval_growth,
    to_predictor_term,
)
from .models import ModelSpec, linear_flow_map, linear_growth_matrix, lookup
from .numat import (
    block_triangular_form,
    border_growth_data,
    border_with_ones,
    expm,
    integral_expm,
    is_essentially_nonnegative,
    is_irreducible,
    strongly_connected_components,
)
from .optimizer import (
    UNIQUE_GUARANTEED,
    UNIQUENESS_UNKNOWN,
    BoxBounds,
    DivergenceError,
    InfeasibleRegion,
    Objective,
    Solution,
    brute_force_minimize,
    lower_bound_check,
    minimize,
    objective_gradient,
    objective_hessian,
    objective_value,
    project_hyperplane_box,
    uniqueness_certificate,
)
from .predictor import (
    exact_expected_cells,
    mc_expected_cells,
    predict_abstraction_total,
    predict_family,
    predict_single,
)

__version__ = "0.1.0"
