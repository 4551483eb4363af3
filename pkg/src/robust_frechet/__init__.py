"""Robust global Fréchet regression for metric-space-valued responses.

Supported response spaces: symmetric matrices under the Frobenius metric
and one-dimensional distributions (as quantile functions on a fixed grid)
under the L2-Wasserstein metric. The estimator downweights outlying
objects through elastic-net regularized weights with closed-form updates,
tuned by a BIC criterion over a power-scaled grid.
"""

from .diagnostics import RegularityReport, contraction_trace, estimate_regularity
from .errors import (
    DegenerateBIC,
    DimensionMismatch,
    GridMismatch,
    InsufficientIterations,
    InvariantError,
    NearSingularDenominator,
    NoFeasiblePair,
    ParseError,
    RobustFrechetError,
    ShapeError,
)
from .metric import (
    MetricObject,
    QuantileFunction,
    SymMatrix,
    distance,
    frobenius_distance,
    monotone_projection,
    trapezoid_weights,
    wasserstein_distance,
    weighted_mean_matrix,
    weighted_mean_quantile,
)
from .regression import (
    Dataset,
    FitConfig,
    FitResult,
    TuningPair,
    adaptive_weight,
    fit_robust,
    fit_standard,
    leverage,
    objective,
    predict,
    profiled_penalty,
)
from .simulation import (
    DGP,
    DistributionParams,
    LOOReport,
    ReplicateReport,
    ScenarioSpec,
    ScenarioSummary,
    TruthBundle,
    contaminate,
    dgp1_truth,
    dgp2_truth,
    gen_dgp1,
    gen_dgp2,
    gen_dist_dgp,
    leave_one_out,
    mise_distribution,
    mse_matrix,
    quantile_grid,
    run_scenario,
)
from .tuning import (
    BICRecord,
    GridSpec,
    bic_score,
    build_grid,
    lambda_max,
    own_point_weights,
    select_tuning,
)

__version__ = "0.1.0"
