"""Sparse linear regression with smooth adjustment for correlated effects.

Estimators: lasso, naive elastic net, MCP, and the smooth-adjustment pair
SACE (l1 + unit ridge + reversed adaptive term) and GSACE (MCP variant),
all solved by one deterministic coordinate-descent kernel. The package also
ships oracle estimators and desk-scale theory checks, 10-fold CV tuning,
post-fit hard thresholding, a simulation laboratory, and a rolling
index-tracking pipeline.
"""

from .data import (
    CoefficientVector,
    Dataset,
    StandardizationRecord,
    SupportSet,
    destandardize_coefficients,
    extract_support,
    load_dataset_csv,
    predict,
    residual,
    standardize,
    standardize_coefficients,
)
from .penalties import (
    AdaptiveWeightVector,
    PenaltyFamily,
    PenaltySpec,
    adaptive_weights,
    gsace_objective,
    mcp_derivative,
    mcp_value,
    sace_objective,
    soft_threshold,
)
from .solvers import (
    FitResult,
    InitialEstimate,
    InitialSource,
    KktReport,
    Method,
    explicit_solution_on_set,
    fit_elastic_net,
    fit_gsace,
    fit_lasso,
    fit_mcp,
    fit_sace,
    initial_from_lasso,
    initial_from_mcp,
    kkt_check,
)
from .transform import (
    ArtificialProblem,
    EquivalenceReport,
    build_artificial,
    equivalence_report,
    pseudo_inverse_transpose,
    solve_via_transform,
)
from .oracles import (
    BoundCheck,
    OracleEstimates,
    Theorem3Event,
    l2_bound,
    liu_oracle,
    ols_on_support,
    re_probe,
    theorem3_event,
    theoretical_lambda,
)
from .tuning import (
    CvCell,
    CvResult,
    Grid,
    ThresholdRule,
    apply_threshold,
    cross_validate,
    lambda_max,
    make_grid,
    refit_best,
    select_exact_k,
)
from .simlab import (
    MetricRow,
    ScenarioConfig,
    ScenarioTable,
    compute_metrics,
    export_estimate_profile,
    gen_example1,
    gen_example2,
    run_scenario,
)
from .tracker import (
    PricePanel,
    TrackingConfig,
    TrackReport,
    WindowSplit,
    load_prices,
    make_windows,
    run_tracking,
    synthetic_panel,
    track_window,
    tracking_error,
)

__version__ = "0.1.0"
