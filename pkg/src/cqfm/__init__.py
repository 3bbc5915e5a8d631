"""Characteristics-based quantile factor models estimated by quantile-projected PCA."""

from .baselines import BaselineEstimate, pca_pipeline, ppca_pipeline
from .basis import SieveBasis, evaluate_basis, fit_basis, standardize_columns
from .data import PanelData, load_panel, save_panel
from .exceptions import ConvergenceError, CqfmError, RankDeficientError, StageError
from .factor_count import (
    FactorCountResult,
    default_threshold,
    eigen_ratio_estimate,
    rank_min_estimate,
    select_num_factors,
)
from .qppca import (
    QppcaEstimate,
    evaluate_loading_function,
    extract_factors,
    qppca_pipeline,
    recover_loading_coefficients,
    update_factors,
)
from .quantreg import (
    QuantileFitResult,
    SieveFit,
    check_loss,
    fit_least_squares_panel,
    fit_quantile,
    fit_quantile_panel,
)
from .simulate import (
    DgpSpec,
    MetricsReport,
    SimulatedPanel,
    loading_grid_rmse,
    rotation_align,
    run_monte_carlo,
    simulate_panel,
    trace_r2,
)

__version__ = "0.1.0"
