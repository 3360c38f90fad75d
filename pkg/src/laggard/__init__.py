"""laggard: Bayesian treed distributed-lag models.

Fits single-exposure and mixture distributed-lag models with
regression-tree ensembles, optional lagged interaction surfaces,
and modifier-driven heterogeneous effects, for Gaussian and logistic
outcomes.
"""

from .archive import FORMAT_VERSION, load_fit, save_fit
from .data import (
    Dataset,
    ExposureMatrix,
    ModifierColumn,
    ModifierDef,
    dataset_from_frame,
    iqr_scale,
    load_wide_table,
    modifier_split_candidates,
    pivot_time_series,
)
from .diagnostics import DiagnosticsReport, diagnose, gelman_split_rhat
from .engine import (
    Hooks,
    McmcControl,
    ModelSpec,
    PosteriorFit,
    ShrinkageConfig,
    fit,
    node_effect_posterior,
    run_chains,
)
from .errors import (
    ArchiveError,
    DataError,
    LaggardError,
    ShapeError,
    SpecError,
    UnsupportedModelError,
)
from .inference import (
    FitSummary,
    Levels,
    Mean,
    Percentile,
    adj_coexposure,
    combine_fits,
    critical_windows,
    cumulative_effect,
    exposure_selection,
    individualized_effect,
    marginal_effect,
    modifier_pip,
    subgroup_effect,
    summarize,
)
from .polya_gamma import pg_mean, sample_polya_gamma
from .simulate import SimConfig, simulate_dataset
from .trees import (
    DlmTree,
    ModifierTree,
    TreePair,
    TreePriorParams,
    dlm_log_gen_prior,
    tree_log_prior,
)

__version__ = "0.1.0"
