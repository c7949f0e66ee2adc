"""Structural recovery model.

Closed-form dependence of the expected recovery rate on the default
probability in a one-factor Merton model, a Monte Carlo oracle for the
underlying diffusion, and an empirical pipeline: cohort default rates with
withdrawal adjustment, PD binning and least-squares calibration of B.
"""

from .calibration import BinnedSeries, FitResult, bin_series, fit_b, fit_report, maturity_summary
from .cohort import (
    CohortOutcome,
    CohortSpec,
    RecordStore,
    build_cohort,
    default_rate,
    ingest,
    ingest_dir,
    pearson,
    rolling_series,
    series_pairs,
)
from .exceptions import (
    ConfigError,
    DataValidationError,
    DegenerateCohortError,
    DomainError,
    DuplicateKeyError,
    InsufficientDataError,
    StructuralRecoveryError,
    ZeroVarianceError,
)
from .model import ModelParams, compound_b, default_pd_grid, expected_loss, sample_curves, structural_rr
from .numerics import SeedSpec, log_norm_cdf, norm_cdf, norm_cdf_inv, substream
from .simulator import (
    MarketRealization,
    SimConfig,
    SyntheticDatasetConfig,
    generate_dataset,
    rating_params_for_b,
    realization_points,
    simulate,
    terminal_values,
)

__version__ = "0.1.0"
