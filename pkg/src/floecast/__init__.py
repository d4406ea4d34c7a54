"""Subseasonal-to-seasonal daily sea-ice concentration forecasting.

A desk-scale benchmark engine: gridded concentration archives, a
compression stage (orthonormal-basis or convolutional autoencoder),
latent-space forecasting backbones trained with unrolled teacher forcing,
simplex-weighted ensembling, and verification metrics down to
September-extent extremes. Everything is deterministic for a fixed
configuration and seed.
"""

from .backbones import (
    GRID_BACKBONES,
    LATENT_BACKBONES,
    BackboneError,
    CycleNet,
    DLinear,
    LatentForecaster,
    NLinear,
    SCINetLite,
    SdapModel,
    TrainConfig,
    build_forecaster,
    climatology_forecast,
    dominant_period,
    fit_sdap,
    fit_supervised,
    load_forecaster,
    persistence_forecast,
    save_forecaster,
    window_ends,
)
from .config import BenchConfig, ConfigError, EvalConfig, load_config
from .ensembles import (
    RANK_TIERS,
    EnsembleError,
    EnsembleSpec,
    GramAccumulator,
    apply_ensemble,
    fit_weights,
    fit_weights_from_gram,
    project_simplex,
    rank_members,
    tier_members,
)
from .grids import (
    LAND,
    OCEAN,
    POLE_HOLE,
    ArchiveError,
    ArchiveFormatError,
    ArchiveLoadError,
    Climatology,
    DateRange,
    GridArchive,
    SicGrid,
    Splits,
    SynthConfig,
    clim_doy,
    compute_climatology,
    read_archive,
    sea_ice_extent,
    synth_archive,
    synth_mask,
    write_archive,
)
from .latent import (
    AutoencoderCompressor,
    AutoencoderConfig,
    CompressionError,
    Compressor,
    EofCompressor,
    LatentSeries,
    encode_series,
    evaluate_reconstruction,
    fit_autoencoder,
    fit_eof,
    load_compressor,
    save_compressor,
)
from .metrics import (
    METRIC_NAMES,
    DetrendedScores,
    MetricAccumulator,
    MetricReport,
    acc,
    acc_field,
    detrended_metrics,
    mae,
    mse,
    nse,
    psnr,
    r2,
    rmse,
    ssim,
)
from .pipeline import DataError, Workspace, run_window_comparison, workspace
from .rollout import (
    ForecastRun,
    RolloutConfig,
    RolloutError,
    TrainingError,
    UnrollResult,
    compare_rolling_windows,
    evaluate_run,
    fit_autoregressive,
    forcing_ratio,
    rollout_baseline,
    rollout_latent,
    rollout_starts,
    unroll,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # archives and grids
    "ArchiveError",
    "ArchiveFormatError",
    "ArchiveLoadError",
    "Climatology",
    "DateRange",
    "GridArchive",
    "LAND",
    "OCEAN",
    "POLE_HOLE",
    "SicGrid",
    "Splits",
    "SynthConfig",
    "clim_doy",
    "compute_climatology",
    "read_archive",
    "sea_ice_extent",
    "synth_archive",
    "synth_mask",
    "write_archive",
    # metrics
    "DetrendedScores",
    "METRIC_NAMES",
    "MetricAccumulator",
    "MetricReport",
    "acc",
    "acc_field",
    "detrended_metrics",
    "mae",
    "mse",
    "nse",
    "psnr",
    "r2",
    "rmse",
    "ssim",
    # compression
    "AutoencoderCompressor",
    "AutoencoderConfig",
    "CompressionError",
    "Compressor",
    "EofCompressor",
    "LatentSeries",
    "encode_series",
    "evaluate_reconstruction",
    "fit_autoencoder",
    "fit_eof",
    "load_compressor",
    "save_compressor",
    # backbones
    "BackboneError",
    "CycleNet",
    "DLinear",
    "GRID_BACKBONES",
    "LATENT_BACKBONES",
    "LatentForecaster",
    "NLinear",
    "SCINetLite",
    "SdapModel",
    "TrainConfig",
    "build_forecaster",
    "dominant_period",
    "climatology_forecast",
    "fit_sdap",
    "fit_supervised",
    "load_forecaster",
    "persistence_forecast",
    "save_forecaster",
    "window_ends",
    # rollout
    "ForecastRun",
    "RolloutConfig",
    "RolloutError",
    "TrainingError",
    "UnrollResult",
    "compare_rolling_windows",
    "evaluate_run",
    "fit_autoregressive",
    "forcing_ratio",
    "rollout_baseline",
    "rollout_latent",
    "rollout_starts",
    "unroll",
    # ensembles
    "EnsembleError",
    "EnsembleSpec",
    "GramAccumulator",
    "RANK_TIERS",
    "apply_ensemble",
    "fit_weights",
    "fit_weights_from_gram",
    "project_simplex",
    "rank_members",
    "tier_members",
    # configuration and pipeline
    "BenchConfig",
    "ConfigError",
    "DataError",
    "EvalConfig",
    "Workspace",
    "load_config",
    "run_window_comparison",
    "workspace",
]
