"""Early fault detection for district heating substations.

Pipeline: normal-behaviour autoencoders trained per event, reconstruction-error
anomaly scores thresholded at the 99th training percentile, a criticality
counter that turns pointwise flags into eventwise detections, benchmark metrics
(accuracy, reliability, earliness), threshold tuning by stratified
cross-validation, and sparse-bias root-cause attribution.
"""

from .errors import (
    HeatSentryError,
    NumericError,
    ParseError,
    SchemaError,
    StratificationError,
    TrainingError,
    UndefinedMetricError,
    ValidationError,
)
from .data import (
    CompletenessStat,
    Disturbance,
    EventSpec,
    IncidentReport,
    TimeSeriesFrame,
    completeness,
    load_disturbances,
    load_manifest,
    load_reports,
    load_timeseries,
    write_disturbances,
    write_manifest,
    write_reports,
    write_timeseries,
)
from .preprocess import (
    PreprocessorState,
    TrainingMask,
    build_training_mask,
    conditioning_matrix,
    encode_calendar,
    fit_preprocessor,
    transform,
)
from .autoencoder import (
    AEConfig,
    AEModel,
    TrainReport,
    gradient_check,
    init_model,
    reconstruct,
    train,
)
from .scoring import (
    CriticalitySeries,
    Detection,
    DetectionConfig,
    ScoreModel,
    build_maintenance_mask,
    detect_event,
    fit_score_model,
    load_trace,
    run_criticality,
    score_points,
    write_trace,
)
from .evaluation import (
    EventOutcome,
    MetricsReport,
    ThresholdSearch,
    build_outcome,
    earliness,
    evaluate_events,
    f_beta,
    pointwise_accuracy,
    select_threshold,
    validate_window,
)
from .attribution import (
    ArcanaConfig,
    AttributionReport,
    ImportanceRanking,
    aggregate_importances,
    attribution_report,
    optimize_bias,
)
from .synth import FaultInjection, SignalSpec, SynthConfig, SynthResult, generate, inject
from .presets import PROFILES, VARIANTS, get_profile, normalize_variant
from .bundle import Bundle, config_hash, load_bundle, save_bundle
from .backend import BACKEND

__version__ = "0.1.0"

__all__ = [
    "AEConfig",
    "AEModel",
    "ArcanaConfig",
    "AttributionReport",
    "BACKEND",
    "Bundle",
    "CompletenessStat",
    "CriticalitySeries",
    "Detection",
    "DetectionConfig",
    "Disturbance",
    "EventOutcome",
    "EventSpec",
    "FaultInjection",
    "HeatSentryError",
    "ImportanceRanking",
    "IncidentReport",
    "MetricsReport",
    "NumericError",
    "PROFILES",
    "ParseError",
    "PreprocessorState",
    "SchemaError",
    "ScoreModel",
    "SignalSpec",
    "StratificationError",
    "SynthConfig",
    "SynthResult",
    "ThresholdSearch",
    "TimeSeriesFrame",
    "TrainReport",
    "TrainingError",
    "TrainingMask",
    "UndefinedMetricError",
    "VARIANTS",
    "ValidationError",
    "aggregate_importances",
    "attribution_report",
    "build_maintenance_mask",
    "build_outcome",
    "build_training_mask",
    "completeness",
    "conditioning_matrix",
    "config_hash",
    "detect_event",
    "earliness",
    "encode_calendar",
    "evaluate_events",
    "f_beta",
    "fit_preprocessor",
    "fit_score_model",
    "generate",
    "get_profile",
    "gradient_check",
    "init_model",
    "inject",
    "load_bundle",
    "load_disturbances",
    "load_manifest",
    "load_reports",
    "load_timeseries",
    "load_trace",
    "normalize_variant",
    "optimize_bias",
    "pointwise_accuracy",
    "reconstruct",
    "run_criticality",
    "save_bundle",
    "score_points",
    "select_threshold",
    "train",
    "transform",
    "validate_window",
    "write_disturbances",
    "write_manifest",
    "write_reports",
    "write_timeseries",
    "write_trace",
]
