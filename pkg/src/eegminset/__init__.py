"""Minimal-EEG-set-up finder.

Trains a one-class dual-decoder autoencoder per candidate electrode set-up
on synthetic alpha-wave recordings, ranks set-ups by cross-validated
F-score, and applies a comfort-aware selection rule to pick the smallest
set-up that still detects the alpha state.
"""

__version__ = "0.1.0"

from .dataset import (
    Channel,
    Electrode,
    Label,
    Recording,
    SetUp,
    builtin_setups,
    derive_channel_signal,
    load_recording,
    save_recording,
    setup_by_name,
)
from .evaluation import (
    ComfortRanking,
    EvalConfig,
    EvalReport,
    FoldResult,
    SetupResult,
    ThresholdRule,
    calibrate_threshold,
    classify,
    default_comfort_ranking,
    fscore,
    make_folds,
    roc_auc,
    run_fold,
    select_optimal,
    sweep,
)
from .features import (
    FeatureConfig,
    FeatureSeries,
    ModelWindow,
    Normalizer,
    apply_normalizer,
    assemble_model_windows,
    build_feature_series,
    extract_features,
    fit_normalizer,
    periodogram,
    window_label,
)
from .model import (
    NetSpec,
    TrainConfig,
    UsadModel,
    forward_ae,
    gradient_check,
    load_model,
    reconstruction_error,
    save_model,
    score,
    score_windows,
    train,
)
from .synthgen import SynthConfig, generate, generate_corpus

__all__ = [
    "Channel",
    "ComfortRanking",
    "Electrode",
    "EvalConfig",
    "EvalReport",
    "FeatureConfig",
    "FeatureSeries",
    "FoldResult",
    "Label",
    "ModelWindow",
    "NetSpec",
    "Normalizer",
    "Recording",
    "SetUp",
    "SetupResult",
    "SynthConfig",
    "ThresholdRule",
    "TrainConfig",
    "UsadModel",
    "apply_normalizer",
    "assemble_model_windows",
    "build_feature_series",
    "builtin_setups",
    "calibrate_threshold",
    "classify",
    "default_comfort_ranking",
    "derive_channel_signal",
    "extract_features",
    "fit_normalizer",
    "forward_ae",
    "fscore",
    "generate",
    "generate_corpus",
    "gradient_check",
    "load_model",
    "load_recording",
    "make_folds",
    "periodogram",
    "reconstruction_error",
    "roc_auc",
    "run_fold",
    "save_model",
    "save_recording",
    "score",
    "score_windows",
    "select_optimal",
    "setup_by_name",
    "sweep",
    "train",
    "window_label",
]
