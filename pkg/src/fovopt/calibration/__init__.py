"""Subjective-rating processing and model calibration."""
from ..metrics import correlations
from .fitting import FitResult, ParamFit, fit_decay, fit_param_function, fit_param_functions
from .pipeline import CalibrationReport, calibrate, cross_validate, screen_and_aggregate
from .ratings import (
    MosPoint,
    RatingRecord,
    aggregate_mos,
    read_ratings_csv,
    write_ratings_csv,
    zscore_normalize,
)
from .screening import (
    ConsistencyResult,
    inconsistency_count,
    inconsistent_cells,
    screen_bt500,
    screen_consistency,
)
from .synthetic import (
    STUDY_TAUS,
    joint_conditions,
    q_conditions,
    s_conditions,
    synthetic_panel,
)

__all__ = [
    "CalibrationReport", "ConsistencyResult", "FitResult", "MosPoint", "STUDY_TAUS",
    "ParamFit", "RatingRecord", "aggregate_mos", "calibrate", "correlations",
    "cross_validate", "fit_decay", "fit_param_function", "fit_param_functions",
    "inconsistency_count", "inconsistent_cells", "joint_conditions", "q_conditions",
    "read_ratings_csv", "s_conditions", "screen_and_aggregate", "screen_bt500",
    "screen_consistency", "synthetic_panel", "write_ratings_csv", "zscore_normalize",
]
