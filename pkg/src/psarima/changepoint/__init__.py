"""Piecewise-stationary break detection."""
from .design import LaggedDesign, build_design
from .detect import (
    CandidateSet,
    DetectorConfig,
    ScreeningRecord,
    ScreeningResult,
    SegmentedModel,
    attach_whiteness,
    detect,
    extract_candidates,
    fit_segments,
    screen,
    select_lambda,
)
from .lasso import LassoFit, fused_lasso_fit, kkt_violation, lambda_max, soft_threshold

__all__ = [
    "CandidateSet", "DetectorConfig", "LaggedDesign", "LassoFit", "ScreeningRecord",
    "ScreeningResult", "SegmentedModel", "attach_whiteness", "build_design", "detect", "extract_candidates",
    "fit_segments", "fused_lasso_fit", "kkt_violation", "lambda_max", "screen",
    "select_lambda", "soft_threshold",
]
