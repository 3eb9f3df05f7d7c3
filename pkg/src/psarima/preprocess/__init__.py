"""Turnstile ingestion and the series preparation chain."""
from .pipeline import (
    PreprocessConfig,
    PreprocessReport,
    SeasonalSpec,
    deseasonalize,
    detrend_weekday,
    pipeline,
    prepare_series,
    weekend_indicator,
)
from .turnstile import (
    HEADER,
    AnomalyRecord,
    ParseResult,
    Reject,
    StationDaily,
    TurnstileRecord,
    daily_entries,
    parse_turnstile,
    stations,
)

__all__ = [
    "HEADER", "AnomalyRecord", "ParseResult", "PreprocessConfig", "PreprocessReport", "Reject",
    "SeasonalSpec", "StationDaily", "TurnstileRecord", "daily_entries", "deseasonalize",
    "detrend_weekday", "parse_turnstile", "pipeline", "prepare_series", "stations",
    "weekend_indicator",
]
