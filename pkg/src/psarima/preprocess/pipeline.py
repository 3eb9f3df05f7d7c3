"""Weekday detrending, seasonal removal and the end-to-end preparation chain."""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..arima import ArimaModel, ArimaOrder, FitConfig, fit
from ..errors import (
    ConvergenceError,
    InsufficientDataError,
    InvalidArgumentError,
    PsarimaError,
    RankDeficiencyError,
    StageError,
)
from ..series import TimeSeries
from .turnstile import StationDaily, daily_entries


def weekend_indicator(series: TimeSeries) -> np.ndarray:
    return np.array([d.weekday() >= 5 for d in series.dates()], dtype=float)


def detrend_weekday(series: TimeSeries) -> tuple[TimeSeries, float, float]:
    """Regress on (1, weekend) and return ``(residual, intercept, weekend_coef)``.

    With a single binary regressor the least-squares fit is the pair of
    group means, which is what is computed.
    """
    if series.n < 14:
        raise InsufficientDataError("need at least two full weeks")
    weekend = weekend_indicator(series).astype(bool)
    x = series.values
    if weekend.all() or not weekend.any():
        raise RankDeficiencyError("span holds only weekdays or only weekend days")
    intercept = float(x[~weekend].mean())
    coef = float(x[weekend].mean()) - intercept
    fitted = intercept + coef * weekend
    return series.with_values(x - fitted), intercept, coef


@dataclass(frozen=True)
class SeasonalSpec:
    P: int = 0
    D: int = 1
    Q: int = 1
    period: int = 7
    auto: bool = False  # choose P, Q in {0, 1} by AICc at the given D

    def order(self, P=None, Q=None) -> ArimaOrder:
        return ArimaOrder(0, 0, 0, self.P if P is None else P, self.D,
                          self.Q if Q is None else Q, self.period)


def _fit_seasonal(series, order, config):
    try:
        return fit(series, order, config)
    except ConvergenceError as err:
        if err.best is None:
            raise
        return err.best


def deseasonalize(series: TimeSeries, spec: SeasonalSpec | None = None,
                  config: FitConfig | None = None) -> tuple[TimeSeries, ArimaModel]:
    """Fit a purely seasonal SARIMA and return its one-step residuals and the model.

    The residual series starts after the ``D * period`` observations lost
    to seasonal differencing.
    """
    spec = spec or SeasonalSpec()
    if series.n < 4 * spec.period:
        raise InsufficientDataError(f"need at least {4 * spec.period} observations")
    if spec.auto:
        fits = [_fit_seasonal(series, spec.order(P, Q), config)
                for P, Q in itertools.product((0, 1), (0, 1))]
        model = min(fits, key=lambda m: (m.aicc, m.order.n_params))
    else:
        model = _fit_seasonal(series, spec.order(), config)
    return model.residuals, model


@dataclass(frozen=True)
class PreprocessConfig:
    max_per_interval: int = 10000
    interval_hours: float = 4.0
    imputation_window: int = 7
    max_gap_days: int = 2
    seasonal: SeasonalSpec = field(default_factory=SeasonalSpec)

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessConfig":
        doc = dict(doc)
        if "seasonal" in doc:
            doc["seasonal"] = SeasonalSpec(**doc["seasonal"])
        try:
            return cls(**doc)
        except TypeError as err:
            raise InvalidArgumentError(f"bad preprocess config: {err}") from err


@dataclass(frozen=True, eq=False)
class PreprocessReport:
    station: str
    daily: StationDaily
    weekday_intercept: float
    weekend_coefficient: float
    seasonal_model: ArimaModel
    residual: TimeSeries
    stage_series: dict  # name -> TimeSeries, in pipeline order

    def to_dict(self) -> dict:
        return {
            "station": self.station,
            "weekday_intercept": self.weekday_intercept,
            "weekend_coefficient": self.weekend_coefficient,
            "seasonal_model": self.seasonal_model.to_dict(),
            "anomalies": [a.to_dict() for a in self.daily.anomaly_log],
            "stages": {
                name: {"start": s.start_date.isoformat(), "values": s.values.tolist()}
                for name, s in self.stage_series.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _stage(name, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except PsarimaError as err:
        raise StageError(name, str(err)) from err


def prepare_series(daily: TimeSeries, config: PreprocessConfig | None = None,
                   fit_config: FitConfig | None = None):
    """Detrend and deseasonalize an already aggregated daily series."""
    config = config or PreprocessConfig()
    detrended, intercept, coef = _stage("detrend", detrend_weekday, daily)
    residual, model = _stage("deseasonalize", deseasonalize, detrended, config.seasonal,
                             fit_config)
    return detrended, intercept, coef, residual, model


def pipeline(records, station: str, date_range=None, config: PreprocessConfig | None = None,
             fit_config: FitConfig | None = None) -> PreprocessReport:
    """daily_entries, then detrend_weekday, then deseasonalize.

    Raises
    ------
    StageError
        Naming the failing stage; the original error is chained.
    """
    config = config or PreprocessConfig()
    daily = _stage("daily_entries", daily_entries, records, station, date_range,
                   config.max_per_interval, config.interval_hours,
                   config.imputation_window, config.max_gap_days)
    detrended, intercept, coef, residual, model = prepare_series(daily.series, config,
                                                                 fit_config)
    stages = {"daily": daily.series, "detrended": detrended, "residual": residual}
    return PreprocessReport(station, daily, intercept, coef, model, residual, stages)


def config_to_dict(config: PreprocessConfig) -> dict:
    return asdict(config)
