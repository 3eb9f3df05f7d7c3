"""Daily series container and the basic correlation toolkit.

Everything here is a pure function of its inputs. ``TimeSeries`` values are
stored as read-only numpy arrays so instances can be shared freely.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
from scipy import special

from .errors import (
    DegenerateSeriesError,
    FormatError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericalDegeneracyError,
)

ACVF = "ACVF"
ACF = "ACF"
PACF = "PACF"

DEFAULT_START = date(2000, 1, 1)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Gap-free daily observations starting at ``start_date``."""

    values: np.ndarray
    start_date: date = DEFAULT_START
    frequency: int = 1

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.size == 0:
            raise InsufficientDataError("a series needs at least one value")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("series values must be finite")
        if self.frequency != 1:
            raise InvalidArgumentError("only daily series (frequency 1) are supported")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.start_date == other.start_date and np.array_equal(self.values, other.values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def end_date(self) -> date:
        return self.start_date + timedelta(days=self.n - 1)

    def date_at(self, index: int) -> date:
        return self.start_date + timedelta(days=int(index))

    def index_of(self, day: date) -> int:
        return (day - self.start_date).days

    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(self.n)]

    def with_values(self, values, start_date: date | None = None) -> "TimeSeries":
        return TimeSeries(values, self.start_date if start_date is None else start_date)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        """Sub-series of positions ``start:stop`` with the calendar shifted."""
        return TimeSeries(self.values[start:stop], self.date_at(start))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["date", "value"])
        for day, value in zip(self.dates(), self.values):
            writer.writerow([day.isoformat(), repr(float(value))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "TimeSeries":
        """Read a ``date,value`` CSV from a path or an open text stream."""
        if isinstance(source, (str, Path)):
            with open(source, newline="") as fh:
                return cls.from_csv(fh)
        reader = csv.reader(source)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "value"]:
            raise FormatError("expected header 'date,value'")
        days, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                days.append(date.fromisoformat(row[0].strip()))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
        if not days:
            raise InsufficientDataError("CSV holds no observations")
        for prev, cur in zip(days, days[1:]):
            if (cur - prev).days != 1:
                raise FormatError(f"calendar gap between {prev} and {cur}")
        return cls(values, days[0])


@dataclass(frozen=True, eq=False)
class DifferencedSeries(TimeSeries):
    """Output of :func:`difference`; remembers what :func:`integrate` needs."""

    d: int = 0
    seasonal_d: int = 0
    period: int = 1
    heads: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class CorrelationSequence:
    kind: str
    lags: np.ndarray
    values: np.ndarray
    n: int

    def __getitem__(self, lag: int) -> float:
        idx = int(lag) - int(self.lags[0])
        if idx < 0 or idx >= self.values.size:
            raise IndexError(f"lag {lag} not available")
        return float(self.values[idx])

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class WhitenessReport:
    statistic: float
    lags_used: int
    fitted_params: int
    degrees_of_freedom: int
    p_value: float

    @property
    def is_white(self) -> bool:
        return self.p_value >= 0.05

    @property
    def verdict(self) -> str:
        return ">= 0.05" if self.is_white else "< 0.05"


def _as_array(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float).reshape(-1)


def acvf(series, max_lag: int) -> CorrelationSequence:
    """Sample autocovariances with divisor ``n`` for lags ``0..max_lag``."""
    x = _as_array(series)
    n = x.size
    if n < 2:
        raise InsufficientDataError("acvf needs at least two observations")
    if not 0 <= max_lag < n:
        raise InvalidArgumentError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    xc = x - x.mean()
    gamma = np.array([np.dot(xc[: n - h], xc[h:]) / n for h in range(max_lag + 1)])
    return CorrelationSequence(ACVF, np.arange(max_lag + 1), gamma, n)


def acf(series, max_lag: int) -> CorrelationSequence:
    gamma = acvf(series, max_lag)
    g0 = gamma.values[0]
    x = _as_array(series)
    if g0 <= 1e-14 * max(1.0, float(np.mean(x * x))):
        raise DegenerateSeriesError("series has zero variance")
    rho = gamma.values / g0
    rho[0] = 1.0
    np.clip(rho, -1.0, 1.0, out=rho)
    return CorrelationSequence(ACF, gamma.lags, rho, gamma.n)


def durbin_levinson(rho: np.ndarray, max_lag: int):
    """Run the Durbin-Levinson recursion on autocorrelations ``rho[0..max_lag]``.

    Returns the partial autocorrelations for lags ``1..max_lag``, the final
    AR coefficients and the relative prediction-error variances ``v[0..max_lag]``.
    """
    alpha = np.zeros(max_lag)
    phi = np.zeros(0)
    v = np.empty(max_lag + 1)
    v[0] = rho[0]
    for k in range(1, max_lag + 1):
        if v[k - 1] <= 0:
            raise NumericalDegeneracyError(f"prediction-error variance vanished at lag {k - 1}")
        a = (rho[k] - np.dot(phi, rho[k - 1:0:-1])) / v[k - 1]
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        alpha[k - 1] = a
        v[k] = v[k - 1] * (1.0 - a * a)
    return alpha, phi, v


def pacf(series, max_lag: int) -> CorrelationSequence:
    if max_lag < 1:
        raise InvalidArgumentError("pacf needs max_lag >= 1")
    rho = acf(series, max_lag)
    alpha, _, _ = durbin_levinson(rho.values, max_lag)
    return CorrelationSequence(PACF, np.arange(1, max_lag + 1), alpha, rho.n)


def difference(series: TimeSeries, d: int = 1, D: int = 0, period: int = 1) -> DifferencedSeries:
    """Apply ``(1-B)^d (1-B^period)^D``, caching the values lost at the front."""
    if d not in (0, 1, 2) or D not in (0, 1):
        raise InvalidArgumentError("d must be 0, 1 or 2 and D must be 0 or 1")
    if period < 1:
        raise InvalidArgumentError("period must be >= 1")
    x = _as_array(series)
    lost = d + D * period
    if x.size - lost < 1:
        raise InsufficientDataError(f"differencing removes {lost} of {x.size} observations")
    heads = []
    for _ in range(D):
        heads.append(("seasonal", x[:period].copy()))
        x = x[period:] - x[:-period]
    for _ in range(d):
        heads.append(("regular", x[:1].copy()))
        x = np.diff(x)
    start = series.start_date if isinstance(series, TimeSeries) else DEFAULT_START
    return DifferencedSeries(
        x, start + timedelta(days=lost), d=d, seasonal_d=D, period=period, heads=tuple(heads)
    )


def integrate(series: DifferencedSeries) -> TimeSeries:
    """Invert :func:`difference` using its cached leading values."""
    x = np.array(series.values, dtype=float)
    for kind, head in reversed(series.heads):
        if kind == "regular":
            x = np.concatenate([head, head[0] + np.cumsum(x)])
        else:
            s = head.size
            out = np.concatenate([head, np.zeros(x.size)])
            for t in range(x.size):
                out[t + s] = x[t] + out[t]
            x = out
    lost = series.d + series.seasonal_d * series.period
    return TimeSeries(x, series.start_date - timedelta(days=lost))


def rolling_mean(series: TimeSeries, window: int) -> TimeSeries:
    """Trailing mean; the first ``window - 1`` points average what is available."""
    x = _as_array(series)
    if not 1 <= window <= x.size:
        raise InvalidArgumentError(f"window must lie in [1, {x.size}]")
    # direct window sums rather than a cumulative sum, which drifts on long series
    padded = np.concatenate([np.zeros(window - 1), x])
    sums = np.lib.stride_tricks.sliding_window_view(padded, window).sum(axis=1)
    counts = np.minimum(np.arange(1, x.size + 1), window)
    out = sums / counts
    return series.with_values(out)


def chi2_sf(x: float, df: float) -> float:
    """Upper tail probability of the chi-square distribution."""
    if df <= 0:
        raise InvalidArgumentError("degrees of freedom must be positive")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def default_whiteness_lags(n: int) -> int:
    return max(1, min(20, n // 5))


def whiteness_test(residuals, h: int | None = None, fitted_params: int = 0) -> WhitenessReport:
    """Li-McLeod portmanteau test on residual autocorrelations.

    The statistic is ``n * sum(r_k^2) + h(h+1)/(2n)`` over lags 1..h, referred
    to a chi-square with ``h - fitted_params`` degrees of freedom.
    """
    x = _as_array(residuals)
    n = x.size
    if h is None:
        h = default_whiteness_lags(n)
    if h <= fitted_params:
        raise InvalidArgumentError(f"need h > fitted_params, got h={h}, k={fitted_params}")
    if n <= h + 1:
        raise InsufficientDataError(f"need n > h + 1, got n={n}, h={h}")
    try:
        rho = acf(x, h).values[1:]
    except DegenerateSeriesError:
        # perfectly fitted residuals carry no serial correlation
        rho = np.zeros(h)
    stat = n * float(np.dot(rho, rho)) + h * (h + 1) / (2.0 * n)
    df = h - fitted_params
    return WhitenessReport(stat, h, fitted_params, df, chi2_sf(stat, df))


def significance_band(n: int) -> float:
    return 1.96 / math.sqrt(n)
