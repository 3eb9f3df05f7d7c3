"""Synthetic piecewise-ARIMA series with known breaks, and a brute-force break oracle."""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date

import numpy as np

from .arima import ArimaModel, model_from_dict
from .arima.simulate import simulate_with
from .changepoint.design import lag_matrix
from .errors import InsufficientDataError, InvalidArgumentError, InvalidModelError
from .series import DEFAULT_START, TimeSeries

MIN_SEGMENT = 20


@dataclass(frozen=True)
class PiecewiseSpec:
    segments: tuple  # ((length, ArimaModel), ...)
    seed: int = 0
    start_date: date = DEFAULT_START

    def __post_init__(self):
        segs = tuple((int(n), m) for n, m in self.segments)
        if not segs:
            raise InvalidArgumentError("need at least one segment")
        if any(n < MIN_SEGMENT for n, _ in segs):
            raise InvalidArgumentError(f"every segment needs at least {MIN_SEGMENT} points")
        object.__setattr__(self, "segments", segs)

    @property
    def length(self) -> int:
        return sum(n for n, _ in self.segments)

    @property
    def breaks(self) -> list[int]:
        return list(np.cumsum([n for n, _ in self.segments])[:-1].astype(int))

    @classmethod
    def from_dict(cls, doc: dict) -> "PiecewiseSpec":
        """``{"seed": 0, "start_date": "2000-01-01", "segments": [{"length": 300, "model": {...}}]}``

        Model documents use the keys of ``ArimaModel.to_dict`` (order, phi,
        theta, seasonal_phi, seasonal_theta, mean, sigma2).
        """
        try:
            segs = [(s["length"], model_from_dict(s["model"])) for s in doc["segments"]]
        except (KeyError, TypeError) as err:
            raise InvalidArgumentError(f"malformed piecewise spec: {err}") from err
        start = date.fromisoformat(doc["start_date"]) if "start_date" in doc else DEFAULT_START
        return cls(tuple(segs), int(doc.get("seed", 0)), start)

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseSpec":
        return cls.from_dict(json.loads(text))


def gen_piecewise(spec: PiecewiseSpec) -> tuple[TimeSeries, list[int]]:
    """Concatenate independent simulations, one per segment.

    A single generator seeded with ``spec.seed`` feeds every segment in
    turn, while each segment starts its recursion afresh (with its own
    burn-in), so segments share no state.
    """
    for k, (_, model) in enumerate(spec.segments):
        roots = model.roots()
        if not (roots.causal and roots.invertible):
            raise InvalidModelError(f"segment {k} model is not causal and invertible")
    rng = np.random.default_rng(spec.seed)
    parts = [simulate_with(m, n, rng) for n, m in spec.segments]
    return TimeSeries(np.concatenate(parts), spec.start_date), spec.breaks


def _sse(x: np.ndarray, p_lag: int) -> float:
    y, z = lag_matrix(x, p_lag)
    coef, *_ = np.linalg.lstsq(z, y, rcond=None)
    r = y - z @ coef
    return float(r @ r)


def admissible_splits(n: int, p_lag: int, min_gap: int) -> range:
    edge = max(min_gap, p_lag + 2)
    return range(edge, n - edge + 1)


def oracle_single_break(series: TimeSeries, p_lag: int = 1, min_gap: int = 7) -> tuple[int, float]:
    """Best single split by exhaustive search and its relative SSE gain.

    Every split ``m`` (first index of the second piece) leaving at least
    ``max(min_gap, p_lag + 2)`` points per side is tried; each side gets its
    own AR(``p_lag``)+intercept least-squares fit. Ties go to the earliest split.
    """
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    n = x.size
    if p_lag < 0 or min_gap < 1:
        raise InvalidArgumentError("need p_lag >= 0 and min_gap >= 1")
    if n < 2 * (min_gap + p_lag + 2):
        raise InsufficientDataError(f"need n >= {2 * (min_gap + p_lag + 2)}, got {n}")
    best_m, best_sse = -1, np.inf
    for m in admissible_splits(n, p_lag, min_gap):
        sse = _sse(x[:m], p_lag) + _sse(x[m:], p_lag)
        if sse < best_sse:
            best_m, best_sse = m, sse
    whole = _sse(x, p_lag)
    gain = (whole - best_sse) / whole if whole > 0 else 0.0
    return best_m, float(gain)


def constant_model(level: float) -> ArimaModel:
    """Noiseless constant segment, handy for step fixtures."""
    from .arima import ArimaOrder
    return ArimaModel(ArimaOrder(), mean=float(level), sigma2=0.0)
