"""Three-stage break detection: fused lasso, screening, per-segment ARIMA fits."""
from __future__ import annotations

import bisect
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import date

import numpy as np

from ..arima import ArimaModel, ArimaOrder, FitConfig, auto_fit
from ..errors import (
    ConvergenceError,
    InsufficientDataError,
    InvalidArgumentError,
    PsarimaError,
    SegmentFitError,
)
from ..series import TimeSeries, default_whiteness_lags, whiteness_test
from .design import LaggedDesign, build_design, lag_matrix
from .lasso import LassoFit, fused_lasso_fit, lambda_max

logger = logging.getLogger(__name__)

KEPT = "kept"
REMOVED = "removed"
TOO_SHORT = "too-short"
CAPPED = "capped"


@dataclass(frozen=True)
class DetectorConfig:
    """Detector settings.

    ``lambda1_grid=None`` builds ``n_lambda`` log-spaced values from the
    data's ``lambda_max`` down to ``lambda_ratio * lambda_max``. An explicit
    grid is stored sorted in decreasing order, so any ordering of the same
    values gives the same detector.
    """

    p_lag: int = 1
    lambda1_grid: tuple | None = None
    lambda2: float = 0.0
    cv_window_fraction: float = 0.75
    candidate_threshold: float = 1e-3
    min_gap: int = 7
    screening_tau: float = 0.05
    max_changepoints: int = 10
    n_lambda: int = 50
    lambda_ratio: float = 0.01
    whiteness_lags: int | None = None  # None: min(20, n // 5) per segment

    def __post_init__(self):
        if self.p_lag < 0:
            raise InvalidArgumentError("p_lag must be >= 0")
        if self.min_gap < 1 or self.min_gap <= self.p_lag:
            raise InvalidArgumentError("min_gap must be >= 1 and exceed p_lag")
        if self.lambda2 < 0:
            raise InvalidArgumentError("lambda2 must be >= 0")
        if not 0 < self.cv_window_fraction < 1:
            raise InvalidArgumentError("cv_window_fraction must lie in (0, 1)")
        if not self.candidate_threshold > 0:
            raise InvalidArgumentError("candidate_threshold must be positive")
        if not 0 < self.screening_tau < 1:
            raise InvalidArgumentError("screening_tau must lie in (0, 1)")
        if self.max_changepoints < 0:
            raise InvalidArgumentError("max_changepoints must be >= 0")
        if self.whiteness_lags is not None and self.whiteness_lags < 1:
            raise InvalidArgumentError("whiteness_lags must be >= 1")
        if self.n_lambda < 1 or not 0 < self.lambda_ratio <= 1:
            raise InvalidArgumentError("invalid automatic grid settings")
        if self.lambda1_grid is not None:
            grid = tuple(sorted((float(v) for v in self.lambda1_grid), reverse=True))
            if not grid or grid[-1] <= 0 or not all(np.isfinite(grid)):
                raise InvalidArgumentError("lambda1_grid must hold positive finite values")
            if len(set(grid)) != len(grid):
                raise InvalidArgumentError("lambda1_grid values must be distinct")
            object.__setattr__(self, "lambda1_grid", grid)

    def grid_for(self, design: LaggedDesign) -> np.ndarray:
        if self.lambda1_grid is not None:
            return np.array(self.lambda1_grid)
        top = lambda_max(design)
        if not top > 0:
            # perfectly fitted by one model: any positive lambda gives the null fit
            top = 1.0
        return top * np.logspace(0.0, math.log10(self.lambda_ratio), self.n_lambda)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda1_grid"] = None if self.lambda1_grid is None else list(self.lambda1_grid)
        return out


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple  # ((series index, jump norm), ...) in time order
    lambda_selected: float = float("nan")

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.candidates]

    def __len__(self) -> int:
        return len(self.candidates)


def _finite_or_none(v: float):
    return float(v) if math.isfinite(v) else None


@dataclass(frozen=True)
class ScreeningRecord:
    """Outcome for one candidate; ``location`` is where a kept break ended up."""

    index: int
    date: date
    magnitude: float
    mse_with: float
    mse_without: float
    verdict: str
    location: int | None = None
    location_date: date | None = None

    @property
    def gain(self) -> float:
        if not self.mse_without > 0:
            return 0.0
        return (self.mse_without - self.mse_with) / self.mse_without

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "date": self.date.isoformat(),
            "magnitude": self.magnitude,
            "mse_with": _finite_or_none(self.mse_with),
            "mse_without": _finite_or_none(self.mse_without),
            "verdict": self.verdict,
            "location": self.location,
            "location_date": None if self.location_date is None
            else self.location_date.isoformat(),
        }


@dataclass(frozen=True)
class ScreeningResult:
    breakpoints: tuple  # series indices, increasing
    log: tuple


# -- stage 1 -----------------------------------------------------------------

def _fit_or_best(design, lam, init, lambda2=0.0) -> LassoFit:
    try:
        return fused_lasso_fit(design, lam, lambda2, init=init)
    except ConvergenceError as err:
        logger.warning("fused lasso at lambda=%.3g stopped at the sweep cap", lam)
        return err.best


def select_lambda(design: LaggedDesign, config: DetectorConfig) -> float:
    """Pick lambda1 by forecasting the held-out tail with the last fitted coefficients.

    Fits use the leading ``cv_window_fraction`` of the rows, warm-started
    along the decreasing grid. Ties go to the larger lambda, except when
    every lambda scores the same: then the training window carries no
    information (typically a noiseless series whose only break lies in the
    held-out tail) and the smallest lambda is returned, leaving the
    decision to screening.
    """
    grid = config.grid_for(design)
    if grid.size == 1:
        return float(grid[0])
    n_train = int(math.floor(config.cv_window_fraction * design.n_rows))
    if n_train < design.width + 1 or n_train >= design.n_rows:
        raise InsufficientDataError("too few rows for the cross-validation split")
    train = design.head(n_train)
    z_val = design.regressors[n_train:]
    y_val = design.response[n_train:]
    best_lam, best_err, init = None, math.inf, None
    errors = []
    for lam in grid:
        fit = _fit_or_best(train, lam, init)
        init = fit.beta
        theta = fit.coefficients()[-1]
        err = float(np.mean((y_val - z_val @ theta) ** 2))
        logger.debug("lambda=%.4g validation mse=%.6g", lam, err)
        errors.append(err)
        if err < best_err:
            best_lam, best_err = float(lam), err
    if max(errors) - min(errors) <= 1e-12 * max(1.0, min(errors)):
        return float(grid[-1])
    return best_lam


def extract_candidates(beta_path, config: DetectorConfig) -> CandidateSet:
    """Threshold the jump-block norms and thin clusters closer than ``min_gap``."""
    fit = beta_path if isinstance(beta_path, LassoFit) else None
    beta = np.asarray(fit.beta if fit else beta_path, dtype=float)
    beta = beta.reshape(beta.shape[0], -1)
    norms = np.linalg.norm(beta, axis=1)
    norms[0] = 0.0
    lam = fit.lam if fit else float("nan")
    top = norms.max() if norms.size else 0.0
    if not top > 0:
        return CandidateSet((), lam)
    raw = np.flatnonzero(norms > config.candidate_threshold * top)
    kept, cluster = [], [int(raw[0])]
    for j in raw[1:]:
        if j - cluster[-1] < config.min_gap:
            cluster.append(int(j))
        else:
            kept.append(max(cluster, key=lambda i: (norms[i], -i)))
            cluster = [int(j)]
    kept.append(max(cluster, key=lambda i: (norms[i], -i)))
    return CandidateSet(tuple((j + config.p_lag, float(norms[j])) for j in kept), lam)


# -- stage 2 -----------------------------------------------------------------

def _ar_sse(x: np.ndarray, p_lag: int) -> tuple[float, int]:
    y, z = lag_matrix(x, p_lag)
    coef, *_ = np.linalg.lstsq(z, y, rcond=None)
    r = y - z @ coef
    return float(r @ r), y.size


def _shortest_side(config: DetectorConfig) -> int:
    # each side must leave residual degrees of freedom after the AR fit and
    # be long enough for fit_segments to fit at least a white-noise model
    return max(2 * (config.p_lag + 1), config.min_gap, ArimaOrder().min_length() + 1)


def _neighbours(breaks: list, m: int, n: int) -> tuple[int, int]:
    pos = bisect.bisect_left(breaks, m)
    left = breaks[pos - 1] if pos > 0 else 0
    right = breaks[pos] if pos < len(breaks) else n
    return left, right


def _evaluate(x, left, m, right, config: DetectorConfig):
    """(mse_with, mse_without) for splitting ``x[left:right]`` at ``m``.

    Residual MSEs divide by the residual degrees of freedom, so the extra
    coefficients of the split model are not rewarded for free. Returns
    None when a side is shorter than the configured minimum.
    """
    shortest = _shortest_side(config)
    if m - left < shortest or right - m < shortest:
        return None
    k = config.p_lag + 1
    sse_l, n_l = _ar_sse(x[left:m], config.p_lag)
    sse_r, n_r = _ar_sse(x[m:right], config.p_lag)
    sse_u, n_u = _ar_sse(x[left:right], config.p_lag)
    return (sse_l + sse_r) / (n_l + n_r - 2 * k), sse_u / (n_u - k)


def _gain(result) -> float:
    mse_with, mse_without = result
    return (mse_without - mse_with) / mse_without if mse_without > 0 else 0.0


def _refine(x, left, m, right, config: DetectorConfig) -> int:
    """Best split within ``2 * min_gap`` of ``m``; ties go to the nearest position."""
    span = 2 * config.min_gap
    best, best_key = m, None
    for k in range(max(left + 1, m - span), min(right, m + span + 1)):
        result = _evaluate(x, left, k, right, config)
        if result is None:
            continue
        key = (_gain(result), -abs(k - m), -k)
        if best_key is None or key > best_key:
            best, best_key = k, key
    return best


def screen(series: TimeSeries, candidates: CandidateSet, config: DetectorConfig) -> ScreeningResult:
    """Keep candidates whose split lowers the pooled AR residual MSE by more than ``tau``.

    Candidates are visited in decreasing jump magnitude. Each is judged
    against the nearest already retained breaks (or the series ends), and
    an accepted candidate is moved to the best split within ``2 * min_gap``
    of where the lasso put it. Retained breaks are then re-checked against
    their final neighbours, weakest first, until none is removed.
    """
    x = series.values
    n = x.size
    mags = dict(candidates.candidates)
    order = sorted(mags, key=lambda i: (-mags[i], i))
    kept: list[int] = []
    origin: dict[int, int] = {}  # break location -> candidate index
    records: dict[int, ScreeningRecord] = {}

    def record(m, result, verdict, loc=None):
        mse_with, mse_without = result if result is not None else (math.nan, math.nan)
        records[m] = ScreeningRecord(m, series.date_at(m), mags[m], mse_with, mse_without, verdict,
                                     loc, None if loc is None else series.date_at(loc))

    for m in order:
        left, right = _neighbours(kept, m, n)
        result = _evaluate(x, left, m, right, config)
        if result is None:
            record(m, None, TOO_SHORT)
            continue
        if not _gain(result) > config.screening_tau:
            record(m, result, REMOVED)
            continue
        loc = _refine(x, left, m, right, config)
        if loc in origin:
            record(m, result, REMOVED)
            continue
        bisect.insort(kept, loc)
        origin[loc] = m
        record(m, _evaluate(x, left, loc, right, config), KEPT, loc)

    changed = True
    while changed:
        changed = False
        for loc in sorted(kept, key=lambda b: (mags[origin[b]], b)):
            others = [b for b in kept if b != loc]
            left, right = _neighbours(others, loc, n)
            result = _evaluate(x, left, loc, right, config)
            if result is None or not _gain(result) > config.screening_tau:
                kept.remove(loc)
                record(origin[loc], result, REMOVED if result is not None else TOO_SHORT)
                changed = True
                break
            record(origin[loc], result, KEPT, loc)

    if len(kept) > config.max_changepoints:
        keep = set(sorted(kept, key=lambda b: (-mags[origin[b]], b))[: config.max_changepoints])
        for loc in kept:
            if loc not in keep:
                r = records[origin[loc]]
                records[origin[loc]] = ScreeningRecord(r.index, r.date, r.magnitude, r.mse_with,
                                                       r.mse_without, CAPPED)
        kept = sorted(keep)
    return ScreeningResult(tuple(kept), tuple(records[i] for i in sorted(records)))


# -- stage 3 -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SegmentedModel:
    breakpoints: tuple  # dates of the first observation of each new segment
    segments: tuple
    screening_log: tuple = ()
    break_indices: tuple = ()
    config: DetectorConfig | None = None
    candidates: CandidateSet | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.segments) != len(self.breakpoints) + 1:
            raise InvalidArgumentError("need exactly one more segment than breakpoints")

    def to_dict(self) -> dict:
        return {
            "breakpoints": [d.isoformat() for d in self.breakpoints],
            "break_indices": list(self.break_indices),
            "segments": [s.to_dict() for s in self.segments],
            "screening_log": [r.to_dict() for r in self.screening_log],
            "lambda_selected": None if self.candidates is None
            else _finite_or_none(self.candidates.lambda_selected),
            "config": None if self.config is None else self.config.to_dict(),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def attach_whiteness(model: ArimaModel, lags: int | None = None):
    res = model.residuals.values
    k = model.order.n_coef
    h = max(lags or default_whiteness_lags(res.size), k + 1)
    if res.size <= h + 1:
        return model
    return model.with_whiteness(whiteness_test(res, h, k))


def _as_index(series: TimeSeries, bp) -> int:
    return series.index_of(bp) if isinstance(bp, date) else int(bp)


def fit_segments(series: TimeSeries, breakpoints, fit_config: FitConfig | None = None,
                 bounds: ArimaOrder | None = None, whiteness_lags: int | None = None,
                 **extra) -> SegmentedModel:
    """Run ``auto_fit`` on every stretch between consecutive breakpoints.

    ``breakpoints`` may be dates or indices; each marks the first
    observation of a new segment.

    Raises
    ------
    InsufficientDataError
        When a segment is too short to fit even white noise.
    SegmentFitError
        When a segment fit fails; ``err.partial`` holds the earlier segments.
    """
    idx = sorted(_as_index(series, b) for b in breakpoints)
    edges = [0, *idx, series.n]
    shortest = ArimaOrder(0, 0, 0).min_length()
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b - a <= shortest:
            raise InsufficientDataError(
                f"segment {k} ({series.date_at(a)}..{series.date_at(max(a, b - 1))}) has "
                f"{b - a} observations; at least {shortest + 1} are needed"
            )
    models = []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        try:
            model = auto_fit(series.slice(a, b), bounds, fit_config)
        except PsarimaError as err:
            raise SegmentFitError(f"segment {k} failed: {err}", segment=k, partial=models) from err
        models.append(attach_whiteness(model, whiteness_lags))
    return SegmentedModel(tuple(series.date_at(i) for i in idx), tuple(models),
                          break_indices=tuple(idx), **extra)


def detect(series: TimeSeries, config: DetectorConfig | None = None,
           fit_config: FitConfig | None = None, bounds: ArimaOrder | None = None) -> SegmentedModel:
    """Select lambda1, fit the fused lasso, extract and screen candidates, fit segments.

    ``bounds`` limits the per-segment order search (see ``auto_fit``).
    """
    config = config or DetectorConfig()
    design = build_design(series, config.p_lag, config.min_gap)
    lam = select_lambda(design, config)
    path = _fit_or_best(design, lam, None, config.lambda2)
    cands = extract_candidates(path, config)
    screened = screen(series, cands, config)
    logger.info("lambda=%.4g: %d candidates, %d kept", lam, len(cands), len(screened.breakpoints))
    return fit_segments(series, screened.breakpoints, fit_config, bounds, config.whiteness_lags,
                        screening_log=screened.log, config=config, candidates=cands)
