"""Exhaustive order selection.

Within one differencing order candidates are ranked by AICc. Differencing
orders are compared out of sample instead, since AICc values computed on
differently differenced data are not comparable.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, PsarimaError
from ..series import TimeSeries, difference
from .estimate import fit
from .likelihood import concentrated
from .model import ArimaModel, ArimaOrder, FitConfig

logger = logging.getLogger(__name__)

DEFAULT_BOUNDS = ArimaOrder(p=6, d=2, q=6)
HOLDOUT_FRACTION = 0.2
# candidates with a root this close to the unit circle are treated as failed fits
MIN_ROOT_MODULUS = 1.01
# an AR and an MA root closer than this nearly cancel: the order is redundant
MIN_ROOT_SEPARATION = 0.05


@dataclass(frozen=True)
class Candidate:
    order: ArimaOrder
    model: ArimaModel

    @property
    def rank(self):
        return (self.model.aicc, self.order.n_params, self.order.p)


def _grid(bounds: ArimaOrder, d: int):
    seasonal = bounds.period > 1
    for p, q in itertools.product(range(bounds.p + 1), range(bounds.q + 1)):
        for P, Q in itertools.product(range(bounds.P + 1 if seasonal else 1),
                                      range(bounds.Q + 1 if seasonal else 1)):
            # bounds with d > 0 have include_mean switched off, so it is not read here;
            # ArimaOrder drops the mean itself whenever the candidate differences
            yield ArimaOrder(p, d, q, P, bounds.D if seasonal else 0, Q,
                             bounds.period if seasonal else 1, True)


def _lag_roots(coef, sign) -> np.ndarray:
    coef = np.asarray(coef, dtype=float)
    if not coef.size:
        return np.zeros(0, dtype=complex)
    return np.roots(np.concatenate([sign * coef[::-1], [1.0]]))


def _roots_clear(model: ArimaModel) -> bool:
    roots = model.roots()
    moduli = np.concatenate([roots.ar_moduli, roots.ma_moduli])
    if np.any(moduli < MIN_ROOT_MODULUS):
        return False
    phi, theta = model.expanded()
    ar, ma = _lag_roots(phi, -1.0), _lag_roots(theta, 1.0)
    if ar.size and ma.size:
        return bool(np.abs(ar[:, None] - ma[None, :]).min() >= MIN_ROOT_SEPARATION)
    return True


def holdout_mse(series: TimeSeries, order: ArimaOrder, config: FitConfig,
                fraction: float = HOLDOUT_FRACTION) -> float:
    """Mean squared one-step forecast error over the trailing ``fraction`` of the series.

    Parameters are estimated on the leading part only, then the whole series
    is filtered with them; for a differenced model the one-step error of the
    original series equals the innovation of the differenced one.
    """
    n_test = max(1, int(round(fraction * series.n)))
    train = series.slice(0, series.n - n_test)
    try:
        model = fit(train, order, config, fallback=False)
    except ConvergenceError as err:
        model = err.best
    except PsarimaError:
        return math.inf
    phi_full, theta_full = model.expanded()
    w = series.values
    if order.lost:
        w = difference(series, order.d, order.D, order.period).values
    _, _, _, e, _ = concentrated(w - model.mean, phi_full, theta_full, False)
    tail = e[-n_test:]
    return float(np.mean(tail * tail))


def best_for_d(series: TimeSeries, bounds: ArimaOrder, d: int, config: FitConfig):
    """Minimum-AICc model among all orders with differencing ``d``."""
    best = None
    for order in _grid(bounds, d):
        if series.n <= order.min_length():
            continue
        try:
            model = fit(series, order, config, fallback=False)
        except ConvergenceError as err:
            logger.debug("%s did not converge; keeping best iterate", order.label())
            model = err.best
        except PsarimaError as err:
            logger.debug("%s failed: %s", order.label(), err)
            continue
        if not math.isfinite(model.aicc) or not _roots_clear(model):
            continue
        cand = Candidate(order, model)
        if best is None or cand.rank < best.rank:
            best = cand
    return best


def auto_fit(series: TimeSeries, bounds: ArimaOrder | None = None,
             config: FitConfig | None = None, d_values=None,
             tie_tol: float = 0.02) -> ArimaModel:
    """Select and fit an ARIMA order automatically.

    For every differencing order the full ``p <= bounds.p, q <= bounds.q``
    grid (and ``P, Q <= 1`` when ``bounds.period > 1``) is fitted and the
    minimum-AICc model kept; fits with a root modulus below 1.01 are
    discarded as near-degenerate (unit roots), as are fits with an AR and an
    MA root closer than 0.05 (a near-common factor, i.e. a redundant order).
    Grid fits skip the restart/fallback stage; the winner is refitted with
    it when its search fit did not converge. The winners are compared by one-step forecast
    MSE on the last 20% of the series. Differencing orders whose MSE is
    within ``tie_tol`` (relative) of the best are treated as tied; ties go
    to fewer parameters, then smaller ``d``, then smaller ``p``.
    """
    bounds = bounds or DEFAULT_BOUNDS
    config = config or FitConfig()
    if d_values is None:
        d_values = range(bounds.d + 1)
    finalists = []
    for d in d_values:
        cand = best_for_d(series, bounds, d, config)
        if cand is None:
            continue
        mse = holdout_mse(series, cand.order, config) if len(d_values) > 1 else 0.0
        finalists.append((mse, cand))
    if not finalists:
        raise ConvergenceError("every candidate order failed to fit")
    best_mse = min(m for m, _ in finalists)
    tied = [c for m, c in finalists if m <= best_mse * (1.0 + tie_tol) or m == best_mse]
    winner = min(tied, key=lambda c: (c.order.n_params, c.order.d, c.order.p))
    logger.debug("auto_fit selected %s", winner.order.label())
    return _refit(series, winner, config)


def _refit(series: TimeSeries, cand: Candidate, config: FitConfig) -> ArimaModel:
    """Polish the selected order with restarts enabled; keep the better of the two fits."""
    if cand.order.n_coef == 0 or cand.model.converged:
        return cand.model
    try:
        model = fit(series, cand.order, config)
    except ConvergenceError as err:
        model = err.best
    except PsarimaError:
        return cand.model
    return model if model.loglik >= cand.model.loglik else cand.model
