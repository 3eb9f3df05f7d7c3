"""Simulation of (seasonal) ARIMA processes."""
from __future__ import annotations

from datetime import date

import numpy as np
from scipy.signal import lfilter

from ..errors import InvalidArgumentError, InvalidModelError
from ..series import DEFAULT_START, TimeSeries
from .model import ArimaModel


def default_burn_in(model: ArimaModel) -> int:
    o = model.order
    return 10 * (o.p + o.q + o.period * (o.P + o.Q) + 1)


def integrate_from_zero(w: np.ndarray, d: int, D: int, period: int) -> np.ndarray:
    """Undo ``(1-B)^d (1-B^period)^D`` assuming zero values before the sample."""
    x = np.asarray(w, dtype=float)
    for _ in range(d):
        x = np.cumsum(x)
    for _ in range(D):
        x = lfilter([1.0], np.concatenate([[1.0], np.zeros(period - 1), [-1.0]]), x)
    return x


def simulate_with(model: ArimaModel, n: int, rng: np.random.Generator,
                  burn_in: int | None = None) -> np.ndarray:
    """Draw ``n`` values from ``model`` using an existing generator."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if burn_in is None:
        burn_in = default_burn_in(model)
    if burn_in < 0:
        raise InvalidArgumentError("burn_in must be >= 0")
    phi_full, theta_full = model.expanded()
    if not model.roots().causal:
        raise InvalidModelError("AR polynomial has roots on or inside the unit circle")
    z = rng.normal(0.0, np.sqrt(model.sigma2), n + burn_in)
    w = lfilter(np.concatenate([[1.0], theta_full]), np.concatenate([[1.0], -phi_full]), z)
    w = w[burn_in:]
    o = model.order
    if o.lost == 0:
        return w + model.mean
    return integrate_from_zero(w, o.d, o.D, o.period)


def simulate(model: ArimaModel, n: int, seed: int = 0, burn_in: int | None = None,
             start_date: date = DEFAULT_START) -> TimeSeries:
    """Reproducible sample path of length ``n``; identical seeds give identical output."""
    rng = np.random.default_rng(seed)
    return TimeSeries(simulate_with(model, n, rng, burn_in), start_date)
