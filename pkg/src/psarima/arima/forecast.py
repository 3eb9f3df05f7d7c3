"""Minimum mean-squared-error forecasts from a fitted model."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from .model import ArimaModel


def psi_weights(ar_full: np.ndarray, ma_full: np.ndarray, count: int) -> np.ndarray:
    """MA(infinity) weights of ``ma(B) / ar(B)`` for the AR operator ``1 - sum ar_k B^k``."""
    psi = np.zeros(count)
    for j in range(count):
        s = 1.0 if j == 0 else (ma_full[j - 1] if j - 1 < ma_full.size else 0.0)
        for i in range(1, min(j, ar_full.size) + 1):
            s += ar_full[i - 1] * psi[j - i]
        psi[j] = s
    return psi


def _integrated_ar(model: ArimaModel) -> np.ndarray:
    phi_full, _ = model.expanded()
    o = model.order
    poly = np.concatenate([[1.0], -phi_full])
    for _ in range(o.d):
        poly = np.polynomial.polynomial.polymul(poly, [1.0, -1.0])
    for _ in range(o.D):
        seasonal = np.zeros(o.period + 1)
        seasonal[[0, -1]] = 1.0, -1.0
        poly = np.polynomial.polynomial.polymul(poly, seasonal)
    return -np.asarray(poly[1:], dtype=float)


def forecast(model: ArimaModel, steps: int) -> list[tuple[float, float]]:
    """Return ``(mean, variance)`` for horizons ``1..steps``.

    Uses the difference-equation form of the model with the fitted
    innovations standing in for unobserved shocks.
    """
    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    if model.data is None or model.residuals is None:
        raise InvalidArgumentError("forecasting needs a fitted model")
    a = _integrated_ar(model)
    _, theta_full = model.expanded()
    x = list(model.data.values - model.mean)
    e = list(model.residuals.values)
    n_hist = len(x)
    for h in range(1, steps + 1):
        pred = sum(a[i - 1] * x[-i] for i in range(1, a.size + 1) if i <= len(x))
        t = n_hist + h - 1
        for j in range(h, theta_full.size + 1):
            idx = t - j - (n_hist - len(e))
            if 0 <= idx < len(e):
                pred += theta_full[j - 1] * e[idx]
        x.append(pred)
    psi = psi_weights(a, theta_full, steps)
    var = model.sigma2 * np.cumsum(psi * psi)
    means = np.asarray(x[n_hist:]) + model.mean
    return [(float(m), float(v)) for m, v in zip(means, var)]
