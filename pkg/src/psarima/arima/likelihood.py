"""Exact Gaussian likelihood of ARMA processes via the innovations algorithm.

The recursion runs on the transformed process ``W_t = X_t`` for ``t <= m``
and ``W_t = phi(B) X_t`` afterwards (``m = max(p, q)``), whose covariance is
banded (Brockwell & Davis, section 5.2).
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgumentError, NumericalDegeneracyError
from ..series import TimeSeries
from . import _kernels
from .model import ArimaOrder, model_from_params

LOG_2PI = _kernels.LOG_2PI


def _vec(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=float).reshape(-1))


def arma_acvf(phi, theta, nlags: int, sigma2: float = 1.0) -> np.ndarray:
    """Autocovariances ``gamma(0..nlags)`` of a causal ARMA process."""
    th = np.concatenate([[1.0], _vec(theta)])
    return sigma2 * _kernels.acvf(_vec(phi), th, int(nlags))


def innovations(w, phi_full, theta_full):
    """Innovations and relative one-step prediction variances of a zero-mean series.

    ``w`` may be two-dimensional, in which case every column is filtered
    with the same predictor.
    """
    w = np.asarray(w, dtype=float)
    x = np.ascontiguousarray(w.reshape(w.shape[0], -1))
    phi_full = _vec(phi_full)
    th = np.concatenate([[1.0], _vec(theta_full)])
    gamma = _kernels.acvf(phi_full, th, max(phi_full.size, th.size - 1))
    e, v = _kernels.innovations(x, phi_full, th, gamma)
    if not (np.all(v > 0) and np.all(np.isfinite(v))):
        raise NumericalDegeneracyError("innovation variances lost positivity")
    return (e[:, 0] if w.ndim == 1 else e), v


def sigma2_floor(w) -> float:
    return 1e-20 * (1.0 + float(np.mean(np.square(w))))


def concentrated(w, phi_full, theta_full, include_mean: bool):
    """Profile the mean (by GLS) and the innovation variance out of the likelihood.

    Returns ``(loglik, mean, sigma2, innovations, relative_variances)``.
    """
    w = _vec(w)
    out = _kernels.concentrated_loglik(w, _vec(phi_full), _vec(theta_full),
                                       bool(include_mean), sigma2_floor(w))
    if not math.isfinite(out[0]):
        raise NumericalDegeneracyError("innovation variances lost positivity")
    return out


def exact_loglik(w, phi_full, theta_full, mean: float = 0.0, sigma2: float | None = None):
    """Gaussian log-likelihood at a given mean; ``sigma2=None`` profiles the variance."""
    w = _vec(w) - mean
    n = w.size
    e, v = innovations(w, phi_full, theta_full)
    ssq = float(np.sum(e * e / v))
    if sigma2 is None:
        sigma2 = max(ssq / n, sigma2_floor(w))
        quad = n
    else:
        quad = ssq / sigma2
    return -0.5 * (n * (LOG_2PI + math.log(sigma2)) + quad + float(np.sum(np.log(v))))


def loglikelihood(order: ArimaOrder, params, series, sigma2: float | None = None) -> float:
    """Exact Gaussian log-likelihood of an already differenced series.

    ``params`` follows :meth:`ArimaModel.params`: AR, MA, seasonal AR and
    seasonal MA coefficients, then the mean when ``order.include_mean``.
    With ``sigma2=None`` the innovation variance is profiled out.
    """
    w = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    model = model_from_params(order, params)
    roots = model.roots()
    if not (roots.causal and roots.invertible):
        raise InvalidArgumentError("parameters violate causality or invertibility")
    phi_full, theta_full = model.expanded()
    value = exact_loglik(w, phi_full, theta_full, model.mean, sigma2)
    if not math.isfinite(value):
        raise NumericalDegeneracyError("log-likelihood is not finite")
    return value


def css_residuals(w, phi_full, theta_full, mean: float = 0.0) -> np.ndarray:
    """Conditional residuals given the first ``len(phi_full)`` observations."""
    return _kernels.css_residuals(_vec(w) - mean, _vec(phi_full), _vec(theta_full))
