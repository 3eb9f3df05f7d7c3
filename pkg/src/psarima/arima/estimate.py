"""Maximum-likelihood fitting of (seasonal) ARIMA models.

Coefficients are optimised in an unconstrained space: each AR or MA block is
parametrised by partial autocorrelations ``tanh(u)``, so every iterate is
causal and invertible by construction.
"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.optimize import minimize

from ..errors import ConvergenceError, InsufficientDataError, NumericalDegeneracyError
from ..series import TimeSeries, difference
from . import _kernels
from .likelihood import LOG_2PI, concentrated, sigma2_floor
from .model import CSS, ArimaModel, ArimaOrder, FitConfig, expand, information_criteria

logger = logging.getLogger(__name__)

# keeps |partial autocorrelation| < 1 so that roots stay strictly off the unit circle
MAX_PARTIAL = 1.0 - 1e-7
SIMPLEX_STEP = 0.3
JITTER = 0.3
FD_STEP = 1e-7


def pacf_to_ar(r) -> np.ndarray:
    """Map partial autocorrelations in (-1, 1) to causal AR coefficients."""
    phi = np.zeros(0)
    for a in np.asarray(r, dtype=float):
        phi = np.concatenate([phi - a * phi[::-1], [a]])
    return phi


def ar_to_pacf(phi) -> np.ndarray:
    """Inverse of :func:`pacf_to_ar` (Levinson step-down)."""
    phi = np.asarray(phi, dtype=float).copy()
    r = np.zeros(phi.size)
    for k in range(phi.size, 0, -1):
        a = phi[k - 1]
        r[k - 1] = a
        if k > 1:
            if abs(a) >= 1:
                raise ValueError("coefficients are not causal")
            phi = (phi[: k - 1] + a * phi[k - 2::-1]) / (1.0 - a * a)
    return r


class _Transform:
    """Unconstrained vector <-> (phi, theta, seasonal_phi, seasonal_theta)."""

    def __init__(self, order: ArimaOrder):
        self.order = order
        self.sizes = (order.p, order.q, order.P, order.Q)

    def blocks(self, u):
        out, pos = [], 0
        for i, size in enumerate(self.sizes):
            r = np.clip(np.tanh(u[pos: pos + size]), -MAX_PARTIAL, MAX_PARTIAL)
            coef = pacf_to_ar(r)
            out.append(coef if i % 2 == 0 else -coef)
            pos += size
        return out

    def inverse(self, phi, theta, sphi, stheta):
        parts = []
        for i, coef in enumerate((phi, theta, sphi, stheta)):
            coef = np.asarray(coef, dtype=float)
            r = ar_to_pacf(coef if i % 2 == 0 else -coef)
            parts.append(np.arctanh(np.clip(r, -0.99, 0.99)))
        return np.concatenate(parts)

    def expanded(self, u):
        phi, theta, sphi, stheta = self.blocks(u)
        return expand(phi, theta, sphi, stheta, self.order.period)


def _nelder_mead(fun, x0, config: FitConfig, step: float = SIMPLEX_STEP):
    k = x0.size
    simplex = np.vstack([x0] + [x0 + step * np.eye(k)[i] for i in range(k)])
    return minimize(
        fun, x0, method="Nelder-Mead",
        options={
            "maxiter": config.max_iterations,
            "xatol": 1e-7,
            "fatol": config.convergence_tol,
            "initial_simplex": simplex,
            "adaptive": k > 4,
        },
    )


def _quasi_newton(value_grad, x0, config: FitConfig):
    return minimize(
        value_grad, x0, jac=True, method="L-BFGS-B",
        options={
            "maxiter": config.max_iterations // 10,
            "ftol": config.convergence_tol * 1e-2,
            "gtol": 1e-6,
        },
    )


def _working_series(series: TimeSeries, order: ArimaOrder) -> TimeSeries:
    if order.lost == 0:
        return series
    return difference(series, order.d, order.D, order.period)


def _finish(series, order, w, phi, theta, sphi, stheta, converged) -> ArimaModel:
    phi_full, theta_full = expand(phi, theta, sphi, stheta, order.period)
    loglik, mean, sigma2, e, _ = concentrated(w.values, phi_full, theta_full, order.include_mean)
    if not math.isfinite(loglik):
        raise NumericalDegeneracyError("log-likelihood is not finite at the estimate")
    aic, aicc, bic = information_criteria(loglik, order.n_params, w.n)
    return ArimaModel(
        order, phi=phi, theta=theta, seasonal_phi=sphi, seasonal_theta=stheta,
        mean=mean, sigma2=sigma2, loglik=loglik, aic=aic, aicc=aicc, bic=bic,
        residuals=w.with_values(e), data=series, converged=converged,
    )


def _white_noise_fit(series, order, w) -> ArimaModel:
    x = w.values
    mean = float(x.mean()) if order.include_mean else 0.0
    e = x - mean
    sigma2 = max(float(np.mean(e * e)), sigma2_floor(x))
    loglik = -0.5 * x.size * (LOG_2PI + math.log(sigma2) + 1.0)
    aic, aicc, bic = information_criteria(loglik, order.n_params, x.size)
    return ArimaModel(order, mean=mean, sigma2=sigma2, loglik=loglik, aic=aic, aicc=aicc,
                      bic=bic, residuals=w.with_values(e), data=series)


def fit(series: TimeSeries, order: ArimaOrder, config: FitConfig | None = None,
        fallback: bool = True) -> ArimaModel:
    """Fit ``order`` to ``series`` by exact Gaussian maximum likelihood.

    With ``config.estimation == "CSS"`` the conditional-sum-of-squares
    estimate is returned instead (its exact log-likelihood is still reported).
    ``fallback=False`` skips the jittered restarts and the derivative-free
    polish that otherwise follow a run that did not converge.

    Raises
    ------
    InsufficientDataError
        If the series is shorter than ``order.min_length()``.
    ConvergenceError
        If no optimizer run converged; ``err.best`` holds the best model.
    """
    config = config or FitConfig()
    if series.n <= order.min_length():
        raise InsufficientDataError(
            f"{order.label()} needs more than {order.min_length()} observations, got {series.n}"
        )
    w = _working_series(series, order)
    if order.n_coef == 0:
        return _white_noise_fit(series, order, w)

    x = np.ascontiguousarray(w.values)
    tr = _Transform(order)
    center = float(x.mean()) if order.include_mean else 0.0
    scale = float(np.mean((x - center) ** 2)) or 1.0
    dims = (order.p, order.q, order.P, order.Q, order.period)
    floor = sigma2_floor(x)

    def css_objective(u):
        return _kernels.css_value_grad(u, x - center, *dims, scale, FD_STEP)

    def ml_objective(u):
        return _kernels.ml_value_grad(u, x, *dims, order.include_mean, floor, FD_STEP)

    def ml_value(u):
        return _kernels.ml_objective(u, x, *dims, order.include_mean, floor)

    objective = css_objective if config.estimation == CSS else ml_objective
    u0 = np.zeros(order.n_coef)
    if config.estimation != CSS:
        start = _quasi_newton(css_objective, u0, config)
        if np.all(np.isfinite(start.x)) and np.isfinite(ml_value(start.x)):
            u0 = start.x
    best = _quasi_newton(objective, u0, config)
    converged = bool(best.success)
    rng = np.random.default_rng(0)
    for _ in range(config.optimizer_restarts if fallback else 0):
        if converged:
            break
        trial = _quasi_newton(objective, best.x + rng.normal(0.0, JITTER, best.x.size), config)
        converged = bool(trial.success)
        if trial.fun <= best.fun:
            best = trial
    if not converged and fallback and config.estimation != CSS:
        # derivative-free fallback from the best point found
        polish = _nelder_mead(ml_value, best.x, config, step=0.05)
        converged = bool(polish.success)
        if polish.fun <= best.fun:
            best = polish

    model = _finish(series, order, w, *tr.blocks(best.x), converged=converged)
    if not converged:
        raise ConvergenceError(f"{order.label()}: optimizer did not converge", best=model)
    return model
