"""Compiled inner loops for likelihood evaluation and parameter transforms."""
import math

import numpy as np
from numba import njit

LOG_2PI = math.log(2.0 * math.pi)
MAX_PARTIAL = 1.0 - 1e-7
MIN_AR_MARGIN = -30.0


@njit(cache=True)
def pacf_to_poly(r):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    k = r.size
    phi = np.zeros(k)
    tmp = np.zeros(k)
    for j in range(k):
        a = r[j]
        for i in range(j):
            tmp[i] = phi[i] - a * phi[j - 1 - i]
        for i in range(j):
            phi[i] = tmp[i]
        phi[j] = a
    return phi


@njit(cache=True)
def polymul(a, b):
    out = np.zeros(a.size + b.size - 1)
    for i in range(a.size):
        for j in range(b.size):
            out[i + j] += a[i] * b[j]
    return out


@njit(cache=True)
def _block(u, start, size, sign):
    r = np.empty(size)
    for i in range(size):
        v = math.tanh(u[start + i])
        r[i] = min(max(v, -MAX_PARTIAL), MAX_PARTIAL)
    coef = pacf_to_poly(r)
    return sign * coef


@njit(cache=True)
def _lag_poly(coef, sign, period):
    """Ascending coefficients of 1 + sign * sum(coef_k z^(k * period))."""
    out = np.zeros(coef.size * period + 1)
    out[0] = 1.0
    for k in range(coef.size):
        out[(k + 1) * period] = sign * coef[k]
    return out


@njit(cache=True)
def expand_transformed(u, p, q, P, Q, period):
    """Full AR and MA coefficient vectors from unconstrained parameters."""
    phi = _block(u, 0, p, 1.0)
    theta = _block(u, p, q, -1.0)
    sphi = _block(u, p + q, P, 1.0)
    stheta = _block(u, p + q + P, Q, -1.0)
    a = polymul(_lag_poly(phi, -1.0, 1), _lag_poly(sphi, -1.0, period))
    b = polymul(_lag_poly(theta, 1.0, 1), _lag_poly(stheta, 1.0, period))
    return -a[1:], b[1:]


@njit(cache=True)
def acvf(phi, th, nlags):
    """ARMA autocovariances for unit innovation variance; ``th`` includes the leading 1."""
    p = phi.size
    q = th.size - 1
    psi = np.zeros(q + 1)
    for j in range(q + 1):
        s = th[j]
        for i in range(1, min(j, p) + 1):
            s += phi[i - 1] * psi[j - i]
        psi[j] = s
    size = max(p, q, nlags) + 1
    c = np.zeros(size)
    for k in range(q + 1):
        s = 0.0
        for j in range(k, q + 1):
            s += th[j] * psi[j - k]
        c[k] = s
    a = np.eye(p + 1)
    for k in range(p + 1):
        for i in range(1, p + 1):
            a[k, abs(k - i)] -= phi[i - 1]
    gamma = np.zeros(max(p, nlags) + 1)
    g = np.linalg.solve(a, c[: p + 1].copy())
    for k in range(p + 1):
        gamma[k] = g[k]
    for k in range(p + 1, gamma.size):
        s = c[k]
        for i in range(1, p + 1):
            s += phi[i - 1] * gamma[k - i]
        gamma[k] = s
    return gamma[: nlags + 1]


@njit(cache=True)
def _kappa(i, j, m, phi, th, gamma):
    if i > j:
        i, j = j, i
    h = j - i
    if j <= m:
        return gamma[h]
    if i <= m:
        if j > 2 * m:
            return 0.0
        s = gamma[h]
        for r in range(1, phi.size + 1):
            s -= phi[r - 1] * gamma[abs(r - h)]
        return s
    q = th.size - 1
    if h > q:
        return 0.0
    s = 0.0
    for r in range(q - h + 1):
        s += th[r] * th[r + h]
    return s


@njit(cache=True)
def innovations(x, phi, th, gamma):
    """One-step innovations of each column of ``x`` and relative variances.

    The innovations algorithm runs on the covariance of the transformed
    process ``W_t = X_t`` (t <= m), ``W_t = phi(B) X_t`` (t > m) whose
    covariance is banded, so each step costs O(q^2). Once the predictor
    coefficients stop changing (to machine precision) they are reused.
    """
    n, ncol = x.shape
    p = phi.size
    q = th.size - 1
    m = max(p, q)
    width = max(m, 1)
    band = np.zeros(q + 1)
    for h in range(q + 1):
        s = 0.0
        for r in range(q - h + 1):
            s += th[r] * th[r + h]
        band[h] = s
    coef = np.zeros((n, width + 1))
    v = np.zeros(n)
    e = np.zeros((n, ncol))
    v[0] = _kappa(1, 1, m, phi, th, gamma)
    for c in range(ncol):
        e[0, c] = x[0, c]
    steady = False
    for t in range(1, n):
        span = t if t < m else q
        if steady:
            for lag in range(1, span + 1):
                coef[t, lag] = coef[t - 1, lag]
            v[t] = v[t - 1]
        else:
            for lag in range(span, 0, -1):
                k = t - lag
                span_k = k if k < m else q
                if k + 1 > m:
                    s = band[lag]
                else:
                    s = _kappa(t + 1, k + 1, m, phi, th, gamma)
                lo = max(0, t - span, k - span_k)
                for j in range(lo, k):
                    s -= coef[k, k - j] * coef[t, t - j] * v[j]
                coef[t, lag] = s / v[k]
            vt = band[0] if t + 1 > m else _kappa(t + 1, t + 1, m, phi, th, gamma)
            for j in range(t - span, t):
                vt -= coef[t, t - j] ** 2 * v[j]
            v[t] = vt
            if t > 2 * m + 1:
                delta = abs(v[t] - v[t - 1])
                for lag in range(1, span + 1):
                    delta = max(delta, abs(coef[t, lag] - coef[t - 1, lag]))
                steady = delta < 1e-15
        for c in range(ncol):
            pred = 0.0
            if t >= m:
                for i in range(1, p + 1):
                    pred += phi[i - 1] * x[t - i, c]
            for lag in range(1, span + 1):
                pred += coef[t, lag] * e[t - lag, c]
            e[t, c] = x[t, c] - pred
    return e, v


@njit(cache=True)
def concentrated_loglik(x, phi, theta, include_mean, floor):
    """Log-likelihood with the mean (GLS) and variance profiled out.

    Returns ``(loglik, mean, sigma2, innovations, relative_variances)``;
    ``loglik`` is ``-inf`` when the recursion degenerates.
    """
    n = x.size
    th = np.empty(theta.size + 1)
    th[0] = 1.0
    th[1:] = theta
    m = max(phi.size, theta.size)
    gamma = acvf(phi, th, m)
    ncol = 2 if include_mean else 1
    xx = np.empty((n, ncol))
    xx[:, 0] = x
    if include_mean:
        xx[:, 1] = 1.0
    e2, v = innovations(xx, phi, th, gamma)
    e = e2[:, 0].copy()
    mean = 0.0
    for t in range(n):
        if not v[t] > 0.0:
            return -np.inf, 0.0, 0.0, e, v
    if include_mean:
        num = 0.0
        den = 0.0
        for t in range(n):
            num += e2[t, 0] * e2[t, 1] / v[t]
            den += e2[t, 1] * e2[t, 1] / v[t]
        mean = num / den
        for t in range(n):
            e[t] = e2[t, 0] - mean * e2[t, 1]
    ssq = 0.0
    logdet = 0.0
    for t in range(n):
        ssq += e[t] * e[t] / v[t]
        logdet += math.log(v[t])
    sigma2 = max(ssq / n, floor)
    loglik = -0.5 * n * (LOG_2PI + math.log(sigma2) + 1.0) - 0.5 * logdet
    return loglik, mean, sigma2, e, v


@njit(cache=True)
def css_residuals(x, phi, theta):
    n = x.size
    p, q = phi.size, theta.size
    e = np.zeros(n)
    for t in range(p, n):
        s = x[t]
        for i in range(1, p + 1):
            s -= phi[i - 1] * x[t - i]
        for j in range(1, q + 1):
            if t - j >= p:
                s -= theta[j - 1] * e[t - j]
        e[t] = s
    return e[p:]


@njit(cache=True)
def _ar_margin(u, p, q, P):
    """log of prod(1 - r^2) over the autoregressive partials."""
    s = 0.0
    for i in range(p):
        r = min(abs(math.tanh(u[i])), MAX_PARTIAL)
        s += math.log1p(-r * r)
    for i in range(p + q, p + q + P):
        r = min(abs(math.tanh(u[i])), MAX_PARTIAL)
        s += math.log1p(-r * r)
    return s


@njit(cache=True)
def ml_objective(u, x, p, q, P, Q, period, include_mean, floor):
    if not np.all(np.isfinite(u)):
        return np.inf
    # the autocovariance system is numerically singular this close to a unit root
    if _ar_margin(u, p, q, P) < MIN_AR_MARGIN:
        return np.inf
    phi, theta = expand_transformed(u, p, q, P, Q, period)
    loglik = concentrated_loglik(x, phi, theta, include_mean, floor)[0]
    if not np.isfinite(loglik):
        return np.inf
    return -loglik / x.size


@njit(cache=True)
def css_objective(u, xc, p, q, P, Q, period, scale):
    phi, theta = expand_transformed(u, p, q, P, Q, period)
    e = css_residuals(xc, phi, theta)
    s = 0.0
    for t in range(e.size):
        s += e[t] * e[t]
    return s / max(e.size, 1) / scale


@njit(cache=True)
def ml_value_grad(u, x, p, q, P, Q, period, include_mean, floor, step):
    """Objective and forward-difference gradient in one compiled call."""
    g = np.zeros(u.size)
    if not np.all(np.isfinite(u)):
        return np.inf, g
    f0 = ml_objective(u, x, p, q, P, Q, period, include_mean, floor)
    if not np.isfinite(f0):
        return f0, g
    w = u.copy()
    for i in range(u.size):
        h = step * max(1.0, abs(u[i]))
        w[i] = u[i] + h
        f1 = ml_objective(w, x, p, q, P, Q, period, include_mean, floor)
        if not np.isfinite(f1):
            w[i] = u[i] - h
            f1 = 2.0 * f0 - ml_objective(w, x, p, q, P, Q, period, include_mean, floor)
        w[i] = u[i]
        g[i] = (f1 - f0) / h if np.isfinite(f1) else 0.0
    return f0, g


@njit(cache=True)
def css_value_grad(u, xc, p, q, P, Q, period, scale, step):
    g = np.zeros(u.size)
    if not np.all(np.isfinite(u)):
        return np.inf, g
    f0 = css_objective(u, xc, p, q, P, Q, period, scale)
    w = u.copy()
    for i in range(u.size):
        h = step * max(1.0, abs(u[i]))
        w[i] = u[i] + h
        g[i] = (css_objective(w, xc, p, q, P, Q, period, scale) - f0) / h
        w[i] = u[i]
    return f0, g
