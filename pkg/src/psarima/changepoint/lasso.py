"""Fused-lasso solver for time-varying AR coefficients.

In jump coordinates (coefficient at time k is the sum of the jumps up to k)
the fusion penalty is an ordinary L1 penalty on the jumps, so the problem

    (1/N) ||Y - Z B||^2 + lambda1 * sum_{j >= 1} |B_j|_1

is a lasso with an unpenalised base block. It is solved by cyclic
coordinate descent. Sweeping the blocks from last to first lets every
gradient be read off a running suffix sum, so a sweep costs O(N p^2)
rather than O(N^2 p). Because neighbouring jump columns are nearly
collinear, descent is only used to find the support; an active-set step
then solves the optimality conditions exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..errors import ConvergenceError, InvalidArgumentError
from .design import LaggedDesign


def soft_threshold(v, t):
    """``sign(v) * max(|v| - t, 0)``; works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise InvalidArgumentError("threshold must be non-negative")
    out = np.sign(v) * np.maximum(np.abs(v) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@njit(cache=True)
def _soft(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


@njit(cache=True)
def suffix_gram(z):
    n, w = z.shape
    g = np.zeros((n, w, w))
    acc = np.zeros((w, w))
    for i in range(n - 1, -1, -1):
        for a in range(w):
            for b in range(w):
                acc[a, b] += z[i, a] * z[i, b]
        g[i] = acc
    return g


@njit(cache=True)
def _residuals(y, z, beta):
    n, w = z.shape
    theta = np.zeros(w)
    r = np.empty(n)
    for i in range(n):
        s = y[i]
        for k in range(w):
            theta[k] += beta[i, k]
            s -= z[i, k] * theta[k]
        r[i] = s
    return r


@njit(cache=True)
def objective(y, z, beta, lam):
    r = _residuals(y, z, beta)
    n = y.size
    pen = 0.0
    for j in range(1, n):
        for k in range(z.shape[1]):
            pen += abs(beta[j, k])
    return np.dot(r, r) / n + lam * pen


@njit(cache=True)
def gradients(y, z, beta):
    """Suffix correlations ``sum_{i >= j} z_i r_i`` for every block."""
    n, w = z.shape
    r = _residuals(y, z, beta)
    s = np.zeros((n, w))
    acc = np.zeros(w)
    for i in range(n - 1, -1, -1):
        for k in range(w):
            acc[k] += z[i, k] * r[i]
            s[i, k] = acc[k]
    return s


@njit(cache=True)
def _sweep(y, z, gram, beta, lam):
    """One backward coordinate-descent sweep; returns the largest change."""
    n, w = z.shape
    r = _residuals(y, z, beta)
    s = np.zeros(w)
    biggest = 0.0
    scale = lam * n / 2.0
    for j in range(n - 1, -1, -1):
        for k in range(w):
            s[k] += z[j, k] * r[j]
        for k in range(w):
            gkk = gram[j, k, k]
            if gkk <= 0.0:
                continue
            old = beta[j, k]
            target = old + s[k] / gkk
            new = target if j == 0 else _soft(target, scale / gkk)
            delta = new - old
            if delta != 0.0:
                beta[j, k] = new
                for a in range(w):
                    s[a] -= gram[j, a, k] * delta
                if abs(delta) > biggest:
                    biggest = abs(delta)
    return biggest


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    sweeps: int
    objective_history: list
    converged: bool

    @property
    def jump_norms(self) -> np.ndarray:
        norms = np.linalg.norm(self.beta, axis=1)
        norms[0] = 0.0
        return norms

    def coefficients(self) -> np.ndarray:
        """Per-row coefficients (cumulative sums of the jumps)."""
        return np.cumsum(self.beta, axis=0)


def lambda_max(design: LaggedDesign) -> float:
    """Smallest lambda1 at which every jump block is zero."""
    y, z = design.response, design.regressors
    b0, *_ = np.linalg.lstsq(z, y, rcond=None)
    beta = np.zeros((y.size, z.shape[1]))
    beta[0] = b0
    s = gradients(y, z, beta)
    if y.size < 2:
        return 0.0
    return float(2.0 / y.size * np.max(np.abs(s[1:])))


def kkt_violation(design: LaggedDesign, beta: np.ndarray, lam: float) -> float:
    """Largest violation of the lasso subgradient conditions."""
    y, z = design.response, design.regressors
    g = 2.0 / y.size * gradients(y, z, beta)
    worst = float(np.max(np.abs(g[0])))
    pen_g, pen_b = g[1:], beta[1:]
    active = pen_b != 0
    if np.any(active):
        worst = max(worst, float(np.max(np.abs(pen_g[active] - lam * np.sign(pen_b[active])))))
    if np.any(~active):
        worst = max(worst, float(np.max(np.abs(pen_g[~active]))) - lam)
    return max(worst, 0.0)


@njit(cache=True)
def _segment_system(pzz, pzy, js, ks, signs, lam, start, eps):
    """Normal equations in segment-value coordinates.

    Support entry ``a = (j, k)`` owns the stretch of rows from ``j`` up to the
    next support block of coordinate ``k``; on it coefficient ``k`` is the
    constant ``v[a]``. Stretches of one coordinate never overlap, so the
    system is sparse. Returns COO triplets, the right-hand side and the
    starting segment values.
    """
    m = js.size
    n = pzz.shape[0] - 1
    w = pzz.shape[1]
    end = np.full(m, n)
    prev = np.full(m, -1)
    last = np.full(w, -1)
    for a in range(m):  # entries are sorted by block, then coordinate
        k = ks[a]
        if last[k] >= 0:
            end[last[k]] = js[a]
            prev[a] = last[k]
        last[k] = a
    v0 = np.empty(m)
    for a in range(m):
        v0[a] = start[a] + (v0[prev[a]] if prev[a] >= 0 else 0.0)
    rhs = np.empty(m)
    nxt_sign = np.zeros(m)
    for a in range(m):
        if prev[a] >= 0:
            nxt_sign[prev[a]] = signs[a]
    for a in range(m):
        k = ks[a]
        rhs[a] = pzy[end[a], k] - pzy[js[a], k] - 0.5 * n * lam * (signs[a] - nxt_sign[a]) \
            + eps * v0[a]
    cap = m * (2 * m + 1)
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap)
    c = 0
    for a in range(m):
        k = ks[a]
        rows[c] = a
        cols[c] = a
        vals[c] = pzz[end[a], k, k] - pzz[js[a], k, k] + eps
        c += 1
    # cross-coordinate overlaps; a linear scan since stretches are few per row
    for a in range(m):
        for b in range(a + 1, m):
            if js[b] >= end[a]:
                break
            if ks[a] == ks[b]:
                continue
            lo = max(js[a], js[b])
            hi = min(end[a], end[b])
            if hi <= lo:
                continue
            val = pzz[hi, ks[a], ks[b]] - pzz[lo, ks[a], ks[b]]
            rows[c] = a
            cols[c] = b
            vals[c] = val
            c += 1
            rows[c] = b
            cols[c] = a
            vals[c] = val
            c += 1
    return rows[:c], cols[:c], vals[:c], rhs, prev


def _support_solve(pzz, pzy, js, ks, signs, lam, start):
    """Proximal step on the smooth part with the L1 term linearised by ``signs``.

    Adjacent active blocks can make the support columns linearly dependent,
    so a tiny proximal term keeps the system solvable; the step never
    increases the sign-fixed objective. Returns the new jump values.
    """
    diag_scale = float(np.max(pzz[-1].diagonal())) if pzz.shape[0] > 1 else 1.0
    eps = 1e-10 * max(diag_scale, 1.0)
    rows, cols, vals, rhs, prev = _segment_system(pzz, pzy, js, ks, signs, lam, start, eps)
    mat = sparse.csc_matrix((vals, (rows, cols)), shape=(js.size, js.size))
    v = spsolve(mat, rhs)
    has_prev = prev >= 0
    out = v.copy()
    out[has_prev] -= v[prev[has_prev]]
    return out


def _feature_sign(design: LaggedDesign, beta, lam, kkt_tol, history, max_iter):
    """Active-set refinement; every accepted step lowers the objective.

    Inactive coordinates that violate the subgradient bound join the support
    with the sign of their gradient; the sign-fixed quadratic is then solved
    exactly, stopping at the first zero crossing when a sign would flip.
    """
    y = np.ascontiguousarray(design.response, dtype=float)
    z = np.ascontiguousarray(design.regressors, dtype=float)
    n, w = z.shape
    pzz = np.concatenate([np.zeros((1, w, w)), np.cumsum(z[:, :, None] * z[:, None, :], axis=0)])
    pzy = np.concatenate([np.zeros((1, w)), np.cumsum(z * y[:, None], axis=0)])
    beta = beta.copy()
    current = objective(y, z, beta, lam)
    refresh = True
    for _ in range(max_iter):
        entering = np.zeros_like(beta)
        if refresh:
            if kkt_violation(design, beta, lam) <= kkt_tol:
                return beta, True
            g = 2.0 / n * gradients(y, z, beta)
            mask = (np.abs(g) > lam + kkt_tol) & (beta == 0)
            mask[0] = False
            entering = np.where(mask, np.sign(g), 0.0)
        support = (beta != 0) | (entering != 0)
        support[0] = True
        js, ks = np.nonzero(support)
        signs = np.where(beta[js, ks] != 0, np.sign(beta[js, ks]), entering[js, ks])
        signs[js == 0] = 0.0
        start = beta[js, ks]
        sol = _support_solve(pzz, pzy, js, ks, signs, lam, start)
        flip = (js > 0) & (np.sign(sol) != signs)
        cand = beta.copy()
        cand[js, ks] = sol
        val = objective(y, z, cand, lam)
        # only look for new entries once the current orthant is solved
        refresh = not np.any(flip)
        if np.any(flip):
            # zeroing every flipped entry often beats stopping at the first crossing
            proj = cand.copy()
            proj[js[flip], ks[flip]] = 0.0
            proj_val = objective(y, z, proj, lam)
            if proj_val < val:
                cand, val = proj, proj_val
            with np.errstate(divide="ignore", invalid="ignore"):
                t_cross = np.where(flip, start / (start - sol), np.inf)
            t_cross[t_cross <= 0.0] = np.inf
            t = t_cross.min()
            if np.isfinite(t):
                vals = start + t * (sol - start)
                vals[t_cross == t] = 0.0
                stop = beta.copy()
                stop[js, ks] = vals
                stop_val = objective(y, z, stop, lam)
                if stop_val < val:
                    cand, val = stop, stop_val
        if val > current + 1e-14 * max(1.0, abs(current)):
            # no progress on this support; fall back to descent
            return beta, False
        beta, current = cand, val
        history.append(current)
    return beta, kkt_violation(design, beta, lam) <= kkt_tol


def fused_lasso_fit(design: LaggedDesign, lambda1: float, lambda2: float = 0.0,
                    init: np.ndarray | None = None, tol: float = 1e-6,
                    kkt_tol: float = 1e-7, max_sweeps: int = 5000,
                    warm_sweeps: int = 100) -> LassoFit:
    """Fit jump coefficients for one value of ``lambda1``.

    Coordinate descent runs until the largest coefficient change drops
    below ``tol`` (relative) or for ``warm_sweeps`` sweeps, after which the
    active-set step finishes the job; the two alternate until the
    subgradient conditions hold to ``kkt_tol``. ``lambda2 > 0``
    soft-thresholds the reconstructed per-time coefficients afterwards.

    Raises
    ------
    ConvergenceError
        When ``max_sweeps`` is exhausted; ``err.best`` holds the last iterate.
    """
    if not lambda1 > 0:
        raise InvalidArgumentError("lambda1 must be positive")
    if lambda2 < 0:
        raise InvalidArgumentError("lambda2 must be non-negative")
    y = np.ascontiguousarray(design.response, dtype=float)
    z = np.ascontiguousarray(design.regressors, dtype=float)
    n, w = z.shape
    gram = suffix_gram(z)
    if init is None:
        beta = np.zeros((n, w))
        beta[0], *_ = np.linalg.lstsq(z, y, rcond=None)
    else:
        beta = np.array(init, dtype=float, copy=True)
    history = [objective(y, z, beta, lambda1)]
    coef_scale = max(1.0, float(np.max(np.abs(np.cumsum(beta, axis=0)))))
    converged = False
    sweeps = 0
    while sweeps < max_sweeps and not converged:
        for _ in range(warm_sweeps):
            change = _sweep(y, z, gram, beta, lambda1)
            sweeps += 1
            history.append(objective(y, z, beta, lambda1))
            if history[-1] > history[-2] + 1e-12 * max(1.0, abs(history[-2])):
                raise ConvergenceError("coordinate descent objective increased", best=beta)
            if change <= tol * coef_scale:
                break
        beta, converged = _feature_sign(design, beta, lambda1, kkt_tol, history,
                                        max_iter=n * w)
    if not converged:
        fit = LassoFit(beta, lambda1, sweeps, history, False)
        raise ConvergenceError(f"fused lasso did not converge in {max_sweeps} sweeps", best=fit)
    if lambda2 > 0:
        theta = soft_threshold(np.cumsum(beta, axis=0), lambda2)
        beta = np.diff(theta, axis=0, prepend=np.zeros((1, w)))
    return LassoFit(beta, lambda1, sweeps, history, True)
