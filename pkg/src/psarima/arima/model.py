"""ARIMA model types, polynomial helpers, root checks and information criteria."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidArgumentError
from ..series import TimeSeries, WhitenessReport

MAX_D, MAX_SEASONAL_D = 2, 1
MAX_P, MAX_Q = 6, 6
MAX_SEASONAL_P, MAX_SEASONAL_Q = 1, 1

CSS = "CSS"
CSS_ML = "CSS-then-ML"


@dataclass(frozen=True)
class ArimaOrder:
    """(p, d, q) x (P, D, Q)_period, plus whether a mean is estimated.

    ``include_mean`` is switched off automatically once the model
    differences the data.
    """

    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    period: int = 1
    include_mean: bool = True

    def __post_init__(self):
        for name in ("p", "d", "q", "P", "D", "Q"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"order component {name} must be non-negative")
        if self.d > MAX_D or self.D > MAX_SEASONAL_D:
            raise InvalidArgumentError("d must be <= 2 and D <= 1")
        if self.p > MAX_P or self.q > MAX_Q:
            raise InvalidArgumentError("p and q must be <= 6")
        if self.P > MAX_SEASONAL_P or self.Q > MAX_SEASONAL_Q:
            raise InvalidArgumentError("P and Q must be <= 1")
        if self.period < 1:
            raise InvalidArgumentError("period must be >= 1")
        if (self.P or self.D or self.Q) and self.period < 2:
            raise InvalidArgumentError("seasonal terms need a period >= 2")
        if self.d + self.D > 0 and self.include_mean:
            object.__setattr__(self, "include_mean", False)

    @property
    def n_coef(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def n_params(self) -> int:
        """Parameter count used by the information criteria (incl. mean and variance)."""
        return self.n_coef + int(self.include_mean) + 1

    @property
    def lost(self) -> int:
        return self.d + self.D * self.period

    @property
    def is_seasonal(self) -> bool:
        return bool(self.P or self.D or self.Q)

    def min_length(self) -> int:
        return 3 * self.n_coef + self.lost + 10

    def label(self) -> str:
        text = f"ARIMA({self.p},{self.d},{self.q})"
        if self.is_seasonal:
            text += f"({self.P},{self.D},{self.Q})[{self.period}]"
        return text

    def to_dict(self) -> dict:
        return {
            "p": self.p, "d": self.d, "q": self.q,
            "P": self.P, "D": self.D, "Q": self.Q,
            "period": self.period, "include_mean": self.include_mean,
        }


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 2000
    convergence_tol: float = 1e-8
    optimizer_restarts: int = 3
    estimation: str = CSS_ML

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise InvalidArgumentError("convergence_tol must be positive")
        if self.optimizer_restarts < 0:
            raise InvalidArgumentError("optimizer_restarts must be >= 0")
        if self.estimation not in (CSS, CSS_ML):
            raise InvalidArgumentError(f"estimation must be {CSS!r} or {CSS_ML!r}")


def ar_poly(phi) -> np.ndarray:
    """Ascending coefficients of 1 - phi_1 z - ... - phi_p z^p."""
    return np.concatenate([[1.0], -np.asarray(phi, dtype=float)])


def ma_poly(theta) -> np.ndarray:
    """Ascending coefficients of 1 + theta_1 z + ... + theta_q z^q."""
    return np.concatenate([[1.0], np.asarray(theta, dtype=float)])


def seasonal_poly(base: np.ndarray, period: int) -> np.ndarray:
    """Spread ascending coefficients of a polynomial in z onto powers of z^period."""
    out = np.zeros((base.size - 1) * period + 1)
    out[::period] = base
    return out


def expand(phi, theta, seasonal_phi=(), seasonal_theta=(), period: int = 1):
    """Multiply out the seasonal and non-seasonal polynomials.

    Returns ``(phi_full, theta_full)`` so that the AR operator is
    ``1 - sum(phi_full_k B^k)`` and the MA operator ``1 + sum(theta_full_k B^k)``.
    """
    a = np.polynomial.polynomial.polymul(ar_poly(phi), seasonal_poly(ar_poly(seasonal_phi), period))
    b = np.polynomial.polynomial.polymul(ma_poly(theta), seasonal_poly(ma_poly(seasonal_theta), period))
    return -np.asarray(a[1:], dtype=float), np.asarray(b[1:], dtype=float)


def _root_moduli(ascending: np.ndarray) -> np.ndarray:
    coef = np.trim_zeros(np.asarray(ascending, dtype=float), "b")
    if coef.size <= 1:
        return np.zeros(0)
    return np.sort(np.abs(np.roots(coef[::-1])))


@dataclass(frozen=True)
class RootReport:
    ar_moduli: np.ndarray
    ma_moduli: np.ndarray

    @property
    def causal(self) -> bool:
        return bool(np.all(self.ar_moduli > 1.0))

    @property
    def invertible(self) -> bool:
        return bool(np.all(self.ma_moduli > 1.0))

    def to_dict(self) -> dict:
        return {
            "ar": [float(m) for m in self.ar_moduli],
            "ma": [float(m) for m in self.ma_moduli],
            "causal": self.causal,
            "invertible": self.invertible,
        }


def check_roots(phi=(), theta=()) -> RootReport:
    """Moduli of the roots of the AR and MA polynomials.

    >>> check_roots([0.5]).ar_moduli
    array([2.])
    """
    return RootReport(_root_moduli(ar_poly(phi)), _root_moduli(ma_poly(theta)))


def information_criteria(loglik: float, k: int, n: int) -> tuple[float, float, float]:
    """(AIC, AICc, BIC) for a fit with ``k`` estimated parameters on ``n`` points."""
    if n <= k + 1:
        raise InvalidArgumentError(f"need n > k + 1, got n={n}, k={k}")
    aic = -2.0 * loglik + 2.0 * k
    aicc = aic + 2.0 * k * (k + 1) / (n - k - 1)
    bic = -2.0 * loglik + k * math.log(n)
    return aic, aicc, bic


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float)]


@dataclass(frozen=True, eq=False)
class ArimaModel:
    order: ArimaOrder
    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seasonal_phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seasonal_theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean: float = 0.0
    sigma2: float = 1.0
    loglik: float = float("nan")
    aic: float = float("nan")
    aicc: float = float("nan")
    bic: float = float("nan")
    residuals: TimeSeries | None = None
    data: TimeSeries | None = None
    converged: bool = True
    whiteness: WhitenessReport | None = None

    def __post_init__(self):
        for name, size in (
            ("phi", self.order.p),
            ("theta", self.order.q),
            ("seasonal_phi", self.order.P),
            ("seasonal_theta", self.order.Q),
        ):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != size:
                raise InvalidArgumentError(f"{name} has {arr.size} entries, order needs {size}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # zero variance is allowed so noiseless paths can be simulated
        if not self.sigma2 >= 0:
            raise InvalidArgumentError("sigma2 must be non-negative")

    def expanded(self):
        return expand(self.phi, self.theta, self.seasonal_phi, self.seasonal_theta, self.order.period)

    def roots(self) -> RootReport:
        return check_roots(*self.expanded())

    def params(self) -> np.ndarray:
        """Coefficient vector in the layout taken by ``loglikelihood``."""
        parts = [self.phi, self.theta, self.seasonal_phi, self.seasonal_theta]
        if self.order.include_mean:
            parts.append([self.mean])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    @property
    def n_params(self) -> int:
        return self.order.n_params

    def with_whiteness(self, report: WhitenessReport) -> "ArimaModel":
        return replace(self, whiteness=report)

    def coefficients(self) -> dict[str, float]:
        out = {}
        for prefix, values in (
            ("phi", self.phi), ("theta", self.theta),
            ("sphi", self.seasonal_phi), ("stheta", self.seasonal_theta),
        ):
            for i, v in enumerate(values, start=1):
                out[f"{prefix}{i}"] = float(v)
        if self.order.include_mean:
            out["mean"] = float(self.mean)
        return out

    def to_dict(self) -> dict:
        return {
            "model": self.order.label(),
            "order": self.order.to_dict(),
            "coefficients": self.coefficients(),
            "phi": _floats(self.phi),
            "theta": _floats(self.theta),
            "seasonal_phi": _floats(self.seasonal_phi),
            "seasonal_theta": _floats(self.seasonal_theta),
            "mean": float(self.mean),
            "sigma2": float(self.sigma2),
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "aicc": float(self.aicc),
            "bic": float(self.bic),
            "root_moduli": self.roots().to_dict(),
            "whiteness_p": None if self.whiteness is None else float(self.whiteness.p_value),
            "converged": bool(self.converged),
        }


def model_from_params(order: ArimaOrder, params, sigma2: float = 1.0, **kwargs) -> ArimaModel:
    """Build a model from a coefficient vector laid out as in :meth:`ArimaModel.params`."""
    params = np.asarray(params, dtype=float)
    expected = order.n_coef + int(order.include_mean)
    if params.size != expected:
        raise InvalidArgumentError(f"expected {expected} parameters, got {params.size}")
    p, q, P, Q = order.p, order.q, order.P, order.Q
    cuts = np.cumsum([p, q, P, Q])
    return ArimaModel(
        order,
        phi=params[: cuts[0]],
        theta=params[cuts[0]: cuts[1]],
        seasonal_phi=params[cuts[1]: cuts[2]],
        seasonal_theta=params[cuts[2]: cuts[3]],
        mean=float(params[cuts[3]]) if order.include_mean else 0.0,
        sigma2=sigma2,
        **kwargs,
    )


def model_from_dict(doc: dict) -> ArimaModel:
    """Inverse of the coefficient part of :meth:`ArimaModel.to_dict`."""
    try:
        order = ArimaOrder(**doc.get("order", {}))
        return ArimaModel(
            order,
            phi=doc.get("phi", ()), theta=doc.get("theta", ()),
            seasonal_phi=doc.get("seasonal_phi", ()), seasonal_theta=doc.get("seasonal_theta", ()),
            mean=float(doc.get("mean", 0.0)), sigma2=float(doc.get("sigma2", 1.0)),
        )
    except TypeError as err:
        raise InvalidArgumentError(f"malformed model document: {err}") from err
