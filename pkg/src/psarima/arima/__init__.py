"""ARIMA/SARIMA estimation, simulation, forecasting and order selection."""
from .auto import auto_fit
from .estimate import ar_to_pacf, fit, pacf_to_ar
from .forecast import forecast
from .likelihood import arma_acvf, loglikelihood
from .model import (
    CSS,
    CSS_ML,
    ArimaModel,
    ArimaOrder,
    FitConfig,
    RootReport,
    check_roots,
    expand,
    information_criteria,
    model_from_dict,
    model_from_params,
)
from .simulate import simulate

__all__ = [
    "CSS", "CSS_ML", "ArimaModel", "ArimaOrder", "FitConfig", "RootReport",
    "ar_to_pacf", "arma_acvf", "auto_fit", "check_roots", "expand", "fit",
    "forecast", "information_criteria", "loglikelihood", "model_from_dict", "model_from_params",
    "pacf_to_ar", "simulate",
]
