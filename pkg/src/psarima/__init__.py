"""Piecewise-stationary ARIMA modelling of time series under external shocks."""
from .series import TimeSeries

__version__ = "0.1.0"
__all__ = ["TimeSeries", "__version__"]
