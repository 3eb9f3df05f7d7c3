"""Lagged regression design in cumulative-jump coordinates."""
from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from ..errors import InsufficientDataError, InvalidArgumentError
from ..series import TimeSeries


@dataclass(frozen=True, eq=False)
class LaggedDesign:
    """``Y = X B + E`` where block ``j`` of ``B`` is the jump in the AR
    coefficients (intercept first) at time ``j``.

    Only the row regressors ``Z`` (intercept and ``p_lag`` lags) are stored;
    the full lower-triangular matrix is available from :meth:`dense`. Row
    ``i`` targets series position ``i + p_lag``.
    """

    response: np.ndarray
    regressors: np.ndarray
    p_lag: int
    time_index: tuple

    @property
    def n_rows(self) -> int:
        return self.response.size

    @property
    def width(self) -> int:
        return self.p_lag + 1

    def row_position(self, row: int) -> int:
        return row + self.p_lag

    def dense(self) -> np.ndarray:
        """Full design with one column block per time point of the series.

        Blocks for the first ``p_lag + 1`` time points touch every row and
        are therefore identical; the solver keeps only the last of them (the
        base coefficients) and one block per later time point.
        """
        n_time = self.n_rows + self.p_lag
        out = np.zeros((self.n_rows, n_time * self.width))
        for i in range(self.n_rows):
            t = self.row_position(i)
            for j in range(t + 1):
                out[i, j * self.width:(j + 1) * self.width] = self.regressors[i]
        return out

    def solver_matrix(self) -> np.ndarray:
        """Dense matrix in solver coordinates: block ``j`` covers rows ``i >= j``."""
        n, w = self.n_rows, self.width
        out = np.zeros((n, n * w))
        for j in range(n):
            out[j:, j * w:(j + 1) * w] = self.regressors[j:]
        return out

    def head(self, rows: int) -> "LaggedDesign":
        return LaggedDesign(self.response[:rows], self.regressors[:rows], self.p_lag,
                            self.time_index[:rows])


def lag_matrix(x: np.ndarray, p_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Response ``x[p:]`` and regressors ``(1, x[t-1], ..., x[t-p])``."""
    n = x.size
    z = np.ones((n - p_lag, p_lag + 1))
    for k in range(1, p_lag + 1):
        z[:, k] = x[p_lag - k: n - k]
    return x[p_lag:].copy(), z


def build_design(series: TimeSeries, p_lag: int = 1, min_gap: int = 0) -> LaggedDesign:
    if p_lag < 0:
        raise InvalidArgumentError("p_lag must be non-negative")
    x = series.values
    if x.size <= p_lag + 2 * min_gap or x.size < p_lag + 2:
        raise InsufficientDataError(
            f"series of length {x.size} too short for p_lag={p_lag}, min_gap={min_gap}"
        )
    y, z = lag_matrix(x, p_lag)
    dates: tuple[date, ...] = tuple(series.date_at(i + p_lag) for i in range(y.size))
    y.setflags(write=False)
    z.setflags(write=False)
    return LaggedDesign(y, z, p_lag, dates)
