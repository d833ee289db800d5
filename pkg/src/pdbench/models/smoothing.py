"""Simple exponential smoothing with additive errors, no trend or season."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator, RegressorMixin

from .base import as_matrix, as_target, check_fitted


def _ses_level(y: np.ndarray, alpha: float) -> tuple[float, float]:
    """Final smoothed level and in-sample one-step SSE for a given alpha."""
    level = y[0]
    sse = 0.0
    for obs in y[1:]:
        err = obs - level
        sse += err * err
        level += alpha * err
    return level, sse


class SesForecaster(BaseEstimator, RegressorMixin):
    """Univariate SES on the target only; predictors are ignored.

    The smoothing parameter is chosen by minimizing in-sample one-step
    squared error (the Gaussian likelihood criterion for additive errors)
    unless `alpha` is fixed.  Multi-step forecasts are flat at the final
    smoothed level, the defining SES property.
    """

    def __init__(self, alpha: float | None = None):
        self.alpha = alpha

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        if self.alpha is not None:
            if not 0.0 < self.alpha <= 1.0:
                raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
            alpha = float(self.alpha)
        elif y.size < 3 or np.ptp(y) == 0.0:
            alpha = 1.0
        else:
            res = minimize_scalar(
                lambda a: _ses_level(y, a)[1],
                bounds=(1e-4, 1.0),
                method="bounded",
                options={"xatol": 1e-6},
            )
            alpha = float(res.x)
        self.alpha_ = alpha
        self.level_ = float(_ses_level(y, alpha)[0]) if y.size else 0.0
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "level_")
        X = as_matrix(X)
        return np.full(X.shape[0], self.level_)
