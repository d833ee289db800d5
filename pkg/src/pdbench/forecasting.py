"""One rolling-origin window: fit, forecast the holdout, reintegrate.

The estimator sees rows [0, train_end) of the design matrix and predicts
the next `horizon` rows.  Predictions are first differences of the
transformed target; the level path adds them onto the last observed
level.  A fit that raises a recoverable error, or returns non-finite
values, yields status "failed".  A forecast whose differenced path has
(sample) standard deviation below FLAT_TOL is tagged "flat": it carries
no quarter-to-quarter movement, which downstream stability screening
treats as uninformative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignMatrix
from .models.base import FitFailure
from .transforms import reintegrate_forecast

FLAT_TOL = 1e-6

_RECOVERABLE = (
    FitFailure,
    np.linalg.LinAlgError,
    ValueError,
    RuntimeError,
    FloatingPointError,
    OverflowError,
    ZeroDivisionError,
)

STATUS_OK = "ok"
STATUS_FLAT = "flat"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class WindowForecast:
    """Result of one fit-and-forecast step."""

    train_end: int
    horizon: int
    status: str
    diff_path: np.ndarray | None
    level_path: np.ndarray | None
    message: str = ""

    @property
    def failed(self) -> bool:
        return self.status == STATUS_FAILED

    @property
    def usable(self) -> bool:
        return self.status != STATUS_FAILED


def forecast_window(
    estimator, design: DesignMatrix, train_end: int, horizon: int
) -> WindowForecast:
    """Fit on the first train_end rows, forecast the next horizon rows."""
    if train_end < 1 or train_end + horizon > design.t_eff:
        raise ValueError(
            f"window [0, {train_end}) + horizon {horizon} does not fit in "
            f"{design.t_eff} rows"
        )
    X_train = design.X[:train_end]
    y_train = design.y[:train_end]
    X_future = design.X[train_end : train_end + horizon]
    try:
        estimator.fit(X_train, y_train)
        diff_path = np.asarray(estimator.predict(X_future), dtype=float)
    except _RECOVERABLE as exc:
        return WindowForecast(
            train_end=train_end,
            horizon=horizon,
            status=STATUS_FAILED,
            diff_path=None,
            level_path=None,
            message=f"{type(exc).__name__}: {exc}",
        )
    if diff_path.shape != (horizon,) or not np.isfinite(diff_path).all():
        return WindowForecast(
            train_end=train_end,
            horizon=horizon,
            status=STATUS_FAILED,
            diff_path=None,
            level_path=None,
            message="non-finite or misshapen forecast",
        )
    anchor = design.level_anchor(train_end)
    level_path = reintegrate_forecast(diff_path, anchor)
    status = STATUS_FLAT if _is_flat(diff_path) else STATUS_OK
    return WindowForecast(
        train_end=train_end,
        horizon=horizon,
        status=status,
        diff_path=diff_path,
        level_path=level_path,
    )


def _is_flat(diff_path: np.ndarray) -> bool:
    if diff_path.size < 2:
        return False
    return float(np.std(diff_path)) < FLAT_TOL


def window_level_mae(
    forecast: WindowForecast, design: DesignMatrix
) -> float:
    """MAE of the reintegrated level path against the realized levels."""
    if forecast.failed:
        return float("inf")
    actual = design.y_level[forecast.train_end : forecast.train_end + forecast.horizon]
    return float(np.mean(np.abs(forecast.level_path - actual)))
