"""Tests for single-window fitting, reintegration, and status tagging."""
import numpy as np
import pytest
from sklearn.base import BaseEstimator, RegressorMixin

from pdbench.design import build_design, rolling_windows
from pdbench.forecasting import (
    FLAT_TOL,
    STATUS_FAILED,
    STATUS_FLAT,
    STATUS_OK,
    WindowForecast,
    forecast_window,
    window_level_mae,
)
from pdbench.models.base import FitFailure
from pdbench.models.linear import LinearRegressor
from pdbench.models.smoothing import SesForecaster

from tests.test_design import transformed_levels


def small_design(n=44, seed=3):
    return build_design(transformed_levels(n, seed=seed), n_lags=4)


class ExplodingEstimator(BaseEstimator, RegressorMixin):
    def __init__(self, when="fit"):
        self.when = when

    def fit(self, X, y):
        if self.when == "fit":
            raise FitFailure("deliberate failure")
        return self

    def predict(self, X):
        if self.when == "predict":
            raise np.linalg.LinAlgError("deliberate failure")
        if self.when == "nan":
            return np.full(X.shape[0], np.nan)
        return np.zeros(X.shape[0])


def test_ok_forecast_reintegrates_from_last_level():
    design = small_design()
    fc = forecast_window(LinearRegressor(), design, train_end=20, horizon=6)
    assert fc.status == STATUS_OK
    assert fc.diff_path.shape == (6,)
    expected = design.y_level[19] + np.cumsum(fc.diff_path)
    assert np.allclose(fc.level_path, expected, atol=1e-12)


def test_window_bounds_validated():
    design = small_design()
    with pytest.raises(ValueError):
        forecast_window(LinearRegressor(), design, train_end=0, horizon=4)
    with pytest.raises(ValueError):
        forecast_window(
            LinearRegressor(), design, train_end=design.t_eff - 2, horizon=6
        )


def test_fit_failure_yields_failed_status():
    design = small_design()
    fc = forecast_window(ExplodingEstimator("fit"), design, train_end=20, horizon=6)
    assert fc.status == STATUS_FAILED
    assert fc.diff_path is None
    assert "FitFailure" in fc.message
    assert window_level_mae(fc, design) == float("inf")


def test_predict_failure_and_nan_yield_failed_status():
    design = small_design()
    for mode in ("predict", "nan"):
        fc = forecast_window(ExplodingEstimator(mode), design, train_end=20, horizon=6)
        assert fc.status == STATUS_FAILED


def test_constant_forecast_tagged_flat():
    design = small_design()
    fc = forecast_window(SesForecaster(), design, train_end=20, horizon=6)
    assert fc.status == STATUS_FLAT
    assert fc.usable
    assert np.std(fc.diff_path) < FLAT_TOL
    assert np.isfinite(window_level_mae(fc, design))


def test_mae_matches_manual_computation():
    design = small_design()
    fc = forecast_window(LinearRegressor(), design, train_end=22, horizon=5)
    actual = design.y_level[22:27]
    manual = float(np.mean(np.abs(fc.level_path - actual)))
    assert window_level_mae(fc, design) == pytest.approx(manual, abs=1e-15)


def test_training_rows_do_not_include_holdout():
    # identical forecasts from two estimators prove the slice boundary:
    # an estimator that records its training rows must not see the holdout
    class Recorder(BaseEstimator, RegressorMixin):
        def fit(self, X, y):
            self.rows_seen_ = X.shape[0]
            return self

        def predict(self, X):
            return np.zeros(X.shape[0])

    design = small_design()
    rec = Recorder()
    plan = rolling_windows(design.t_eff, initial_train=18, holdout=6)
    fc = forecast_window(rec, design, train_end=plan.windows[0][0], horizon=6)
    assert rec.rows_seen_ == 18
    assert fc.level_path.shape == (6,)


def test_flat_requires_two_steps():
    fc = WindowForecast(
        train_end=5,
        horizon=1,
        status=STATUS_OK,
        diff_path=np.array([0.0]),
        level_path=np.array([1.0]),
    )
    assert fc.status == STATUS_OK
