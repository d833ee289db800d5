"""Input validation and shared plumbing for the estimators.

All estimators follow the scikit-learn protocol: hyperparameters are
``__init__`` arguments stored verbatim, ``fit(X, y)`` returns ``self`` and
stores learned state in trailing-underscore attributes, ``predict(X)`` is
deterministic given the fitted state.  Stochastic fits draw exclusively
from a generator seeded by the ``seed`` hyperparameter.

Kept free of intra-package imports so any module (including the tree
sampler, which the model registry itself imports) can depend on it
without creating import cycles.
"""
from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError


class FitFailure(RuntimeError):
    """A model could not produce usable fitted state; callers map this to
    a failed-status window rather than aborting the run."""


def as_matrix(X) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"X must be 2-dimensional, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError("X contains non-finite values")
    return arr


def as_target(y, n_rows: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float).ravel()
    if arr.shape[0] != n_rows:
        raise ValueError(f"y has length {arr.shape[0]}, expected {n_rows}")
    if arr.size and not np.isfinite(arr).all():
        raise ValueError("y contains non-finite values")
    return arr


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} must be fitted before calling predict"
        )


def check_columns(n_seen: int, n_trained: int) -> None:
    if n_seen != n_trained:
        raise ValueError(
            f"prediction input has {n_seen} columns, model was trained on {n_trained}"
        )


class Standardizer:
    """Column-wise zero-mean unit-variance scaling from training rows only.

    Population variance (ddof=0) so standardized columns satisfy
    sum(x^2) = n exactly; constant columns keep scale 1 and become all
    zeros, which penalized solvers then shrink to zero coefficients.
    """

    def fit(self, X: np.ndarray) -> "Standardizer":
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.constant_ = std == 0.0
        self.scale_ = np.where(self.constant_, 1.0, std)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean_) / self.scale_

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)

    def coef_to_original(self, beta_std: np.ndarray, y_mean: float):
        """Map standardized-scale coefficients back to the raw column scale."""
        coef = beta_std / self.scale_
        intercept = y_mean - float(coef @ self.mean_)
        return coef, intercept


def rng_from_seed(seed) -> np.random.Generator:
    return np.random.default_rng(seed)
