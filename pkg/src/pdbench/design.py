"""Lag-block design matrices and rolling-origin evaluation plans.

The design target is the first-differenced (transformed) default rate;
predictors are the transformed covariates at lags 0..P, grouped in lag
blocks: all covariates contemporaneously, then all at lag 1, and so on.
No autoregressive lag of the target enters the matrix.  The level of the
target just before each row is carried along so differenced forecasts can
be anchored back onto the level scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import DataError, TimeSeriesFrame, TARGET_COLUMN


@dataclass(frozen=True)
class DesignMatrix:
    """Aligned target/predictor arrays for one transformed panel.

    y[t] is the differenced target at row t, y_level[t] the undifferenced
    (level) value at the same period, and anchor_level the level one step
    before row 0, so reintegration is defined for every training prefix.
    """

    y: np.ndarray
    X: np.ndarray
    column_names: tuple[str, ...]
    origin_index: tuple[str, ...]
    y_level: np.ndarray
    anchor_level: float
    n_base: int
    n_lags: int
    target: str = TARGET_COLUMN

    def __post_init__(self):
        t_eff = self.y.shape[0]
        if self.X.shape != (t_eff, self.n_base * (self.n_lags + 1)):
            raise DataError(
                f"X shape {self.X.shape} inconsistent with {t_eff} rows and "
                f"{self.n_base}x{self.n_lags + 1} lag blocks"
            )
        if len(self.column_names) != self.X.shape[1]:
            raise DataError("column_names length must match X columns")
        if len(self.origin_index) != t_eff or self.y_level.shape[0] != t_eff:
            raise DataError("origin_index and y_level must align with y")
        for arr in (self.y, self.X, self.y_level):
            if not np.isfinite(arr).all():
                raise DataError("design matrix contains non-finite cells")
        self.y.setflags(write=False)
        self.X.setflags(write=False)
        self.y_level.setflags(write=False)

    @property
    def t_eff(self) -> int:
        return self.y.shape[0]

    def level_anchor(self, train_end: int) -> float:
        """Level of the target at the last training period (rows [0, train_end))."""
        if train_end < 1 or train_end > self.t_eff:
            raise DataError(f"train_end {train_end} outside 1..{self.t_eff}")
        return float(self.y_level[train_end - 1])


def build_design(
    frame_levels: TimeSeriesFrame,
    target: str = TARGET_COLUMN,
    n_lags: int = 4,
    diff_order: int = 1,
) -> DesignMatrix:
    """Build the lag-block design from a *level* frame (logit + seasonal done).

    The frame passed in must NOT yet be differenced: differencing of all
    columns (order `diff_order`) happens here so the target's level path
    stays available for anchoring reintegrated forecasts.
    """
    if target not in frame_levels.columns:
        raise DataError(f"target column {target!r} not in frame")
    if n_lags < 0:
        raise DataError(f"n_lags must be >= 0, got {n_lags}")
    diffed = frame_levels.difference(diff_order) if diff_order else frame_levels
    t_diffed = len(diffed)
    if n_lags >= t_diffed:
        raise DataError(
            f"n_lags={n_lags} leaves no usable rows out of {t_diffed} differenced rows"
        )
    covariates = [c for c in diffed.columns if c != target]
    n_base = len(covariates)
    rows = np.arange(n_lags, t_diffed)
    cols, names = [], []
    for lag in range(n_lags + 1):
        for var in covariates:
            cols.append(diffed.values[var][rows - lag])
            names.append(f"{var}_L{lag}")
    X = np.column_stack(cols) if cols else np.empty((rows.size, 0))
    y = diffed.values[target][rows].copy()
    # level of the target aligned with each row, plus the pre-sample anchor
    level_full = frame_levels.values[target]
    levels = level_full[diff_order + n_lags :].copy()
    anchor = float(level_full[diff_order + n_lags - 1])
    return DesignMatrix(
        y=y,
        X=X.copy(),
        column_names=tuple(names),
        origin_index=tuple(diffed.index[n_lags:]),
        y_level=levels,
        anchor_level=anchor,
        n_base=n_base,
        n_lags=n_lags,
        target=target,
    )


@dataclass(frozen=True)
class CvPlan:
    """Expanding-window rolling-origin plan over design rows."""

    windows: tuple[tuple[int, int], ...]  # (train_end_index, holdout_length)
    initial_train: int
    holdout: int
    step: int = 1

    def __len__(self) -> int:
        return len(self.windows)


def rolling_windows(
    t_eff: int, initial_train: int, holdout: int = 12, step: int = 1
) -> CvPlan:
    """Expanding training prefixes with a fixed holdout directly after each.

    Window w trains on rows [0, initial_train + w*step) and evaluates on
    the next `holdout` rows; the last window's holdout ends at the final row.
    """
    if initial_train < 1:
        raise DataError(f"initial_train must be >= 1, got {initial_train}")
    if holdout < 1 or step < 1:
        raise DataError("holdout and step must be >= 1")
    if t_eff < initial_train + holdout:
        raise DataError(
            f"need at least initial_train + holdout = {initial_train + holdout} "
            f"rows, got {t_eff}"
        )
    windows = []
    train_end = initial_train
    while train_end + holdout <= t_eff:
        windows.append((train_end, holdout))
        train_end += step
    return CvPlan(
        windows=tuple(windows),
        initial_train=initial_train,
        holdout=holdout,
        step=step,
    )
