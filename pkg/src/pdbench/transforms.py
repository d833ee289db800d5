"""Series-level transforms for default-rate panels.

All functions operate on 1-D float arrays and are pure: no global state,
no mutation of inputs.  Probabilities of default (PD) are handled on the
percent scale, i.e. valid values lie strictly inside (0, 100).
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit


class TransformError(ValueError):
    """Raised when a transform's domain requirements are violated."""


def _as_series(x, name: str = "series") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise TransformError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise TransformError(f"{name} contains a non-finite value at position {bad}")
    return arr


def logit_transform(pd_percent) -> np.ndarray:
    """Map PD in percent, strictly inside (0, 100), to the unbounded logit scale.

    y = log(pd / (100 - pd)).  50 maps to 0; values outside the open
    interval raise TransformError naming the first offending position.
    """
    pd_arr = _as_series(pd_percent, "pd_percent")
    bad = (pd_arr <= 0.0) | (pd_arr >= 100.0)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise TransformError(
            f"PD must lie strictly inside (0, 100) percent; "
            f"got {pd_arr[pos]!r} at position {pos}"
        )
    return np.log(pd_arr) - np.log(100.0 - pd_arr)


def inverse_logit(y) -> np.ndarray:
    """Map logit values back to PD in percent; overflow-safe for |y| up to 700+."""
    y_arr = _as_series(y, "y")
    return 100.0 * expit(y_arr)


def difference(series, order: int = 1) -> np.ndarray:
    """Forward difference; output is shorter than the input by `order`."""
    arr = _as_series(series)
    if order < 0:
        raise TransformError(f"difference order must be >= 0, got {order}")
    if order >= arr.size:
        raise TransformError(
            f"difference order {order} needs a series longer than {order}, got {arr.size}"
        )
    return np.diff(arr, n=order)


def reintegrate_forecast(diffs, last_level: float) -> np.ndarray:
    """Undo a first difference: cumulative sum of `diffs` anchored at `last_level`.

    Returns the level path aligned with the forecast steps (the anchor
    itself is not included).
    """
    d = _as_series(diffs, "diffs")
    return float(last_level) + np.cumsum(d)


def seasonal_component(series, period: int = 4) -> np.ndarray:
    """Additive seasonal component by classical moving-average decomposition.

    Trend is a centered 2x`period` moving average; phase effects are the
    means of the detrended interior, re-centered so one full cycle sums
    to zero.  Deterministic, no smoothing parameters.
    """
    arr = _as_series(series)
    if period < 2:
        raise TransformError(f"period must be >= 2, got {period}")
    n = arr.size
    if n < 2 * period:
        raise TransformError(
            f"seasonal adjustment needs at least {2 * period} observations, got {n}"
        )
    if period % 2 == 0:
        # centered MA: 0.5, 1, ..., 1, 0.5 over period+1 points, scaled by 1/period
        weights = np.ones(period + 1)
        weights[0] = weights[-1] = 0.5
    else:
        weights = np.ones(period)
    weights /= period
    trend = np.convolve(arr, weights, mode="valid")
    half = period // 2
    detrended = arr[half : half + trend.size] - trend
    phases = (np.arange(half, half + trend.size)) % period
    effects = np.zeros(period)
    for p in range(period):
        vals = detrended[phases == p]
        if vals.size == 0:
            raise TransformError(f"phase {p} has no interior observations")
        effects[p] = vals.mean()
    effects -= effects.mean()  # one cycle sums to zero
    return effects[np.arange(n) % period]


def seasonal_adjust(series, period: int = 4) -> np.ndarray:
    """Remove the additive seasonal component; trend and noise are kept."""
    arr = _as_series(series)
    return arr - seasonal_component(arr, period)
