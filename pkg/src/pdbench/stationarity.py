"""Unit-root and stationarity diagnostics with embedded critical values.

Both tests are deterministic functions of the input series: the ADF
regression picks its lag order by BIC (bounded above), and the KPSS
long-run variance uses a Bartlett kernel with the Newey-West automatic
bandwidth.  Decisions are reported at the 5% level.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .transforms import TransformError, _as_series

# MacKinnon (2010) response-surface coefficients, constant-only case.
# cv(T) = b0 + b1/T + b2/T^2 + b3/T^3 at the given level.
_ADF_CONST_CV = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.04),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}

# KPSS level-stationarity critical values (constant case).
_KPSS_CV = {"10%": 0.347, "5%": 0.463, "2.5%": 0.574, "1%": 0.739}

MIN_LENGTH = 20


@dataclass(frozen=True)
class TestOutcome:
    """One test's result; `reject` refers to the test's own null at 5%."""

    statistic: float | None
    lags: int
    crit_5pct: float
    reject: bool | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _ols(X: np.ndarray, y: np.ndarray):
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid, rank


def adf_test(series, max_lags: int = 4) -> TestOutcome:
    """Augmented Dickey-Fuller test with an intercept.

    Null hypothesis: the series has a unit root.  The number of lagged
    differences (0..max_lags) minimizes BIC over a common sample; the
    statistic is the t-ratio on the lagged level in a refit over the
    longest sample for the chosen lag.
    """
    y = _as_series(series)
    n = y.size
    if n < MIN_LENGTH:
        raise TransformError(f"adf_test needs at least {MIN_LENGTH} observations, got {n}")
    if np.ptp(y) == 0.0:
        return TestOutcome(None, 0, _adf_cv5(n - 1), None, degenerate=True)
    dy = np.diff(y)
    max_lags = min(max_lags, (n - 1) // 3)

    def regression(k: int, start: int):
        # rows start..len(dy)-1 of dy regressed on const, y_{t-1}, dy lags
        rows = np.arange(start, dy.size)
        cols = [np.ones(rows.size), y[rows]]
        for i in range(1, k + 1):
            cols.append(dy[rows - i])
        X = np.column_stack(cols)
        return X, dy[rows]

    # lag choice on the common sample so BICs are comparable
    best_k, best_bic = 0, np.inf
    for k in range(max_lags + 1):
        X, target = regression(k, max_lags)
        _, resid, _ = _ols(X, target)
        nobs = target.size
        rss = float(resid @ resid)
        bic = nobs * np.log(max(rss, 1e-300) / nobs) + X.shape[1] * np.log(nobs)
        if bic < best_bic - 1e-12:
            best_k, best_bic = k, bic
    X, target = regression(best_k, best_k)
    beta, resid, rank = _ols(X, target)
    nobs = target.size
    dof = nobs - X.shape[1]
    if rank < X.shape[1] or dof <= 0:
        return TestOutcome(None, best_k, _adf_cv5(nobs), None, degenerate=True)
    s2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.pinv(X.T @ X)
    se = np.sqrt(s2 * xtx_inv[1, 1])
    if se == 0.0:
        return TestOutcome(None, best_k, _adf_cv5(nobs), None, degenerate=True)
    stat = float(beta[1] / se)
    cv5 = _adf_cv5(nobs)
    return TestOutcome(stat, best_k, cv5, bool(stat < cv5))


def _adf_cv5(nobs: int) -> float:
    b = _ADF_CONST_CV["5%"]
    return b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3


def newey_west_bandwidth(e: np.ndarray) -> int:
    """Automatic Bartlett-kernel truncation lag (Newey & West 1994)."""
    t = e.size
    n = int(4 * (t / 100.0) ** (2.0 / 9.0))
    n = min(max(n, 0), t - 1)
    gamma = np.array([e[j:] @ e[: t - j] / t for j in range(n + 1)])
    s0 = gamma[0] + 2.0 * gamma[1:].sum()
    s1 = 2.0 * np.arange(1, n + 1) @ gamma[1:] if n else 0.0
    if s0 <= 0.0:
        return 0
    ghat = 1.1447 * ((s1 / s0) ** 2) ** (1.0 / 3.0)
    return int(min(ghat * t ** (1.0 / 3.0), t - 1))


def kpss_test(series) -> TestOutcome:
    """KPSS level-stationarity test.

    Null hypothesis: the series is (level-)stationary, so `reject=True`
    points toward a unit root.  Long-run variance uses a Bartlett kernel
    with the automatic bandwidth; a constant series is degenerate.
    """
    y = _as_series(series)
    n = y.size
    if n < MIN_LENGTH:
        raise TransformError(f"kpss_test needs at least {MIN_LENGTH} observations, got {n}")
    e = y - y.mean()
    if np.ptp(y) == 0.0:
        return TestOutcome(None, 0, _KPSS_CV["5%"], None, degenerate=True)
    bw = newey_west_bandwidth(e)
    gamma0 = float(e @ e) / n
    lrv = gamma0
    for j in range(1, bw + 1):
        w = 1.0 - j / (bw + 1.0)
        lrv += 2.0 * w * float(e[j:] @ e[:-j]) / n
    if lrv <= 0.0:
        return TestOutcome(None, bw, _KPSS_CV["5%"], None, degenerate=True)
    s = np.cumsum(e)
    stat = float(s @ s) / (n**2 * lrv)
    cv5 = _KPSS_CV["5%"]
    return TestOutcome(stat, bw, cv5, bool(stat > cv5))


@dataclass(frozen=True)
class ColumnStationarity:
    column: str
    adf: TestOutcome
    kpss: TestOutcome

    @property
    def verdict(self) -> str:
        if self.adf.degenerate or self.kpss.degenerate:
            return "degenerate"
        if self.adf.reject and not self.kpss.reject:
            return "stationary"
        if not self.adf.reject and self.kpss.reject:
            return "unit_root"
        return "ambiguous"

    def to_dict(self) -> dict:
        return {
            "column": self.column,
            "adf": self.adf.to_dict(),
            "kpss": self.kpss.to_dict(),
            "verdict": self.verdict,
        }


def stationarity_report(frame, max_lags: int = 4) -> list[ColumnStationarity]:
    """Run both tests on every column of a frame, in column order."""
    out = []
    for col in frame.columns:
        series = frame.values[col]
        out.append(
            ColumnStationarity(
                column=col, adf=adf_test(series, max_lags), kpss=kpss_test(series)
            )
        )
    return out
