import numpy as np
import pytest

from pdbench.stationarity import (
    ColumnStationarity,
    adf_test,
    kpss_test,
    newey_west_bandwidth,
)
from pdbench.transforms import TransformError

REPS = 200
T = 100


def _mc_rates():
    rng = np.random.default_rng(20240817)
    adf_reject_wn = adf_reject_rw = 0
    kpss_reject_wn = 0
    for _ in range(REPS):
        wn = rng.normal(size=T)
        rw = np.cumsum(rng.normal(size=T))
        if adf_test(wn).reject:
            adf_reject_wn += 1
        if adf_test(rw).reject:
            adf_reject_rw += 1
        if kpss_test(wn).reject:
            kpss_reject_wn += 1
    return adf_reject_wn / REPS, adf_reject_rw / REPS, kpss_reject_wn / REPS


def test_monte_carlo_calibration():
    adf_wn, adf_rw, kpss_wn = _mc_rates()
    assert adf_wn >= 0.90, f"ADF power on white noise too low: {adf_wn}"
    assert adf_rw <= 0.10, f"ADF size on random walk too high: {adf_rw}"
    assert kpss_wn <= 0.10, f"KPSS size on white noise too high: {kpss_wn}"


def test_deterministic_outputs():
    rng = np.random.default_rng(5)
    y = rng.normal(size=60)
    a1, a2 = adf_test(y), adf_test(y)
    k1, k2 = kpss_test(y), kpss_test(y)
    assert a1 == a2
    assert k1 == k2
    assert a1.statistic is not None and k1.statistic is not None


def test_adf_lag_bounded():
    rng = np.random.default_rng(6)
    y = np.cumsum(rng.normal(size=80))
    out = adf_test(y, max_lags=4)
    assert 0 <= out.lags <= 4


def test_constant_series_degenerate():
    y = np.full(40, 2.5)
    assert kpss_test(y).degenerate
    assert adf_test(y).degenerate
    assert kpss_test(y).reject is None


def test_short_series_rejected():
    with pytest.raises(TransformError, match="at least 20"):
        adf_test(np.arange(10.0))
    with pytest.raises(TransformError, match="at least 20"):
        kpss_test(np.arange(10.0))


def test_bandwidth_sane():
    rng = np.random.default_rng(8)
    e = rng.normal(size=100)
    bw = newey_west_bandwidth(e - e.mean())
    assert 0 <= bw < 100


def test_verdict_labels():
    rng = np.random.default_rng(9)
    wn = rng.normal(size=120)
    rw = np.cumsum(rng.normal(size=120))
    v_wn = ColumnStationarity("x", adf_test(wn), kpss_test(wn)).verdict
    v_rw = ColumnStationarity("x", adf_test(rw), kpss_test(rw)).verdict
    assert v_wn == "stationary"
    assert v_rw in ("unit_root", "ambiguous")
