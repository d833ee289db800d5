"""Tests for comparison metrics, stability screening, and rank intervals."""
import dataclasses

import numpy as np
import pytest
from scipy import stats

from pdbench.design import build_design, rolling_windows
from pdbench.evaluation import (
    ModelRun,
    RmcbResult,
    level_metrics,
    mase_denominator,
    rank_models,
    rmcb,
    run_comparison,
    run_model,
    stability_filter,
    window_metrics,
)
from pdbench.forecasting import WindowForecast, forecast_window
from pdbench.models.linear import LinearRegressor

from tests.test_design import transformed_levels


def small_design(n=44, seed=3):
    return build_design(transformed_levels(n, seed=seed), n_lags=4)


class TestLevelMetrics:
    def test_hand_example(self):
        # [DERIVED] pred (1, 2, 4), actual (2, 2, 2):
        # errors (-1, 0, 2), mae = 1, rmse = sqrt(5/3),
        # mape = mean(50%, 0%, 100%) = 50%
        mae, rmse, mape, n_zero = level_metrics([1.0, 2.0, 4.0], [2.0, 2.0, 2.0])
        assert mae == pytest.approx(1.0, abs=1e-15)
        assert rmse == pytest.approx(np.sqrt(5.0 / 3.0), abs=1e-15)
        assert mape == pytest.approx(50.0, abs=1e-12)
        assert n_zero == 0

    def test_zero_actuals_skipped_and_counted(self):
        mae, rmse, mape, n_zero = level_metrics([1.0, 1.0], [0.0, 2.0])
        assert n_zero == 1
        assert mape == pytest.approx(50.0, abs=1e-12)
        mae, rmse, mape, n_zero = level_metrics([1.0], [0.0])
        assert np.isnan(mape)
        assert n_zero == 1

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            level_metrics([1.0, 2.0], [1.0])


class TestWindowMetrics:
    def test_mase_uses_in_sample_naive_errors(self):
        design = small_design()
        train_end = 20
        # [DERIVED] every target diff is a one-step naive level error
        expected = float(np.mean(np.abs(design.y[:train_end])))
        assert mase_denominator(design, train_end) == pytest.approx(
            expected, abs=1e-15
        )
        fc = forecast_window(LinearRegressor(), design, train_end, 6)
        m = window_metrics("lm", 0, fc, design)
        assert m.mase == pytest.approx(m.mae / expected, rel=1e-12)

    def test_failed_forecast_gives_nan_metrics(self):
        design = small_design()
        fc = WindowForecast(
            train_end=20,
            horizon=6,
            status="failed",
            diff_path=None,
            level_path=None,
            message="boom",
        )
        m = window_metrics("lm", 3, fc, design)
        assert m.status == "failed"
        assert np.isnan(m.mae) and np.isnan(m.rmse)
        assert np.isnan(m.mape) and np.isnan(m.mase) and np.isnan(m.mae_diff)

    def test_overfit_flag_tracks_column_count(self):
        design = small_design()  # 40 columns
        fc_low = forecast_window(LinearRegressor(), design, 20, 6)
        assert window_metrics("lm", 0, fc_low, design).overfit  # 20 <= 40
        design_big = small_design(n=60)
        fc_high = forecast_window(LinearRegressor(), design_big, 45, 6)
        assert not window_metrics("lm", 0, fc_high, design_big).overfit

    def test_mae_diff_secondary_scale(self):
        design = small_design()
        fc = forecast_window(LinearRegressor(), design, 22, 5)
        m = window_metrics("lm", 0, fc, design)
        expected = float(np.mean(np.abs(fc.diff_path - design.y[22:27])))
        assert m.mae_diff == pytest.approx(expected, abs=1e-15)


class TestStabilityFilter:
    def test_threshold_at_quarter(self):
        # [DERIVED] 13 bad of 49 = 0.2653 >= 0.25 drops; 12 of 49 = 0.2449 keeps
        bad13 = ["failed"] * 7 + ["flat"] * 6 + ["ok"] * 36
        bad12 = ["failed"] * 6 + ["flat"] * 6 + ["ok"] * 37
        report = stability_filter({"a": bad13, "b": bad12})
        assert report.dropped == ("a",)
        assert report.kept == ("b",)
        assert report.fractions["a"] == pytest.approx(13 / 49)
        assert report.fractions["b"] == pytest.approx(12 / 49)

    def test_all_ok_kept(self):
        report = stability_filter({"m": ["ok"] * 10})
        assert report.kept == ("m",)
        assert report.to_dict()["threshold"] == 0.25

    def test_empty_statuses_rejected(self):
        with pytest.raises(ValueError):
            stability_filter({"m": []})


class TestRankModels:
    def test_average_tie_ranks(self):
        # [DERIVED] row (0.3, 0.1, 0.3, nan): ranks (2.5, 1, 2.5, nan)
        mae = np.array([[0.3, 0.1, 0.3, np.nan], [0.2, 0.2, 0.2, 0.2]])
        ranks = rank_models(mae)
        assert ranks[0, 0] == 2.5
        assert ranks[0, 1] == 1.0
        assert ranks[0, 2] == 2.5
        assert np.isnan(ranks[0, 3])
        assert np.all(ranks[1] == 2.5)

    def test_all_nan_window_stays_nan(self):
        ranks = rank_models(np.array([[np.nan, np.nan]]))
        assert np.isnan(ranks).all()

    def test_requires_matrix(self):
        with pytest.raises(ValueError):
            rank_models(np.array([1.0, 2.0]))


class TestRmcb:
    def test_point_estimates_are_mean_ranks(self):
        rng = np.random.default_rng(0)
        ranks = np.array([rng.permutation(4) + 1.0 for _ in range(30)])
        res = rmcb(ranks, ["a", "b", "c", "d"])
        assert np.allclose(res.mean_ranks, ranks.mean(axis=0), atol=1e-12)

    def test_halfwidth_formula_balanced(self):
        rng = np.random.default_rng(1)
        ranks = np.array([rng.permutation(5) + 1.0 for _ in range(40)])
        res = rmcb(ranks, list("abcde"))
        resid = ranks - ranks.mean(axis=0)
        dof = 200 - 5
        s = np.sqrt((resid**2).sum() / dof)
        hw = stats.t.ppf(0.975, dof) * s / np.sqrt(40)
        assert res.dof == dof
        assert res.pooled_sd == pytest.approx(s, abs=1e-12)
        assert np.allclose(res.halfwidths, hw, atol=1e-12)

    def test_dominant_model_separates(self):
        rng = np.random.default_rng(2)
        rows = []
        for _ in range(49):
            rest = rng.permutation(9) + 2.0
            rows.append(np.concatenate([[1.0], rest]))
        ranks = np.array(rows)
        res = rmcb(ranks, [f"m{i}" for i in range(10)])
        assert res.best_model == "m0"
        assert res.mean_ranks[0] == 1.0
        member = res.in_best_group()
        assert member[0]
        assert not member[1:].any()

    def test_unbalanced_windows_widen_interval(self):
        rng = np.random.default_rng(3)
        ranks = np.array([rng.permutation(3) + 1.0 for _ in range(40)])
        ranks[:20, 2] = np.nan
        res = rmcb(ranks, ["a", "b", "c"])
        assert res.windows_used[2] == 20
        assert res.halfwidths[2] > res.halfwidths[0]

    def test_zero_variance_gives_zero_halfwidth(self):
        ranks = np.tile([1.0, 2.0, 3.0], (10, 1))
        res = rmcb(ranks, ["a", "b", "c"])
        assert res.pooled_sd == 0.0
        assert np.all(res.halfwidths == 0.0)
        member = res.in_best_group()
        assert member.tolist() == [True, False, False]

    def test_quick_coverage_calibration(self):
        # small-scale version of the coverage experiment backing the
        # group-mean interval width choice
        rng = np.random.default_rng(20260817)
        include = 0
        total = 0
        for _ in range(100):
            ranks = np.array([rng.permutation(5) + 1.0 for _ in range(30)])
            res = rmcb(ranks, list("abcde"))
            member = res.in_best_group()
            include += member.sum()
            total += 5
        rate = include / total
        assert 0.88 <= rate <= 1.0

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            rmcb(np.ones((5, 2)), ["a"])
        with pytest.raises(ValueError):
            rmcb(np.array([[1.0, 2.0]]), ["a", "b"], alpha=1.5)
        only_one = np.full((6, 2), np.nan)
        only_one[:, 0] = 1.0
        with pytest.raises(ValueError):
            rmcb(only_one, ["a", "b"])

    def test_report_dict_shape(self):
        rng = np.random.default_rng(4)
        ranks = np.array([rng.permutation(3) + 1.0 for _ in range(25)])
        res = rmcb(ranks, ["a", "b", "c"])
        d = res.to_dict()
        assert set(d) == {
            "alpha",
            "pooled_sd",
            "dof",
            "best_model",
            "best_group",
            "models",
        }
        assert d["best_model"] in d["best_group"]
        row = d["models"]["a"]
        assert row["lo"] == pytest.approx(row["mean_rank"] - row["halfwidth"])


class TestRunComparison:
    def test_runs_in_registry_order_and_deterministic(self):
        design = small_design()
        plan = rolling_windows(design.t_eff, initial_train=18, holdout=6)
        params = {"ridge": {"lam": 1.0}, "lm": {}, "es": {}}
        runs = run_comparison(design, plan, params, master_seed=11)
        assert list(runs) == ["lm", "ridge", "es"]  # registry order
        again = run_comparison(design, plan, params, master_seed=11)
        for mid in runs:
            a = runs[mid].level_mae_by_window()
            b = again[mid].level_mae_by_window()
            assert np.array_equal(a, b, equal_nan=True)

    def test_per_window_records_complete(self):
        design = small_design()
        plan = rolling_windows(design.t_eff, initial_train=18, holdout=6)
        run = run_model(design, plan, "lm", {}, master_seed=0)
        assert len(run.forecasts) == len(plan)
        assert len(run.metrics) == len(plan)
        assert all(m.window == w for w, m in enumerate(run.metrics))
        assert run.statuses.count("ok") == len(plan)

    def test_unknown_model_id_rejected(self):
        design = small_design()
        plan = rolling_windows(design.t_eff, initial_train=18, holdout=6)
        with pytest.raises(KeyError, match="unknown model ids"):
            run_comparison(design, plan, {"nope": {}}, master_seed=0)

    def test_bart_interval_paths_widen(self):
        design = small_design()
        plan = rolling_windows(design.t_eff, initial_train=20, holdout=6)
        run = run_model(
            design,
            plan,
            "bart",
            {"num_trees": 10, "n_draws": 80, "n_burn": 30},
            master_seed=5,
        )
        assert set(run.interval_paths) == set(range(len(plan)))
        lo80, hi80 = run.interval_paths[0][0.80]
        lo95, hi95 = run.interval_paths[0][0.95]
        assert np.all(lo95 <= lo80) and np.all(hi80 <= hi95)
        width = hi95 - lo95
        assert width[-1] > width[0]  # integrated path uncertainty grows

    def test_plain_models_have_no_interval_paths(self):
        design = small_design()
        plan = rolling_windows(design.t_eff, initial_train=18, holdout=6)
        run = run_model(design, plan, "lm", {}, master_seed=0)
        assert run.interval_paths == {}

    def test_future_target_corruption_leaves_forecasts_unchanged(self):
        design = small_design()
        plan = rolling_windows(design.t_eff, initial_train=18, holdout=6)
        cut = plan.windows[0][0]  # corrupt strictly after the first train end
        y2 = design.y.copy()
        yl2 = design.y_level.copy()
        y2[cut:] += 9.9
        yl2[cut:] -= 3.3
        corrupted = dataclasses.replace(design, y=y2, y_level=yl2)
        fc_a = forecast_window(LinearRegressor(), design, cut, 6)
        fc_b = forecast_window(LinearRegressor(), corrupted, cut, 6)
        assert np.array_equal(fc_a.diff_path, fc_b.diff_path)
        assert np.array_equal(fc_a.level_path, fc_b.level_path)
