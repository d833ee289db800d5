"""End-to-end tests of the CLI verbs, artifact contracts, and exit codes.

These run the real pipeline on a reduced synthetic panel with fast
models so the whole file stays in the seconds range.
"""
import csv
import dataclasses
import json
import os

import numpy as np
import pytest
from scipy import stats

from pdbench.cli import main
from pdbench.config import parse_config
from pdbench.report import FORECAST_COLUMNS, METRIC_COLUMNS, load_runs
from pdbench.runner import compare_all, run_pipeline, tune_all

MINI_YAML = """
seed: 20240101
data:
  source: synthetic
  synthetic:
    n_quarters: 40
plans:
  tuning: {initial_train: 20, holdout: 6}
  comparison: {initial_train: 4, holdout: 6}
models:
  include: [lm, ridge, cart]
report:
  plot_windows: [0, 10, 20]
"""


def write_mini_config(tmp_path, text=MINI_YAML, name="mini.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv_rows(path):
    rows = []
    trailer = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                trailer = line
            elif line:
                rows.append(line.split(","))
    return rows[0], rows[1:], trailer


@pytest.fixture(scope="module")
def mini_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("mini")
    config_path = write_mini_config(tmp)
    out = str(tmp / "out")
    code = main(["run", "--config", config_path, "--out", out])
    assert code == 0
    return config_path, out


ARTIFACTS = (
    "data.csv",
    "ground_truth.json",
    "tuning.json",
    "stationarity.json",
    "forecasts.csv",
    "metrics.csv",
    "ranking.json",
    "combinations.json",
    "summary.txt",
    "plot_mae_evolution.csv",
    "plot_rank_intervals.csv",
    "plot_forecast_bands.csv",
)


def test_run_writes_every_artifact(mini_run):
    _, out = mini_run
    for name in ARTIFACTS:
        assert os.path.exists(os.path.join(out, name)), name


def test_forecasts_csv_contract(mini_run):
    _, out = mini_run
    header, rows, trailer = read_csv_rows(os.path.join(out, "forecasts.csv"))
    assert tuple(header) == FORECAST_COLUMNS
    assert trailer is not None and trailer.startswith("# config_hash=")
    # 3 models x 26 windows x horizon 6
    assert len(rows) == 3 * 26 * 6
    models = {r[0] for r in rows}
    assert models == {"lm", "ridge", "cart"}
    statuses = {r[8] for r in rows}
    assert statuses <= {"ok", "flat", "failed"}


def test_metrics_csv_contract(mini_run):
    _, out = mini_run
    header, rows, trailer = read_csv_rows(os.path.join(out, "metrics.csv"))
    assert tuple(header) == METRIC_COLUMNS
    assert trailer is not None and trailer.startswith("# config_hash=")
    assert len(rows) == 3 * 26
    for row in rows:
        assert row[7] in ("0", "1")


def test_every_csv_carries_the_config_hash(mini_run):
    config_path, out = mini_run
    hashes = set()
    for name in ARTIFACTS:
        if not name.endswith(".csv"):
            continue
        _, _, trailer = read_csv_rows(os.path.join(out, name))
        assert trailer is not None, name
        hashes.add(trailer.split("=", 1)[1])
    assert len(hashes) == 1
    for name in ARTIFACTS:
        if name.endswith(".json"):
            doc = json.loads(open(os.path.join(out, name)).read())
            assert doc["config_hash"] in hashes, name


def test_ranking_json_consistent_with_metrics(mini_run):
    # [TRIVIAL: internal consistency] recompute mean ranks from the
    # emitted per-window MAE values and compare to ranking.json.
    _, out = mini_run
    ranking = json.loads(open(os.path.join(out, "ranking.json")).read())
    _, rows, _ = read_csv_rows(os.path.join(out, "metrics.csv"))
    kept = ranking["stability"]["kept"]
    mae = {m: {} for m in kept}
    for row in rows:
        model, window = row[0], int(row[1])
        if model in mae and row[2]:
            mae[model][window] = float(row[2])
    windows = sorted({int(r[1]) for r in rows})
    recomputed = {m: [] for m in kept}
    for w in windows:
        vals = np.array([mae[m].get(w, np.nan) for m in kept])
        finite = np.isfinite(vals)
        if not finite.any():
            continue
        ranks = np.full(len(kept), np.nan)
        ranks[finite] = stats.rankdata(vals[finite], method="average")
        for j, m in enumerate(kept):
            if finite[j]:
                recomputed[m].append(ranks[j])
    for m in kept:
        expected = float(np.mean(recomputed[m]))
        assert ranking["rmcb"]["models"][m]["mean_rank"] == pytest.approx(
            expected, abs=1e-12
        )


def test_rerun_is_byte_identical(mini_run, tmp_path):
    config_path, out = mini_run
    out2 = str(tmp_path / "again")
    assert main(["run", "--config", config_path, "--out", out2]) == 0
    for name in ARTIFACTS:
        a = open(os.path.join(out, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b, f"{name} differs between identical runs"


def test_worker_count_does_not_change_results(mini_run, tmp_path):
    config_path, out = mini_run
    out2 = str(tmp_path / "jobs2")
    assert main(["run", "--config", config_path, "--out", out2, "--jobs", "2"]) == 0
    for name in ("forecasts.csv", "metrics.csv", "summary.txt", "combinations.json"):
        a = open(os.path.join(out, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        assert a == b, f"{name} differs between jobs=1 and jobs=2"


def test_staged_verbs_match_single_run(mini_run, tmp_path):
    config_path, out = mini_run
    staged = str(tmp_path / "staged")
    for verb in ("generate", "tune", "compare", "combine", "report"):
        assert main([verb, "--config", config_path, "--out", staged]) == 0
    for name in ARTIFACTS:
        a = open(os.path.join(out, name), "rb").read()
        b = open(os.path.join(staged, name), "rb").read()
        assert a == b, f"{name} differs between staged verbs and one-shot run"


def test_models_flag_overrides_include(tmp_path):
    config_path = write_mini_config(tmp_path)
    out = str(tmp_path / "only_lm")
    assert main(["run", "--config", config_path, "--out", out, "--models", "lm"]) == 0
    _, rows, _ = read_csv_rows(os.path.join(out, "forecasts.csv"))
    assert {r[0] for r in rows} == {"lm"}


def test_generate_only_writes_data(tmp_path):
    config_path = write_mini_config(tmp_path)
    out = str(tmp_path / "gen")
    assert main(["generate", "--config", config_path, "--out", out]) == 0
    assert sorted(os.listdir(out)) == ["data.csv", "ground_truth.json"]
    from pdbench.frame import ingest_csv

    frame = ingest_csv(os.path.join(out, "data.csv"))
    assert len(frame.index) == 40


def test_exit_code_2_for_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("models:\n  include: [warp_drive]\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "models.include" in capsys.readouterr().err
    config_path = write_mini_config(tmp_path)
    assert (
        main(
            ["run", "--config", config_path, "--out", str(tmp_path / "o"), "--models", "x"]
        )
        == 2
    )


def test_exit_code_3_for_data_errors(tmp_path, capsys):
    missing = tmp_path / "csv_source.yaml"
    missing.write_text("data:\n  source: csv\n  path: /nonexistent/data.csv\n")
    code = main(["run", "--config", str(missing), "--out", str(tmp_path / "o")])
    assert code == 3
    assert "data error" in capsys.readouterr().err
    infeasible = tmp_path / "short.yaml"
    infeasible.write_text(
        "data:\n  source: synthetic\n  synthetic: {n_quarters: 20}\n"
        "models: {include: [lm]}\n"
    )
    code = main(["run", "--config", str(infeasible), "--out", str(tmp_path / "o")])
    assert code == 3


def test_exit_code_4_for_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("file in the way")
    config_path = write_mini_config(tmp_path)
    code = main(["run", "--config", config_path, "--out", str(blocker / "sub")])
    assert code == 4
    assert "output error" in capsys.readouterr().err


def test_forecasts_round_trip_through_loader(mini_run):
    _, out = mini_run
    config = parse_config(
        {
            "seed": 20240101,
            "data": {"source": "synthetic", "synthetic": {"n_quarters": 40}},
            "plans": {
                "tuning": {"initial_train": 20, "holdout": 6},
                "comparison": {"initial_train": 4, "holdout": 6},
            },
            "models": {"include": ["lm", "ridge", "cart"]},
            "cache": {"enabled": False},
        }
    )
    state = run_pipeline(config, through="compare")
    loaded = load_runs(
        os.path.join(out, "forecasts.csv"), state.design, state.comparison_plan
    )
    assert set(loaded) == set(state.runs)
    for model_id, run in state.runs.items():
        again = loaded[model_id]
        for fc1, fc2 in zip(run.forecasts, again.forecasts):
            assert fc1.status == fc2.status
            if fc1.level_path is None:
                assert fc2.level_path is None
            else:
                assert np.array_equal(fc1.level_path, fc2.level_path)
        mae1 = run.level_mae_by_window()
        mae2 = again.level_mae_by_window()
        assert np.array_equal(mae1, mae2, equal_nan=True)


def test_tuning_cache_reused(tmp_path):
    config = parse_config(
        {
            "seed": 3,
            "data": {"source": "synthetic", "synthetic": {"n_quarters": 40}},
            "plans": {
                "tuning": {"initial_train": 20, "holdout": 6},
                "comparison": {"initial_train": 4, "holdout": 6},
            },
            "models": {"include": ["lm", "ridge"]},
            "cache": {"dir": str(tmp_path / "cache")},
        }
    )
    state = run_pipeline(config, through="design")
    first = tune_all(config, state.design, state.tuning_plan)
    assert all(not r.from_cache for r in first.values())
    second = tune_all(config, state.design, state.tuning_plan)
    assert all(r.from_cache for r in second.values())
    for model_id in first:
        assert first[model_id].best_params == second[model_id].best_params
        assert first[model_id].best_mean_mae == second[model_id].best_mean_mae


def test_holdout_target_corruption_does_not_change_fits():
    # Leakage audit: fitting must never read rows at or beyond the
    # training cutoff, so corrupting the target there cannot move any
    # forecast.  The last comparison window has the largest cutoff, so
    # corruption beyond it must leave every window's forecast unchanged.
    config = parse_config(
        {
            "seed": 8,
            "data": {"source": "synthetic", "synthetic": {"n_quarters": 40}},
            "plans": {
                "tuning": {"initial_train": 20, "holdout": 6},
                "comparison": {"initial_train": 4, "holdout": 6},
            },
            "models": {"include": ["lm", "ridge", "cart"]},
            "cache": {"enabled": False},
        }
    )
    state = run_pipeline(config, through="tune")
    design = state.design
    last_cutoff = design.t_eff - config.comparison_plan.holdout
    y2 = design.y.copy()
    yl2 = design.y_level.copy()
    y2[last_cutoff:] += 1000.0
    yl2[last_cutoff:] -= 1000.0
    corrupted = dataclasses.replace(design, y=y2, y_level=yl2)
    clean_runs = compare_all(config, design, state.comparison_plan, state.tuning)
    dirty_runs = compare_all(config, corrupted, state.comparison_plan, state.tuning)
    for model_id in clean_runs:
        for fc1, fc2 in zip(
            clean_runs[model_id].forecasts, dirty_runs[model_id].forecasts
        ):
            assert fc1.status == fc2.status
            if fc1.diff_path is not None:
                assert np.array_equal(fc1.diff_path, fc2.diff_path)
                assert np.array_equal(fc1.level_path, fc2.level_path)


def test_stationarity_json_structure(mini_run):
    _, out = mini_run
    doc = json.loads(open(os.path.join(out, "stationarity.json")).read())
    assert set(doc) == {"levels", "differences", "config_hash"}
    for section in ("levels", "differences"):
        cols = [entry["column"] for entry in doc[section]]
        assert cols == ["PD", "GDP", "UNE", "INF", "RRE", "EQP", "EXR", "STR", "LTR"]
        for entry in doc[section]:
            assert entry["verdict"] in (
                "stationary",
                "unit_root",
                "ambiguous",
                "degenerate",
            )


def test_plot_band_file_lists_requested_windows(mini_run):
    _, out = mini_run
    header, rows, _ = read_csv_rows(os.path.join(out, "plot_forecast_bands.csv"))
    assert header[:4] == ["model", "window", "h", "period"]
    # no interval-capable model in the mini run, so the file is header-only
    assert rows == []
