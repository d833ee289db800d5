"""Artifact emission: CSV/JSON result files and the plain-text summary.

Every CSV carries a header row and a trailing `# config_hash=...` comment
line; every JSON document embeds the same hash.  Floats are rendered with
repr, the shortest round-trip form, so identical runs produce identical
bytes and loaded artifacts reproduce the original float64 values exactly.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .design import CvPlan, DesignMatrix
from .evaluation import INTERVAL_LEVELS, ModelRun, window_metrics
from .forecasting import WindowForecast
from .frame import fmt_float, write_csv
from .runner import PipelineState

FORECAST_COLUMNS = (
    "model",
    "window",
    "h",
    "point",
    "lo80",
    "hi80",
    "lo95",
    "hi95",
    "status",
)
METRIC_COLUMNS = (
    "model",
    "window",
    "mae",
    "rmse",
    "mape",
    "mase",
    "mae_diff",
    "overfit",
    "status",
)


def _cell(value) -> str:
    """Render one CSV cell: floats via repr, NaN/None empty, bools as 0/1."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_float(value) if np.isfinite(value) else ""
    return str(value)


def _json_ready(value):
    """Recursively convert to JSON-safe builtins; non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    return value


def _write_json(payload: dict, path, config_hash: str) -> None:
    doc = dict(_json_ready(payload))
    doc["config_hash"] = config_hash
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_rows(path, header, rows, config_hash: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        fh.write(f"# config_hash={config_hash}\n")


def write_data_artifacts(state: PipelineState, out_dir: str) -> list[str]:
    h = state.config.config_hash()
    written = []
    path = os.path.join(out_dir, "data.csv")
    write_csv(state.raw_frame, path, metadata=f"config_hash={h}")
    written.append(path)
    if state.truth is not None:
        path = os.path.join(out_dir, "ground_truth.json")
        _write_json(dict(state.truth), path, h)
        written.append(path)
    return written


def write_stationarity(state: PipelineState, out_dir: str) -> str:
    path = os.path.join(out_dir, "stationarity.json")
    _write_json(dict(state.stationarity), path, state.config.config_hash())
    return path


def write_tuning(state: PipelineState, out_dir: str) -> str:
    # from_cache is deliberately not emitted: artifacts must not depend on
    # whether the tuning cache was warm.
    payload = {
        "models": {
            model_id: result.to_dict() for model_id, result in state.tuning.items()
        }
    }
    path = os.path.join(out_dir, "tuning.json")
    _write_json(payload, path, state.config.config_hash())
    return path


def forecast_rows(runs: dict):
    for model_id, run in runs.items():
        for w_idx, fc in enumerate(run.forecasts):
            intervals = run.interval_paths.get(w_idx, {})
            band80 = intervals.get(0.80)
            band95 = intervals.get(0.95)
            for step in range(fc.horizon):
                point = None if fc.level_path is None else fc.level_path[step]
                yield (
                    model_id,
                    w_idx,
                    step + 1,
                    point,
                    band80[0][step] if band80 else None,
                    band80[1][step] if band80 else None,
                    band95[0][step] if band95 else None,
                    band95[1][step] if band95 else None,
                    fc.status,
                )


def write_forecasts(state: PipelineState, out_dir: str) -> str:
    path = os.path.join(out_dir, "forecasts.csv")
    _write_rows(
        path, FORECAST_COLUMNS, forecast_rows(state.runs), state.config.config_hash()
    )
    return path


def write_metrics(state: PipelineState, out_dir: str) -> str:
    rows = []
    for run in state.runs.values():
        for m in run.metrics:
            r = m.to_row()
            rows.append([r[c] for c in METRIC_COLUMNS])
    path = os.path.join(out_dir, "metrics.csv")
    _write_rows(path, METRIC_COLUMNS, rows, state.config.config_hash())
    return path


def ranking_payload(state: PipelineState) -> dict:
    payload = {
        "stability": state.stability.to_dict() if state.stability else None,
        "note": state.ranking_note,
        "rmcb": state.rmcb_result.to_dict() if state.rmcb_result else None,
        "mean_mae": {
            model_id: _mean_finite(run.level_mae_by_window())
            for model_id, run in state.runs.items()
        },
    }
    if state.rank_matrix is not None:
        payload["per_window_ranks"] = {
            model_id: list(state.rank_matrix[:, j])
            for j, model_id in enumerate(state.kept)
        }
    return payload


def _mean_finite(values: np.ndarray):
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else None


def write_ranking(state: PipelineState, out_dir: str) -> str:
    path = os.path.join(out_dir, "ranking.json")
    _write_json(ranking_payload(state), path, state.config.config_hash())
    return path


def write_combinations(state: PipelineState, out_dir: str) -> str:
    payload = {
        "scenarios": {
            name: scenario.to_dict() for name, scenario in state.scenarios.items()
        },
        "reference_tables": state.scenario_tables,
    }
    path = os.path.join(out_dir, "combinations.json")
    _write_json(payload, path, state.config.config_hash())
    return path


def _fmt(value, width=10, digits=4) -> str:
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return "-".rjust(width)
    if isinstance(value, float):
        return f"{value:.{digits}f}".rjust(width)
    return str(value).rjust(width)


def summary_lines(state: PipelineState) -> list[str]:
    lines = []
    h = state.config.config_hash()
    lines.append("satellite model benchmark summary")
    lines.append(f"config_hash={h} seed={state.config.seed}")
    if state.comparison_plan is not None:
        lines.append(
            f"windows: comparison={len(state.comparison_plan)} "
            f"tuning={len(state.tuning_plan) if state.tuning_plan else 0} "
            f"design_rows={state.design.t_eff} "
            f"design_cols={state.design.X.shape[1]}"
        )
    lines.append("")
    if state.runs:
        lines.append("single models (accuracy on transformed levels)")
        header = (
            f"{'model':<10}{'mean_mae':>10}{'mean_rank':>11}{'halfwidth':>11}"
            f"{'best_group':>12}{'status':>9}"
        )
        lines.append(header)
        rmcb_res = state.rmcb_result
        member = rmcb_res.in_best_group() if rmcb_res else None
        for model_id, run in state.runs.items():
            mean_mae = _mean_finite(run.level_mae_by_window())
            rank = width = group = None
            if rmcb_res and model_id in rmcb_res.model_ids:
                j = rmcb_res.model_ids.index(model_id)
                rank = float(rmcb_res.mean_ranks[j])
                width = float(rmcb_res.halfwidths[j])
                group = "yes" if member[j] else "no"
            status = "kept" if model_id in state.kept else "dropped"
            lines.append(
                f"{model_id:<10}"
                + _fmt(mean_mae)
                + _fmt(rank, 11)
                + _fmt(width, 11)
                + f"{(group or '-'):>12}"
                + f"{status:>9}"
            )
        if state.stability and state.stability.dropped:
            drops = ", ".join(
                f"{m} ({state.stability.fractions[m]:.2f} unstable)"
                for m in state.stability.dropped
            )
            lines.append(f"dropped by stability rule: {drops}")
        if state.ranking_note:
            lines.append(f"note: {state.ranking_note}")
        lines.append("")
    if state.scenarios:
        lines.append(
            "combinations (ratios are reference/method; above 1 favors the method)"
        )
        for name, scenario in state.scenarios.items():
            members = ", ".join(scenario.members) if scenario.members else "-"
            lines.append(f"scenario={name} members=[{members}]")
            for warning in scenario.warnings:
                lines.append(f"  warning: {warning}")
            if scenario.skipped_methods:
                lines.append(
                    f"  skipped methods: {', '.join(scenario.skipped_methods)}"
                )
            table = state.scenario_tables.get(name, [])
            if table:
                lines.append(
                    f"  {'method':<8}{'windows':>8}{'mean_mae':>10}"
                    f"{'mae_ratio':>11}{'mean_rank':>11}{'rank_ratio':>12}"
                )
                for row in table:
                    lines.append(
                        f"  {row['method']:<8}"
                        + f"{row['n_windows']:>8}"
                        + _fmt(row["mean_mae"])
                        + _fmt(row["mae_ratio_vs_reference"], 11)
                        + _fmt(row["mean_rank"], 11)
                        + _fmt(row["rank_ratio_vs_reference"], 12)
                    )
            lines.append("")
    return lines


def write_summary(state: PipelineState, out_dir: str) -> str:
    path = os.path.join(out_dir, "summary.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary_lines(state)))
        fh.write("\n")
    return path


def write_plot_data(state: PipelineState, out_dir: str) -> list[str]:
    """Plot-ready CSVs: MAE evolution, rank intervals, forecast bands."""
    h = state.config.config_hash()
    written = []

    path = os.path.join(out_dir, "plot_mae_evolution.csv")
    kept = list(state.kept)
    n_windows = len(state.comparison_plan)
    rows = []
    mae_by_model = {m: state.runs[m].level_mae_by_window() for m in kept}
    for w in range(n_windows):
        rows.append([w] + [mae_by_model[m][w] for m in kept])
    _write_rows(path, ["window"] + kept, rows, h)
    written.append(path)

    path = os.path.join(out_dir, "plot_rank_intervals.csv")
    rows = []
    if state.rmcb_result is not None:
        res = state.rmcb_result
        member = res.in_best_group()
        for j, model_id in enumerate(res.model_ids):
            rows.append(
                [
                    model_id,
                    res.mean_ranks[j],
                    res.mean_ranks[j] - res.halfwidths[j],
                    res.mean_ranks[j] + res.halfwidths[j],
                    bool(member[j]),
                    int(res.windows_used[j]),
                ]
            )
    _write_rows(
        path,
        ["model", "mean_rank", "lo", "hi", "in_best_group", "windows_used"],
        rows,
        h,
    )
    written.append(path)

    path = os.path.join(out_dir, "plot_forecast_bands.csv")
    rows = []
    offset = len(state.levels_frame.index) - state.design.t_eff
    for model_id, run in state.runs.items():
        if not run.interval_paths:
            continue
        for w_idx in state.config.plot_windows:
            if w_idx >= len(run.forecasts):
                continue
            fc = run.forecasts[w_idx]
            intervals = run.interval_paths.get(w_idx)
            if intervals is None or fc.level_path is None:
                continue
            band80, band95 = intervals.get(0.80), intervals.get(0.95)
            for step in range(fc.horizon):
                row_index = fc.train_end + step
                rows.append(
                    [
                        model_id,
                        w_idx,
                        step + 1,
                        state.levels_frame.index[offset + row_index],
                        state.design.y_level[row_index],
                        fc.level_path[step],
                        band80[0][step] if band80 else None,
                        band80[1][step] if band80 else None,
                        band95[0][step] if band95 else None,
                        band95[1][step] if band95 else None,
                    ]
                )
    _write_rows(
        path,
        [
            "model",
            "window",
            "h",
            "period",
            "actual",
            "point",
            "lo80",
            "hi80",
            "lo95",
            "hi95",
        ],
        rows,
        h,
    )
    written.append(path)
    return written


def load_runs(path, design: DesignMatrix, plan: CvPlan) -> dict:
    """Rebuild ModelRun objects from a previously written forecasts.csv.

    Point forecasts round-trip exactly (repr rendering), so metrics
    recomputed here match the original run; statuses are taken verbatim.
    """
    per_model: dict[str, dict[int, dict]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FORECAST_COLUMNS:
            raise ValueError(f"unexpected forecasts.csv header: {header}")
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            model_id, window, step = row[0], int(row[1]), int(row[2])
            rec = per_model.setdefault(model_id, {}).setdefault(
                window, {"points": {}, "bands": {}, "status": row[8]}
            )
            rec["status"] = row[8]
            if row[3]:
                rec["points"][step] = float(row[3])
            if row[4]:
                rec["bands"].setdefault(0.80, {})[step] = (
                    float(row[4]),
                    float(row[5]),
                )
            if row[6]:
                rec["bands"].setdefault(0.95, {})[step] = (
                    float(row[6]),
                    float(row[7]),
                )
    runs: dict[str, ModelRun] = {}
    for model_id, windows in per_model.items():
        run = ModelRun(model_id=model_id, params={})
        for w_idx, (train_end, horizon) in enumerate(plan.windows):
            rec = windows.get(w_idx)
            if rec is None:
                raise ValueError(f"{model_id}: window {w_idx} missing from {path}")
            if rec["status"] == "failed" or not rec["points"]:
                fc = WindowForecast(
                    train_end=train_end,
                    horizon=horizon,
                    status="failed",
                    diff_path=None,
                    level_path=None,
                )
            else:
                levels = np.array(
                    [rec["points"][s] for s in range(1, horizon + 1)]
                )
                anchor = design.level_anchor(train_end)
                diffs = np.diff(np.concatenate([[anchor], levels]))
                fc = WindowForecast(
                    train_end=train_end,
                    horizon=horizon,
                    status=rec["status"],
                    diff_path=diffs,
                    level_path=levels,
                )
            run.forecasts.append(fc)
            run.metrics.append(window_metrics(model_id, w_idx, fc, design))
            if rec["bands"]:
                out = {}
                for level, steps in rec["bands"].items():
                    lo = np.array([steps[s][0] for s in range(1, horizon + 1)])
                    hi = np.array([steps[s][1] for s in range(1, horizon + 1)])
                    out[level] = (lo, hi)
                run.interval_paths[w_idx] = out
        runs[model_id] = run
    return runs


def emit_stage_artifacts(state: PipelineState, out_dir: str, stage: str) -> list[str]:
    """Write the artifacts a given CLI verb is responsible for."""
    written: list[str] = []
    if stage in ("generate", "run"):
        written.extend(write_data_artifacts(state, out_dir))
    if stage in ("tune", "run"):
        written.append(write_tuning(state, out_dir))
    if stage in ("compare", "run"):
        written.append(write_stationarity(state, out_dir))
        written.append(write_forecasts(state, out_dir))
        written.append(write_metrics(state, out_dir))
        written.append(write_ranking(state, out_dir))
    if stage in ("combine", "run"):
        written.append(write_combinations(state, out_dir))
    if stage in ("report", "run"):
        written.append(write_summary(state, out_dir))
        written.extend(write_plot_data(state, out_dir))
    return written
