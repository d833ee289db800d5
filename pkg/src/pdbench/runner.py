"""Pipeline orchestration: data, transforms, tuning, comparison, ranking.

Stages are plain functions over a PipelineState so the CLI verbs can run
any prefix of the pipeline.  With jobs > 1 the tuning stage fans out per
model and the comparison stage per (model, window) task onto a process
pool; results are reduced in a fixed order, so worker count never
changes the output.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .combination import ScenarioResult, evaluate_scenario, select_members
from .config import RunConfig
from .design import CvPlan, DesignMatrix, build_design, rolling_windows
from .evaluation import (
    ModelRun,
    RmcbResult,
    StabilityReport,
    evaluate_model_window,
    rank_models,
    rmcb,
    run_model,
    stability_filter,
    window_metrics,
)
from .frame import DataError, TimeSeriesFrame, ingest_csv
from .models import MODEL_ORDER, MODEL_REGISTRY
from .stationarity import stationarity_report
from .synthetic import SyntheticSpec, generate_synthetic
from .tuning import TuningResult, tune


@dataclass
class PipelineState:
    """Everything produced by the pipeline stages, in dependency order."""

    config: RunConfig
    raw_frame: TimeSeriesFrame | None = None
    truth: dict | None = None
    levels_frame: TimeSeriesFrame | None = None
    stationarity: dict | None = None
    design: DesignMatrix | None = None
    tuning_plan: CvPlan | None = None
    comparison_plan: CvPlan | None = None
    tuning: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)
    stability: StabilityReport | None = None
    kept: tuple = ()
    rank_matrix: np.ndarray | None = None
    rmcb_result: RmcbResult | None = None
    ranking_note: str = ""
    scenarios: dict = field(default_factory=dict)
    scenario_tables: dict = field(default_factory=dict)


def prepare_frame(config: RunConfig):
    """Stage 1: obtain the raw quarterly panel."""
    if config.data_source == "csv":
        return ingest_csv(config.data_path), None
    overrides = dict(config.synthetic)
    overrides.setdefault("seed", config.seed)
    try:
        spec = SyntheticSpec(**overrides)
        frame, truth = generate_synthetic(spec)
    except ValueError as exc:
        raise DataError(f"synthetic generation failed: {exc}")
    return frame, truth


def transform_frame(config: RunConfig, raw: TimeSeriesFrame) -> TimeSeriesFrame:
    """Stage 2: logit on the target, then seasonal adjustment."""
    frame = raw
    if config.logit_target:
        frame = frame.logit("PD")
    if config.seasonal_adjust:
        adjust = [c for c in frame.columns if c not in config.skip_seasonal]
        if adjust:
            frame = frame.seasonal_adjust(adjust, period=config.seasonal_period)
    return frame


def build_pipeline_design(config: RunConfig, levels: TimeSeriesFrame) -> DesignMatrix:
    return build_design(levels, n_lags=config.n_lags)


def make_plans(config: RunConfig, design: DesignMatrix):
    tuning_plan = rolling_windows(
        design.t_eff,
        config.tuning_plan.initial_train,
        config.tuning_plan.holdout,
    )
    comparison_plan = rolling_windows(
        design.t_eff,
        config.comparison_plan.initial_train,
        config.comparison_plan.holdout,
    )
    return tuning_plan, comparison_plan


def _ordered_models(config: RunConfig):
    return [m for m in MODEL_ORDER if m in config.models]


def _tune_task(args):
    design, model_id, plan, grid, master_seed, model_idx, cache_dir = args
    result = tune(
        design,
        model_id,
        plan,
        grid=grid,
        master_seed=master_seed,
        model_idx=model_idx,
        cache_dir=cache_dir,
    )
    return model_id, result


def resolve_cache_dir(config: RunConfig):
    if not config.use_cache:
        return None
    if config.cache_dir is not None:
        return config.cache_dir
    import os

    return os.path.join(config.output_dir, "cache")


def tune_all(config: RunConfig, design: DesignMatrix, plan: CvPlan) -> dict:
    """Stage 3: grid-tune every requested model on the tuning plan."""
    cache_dir = resolve_cache_dir(config)
    tasks = []
    for model_id in _ordered_models(config):
        tasks.append(
            (
                design,
                model_id,
                plan,
                config.grids.get(model_id),
                config.seed,
                MODEL_ORDER.index(model_id),
                cache_dir,
            )
        )
    results: dict[str, TuningResult] = {}
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for model_id, result in pool.map(_tune_task, tasks):
                results[model_id] = result
    else:
        for task in tasks:
            model_id, result = _tune_task(task)
            results[model_id] = result
    return results


def _compare_task(args):
    design, model_id, model_idx, params, w_idx, train_end, horizon, seed = args
    fc, metrics, intervals = evaluate_model_window(
        design, model_id, model_idx, params, w_idx, train_end, horizon, seed
    )
    return model_id, w_idx, fc, metrics, intervals


def compare_all(
    config: RunConfig, design: DesignMatrix, plan: CvPlan, tuning: dict
) -> dict:
    """Stage 4: refit tuned models over the comparison windows."""
    models = [m for m in _ordered_models(config) if m in tuning]
    if config.jobs <= 1:
        runs = {}
        for model_id in models:
            runs[model_id] = run_model(
                design,
                plan,
                model_id,
                tuning[model_id].best_params,
                master_seed=config.seed,
                model_idx=MODEL_ORDER.index(model_id),
            )
        return runs
    tasks = []
    for model_id in models:
        params = tuning[model_id].best_params
        model_idx = MODEL_ORDER.index(model_id)
        for w_idx, (train_end, horizon) in enumerate(plan.windows):
            tasks.append(
                (design, model_id, model_idx, params, w_idx, train_end, horizon, config.seed)
            )
    runs = {
        m: ModelRun(model_id=m, params=dict(tuning[m].best_params)) for m in models
    }
    collected: dict[str, dict[int, tuple]] = {m: {} for m in models}
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        for model_id, w_idx, fc, metrics, intervals in pool.map(
            _compare_task, tasks, chunksize=4
        ):
            collected[model_id][w_idx] = (fc, metrics, intervals)
    for model_id in models:
        run = runs[model_id]
        for w_idx in range(len(plan.windows)):
            fc, metrics, intervals = collected[model_id][w_idx]
            run.forecasts.append(fc)
            run.metrics.append(metrics)
            if intervals is not None:
                run.interval_paths[w_idx] = intervals
    return runs


def rank_stage(config: RunConfig, runs: dict):
    """Stage 5: stability screen, per-window ranks, best-group intervals."""
    statuses = {m: run.statuses for m, run in runs.items()}
    stability = stability_filter(statuses)
    kept = tuple(m for m in runs if m in stability.kept)
    rank_matrix = None
    rmcb_result = None
    note = ""
    if len(kept) >= 2:
        mae_matrix = np.column_stack(
            [runs[m].level_mae_by_window() for m in kept]
        )
        rank_matrix = rank_models(mae_matrix)
        try:
            rmcb_result = rmcb(rank_matrix, kept, alpha=config.rmcb_alpha)
        except ValueError as exc:
            note = f"rank interval test unavailable: {exc}"
    else:
        note = "rank interval test needs at least two surviving models"
    return stability, kept, rank_matrix, rmcb_result, note


def model_categories(model_ids) -> dict:
    return {m: MODEL_REGISTRY[m].category for m in model_ids}


def combine_stage(
    config: RunConfig,
    runs: dict,
    design: DesignMatrix,
    plan: CvPlan,
    kept,
    rmcb_result,
) -> dict:
    """Stage 6: forecast combinations per scenario."""
    scenarios: dict[str, ScenarioResult] = {}
    categories = model_categories(runs.keys())
    mean_mae = {}
    for model_id, run in runs.items():
        mae = run.level_mae_by_window()
        finite = mae[np.isfinite(mae)]
        mean_mae[model_id] = float(finite.mean()) if finite.size else float("nan")
    for scenario in config.combination_scenarios:
        warnings: list[str] = []
        if scenario in ("top8", "top_group") and rmcb_result is None:
            scenarios[scenario] = ScenarioResult(
                scenario=scenario,
                members=(),
                methods={},
                warnings=(f"scenario {scenario!r} skipped: no ranking available",),
            )
            continue
        members, select_warnings = select_members(
            scenario, kept, rmcb_result, categories, mean_mae
        )
        warnings.extend(select_warnings)
        if len(members) < 2:
            scenarios[scenario] = ScenarioResult(
                scenario=scenario,
                members=tuple(members),
                methods={},
                warnings=tuple(
                    warnings + ["skipped: fewer than two member models"]
                ),
            )
            continue
        scenarios[scenario] = evaluate_scenario(
            scenario,
            runs,
            design,
            plan,
            members,
            warnings=tuple(warnings),
            methods=config.combination_methods,
        )
    return scenarios


def scenario_summary_tables(
    scenarios: dict, runs: dict, kept, reference: str = "bart"
) -> dict:
    """Per-method accuracy and rank comparisons against a reference model.

    For each combination method the surviving single models plus that
    method are ranked window by window over the windows where the
    combination exists; ratios are reference / method, so values above
    one mean the combination beats the reference single model.
    """
    tables: dict[str, list] = {}
    ref_mae = (
        runs[reference].level_mae_by_window() if reference in runs else None
    )
    for scenario_name, scenario in scenarios.items():
        rows = []
        for method_name, method in scenario.methods.items():
            mask = method.available
            row = {
                "method": method_name,
                "n_windows": int(mask.sum()),
                "mean_mae": method.mean_mae,
                "mae_ratio_vs_reference": None,
                "mean_rank": None,
                "rank_ratio_vs_reference": None,
            }
            if mask.any() and len(kept) >= 1:
                member_mae = np.column_stack(
                    [runs[m].level_mae_by_window() for m in kept]
                )
                extended = np.column_stack(
                    [member_mae[mask], method.window_mae[mask]]
                )
                ranks = rank_models(extended)
                mean_ranks = np.nanmean(ranks, axis=0)
                row["mean_rank"] = float(mean_ranks[-1])
                if reference in kept:
                    ref_idx = list(kept).index(reference)
                    ref_rank = float(mean_ranks[ref_idx])
                    if row["mean_rank"] > 0:
                        row["rank_ratio_vs_reference"] = ref_rank / row["mean_rank"]
                    ref_window_mae = ref_mae[mask]
                    good = np.isfinite(ref_window_mae)
                    if good.any() and np.isfinite(method.window_mae[mask][good]).all():
                        ref_mean = float(np.mean(ref_window_mae[good]))
                        method_mean = float(np.mean(method.window_mae[mask][good]))
                        if method_mean > 0:
                            row["mae_ratio_vs_reference"] = ref_mean / method_mean
            rows.append(row)
        tables[scenario_name] = rows
    return tables


def run_pipeline(config: RunConfig, *, through: str = "combine") -> PipelineState:
    """Execute pipeline stages up to and including `through`.

    Stage order: data, transform, design, tune, compare, combine.
    """
    order = ("data", "transform", "design", "tune", "compare", "combine")
    if through not in order:
        raise ValueError(f"unknown stage {through!r}")
    last = order.index(through)
    state = PipelineState(config=config)

    state.raw_frame, state.truth = prepare_frame(config)
    if last < 1:
        return state

    state.levels_frame = transform_frame(config, state.raw_frame)
    if last < 2:
        return state

    state.design = build_pipeline_design(config, state.levels_frame)
    state.tuning_plan, state.comparison_plan = make_plans(config, state.design)
    state.stationarity = {
        "levels": [c.to_dict() for c in stationarity_report(state.levels_frame)],
        "differences": [
            c.to_dict() for c in stationarity_report(state.levels_frame.difference())
        ],
    }
    if last < 3:
        return state

    state.tuning = tune_all(config, state.design, state.tuning_plan)
    if last < 4:
        return state

    state.runs = compare_all(
        config, state.design, state.comparison_plan, state.tuning
    )
    (
        state.stability,
        state.kept,
        state.rank_matrix,
        state.rmcb_result,
        state.ranking_note,
    ) = rank_stage(config, state.runs)
    if last < 5:
        return state

    state.scenarios = combine_stage(
        config,
        state.runs,
        state.design,
        state.comparison_plan,
        state.kept,
        state.rmcb_result,
    )
    state.scenario_tables = scenario_summary_tables(
        state.scenarios, state.runs, state.kept
    )
    return state
