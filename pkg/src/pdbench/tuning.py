"""Hyperparameter selection by rolling-origin grid search.

Every grid point is scored by its mean holdout-level MAE across the
tuning windows.  A window where the fit fails contributes +inf, so any
failure disqualifies a point from outranking a clean one; points failing
on more than a quarter of the windows are excluded outright.  Ties break
toward the most parsimonious grid point, then lexicographically, keeping
selection deterministic.  Results can be cached on disk keyed by model,
grid, sampling plan, and the exact design-matrix bytes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design import CvPlan, DesignMatrix
from .forecasting import forecast_window, window_level_mae
from .models import ModelSpec, get_spec
from .seeding import STAGE_TUNE, derive_seed

MAX_FAILURE_FRACTION = 0.25


class TuningError(RuntimeError):
    """No grid point produced enough usable windows."""


@dataclass(frozen=True)
class GridPointResult:
    """Scorecard for one hyperparameter combination."""

    params: dict
    window_mae: tuple
    statuses: tuple
    excluded: bool

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.window_mae))

    @property
    def n_failed(self) -> int:
        return sum(s == "failed" for s in self.statuses)

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "window_mae": list(self.window_mae),
            "statuses": list(self.statuses),
            "excluded": self.excluded,
            "mean_mae": self.mean_mae,
        }


@dataclass(frozen=True)
class TuningResult:
    """Winning parameters plus the full grid scorecard."""

    model_id: str
    best_params: dict
    best_mean_mae: float
    table: tuple = field(default_factory=tuple)
    from_cache: bool = False

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "best_params": self.best_params,
            "best_mean_mae": self.best_mean_mae,
            "table": [row.to_dict() for row in self.table],
        }


def _design_digest(design: DesignMatrix, plan: CvPlan, master_seed: int) -> str:
    h = hashlib.sha256()
    for arr in (design.y, design.X, design.y_level):
        h.update(arr.tobytes())
    h.update(repr(design.column_names).encode())
    h.update(repr((design.anchor_level, design.n_base, design.n_lags)).encode())
    h.update(repr((plan.windows, plan.initial_train, plan.holdout, plan.step)).encode())
    h.update(repr(int(master_seed)).encode())
    return h.hexdigest()


def _grid_digest(grid: list[dict]) -> str:
    canon = repr([sorted(pt.items()) for pt in grid])
    return hashlib.sha256(canon.encode()).hexdigest()


def _cache_path(cache_dir, model_id, design_digest, grid_digest) -> Path:
    key = hashlib.sha256(
        f"{model_id}:{design_digest}:{grid_digest}".encode()
    ).hexdigest()[:32]
    return Path(cache_dir) / f"tune_{model_id}_{key}.json"


def _json_ready(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if isinstance(value, (np.integer,)):
            value = int(value)
        elif isinstance(value, (np.floating,)):
            value = float(value)
        out[key] = value
    return out


def evaluate_grid_point(
    design: DesignMatrix,
    plan: CvPlan,
    spec: ModelSpec,
    params: dict,
    *,
    master_seed: int,
    model_idx: int,
    grid_idx: int,
) -> GridPointResult:
    """Score one hyperparameter combination over all tuning windows."""
    maes = []
    statuses = []
    for w_idx, (train_end, horizon) in enumerate(plan.windows):
        seed = derive_seed(master_seed, STAGE_TUNE, model_idx, w_idx, grid_idx)
        estimator = spec.make(seed=seed, **params)
        fc = forecast_window(estimator, design, train_end, horizon)
        statuses.append(fc.status)
        maes.append(window_level_mae(fc, design))
    n_failed = sum(s == "failed" for s in statuses)
    excluded = n_failed / len(plan.windows) > MAX_FAILURE_FRACTION
    return GridPointResult(
        params=_json_ready(params),
        window_mae=tuple(maes),
        statuses=tuple(statuses),
        excluded=excluded,
    )


def tune(
    design: DesignMatrix,
    model_id: str,
    plan: CvPlan,
    *,
    grid: list[dict] | None = None,
    master_seed: int = 0,
    model_idx: int | None = None,
    cache_dir: str | Path | None = None,
) -> TuningResult:
    """Pick the best hyperparameters for one model on the tuning segment."""
    spec = get_spec(model_id)
    points = grid if grid is not None else spec.grid()
    if not points:
        raise TuningError(f"{model_id}: empty hyperparameter grid")
    if model_idx is None:
        model_idx = _default_model_index(model_id)

    cache_file = None
    if cache_dir is not None:
        cache_file = _cache_path(
            cache_dir,
            model_id,
            _design_digest(design, plan, master_seed),
            _grid_digest(points),
        )
        if cache_file.exists():
            return _load_cached(model_id, cache_file)

    table = [
        evaluate_grid_point(
            design,
            plan,
            spec,
            params,
            master_seed=master_seed,
            model_idx=model_idx,
            grid_idx=grid_idx,
        )
        for grid_idx, params in enumerate(points)
    ]
    eligible = [row for row in table if not row.excluded]
    if not eligible:
        raise TuningError(
            f"{model_id}: every grid point failed on more than "
            f"{MAX_FAILURE_FRACTION:.0%} of the tuning windows"
        )
    best = min(
        eligible,
        key=lambda row: (
            row.mean_mae,
            spec.complexity_key(row.params),
            repr(sorted(row.params.items())),
        ),
    )
    result = TuningResult(
        model_id=model_id,
        best_params=best.params,
        best_mean_mae=best.mean_mae,
        table=tuple(table),
    )
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(json.dumps(result.to_dict(), indent=1))
    return result


def _load_cached(model_id: str, cache_file: Path) -> TuningResult:
    payload = json.loads(cache_file.read_text())
    table = tuple(
        GridPointResult(
            params=row["params"],
            window_mae=tuple(float(v) for v in row["window_mae"]),
            statuses=tuple(row["statuses"]),
            excluded=row["excluded"],
        )
        for row in payload["table"]
    )
    return TuningResult(
        model_id=model_id,
        best_params=payload["best_params"],
        best_mean_mae=float(payload["best_mean_mae"]),
        table=table,
        from_cache=True,
    )


def _default_model_index(model_id: str) -> int:
    from .models import MODEL_ORDER

    return MODEL_ORDER.index(model_id)
