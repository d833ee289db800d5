"""Run configuration: YAML parsing, field-level validation, and hashing.

A config file is a single YAML document with nested sections.  Every
field has a default, so the minimal valid config is an empty file; the
fully resolved configuration (defaults filled in) is what gets hashed,
and that hash is stamped on every emitted artifact so outputs can be
traced back to the exact settings that produced them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .models import MODEL_ORDER
from .synthetic import COVARIATE_NAMES

COMBINATION_METHODS = ("avg", "ng", "cls", "sea")
COMBINATION_SCENARIOS = ("all", "top8", "top_group")

EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_OUTPUT_ERROR = 4


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass(frozen=True)
class PlanConfig:
    initial_train: int
    holdout: int


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved pipeline settings."""

    seed: int = 0
    output_dir: str = "out"
    jobs: int = 1
    data_source: str = "synthetic"
    data_path: str | None = None
    synthetic: dict = field(default_factory=dict)
    logit_target: bool = True
    seasonal_adjust: bool = True
    seasonal_period: int = 4
    skip_seasonal: tuple = ()
    n_lags: int = 4
    tuning_plan: PlanConfig = PlanConfig(41, 12)
    comparison_plan: PlanConfig = PlanConfig(4, 12)
    models: tuple = MODEL_ORDER
    grids: dict = field(default_factory=dict)
    rmcb_alpha: float = 0.05
    combination_methods: tuple = COMBINATION_METHODS
    combination_scenarios: tuple = COMBINATION_SCENARIOS
    plot_windows: tuple = (0, 12, 24, 36, 48)
    cache_dir: str | None = None
    use_cache: bool = True

    def to_canonical_dict(self) -> dict:
        return {
            "seed": self.seed,
            "data": {
                "source": self.data_source,
                "path": self.data_path,
                "synthetic": _plain(self.synthetic),
            },
            "transforms": {
                "logit_target": self.logit_target,
                "seasonal_adjust": self.seasonal_adjust,
                "seasonal_period": self.seasonal_period,
                "skip_seasonal": list(self.skip_seasonal),
            },
            "design": {"n_lags": self.n_lags},
            "plans": {
                "tuning": {
                    "initial_train": self.tuning_plan.initial_train,
                    "holdout": self.tuning_plan.holdout,
                },
                "comparison": {
                    "initial_train": self.comparison_plan.initial_train,
                    "holdout": self.comparison_plan.holdout,
                },
            },
            "models": {"include": list(self.models), "grids": _plain(self.grids)},
            "ranking": {"alpha": self.rmcb_alpha},
            "combination": {
                "methods": list(self.combination_methods),
                "scenarios": list(self.combination_scenarios),
            },
            "report": {"plot_windows": list(self.plot_windows)},
        }

    def config_hash(self) -> str:
        payload = json.dumps(
            self.to_canonical_dict(), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _plain(value):
    """Recursively convert to JSON-friendly builtins with sorted dict keys."""
    if isinstance(value, dict):
        return {str(k): _plain(value[k]) for k in sorted(value, key=str)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    raise ConfigError(f"config value {value!r} is not a plain scalar or collection")


def _expect_mapping(node, path: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _expect_int(node, path: str, minimum=None) -> int:
    if isinstance(node, bool) or not isinstance(node, int):
        raise ConfigError(f"{path}: expected an integer, got {node!r}")
    if minimum is not None and node < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {node}")
    return node


def _expect_bool(node, path: str) -> bool:
    if not isinstance(node, bool):
        raise ConfigError(f"{path}: expected true/false, got {node!r}")
    return node


def _expect_str_list(node, path: str, allowed=None) -> tuple:
    if not isinstance(node, (list, tuple)) or not all(
        isinstance(x, str) for x in node
    ):
        raise ConfigError(f"{path}: expected a list of names, got {node!r}")
    if allowed is not None:
        bad = [x for x in node if x not in allowed]
        if bad:
            raise ConfigError(
                f"{path}: unknown entries {bad}; allowed: {sorted(allowed)}"
            )
    return tuple(node)


def _parse_plan(node, path: str, default: PlanConfig) -> PlanConfig:
    section = _expect_mapping(node, path)
    unknown = set(section) - {"initial_train", "holdout"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    initial = _expect_int(
        section.get("initial_train", default.initial_train),
        f"{path}.initial_train",
        minimum=1,
    )
    holdout = _expect_int(
        section.get("holdout", default.holdout), f"{path}.holdout", minimum=1
    )
    return PlanConfig(initial_train=initial, holdout=holdout)


def parse_config(raw: dict | None) -> RunConfig:
    """Validate a parsed YAML document and fill defaults."""
    doc = _expect_mapping(raw, "config")
    known = {
        "seed",
        "output_dir",
        "jobs",
        "data",
        "transforms",
        "design",
        "plans",
        "models",
        "ranking",
        "combination",
        "report",
        "cache",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"config: unknown top-level keys {sorted(unknown)}")

    seed = _expect_int(doc.get("seed", 0), "seed", minimum=0)
    output_dir = doc.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: expected a non-empty path string")
    jobs = _expect_int(doc.get("jobs", 1), "jobs", minimum=1)

    data = _expect_mapping(doc.get("data"), "data")
    unknown = set(data) - {"source", "path", "synthetic"}
    if unknown:
        raise ConfigError(f"data: unknown keys {sorted(unknown)}")
    source = data.get("source", "synthetic")
    if source not in ("synthetic", "csv"):
        raise ConfigError(f"data.source: must be 'synthetic' or 'csv', got {source!r}")
    path = data.get("path")
    if source == "csv":
        if not isinstance(path, str) or not path:
            raise ConfigError("data.path: required when data.source is 'csv'")
    elif path is not None:
        raise ConfigError("data.path: only valid when data.source is 'csv'")
    synthetic = _expect_mapping(data.get("synthetic"), "data.synthetic")
    allowed_synth = {
        "n_quarters",
        "n_covariates",
        "start_year",
        "start_quarter",
        "pd_base",
        "persistence",
        "noise_scale",
        "seed",
    }
    unknown = set(synthetic) - allowed_synth
    if unknown:
        raise ConfigError(f"data.synthetic: unknown keys {sorted(unknown)}")

    transforms = _expect_mapping(doc.get("transforms"), "transforms")
    unknown = set(transforms) - {
        "logit_target",
        "seasonal_adjust",
        "seasonal_period",
        "skip_seasonal",
    }
    if unknown:
        raise ConfigError(f"transforms: unknown keys {sorted(unknown)}")
    logit_target = _expect_bool(transforms.get("logit_target", True), "transforms.logit_target")
    seasonal = _expect_bool(
        transforms.get("seasonal_adjust", True), "transforms.seasonal_adjust"
    )
    period = _expect_int(
        transforms.get("seasonal_period", 4), "transforms.seasonal_period", minimum=2
    )
    skip_seasonal = _expect_str_list(
        transforms.get("skip_seasonal", []),
        "transforms.skip_seasonal",
        allowed=set(COVARIATE_NAMES) | {"PD"},
    )

    design = _expect_mapping(doc.get("design"), "design")
    unknown = set(design) - {"n_lags"}
    if unknown:
        raise ConfigError(f"design: unknown keys {sorted(unknown)}")
    n_lags = _expect_int(design.get("n_lags", 4), "design.n_lags", minimum=1)

    plans = _expect_mapping(doc.get("plans"), "plans")
    unknown = set(plans) - {"tuning", "comparison"}
    if unknown:
        raise ConfigError(f"plans: unknown keys {sorted(unknown)}")
    tuning_plan = _parse_plan(plans.get("tuning"), "plans.tuning", PlanConfig(41, 12))
    comparison_plan = _parse_plan(
        plans.get("comparison"), "plans.comparison", PlanConfig(4, 12)
    )

    models_doc = _expect_mapping(doc.get("models"), "models")
    unknown = set(models_doc) - {"include", "grids"}
    if unknown:
        raise ConfigError(f"models: unknown keys {sorted(unknown)}")
    include = _expect_str_list(
        models_doc.get("include", list(MODEL_ORDER)),
        "models.include",
        allowed=set(MODEL_ORDER),
    )
    if not include:
        raise ConfigError("models.include: must name at least one model")
    if len(set(include)) != len(include):
        raise ConfigError("models.include: duplicate model ids")
    grids_doc = _expect_mapping(models_doc.get("grids"), "models.grids")
    grids: dict[str, list] = {}
    for model_id, points in grids_doc.items():
        if model_id not in MODEL_ORDER:
            raise ConfigError(f"models.grids: unknown model {model_id!r}")
        if not isinstance(points, list) or not points:
            raise ConfigError(
                f"models.grids.{model_id}: expected a non-empty list of mappings"
            )
        parsed = []
        for i, point in enumerate(points):
            if not isinstance(point, dict):
                raise ConfigError(
                    f"models.grids.{model_id}[{i}]: expected a mapping of parameters"
                )
            parsed.append({str(k): v for k, v in point.items()})
        grids[model_id] = parsed

    ranking = _expect_mapping(doc.get("ranking"), "ranking")
    unknown = set(ranking) - {"alpha"}
    if unknown:
        raise ConfigError(f"ranking: unknown keys {sorted(unknown)}")
    alpha = ranking.get("alpha", 0.05)
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
        raise ConfigError(f"ranking.alpha: expected a number, got {alpha!r}")
    if not 0.0 < float(alpha) < 1.0:
        raise ConfigError(f"ranking.alpha: must be in (0, 1), got {alpha}")

    combo = _expect_mapping(doc.get("combination"), "combination")
    unknown = set(combo) - {"methods", "scenarios"}
    if unknown:
        raise ConfigError(f"combination: unknown keys {sorted(unknown)}")
    methods = _expect_str_list(
        combo.get("methods", list(COMBINATION_METHODS)),
        "combination.methods",
        allowed=set(COMBINATION_METHODS),
    )
    scenarios = _expect_str_list(
        combo.get("scenarios", list(COMBINATION_SCENARIOS)),
        "combination.scenarios",
        allowed=set(COMBINATION_SCENARIOS),
    )

    report = _expect_mapping(doc.get("report"), "report")
    unknown = set(report) - {"plot_windows"}
    if unknown:
        raise ConfigError(f"report: unknown keys {sorted(unknown)}")
    plot_windows = report.get("plot_windows", [0, 12, 24, 36, 48])
    if not isinstance(plot_windows, list) or not all(
        isinstance(w, int) and not isinstance(w, bool) and w >= 0 for w in plot_windows
    ):
        raise ConfigError("report.plot_windows: expected a list of window indices")

    cache = _expect_mapping(doc.get("cache"), "cache")
    unknown = set(cache) - {"enabled", "dir"}
    if unknown:
        raise ConfigError(f"cache: unknown keys {sorted(unknown)}")
    use_cache = _expect_bool(cache.get("enabled", True), "cache.enabled")
    cache_dir = cache.get("dir")
    if cache_dir is not None and (not isinstance(cache_dir, str) or not cache_dir):
        raise ConfigError("cache.dir: expected a non-empty path string")

    return RunConfig(
        seed=seed,
        output_dir=output_dir,
        jobs=jobs,
        data_source=source,
        data_path=path,
        synthetic=dict(synthetic),
        logit_target=logit_target,
        seasonal_adjust=seasonal,
        seasonal_period=period,
        skip_seasonal=skip_seasonal,
        n_lags=n_lags,
        tuning_plan=tuning_plan,
        comparison_plan=comparison_plan,
        models=include,
        grids=grids,
        rmcb_alpha=float(alpha),
        combination_methods=methods,
        combination_scenarios=scenarios,
        plot_windows=tuple(plot_windows),
        cache_dir=cache_dir,
        use_cache=use_cache,
    )


def load_config(path) -> RunConfig:
    """Read and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}")
    return parse_config(raw)


def apply_overrides(
    config: RunConfig,
    *,
    seed: int | None = None,
    output_dir: str | None = None,
    jobs: int | None = None,
    models: tuple | None = None,
) -> RunConfig:
    """Apply command-line overrides on top of a parsed config."""
    from dataclasses import replace

    updates = {}
    if seed is not None:
        updates["seed"] = _expect_int(seed, "--seed", minimum=0)
    if output_dir is not None:
        updates["output_dir"] = output_dir
    if jobs is not None:
        updates["jobs"] = _expect_int(jobs, "--jobs", minimum=1)
    if models is not None:
        models = _expect_str_list(list(models), "--models", allowed=set(MODEL_ORDER))
        if not models:
            raise ConfigError("--models: must name at least one model")
        updates["models"] = models
    return replace(config, **updates) if updates else config
