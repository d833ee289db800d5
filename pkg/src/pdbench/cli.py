"""Command-line front end.

Verbs map to pipeline prefixes: generate (data only), tune, compare,
combine, report, and run (everything).  Exit codes: 0 success, 2 invalid
configuration, 3 data error, 4 unwritable output location.  The combine
and report verbs reuse forecasts.csv from the output directory when its
config hash matches, instead of refitting every model.
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import (
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_OUTPUT_ERROR,
    ConfigError,
    RunConfig,
    apply_overrides,
    load_config,
    parse_config,
)
from .frame import DataError
from .runner import (
    PipelineState,
    combine_stage,
    rank_stage,
    run_pipeline,
    scenario_summary_tables,
)
from .report import emit_stage_artifacts, load_runs
from .transforms import TransformError
from .tuning import TuningError

VERBS = ("generate", "tune", "compare", "combine", "report", "run")

_VERB_STAGE = {
    "generate": "data",
    "tune": "tune",
    "compare": "compare",
    "combine": "combine",
    "report": "combine",
    "run": "combine",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdbench",
        description=(
            "Benchmark harness for quarterly default-probability forecasting: "
            "synthetic data generation, model tuning and comparison under "
            "rolling-origin cross-validation, rank analysis, and forecast "
            "combination."
        ),
    )
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")
    help_text = {
        "generate": "write the synthetic panel and its ground-truth record",
        "tune": "grid-tune every requested model on the tuning windows",
        "compare": "run the tuned models over the comparison windows and rank them",
        "combine": "evaluate forecast combinations over the configured scenarios",
        "report": "write the summary table and plot-data files",
        "run": "run every stage and write all artifacts",
    }
    for verb in VERBS:
        p = sub.add_parser(verb, help=help_text[verb])
        p.add_argument("--config", help="path to the YAML config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, help="worker processes (default 1)")
        p.add_argument(
            "--models",
            help="comma-separated model ids overriding models.include",
        )
    return parser


def resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else parse_config(None)
    models = tuple(args.models.split(",")) if args.models else None
    return apply_overrides(
        config,
        seed=args.seed,
        output_dir=args.out,
        jobs=args.jobs,
        models=models,
    )


def _ensure_writable(out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    probe = os.path.join(out_dir, ".write_probe")
    with open(probe, "w", encoding="utf-8") as fh:
        fh.write("")
    os.remove(probe)


def _trailer_hash(path: str) -> str | None:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            last = ""
            for line in fh:
                if line.strip():
                    last = line.strip()
    except OSError:
        return None
    if last.startswith("# config_hash="):
        return last.split("=", 1)[1]
    return None


def _resume_from_forecasts(config: RunConfig) -> PipelineState | None:
    """Rebuild comparison state from forecasts.csv when hashes match."""
    path = os.path.join(config.output_dir, "forecasts.csv")
    if _trailer_hash(path) != config.config_hash():
        return None
    state = run_pipeline(config, through="design")
    state.runs = load_runs(path, state.design, state.comparison_plan)
    (
        state.stability,
        state.kept,
        state.rank_matrix,
        state.rmcb_result,
        state.ranking_note,
    ) = rank_stage(config, state.runs)
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


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        _ensure_writable(config.output_dir)
    except OSError as exc:
        print(f"output error: {config.output_dir}: {exc}", file=sys.stderr)
        return EXIT_OUTPUT_ERROR

    try:
        state = None
        if args.verb in ("combine", "report"):
            state = _resume_from_forecasts(config)
        if state is None:
            state = run_pipeline(config, through=_VERB_STAGE[args.verb])
    except (DataError, TransformError, TuningError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        written = emit_stage_artifacts(state, config.output_dir, args.verb)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT_ERROR

    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
