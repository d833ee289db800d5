"""Synthetic quarterly credit-risk panel with a known data-generating process.

Replaces the proprietary default-probability dataset with a seeded
generator.  Eight macro-financial covariates follow stationary AR(1)
processes with quarterly seasonal cycles and optional crisis regimes
(additive shocks over a quarter range).  The default-probability target
is produced on the logit scale as a persistent sparse linear function of
lagged, standardized covariates plus noise, then mapped back to percent.
The full parameterization is returned as a ground-truth record so tests
and reports can check recovery against the known process.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .frame import CANONICAL_COLUMNS, TARGET_COLUMN, TimeSeriesFrame
from .transforms import inverse_logit, logit_transform

COVARIATE_NAMES = tuple(c for c in CANONICAL_COLUMNS if c != TARGET_COLUMN)

BURN_IN = 40


def _logit_scalar(pd_percent: float) -> float:
    return float(logit_transform(np.array([pd_percent]))[0])


@dataclass(frozen=True)
class ArParams:
    """Stationary AR(1) with additive quarterly seasonality."""

    mean: float
    phi: float
    sigma: float
    seasonal: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def long_run_sd(self) -> float:
        return self.sigma / np.sqrt(1.0 - self.phi**2)


# Plausible quarterly dynamics per covariate: growth rates mean-revert
# quickly, rates and the exchange rate are persistent levels.
DEFAULT_AR_PARAMS = {
    "GDP": ArParams(mean=0.5, phi=0.45, sigma=0.6, seasonal=(0.15, -0.05, -0.15, 0.05)),
    "UNE": ArParams(mean=8.0, phi=0.92, sigma=0.25, seasonal=(0.2, -0.1, -0.2, 0.1)),
    "INF": ArParams(mean=0.5, phi=0.55, sigma=0.35, seasonal=(0.1, 0.05, -0.1, -0.05)),
    "RRE": ArParams(mean=1.0, phi=0.7, sigma=0.9),
    "EQP": ArParams(mean=1.5, phi=0.2, sigma=4.0),
    "EXR": ArParams(mean=1.2, phi=0.95, sigma=0.02),
    "STR": ArParams(mean=2.5, phi=0.9, sigma=0.25),
    "LTR": ArParams(mean=4.0, phi=0.93, sigma=0.22),
}


@dataclass(frozen=True)
class CrisisRegime:
    """Additive per-quarter shocks over an inclusive 1-based quarter range."""

    start: int
    end: int
    shocks: tuple = ()

    def contains(self, quarter: int) -> bool:
        return self.start <= quarter <= self.end

    def shock_map(self) -> dict:
        return {name: float(v) for name, v in self.shocks}


DEFAULT_REGIMES = (
    CrisisRegime(
        start=25,
        end=32,
        shocks=(
            ("GDP", -1.2),
            ("UNE", 0.6),
            ("EQP", -6.0),
            ("RRE", -2.0),
            ("STR", -0.3),
        ),
    ),
)

# Sparse dependence of the latent logit target on lagged covariates,
# in units of each covariate's long-run standard deviation.
DEFAULT_COEFFICIENTS = (
    ("GDP", 1, -0.22),
    ("UNE", 0, 0.18),
    ("EQP", 2, -0.10),
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic panel generator."""

    n_quarters: int = 69
    n_covariates: int = 8
    start_year: int = 2002
    start_quarter: int = 2
    pd_base: float = 1.0
    persistence: float = 0.7
    coefficients: tuple = DEFAULT_COEFFICIENTS
    regimes: tuple = DEFAULT_REGIMES
    noise_scale: float = 0.08
    pd_seasonal: tuple[float, float, float, float] = (0.04, -0.02, -0.04, 0.02)
    ar_params: dict = field(default_factory=lambda: dict(DEFAULT_AR_PARAMS))
    seed: int = 0

    def covariate_names(self) -> tuple:
        return COVARIATE_NAMES[: self.n_covariates]

    def validate(self) -> None:
        if self.n_quarters < 8:
            raise ValueError("n_quarters must be at least 8")
        if not 1 <= self.n_covariates <= len(COVARIATE_NAMES):
            raise ValueError(
                f"n_covariates must be in 1..{len(COVARIATE_NAMES)}"
            )
        if not 1 <= self.start_quarter <= 4:
            raise ValueError("start_quarter must be in 1..4")
        if not 0.0 < self.pd_base < 100.0:
            raise ValueError("pd_base must be a percent strictly inside (0, 100)")
        if not 0.0 <= self.persistence < 1.0:
            raise ValueError("persistence must be in [0, 1)")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")
        names = set(self.covariate_names())
        for var, lag, _coef in self.coefficients:
            if var not in names:
                raise ValueError(f"coefficient references unknown covariate {var!r}")
            if lag < 0:
                raise ValueError(f"coefficient lag must be nonnegative, got {lag}")
        for regime in self.regimes:
            if not (1 <= regime.start <= regime.end <= self.n_quarters):
                raise ValueError(
                    f"regime ({regime.start}, {regime.end}) outside 1..{self.n_quarters}"
                )
            for var, _v in regime.shocks:
                if var not in names:
                    raise ValueError(f"regime shock references unknown covariate {var!r}")
        for name in self.covariate_names():
            params = self.ar_params[name]
            if not 0.0 <= params.phi < 1.0:
                raise ValueError(f"{name}: phi must be in [0, 1) for stationarity")
            if params.sigma < 0:
                raise ValueError(f"{name}: sigma must be nonnegative")


def period_labels(start_year: int, start_quarter: int, n: int) -> tuple:
    labels = []
    year, quarter = start_year, start_quarter
    for _ in range(n):
        labels.append(f"{year}Q{quarter}")
        quarter += 1
        if quarter == 5:
            year, quarter = year + 1, 1
    return tuple(labels)


def _simulate_covariate(
    name: str,
    params: ArParams,
    spec: SyntheticSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """AR(1) path with burn-in, seasonal cycle, and regime shocks."""
    total = BURN_IN + spec.n_quarters
    innovations = rng.normal(size=total)
    x = np.empty(total)
    level = params.mean
    for t in range(total):
        level = params.mean + params.phi * (level - params.mean) + params.sigma * innovations[t]
        x[t] = level
    x = x[BURN_IN:]
    quarter_of = (
        np.arange(spec.start_quarter - 1, spec.start_quarter - 1 + spec.n_quarters) % 4
    )
    x = x + np.asarray(params.seasonal)[quarter_of]
    for regime in spec.regimes:
        shock = regime.shock_map().get(name)
        if shock is not None:
            x[regime.start - 1 : regime.end] += shock
    return x


def generate_synthetic(spec: SyntheticSpec) -> tuple[TimeSeriesFrame, dict]:
    """Simulate the panel; returns the frame and the ground-truth record.

    Raises ValueError when the latent target saturates the percent scale,
    which indicates the noise or coefficient scale must be reduced.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    names = spec.covariate_names()
    covariates = {
        name: _simulate_covariate(name, spec.ar_params[name], spec, rng)
        for name in names
    }

    standardized = {}
    for name in names:
        params = spec.ar_params[name]
        sd = params.long_run_sd()
        standardized[name] = (covariates[name] - params.mean) / (sd if sd > 0 else 1.0)

    base_logit = _logit_scalar(spec.pd_base)
    quarter_of = (
        np.arange(spec.start_quarter - 1, spec.start_quarter - 1 + spec.n_quarters) % 4
    )
    seasonal = np.asarray(spec.pd_seasonal)[quarter_of]
    noise = spec.noise_scale * rng.normal(size=spec.n_quarters)
    latent = np.empty(spec.n_quarters)
    state = 0.0
    for t in range(spec.n_quarters):
        signal = 0.0
        for var, lag, coef in spec.coefficients:
            if t - lag >= 0:
                signal += coef * standardized[var][t - lag]
        state = spec.persistence * state + signal + noise[t]
        latent[t] = base_logit + state + seasonal[t]

    pd_percent = inverse_logit(latent)
    if not np.all((pd_percent > 0.0) & (pd_percent < 100.0)):
        raise ValueError(
            "generated default probabilities saturate the (0, 100) percent "
            "range; reduce noise_scale or coefficient magnitudes"
        )

    columns = (TARGET_COLUMN,) + names
    values = {TARGET_COLUMN: pd_percent}
    values.update({name: covariates[name] for name in names})
    frame = TimeSeriesFrame(
        index=period_labels(spec.start_year, spec.start_quarter, spec.n_quarters),
        columns=columns,
        values=values,
    )
    truth = ground_truth_record(spec)
    return frame, truth


def ground_truth_record(spec: SyntheticSpec) -> dict:
    """JSON-serializable description of the generating process."""
    names = spec.covariate_names()
    return {
        "kind": "synthetic_panel",
        "n_quarters": spec.n_quarters,
        "seed": spec.seed,
        "start": f"{spec.start_year}Q{spec.start_quarter}",
        "target": {
            "column": TARGET_COLUMN,
            "base_percent": spec.pd_base,
            "base_logit": _logit_scalar(spec.pd_base),
            "persistence": spec.persistence,
            "noise_scale": spec.noise_scale,
            "seasonal": list(spec.pd_seasonal),
            "coefficients": [
                {"variable": var, "lag": lag, "value": coef}
                for var, lag, coef in spec.coefficients
            ],
            "active_variables": sorted({var for var, _l, _c in spec.coefficients}),
        },
        "covariates": {
            name: {
                "mean": spec.ar_params[name].mean,
                "phi": spec.ar_params[name].phi,
                "sigma": spec.ar_params[name].sigma,
                "seasonal": list(spec.ar_params[name].seasonal),
                "long_run_sd": spec.ar_params[name].long_run_sd(),
            }
            for name in names
        },
        "regimes": [
            {
                "start": regime.start,
                "end": regime.end,
                "shocks": regime.shock_map(),
            }
            for regime in spec.regimes
        ],
    }


def write_ground_truth(truth: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
