"""Forecasting model zoo: registry of estimators, categories, and grids.

Every entry couples an estimator class with the metadata the harness
needs: a family label for best-per-category selection, the default
hyperparameter grid searched during tuning, and a per-axis complexity
direction used to break ties toward the most parsimonious fit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..bart import BartRegressor
from .bayes import BmaRegressor, SpikeSlabRegressor
from .linear import LassoRegressor, LinearRegressor, PcrRegressor, RidgeRegressor
from .neural import RpropNetRegressor
from .smoothing import SesForecaster
from .trees import CartRegressor, ForestRegressor

CATEGORY_LINEAR = "linear"
CATEGORY_MODEL_AVERAGING = "model_averaging"
CATEGORY_EXP_SMOOTHING = "exp_smoothing"
CATEGORY_TREE = "tree"
CATEGORY_NEURAL = "neural_network"


@dataclass(frozen=True)
class ModelSpec:
    """Registry row for one model id."""

    model_id: str
    estimator_cls: type
    category: str
    fixed_params: dict = field(default_factory=dict)
    grid_axes: dict = field(default_factory=dict)  # param -> tuple of values
    grid_points: tuple = ()  # explicit points override the axis product
    higher_is_simpler: frozenset = frozenset()  # axes where larger = simpler

    @property
    def stochastic(self) -> bool:
        return "seed" in self.estimator_cls().get_params()

    def make(self, seed: int | None = None, **overrides):
        params = dict(self.fixed_params)
        params.update(overrides)
        est = self.estimator_cls(**params)
        if seed is not None and self.stochastic:
            est.set_params(seed=seed)
        return est

    def grid(self) -> list[dict]:
        """All grid points as parameter dicts, in deterministic order."""
        if self.grid_points:
            return [dict(pt) for pt in self.grid_points]
        if not self.grid_axes:
            return [{}]
        names = sorted(self.grid_axes)
        points = [{}]
        for name in names:
            points = [
                {**pt, name: value} for pt in points for value in self.grid_axes[name]
            ]
        return points

    def complexity_key(self, point: dict) -> tuple:
        """Sort key that orders grid points from simplest to most complex."""
        key = []
        for name in sorted(self.grid_axes) or sorted(point):
            if name not in point:
                continue
            value = point[name]
            scalar = float(sum(value)) if isinstance(value, (tuple, list)) else float(value)
            key.append(-scalar if name in self.higher_is_simpler else scalar)
        return tuple(key)


MODEL_REGISTRY: dict[str, ModelSpec] = {
    spec.model_id: spec
    for spec in (
        ModelSpec(
            model_id="lm",
            estimator_cls=LinearRegressor,
            category=CATEGORY_LINEAR,
            # intercept False sorts first: the no-intercept fit is smaller
            grid_axes={"intercept": (True, False)},
        ),
        ModelSpec(
            model_id="ridge",
            estimator_cls=RidgeRegressor,
            category=CATEGORY_LINEAR,
            grid_axes={"lam": (0.01, 0.1, 1.0, 10.0, 100.0)},
            higher_is_simpler=frozenset({"lam"}),
        ),
        ModelSpec(
            model_id="lasso",
            estimator_cls=LassoRegressor,
            category=CATEGORY_LINEAR,
            grid_axes={"fraction": (0.1, 0.25, 0.5, 0.75, 0.9)},
        ),
        ModelSpec(
            model_id="pcr",
            estimator_cls=PcrRegressor,
            category=CATEGORY_LINEAR,
            grid_axes={"ncomp": (1, 2, 3, 5, 8, 12)},
        ),
        ModelSpec(
            model_id="spikeslab",
            estimator_cls=SpikeSlabRegressor,
            category=CATEGORY_LINEAR,
            fixed_params={"n_draws": 600, "n_burn": 200},
            grid_axes={"vars": (5, 10, 20)},
        ),
        ModelSpec(
            model_id="bma",
            estimator_cls=BmaRegressor,
            category=CATEGORY_MODEL_AVERAGING,
            fixed_params={"n_draws": 10000},
        ),
        ModelSpec(
            model_id="es",
            estimator_cls=SesForecaster,
            category=CATEGORY_EXP_SMOOTHING,
        ),
        ModelSpec(
            model_id="cart",
            estimator_cls=CartRegressor,
            category=CATEGORY_TREE,
            grid_axes={"cp": (0.001, 0.01, 0.05, 0.1)},
            higher_is_simpler=frozenset({"cp"}),
        ),
        ModelSpec(
            model_id="rf",
            estimator_cls=ForestRegressor,
            category=CATEGORY_TREE,
            fixed_params={"n_trees": 200},
            grid_axes={"mtry": (7, 13, 40), "min_node_size": (1, 5)},
            higher_is_simpler=frozenset({"min_node_size"}),
        ),
        ModelSpec(
            model_id="nn",
            estimator_cls=RpropNetRegressor,
            category=CATEGORY_NEURAL,
            grid_points=(
                {"layer1": 3},
                {"layer1": 5},
                {"layer1": 4, "layer2": 2},
            ),
        ),
        ModelSpec(
            model_id="bart",
            estimator_cls=BartRegressor,
            category=CATEGORY_TREE,
            grid_axes={"num_trees": (50, 200)},
        ),
    )
}

MODEL_ORDER = tuple(MODEL_REGISTRY)


def get_spec(model_id: str) -> ModelSpec:
    try:
        return MODEL_REGISTRY[model_id]
    except KeyError:
        known = ", ".join(MODEL_ORDER)
        raise KeyError(f"unknown model id {model_id!r}; known ids: {known}") from None


def make_estimator(model_id: str, seed: int | None = None, **overrides):
    return get_spec(model_id).make(seed=seed, **overrides)
