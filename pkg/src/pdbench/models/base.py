"""Shared plumbing for the model zoo estimators.

All estimators follow the scikit-learn protocol: hyperparameters are
``__init__`` arguments stored verbatim, ``fit(X, y)`` returns ``self`` and
stores learned state in trailing-underscore attributes, ``predict(X)`` is
deterministic given the fitted state.  Stochastic fits draw exclusively
from a generator seeded by the ``seed`` hyperparameter.

The implementations live in :mod:`pdbench.validation` so that modules
outside the zoo can import them without triggering this package's
registry imports.
"""
from ..validation import (  # noqa: F401
    FitFailure,
    Standardizer,
    as_matrix,
    as_target,
    check_columns,
    check_fitted,
    rng_from_seed,
)

__all__ = [
    "FitFailure",
    "Standardizer",
    "as_matrix",
    "as_target",
    "check_columns",
    "check_fitted",
    "rng_from_seed",
]
