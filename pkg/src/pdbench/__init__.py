"""pdbench: benchmark harness for macro-driven default-probability forecasting.

Pipeline: quarterly panel ingestion and transforms, lag-block design
matrices, rolling-origin evaluation of a model zoo (penalized linear,
Bayesian, tree ensembles, neural, sum-of-trees), rank-based comparison
tests, and static forecast combination.
"""

__version__ = "0.1.0"
