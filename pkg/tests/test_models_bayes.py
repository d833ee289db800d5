"""Tests for the stochastic-search Bayesian models."""
import numpy as np
import pytest

from pdbench.models.bayes import BmaRegressor, SpikeSlabRegressor


class TestSpikeSlab:
    def test_pure_noise_inclusion_near_prior(self):
        # with a unit-information slab, pure noise should leave posterior
        # inclusion close to the 0.5 prior rather than collapsing to 0 or 1
        means = []
        for seed in range(4):
            rng = np.random.default_rng(500 + seed)
            X = rng.normal(size=(60, 8))
            y = rng.normal(size=60)
            m = SpikeSlabRegressor(vars=8, n_draws=400, n_burn=150, seed=seed).fit(X, y)
            means.append(m.inclusion_.mean())
        assert abs(np.mean(means) - 0.5) < 0.12

    def test_strong_signal_column_included(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(80, 6))
        y = 10.0 * X[:, 2] + rng.normal(size=80)
        m = SpikeSlabRegressor(vars=6, n_draws=400, n_burn=150, seed=1).fit(X, y)
        assert m.inclusion_[2] > 0.95
        assert 2 in m.retained_

    def test_vars_cap_limits_retained_set(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(70, 10))
        y = X @ rng.normal(size=10) + 0.5 * rng.normal(size=70)
        m = SpikeSlabRegressor(vars=3, n_draws=300, n_burn=100, seed=2).fit(X, y)
        assert len(m.retained_) <= 3
        off = np.setdiff1d(np.arange(10), m.retained_)
        assert np.all(m.coef_[off] == 0.0)

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 5))
        y = X[:, 0] * 2.0 + rng.normal(size=50)
        a = SpikeSlabRegressor(seed=5).fit(X, y)
        b = SpikeSlabRegressor(seed=5).fit(X, y)
        assert np.array_equal(a.coef_, b.coef_)
        assert np.array_equal(a.inclusion_, b.inclusion_)

    def test_scale_invariant_inclusion(self):
        # multiplying the target by a constant must not change which
        # columns look relevant (the prior scales with the error variance)
        rng = np.random.default_rng(9)
        X = rng.normal(size=(60, 6))
        y = 3.0 * X[:, 1] + rng.normal(size=60)
        a = SpikeSlabRegressor(seed=3).fit(X, y)
        b = SpikeSlabRegressor(seed=3).fit(X, 1000.0 * y)
        assert np.abs(a.inclusion_ - b.inclusion_).max() < 1e-12

    def test_prediction_shape_and_intercept(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(40, 4))
        y = rng.normal(size=40) + 7.0
        m = SpikeSlabRegressor(seed=0).fit(X, y)
        pred = m.predict(X[:6])
        assert pred.shape == (6,)
        assert abs(pred.mean() - 7.0) < 1.5


def bic_of(X, y, cols):
    n = len(y)
    design = np.ones((n, 1)) if not cols else np.column_stack([np.ones(n), X[:, cols]])
    beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    rss = max(float(resid @ resid), 1e-10 * (float(y @ y) + 1.0))
    return n * np.log(rss / n) + design.shape[1] * np.log(n)


class TestBma:
    def test_two_model_enumeration_oracle(self):
        rng = np.random.default_rng(20)
        X = rng.normal(size=(50, 1))
        y = 2.0 * X[:, 0] + 0.5 * rng.normal(size=50)
        m = BmaRegressor(n_draws=3000, seed=2).fit(X, y)
        bics = np.array([bic_of(X, y, []), bic_of(X, y, [0])])
        w = np.exp(-0.5 * (bics - bics.min()))
        w /= w.sum()
        # chain visits both models, so the analytic weights must match
        states = [s[0] for s in m.model_states_]
        assert sorted(states) == [0, 1]
        by_state = dict(zip(states, m.model_weights_))
        assert by_state[0] == pytest.approx(w[0], abs=1e-10)
        assert by_state[1] == pytest.approx(w[1], abs=1e-10)
        assert by_state[1] > 0.9

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(60, 3))
        y = X[:, 0] - X[:, 2] + rng.normal(size=60)
        m = BmaRegressor(n_draws=4000, seed=3).fit(X, y)
        assert m.model_weights_.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(m.model_weights_ >= 0.0)

    def test_duplicate_columns_symmetric_inclusion(self):
        rng = np.random.default_rng(22)
        base = rng.normal(size=60)
        X = np.column_stack([base, base])
        y = 1.5 * base + 0.7 * rng.normal(size=60)
        m = BmaRegressor(n_draws=8000, seed=4).fit(X, y)
        assert abs(m.inclusion_[0] - m.inclusion_[1]) < 0.1

    def test_lag_block_layout_prefers_true_depth(self):
        # two variables, one lag block: columns are v0_now, v1_now, v0_prev,
        # v1_prev; the target loads on v0 at both depths and ignores v1
        rng = np.random.default_rng(23)
        n = 80
        v0_now = rng.normal(size=n)
        v1_now = rng.normal(size=n)
        v0_prev = rng.normal(size=n)
        v1_prev = rng.normal(size=n)
        X = np.column_stack([v0_now, v1_now, v0_prev, v1_prev])
        y = 2.0 * v0_now + 1.5 * v0_prev + 0.3 * rng.normal(size=n)
        m = BmaRegressor(n_lags=1, n_draws=5000, seed=5).fit(X, y)
        best = m.model_states_[np.argmax(m.model_weights_)]
        assert best[0] == 2  # both depths of the first variable
        assert best[1] == 0
        assert m.inclusion_[0] > 0.9
        assert m.inclusion_[1] < 0.5

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(24)
        X = rng.normal(size=(40, 2))
        y = X[:, 0] + rng.normal(size=40)
        a = BmaRegressor(n_draws=2000, seed=6).fit(X, y)
        b = BmaRegressor(n_draws=2000, seed=6).fit(X, y)
        assert a.model_states_ == b.model_states_
        assert np.array_equal(a.model_weights_, b.model_weights_)
        assert np.array_equal(a.predict(X), b.predict(X))

    def test_prediction_is_weighted_average(self):
        rng = np.random.default_rng(25)
        X = rng.normal(size=(50, 2))
        y = 3.0 * X[:, 1] + rng.normal(size=50)
        m = BmaRegressor(n_draws=2000, seed=7).fit(X, y)
        manual = np.zeros(50)
        for state, weight in zip(m.model_states_, m.model_weights_):
            cols = [i for i, s in enumerate(state) if s]
            design = (
                np.ones((50, 1))
                if not cols
                else np.column_stack([np.ones(50), X[:, cols]])
            )
            beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
            manual += weight * (design @ beta)
        assert np.abs(m.predict(X) - manual).max() < 1e-8
