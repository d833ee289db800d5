"""Bayesian linear estimators: spike-and-slab selection and model averaging."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .base import Standardizer, as_matrix, as_target, check_columns, check_fitted, rng_from_seed

SPIKE_SHRINK = 1e-4  # spike variance = this fraction of the slab variance


class SpikeSlabRegressor(BaseEstimator, RegressorMixin):
    """Gibbs-sampled two-component Gaussian selection prior.

    Each standardized coefficient is slab (variance sigma^2 * slab_scale/n)
    with prior probability `inclusion_prior`, or a tight continuous spike
    otherwise.  After sampling, only the `vars` columns with the highest
    posterior inclusion keep their posterior-mean coefficients; the rest
    are zeroed.  The slab is deliberately unit-information scale so that
    pure noise leaves inclusion near its prior.
    """

    def __init__(
        self,
        vars: int = 20,
        inclusion_prior: float = 0.5,
        slab_scale: float = 2.0,
        n_draws: int = 600,
        n_burn: int = 200,
        seed: int = 0,
    ):
        self.vars = vars
        self.inclusion_prior = inclusion_prior
        self.slab_scale = slab_scale
        self.n_draws = n_draws
        self.n_burn = n_burn
        self.seed = seed

    def fit(self, X, y):
        if self.vars < 0:
            raise ValueError(f"vars must be >= 0, got {self.vars}")
        if not 0.0 < self.inclusion_prior < 1.0:
            raise ValueError("inclusion_prior must lie in (0, 1)")
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        n, p = X.shape
        scaler = Standardizer()
        Xs = scaler.fit_transform(X)
        y_mean = float(y.mean())
        yc = y - y_mean
        rng = rng_from_seed(self.seed)

        # prior variances are relative to sigma^2, so inclusion behavior is
        # invariant to the target's units; slab is unit-information scale
        v_slab = self.slab_scale / max(n, 1)
        v_spike = SPIKE_SHRINK * v_slab
        gram = Xs.T @ Xs
        xty = Xs.T @ yc
        var_y = max(float(yc @ yc) / max(n - 1, 1), 1e-12)
        a0, b0 = 1.0, 0.5 * var_y  # weakly-informative inverse-gamma on sigma^2

        gamma = rng.random(p) < self.inclusion_prior
        sigma2 = var_y
        beta = np.zeros(p)
        total = self.n_burn + self.n_draws
        incl_sum = np.zeros(p)
        beta_sum = np.zeros(p)
        log_prior_odds = np.log(self.inclusion_prior) - np.log1p(-self.inclusion_prior)
        for sweep in range(total):
            # beta | gamma, sigma2 ~ N((X'X + D^-1)^-1 X'y, sigma2 (X'X + D^-1)^-1)
            prior_prec = 1.0 / np.where(gamma, v_slab, v_spike)
            a_mat = gram + np.diag(prior_prec)
            try:
                chol = np.linalg.cholesky(a_mat)
            except np.linalg.LinAlgError:
                a_mat += np.eye(p) * 1e-8 * max(a_mat.max(), 1.0)
                chol = np.linalg.cholesky(a_mat)
            mean = np.linalg.solve(a_mat, xty)
            z = rng.standard_normal(p)
            beta = mean + np.sqrt(sigma2) * np.linalg.solve(chol.T, z)
            # gamma | beta, sigma2: independent Bernoulli from the prior densities
            log_ratio = (
                log_prior_odds
                + 0.5 * np.log(v_spike / v_slab)
                + 0.5 * (beta**2 / sigma2) * (1.0 / v_spike - 1.0 / v_slab)
            )
            gamma = rng.random(p) < 1.0 / (1.0 + np.exp(-np.clip(log_ratio, -700, 700)))
            # sigma2 | beta, gamma: conjugate inverse-gamma (prior scales with sigma2)
            resid = yc - Xs @ beta
            prior_prec = 1.0 / np.where(gamma, v_slab, v_spike)
            shape = a0 + 0.5 * (n + p)
            rate = b0 + 0.5 * float(resid @ resid) + 0.5 * float(beta**2 @ prior_prec)
            sigma2 = rate / rng.gamma(shape)
            if sweep >= self.n_burn:
                incl_sum += gamma
                beta_sum += beta
        self.inclusion_ = incl_sum / self.n_draws
        beta_mean = beta_sum / self.n_draws
        keep = min(self.vars, p)
        order = np.argsort(-self.inclusion_, kind="stable")
        mask = np.zeros(p, dtype=bool)
        mask[order[:keep]] = True
        beta_capped = np.where(mask, beta_mean, 0.0)
        self.retained_ = np.flatnonzero(mask)
        self.coef_, self.intercept_ = scaler.coef_to_original(beta_capped, y_mean)
        self.n_features_in_ = p
        return self

    def predict(self, X):
        check_fitted(self, "coef_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        return self.intercept_ + X @ self.coef_


def _lag_state_columns(state: int, var: int, n_base: int) -> list[int]:
    """Columns of variable `var` for a closed lag state.

    state 0 excludes the variable; state s >= 1 includes lags 0..s-1, laid
    out in lag-block order (lag p of variable v sits at column p*n_base+v).
    """
    return [p * n_base + var for p in range(state)]


class BmaRegressor(BaseEstimator, RegressorMixin):
    """Model averaging over closed lag structures with BIC posterior weights.

    The model space assigns each base variable a contiguous lag window
    0..p (or exclusion); an MC3 chain proposes one-variable widenings or
    narrowings and accepts by BIC-approximated posterior odds under a
    uniform model prior.  Predictions average the visited models' OLS
    fits, weighted by their renormalized posterior probabilities.
    """

    def __init__(self, n_lags: int | None = 4, n_draws: int = 10_000, seed: int = 0):
        self.n_lags = n_lags
        self.n_draws = n_draws
        self.seed = seed

    def _layout(self, p: int) -> tuple[int, int]:
        """(n_base, max_state) consistent with the column count."""
        if self.n_lags is not None and p % (self.n_lags + 1) == 0 and p > 0:
            n_base = p // (self.n_lags + 1)
            return n_base, self.n_lags + 1
        return p, 1  # fall back to plain subset selection per column

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        n, p = X.shape
        if p == 0:
            raise ValueError("BMA needs at least one predictor column")
        n_base, max_state = self._layout(p)
        rng = rng_from_seed(self.seed)
        logn = np.log(n) if n > 1 else 1.0
        y_ss = float(y @ y) + 1.0

        bic_cache: dict[tuple, float] = {}

        def bic_of(state: tuple) -> float:
            cached = bic_cache.get(state)
            if cached is not None:
                return cached
            cols = []
            for v, s in enumerate(state):
                cols.extend(_lag_state_columns(s, v, n_base))
            design = np.column_stack([np.ones(n)] + [X[:, c] for c in cols])
            beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
            resid = y - design @ beta
            rss = max(float(resid @ resid), 1e-10 * y_ss)
            bic = n * np.log(rss / n) + design.shape[1] * logn
            bic_cache[state] = bic
            return bic

        def neighbors(state: tuple) -> list[tuple]:
            out = []
            for v, s in enumerate(state):
                if s > 0:
                    out.append(state[:v] + (s - 1,) + state[v + 1 :])
                if s < max_state:
                    out.append(state[:v] + (s + 1,) + state[v + 1 :])
            return out

        state = tuple([0] * n_base)
        current_bic = bic_of(state)
        visited: set[tuple] = {state}
        for _ in range(self.n_draws):
            nbrs = neighbors(state)
            prop = nbrs[int(rng.integers(len(nbrs)))]
            prop_bic = bic_of(prop)
            # symmetric-correction: proposal prob depends on neighborhood size
            log_acc = (
                0.5 * (current_bic - prop_bic)
                + np.log(len(nbrs))
                - np.log(len(neighbors(prop)))
            )
            if np.log(max(rng.random(), 1e-300)) < log_acc:
                state, current_bic = prop, prop_bic
            visited.add(state)
        models = sorted(visited)
        bics = np.array([bic_of(m) for m in models])
        logw = -0.5 * (bics - bics.min())
        w = np.exp(logw)
        w /= w.sum()
        self.model_states_ = models
        self.model_weights_ = w
        inclusion = np.zeros(n_base)
        for m, wt in zip(models, w):
            for v, s in enumerate(m):
                if s > 0:
                    inclusion[v] += wt
        self.inclusion_ = inclusion
        # per-model OLS coefficients for prediction
        self._fits = []
        for m in models:
            cols = []
            for v, s in enumerate(m):
                cols.extend(_lag_state_columns(s, v, n_base))
            design = np.column_stack([np.ones(n)] + [X[:, c] for c in cols])
            beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
            self._fits.append((tuple(cols), beta))
        self.n_features_in_ = p
        self.n_base_ = n_base
        return self

    def predict(self, X):
        check_fitted(self, "model_weights_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        out = np.zeros(X.shape[0])
        for (cols, beta), wt in zip(self._fits, self.model_weights_):
            design = np.column_stack([np.ones(X.shape[0])] + [X[:, c] for c in cols])
            out += wt * (design @ beta)
        return out
