"""Linear-family estimators: least squares, ridge, lasso, principal components."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .base import Standardizer, as_matrix, as_target, check_columns, check_fitted


class LinearRegressor(BaseEstimator, RegressorMixin):
    """Ordinary least squares via orthogonal decomposition.

    Rank-deficient systems (including columns > rows) fall back to the
    minimum-norm solution instead of failing.
    """

    def __init__(self, intercept: bool = True):
        self.intercept = intercept

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        design = np.column_stack([np.ones(X.shape[0]), X]) if self.intercept else X
        beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if self.intercept:
            self.intercept_ = float(beta[0])
            self.coef_ = beta[1:]
        else:
            self.intercept_ = 0.0
            self.coef_ = beta
        self.rank_ = int(rank)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "coef_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        return self.intercept_ + X @ self.coef_


class RidgeRegressor(BaseEstimator, RegressorMixin):
    """L2-penalized least squares, closed form on standardized columns.

    lam=0 reduces to (minimum-norm) least squares on the standardized
    design, hence to plain OLS on full-rank data.
    """

    def __init__(self, lam: float = 1.0):
        self.lam = lam

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        scaler = Standardizer()
        Xs = scaler.fit_transform(X)
        y_mean = float(y.mean())
        yc = y - y_mean
        p = Xs.shape[1]
        if self.lam == 0.0:
            beta, _, _, _ = np.linalg.lstsq(Xs, yc, rcond=None)
        else:
            gram = Xs.T @ Xs + self.lam * np.eye(p)
            beta = np.linalg.solve(gram, Xs.T @ yc)
        self.coef_, self.intercept_ = scaler.coef_to_original(beta, y_mean)
        self.coef_std_ = beta
        self.n_features_in_ = p
        return self

    def predict(self, X):
        check_fitted(self, "coef_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        return self.intercept_ + X @ self.coef_


def _cd_sweep(G, c, s, beta, lam, idx) -> float:
    """One cyclic sweep over ``idx``; mutates beta and s = G @ beta in place."""
    max_delta = 0.0
    for j in idx:
        gjj = G[j, j]
        if gjj == 0.0:  # constant column: coefficient pinned at zero
            continue
        old = beta[j]
        z = c[j] - s[j] + old * gjj
        new = np.sign(z) * max(abs(z) - lam, 0.0) / gjj
        if new != old:
            delta = new - old
            s += delta * G[:, j]
            beta[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


def _coordinate_descent(
    G: np.ndarray,
    c: np.ndarray,
    lam: float,
    beta0: np.ndarray,
    max_passes: int = 10_000,
    tol: float = 1e-12,
) -> np.ndarray:
    """Cyclic coordinate descent for (1/2n)||y - Xb||^2 + lam*||b||_1.

    Works on the Gram form (G = Xs'Xs/n, c = Xs'y/n) so sweep cost does
    not depend on the row count and the Gram matrix is shared across all
    penalty levels visited by the budget search.  Columns must be
    standardized so G has unit diagonal (constant columns are all-zero
    and their coefficients stay put at 0).  Sweeps alternate between the
    current active set and a confirming full pass, as in glmnet.
    """
    p = c.shape[0]
    beta = beta0.copy()
    s = G @ beta
    all_idx = np.arange(p)
    passes = 0
    while passes < max_passes:
        while passes < max_passes:
            active = np.flatnonzero(beta)
            if active.size == 0 or active.size == p:
                break
            max_delta = _cd_sweep(G, c, s, beta, lam, active)
            passes += 1
            if max_delta <= tol * max(1.0, np.abs(beta).max()):
                break
        max_delta = _cd_sweep(G, c, s, beta, lam, all_idx)
        passes += 1
        if max_delta <= tol * max(1.0, np.abs(beta).max()):
            break
    return beta


class LassoRegressor(BaseEstimator, RegressorMixin):
    """L1-penalized least squares parameterized by the shrinkage fraction.

    ``fraction`` is the target ratio ||b||_1 / ||b_ref||_1 where b_ref is
    the (minimum-norm) least-squares solution on standardized columns; the
    matching penalty is found by bisection on the coordinate-descent path.
    """

    def __init__(self, fraction: float = 0.5):
        self.fraction = fraction

    def fit(self, X, y):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {self.fraction}")
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        n, p = X.shape
        scaler = Standardizer()
        Xs = scaler.fit_transform(X)
        y_mean = float(y.mean())
        yc = y - y_mean
        beta_ref, _, _, _ = np.linalg.lstsq(Xs, yc, rcond=None)
        target_l1 = self.fraction * float(np.abs(beta_ref).sum())
        if target_l1 <= 0.0:
            beta = np.zeros(p)
        else:
            G = Xs.T @ Xs / n
            c = Xs.T @ yc / n
            lam_max = float(np.abs(c).max())
            # Root-find l1(lam) = target on [0, lam_max]; l1 is monotone
            # decreasing and piecewise linear in lam, so safeguarded false
            # position (Illinois damping) converges in a handful of solves.
            lo, hi = 0.0, lam_max
            f_lo = f_hi = None  # l1 - target at the bracket ends, once seen
            last_side = 0
            beta = np.zeros(p)
            best, best_gap, best_lam = beta, np.inf, lam_max
            for _ in range(60):
                span = hi - lo
                if f_lo is not None and f_hi is not None and f_lo > 0.0 > f_hi:
                    mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
                    mid = min(max(mid, lo + 0.05 * span), hi - 0.05 * span)
                else:
                    mid = 0.5 * (lo + hi)
                # loose solves while bracketing; the winner is re-polished below
                beta = _coordinate_descent(G, c, mid, beta, tol=1e-6, max_passes=1000)
                l1 = float(np.abs(beta).sum())
                f = l1 - target_l1
                if abs(f) < best_gap:
                    best, best_gap, best_lam = beta.copy(), abs(f), mid
                if abs(f) <= 1e-9 * max(1.0, target_l1) or span <= 1e-14 * lam_max:
                    break
                if f > 0.0:
                    lo, f_lo = mid, f
                    if last_side == 1 and f_hi is not None:
                        f_hi *= 0.5
                    last_side = 1
                else:
                    hi, f_hi = mid, f
                    if last_side == -1 and f_lo is not None:
                        f_lo *= 0.5
                    last_side = -1
            beta = _coordinate_descent(G, c, best_lam, best, tol=1e-12)
        self.coef_, self.intercept_ = scaler.coef_to_original(beta, y_mean)
        self.coef_std_ = beta
        self.active_ = np.flatnonzero(beta != 0.0)
        self.n_features_in_ = p
        return self

    def predict(self, X):
        check_fitted(self, "coef_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        return self.intercept_ + X @ self.coef_


class PcrRegressor(BaseEstimator, RegressorMixin):
    """Principal-components regression on standardized columns.

    ``ncomp`` components are taken from the SVD of the standardized
    design; ncomp=0 is the intercept-only model and ncomp >= rank(X)
    recovers (minimum-norm) least squares.
    """

    def __init__(self, ncomp: int = 1):
        self.ncomp = ncomp

    def fit(self, X, y):
        if self.ncomp < 0:
            raise ValueError(f"ncomp must be >= 0, got {self.ncomp}")
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        scaler = Standardizer()
        Xs = scaler.fit_transform(X)
        y_mean = float(y.mean())
        yc = y - y_mean
        u, s, vt = np.linalg.svd(Xs, full_matrices=False)
        rank = int((s > s[0] * 1e-12).sum()) if s.size and s[0] > 0 else 0
        k = min(self.ncomp, rank)
        if k == 0:
            beta = np.zeros(Xs.shape[1])
        else:
            gamma = (u[:, :k].T @ yc) / s[:k]
            beta = vt[:k].T @ gamma
        total = float((s**2).sum())
        self.explained_variance_ratio_ = (
            np.cumsum(s**2) / total if total > 0 else np.zeros(s.size)
        )
        self.rank_ = rank
        self.ncomp_used_ = k
        self.coef_, self.intercept_ = scaler.coef_to_original(beta, y_mean)
        self.n_features_in_ = Xs.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "coef_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        return self.intercept_ + X @ self.coef_
