"""Feed-forward regression network trained with resilient backpropagation.

Up to three sigmoid hidden layers and a linear output unit, trained
full-batch with Rprop including weight backtracking: a sign flip in a
partial derivative undoes that weight's previous step and halves its
step size.  Inputs and the target are standardized internally; the
fitted map is reported on the original scale.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, RegressorMixin

from .base import Standardizer, as_matrix, as_target, check_columns, check_fitted, rng_from_seed

ETA_PLUS = 1.2
ETA_MINUS = 0.5
STEP_MIN = 1e-6
STEP_MAX = 50.0
STEP_INIT = 0.1


class RpropNetRegressor(BaseEstimator, RegressorMixin):
    """Sigmoid MLP with linear output; layer sizes of 0 drop that layer.

    With all hidden sizes 0 the network is a plain linear map and training
    converges to the least-squares fit.
    """

    def __init__(
        self,
        layer1: int = 3,
        layer2: int = 0,
        layer3: int = 0,
        max_epochs: int = 5000,
        grad_tol: float = 1e-8,
        seed: int = 0,
    ):
        self.layer1 = layer1
        self.layer2 = layer2
        self.layer3 = layer3
        self.max_epochs = max_epochs
        self.grad_tol = grad_tol
        self.seed = seed

    def _sizes(self, p: int) -> list[int]:
        widths = (self.layer1, self.layer2, self.layer3)
        for s in widths:
            if s < 0:
                raise ValueError(f"hidden layer sizes must be >= 0, got {s}")
        hidden = []
        for s in widths:
            if s == 0:
                break
            hidden.append(s)
        if any(widths[len(hidden):]):
            raise ValueError(
                f"layer widths {widths} leave a gap: a sized layer cannot "
                "follow a zero-width one"
            )
        return [p] + hidden + [1]

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_target(y, X.shape[0])
        scaler = Standardizer()
        Xs = scaler.fit_transform(X)
        y_mean = float(y.mean())
        y_scale = float(y.std()) or 1.0
        ys = (y - y_mean) / y_scale
        sizes = self._sizes(X.shape[1])
        rng = rng_from_seed(self.seed)
        weights = [rng.normal(0.0, 0.5, size=(sizes[i], sizes[i + 1])) for i in range(len(sizes) - 1)]
        biases = [rng.normal(0.0, 0.5, size=sizes[i + 1]) for i in range(len(sizes) - 1)]
        params = weights + biases
        steps = [np.full(p.shape, STEP_INIT) for p in params]
        prev_grad = [np.zeros(p.shape) for p in params]
        prev_update = [np.zeros(p.shape) for p in params]

        def forward(inputs):
            acts = [inputs]
            a = inputs
            for k in range(len(weights) - 1):
                a = expit(a @ weights[k] + biases[k])
                acts.append(a)
            acts.append(a @ weights[-1] + biases[-1])
            return acts

        n = Xs.shape[0]
        for _ in range(self.max_epochs):
            acts = forward(Xs)
            err = acts[-1][:, 0] - ys
            loss = 0.5 * float(err @ err)
            delta = err[:, None]
            w_grads = [None] * len(weights)
            b_grads = [None] * len(weights)
            for k in range(len(weights) - 1, -1, -1):
                w_grads[k] = acts[k].T @ delta
                b_grads[k] = delta.sum(axis=0)
                if k > 0:
                    a = acts[k]
                    delta = (delta @ weights[k].T) * a * (1.0 - a)
            grads = w_grads + b_grads
            max_g = max(float(np.abs(g).max()) for g in grads)
            if max_g < self.grad_tol or loss < 1e-14 * n:
                break
            for p_arr, g, st, pg, pu in zip(params, grads, steps, prev_grad, prev_update):
                g = np.asarray(g).reshape(p_arr.shape)
                sign_change = pg * g
                grew = sign_change > 0.0
                flipped = sign_change < 0.0
                st[grew] = np.minimum(st[grew] * ETA_PLUS, STEP_MAX)
                st[flipped] = np.maximum(st[flipped] * ETA_MINUS, STEP_MIN)
                update = np.where(flipped, -pu, -np.sign(g) * st)
                p_arr += update
                pu[...] = update
                pg[...] = np.where(flipped, 0.0, g)

        self.weights_ = weights
        self.biases_ = biases
        self.scaler_ = scaler
        self.y_mean_ = y_mean
        self.y_scale_ = y_scale
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "weights_")
        X = as_matrix(X)
        check_columns(X.shape[1], self.n_features_in_)
        a = self.scaler_.transform(X)
        for k in range(len(self.weights_) - 1):
            a = expit(a @ self.weights_[k] + self.biases_[k])
        out = (a @ self.weights_[-1] + self.biases_[-1])[:, 0]
        return out * self.y_scale_ + self.y_mean_
