"""Two-hidden-layer ReLU network trained with Adam and early stopping."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteLoss, TooFewSamples

HIDDEN = (16, 32)


def init_weights(n_in: int, rng, hidden=HIDDEN) -> list[np.ndarray]:
    """He-initialised [W1, b1, W2, b2, W3, b3]."""
    sizes = (n_in, *hidden, 1)
    params = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        params.append(rng.normal(0.0, np.sqrt(2.0 / a), (a, b)))
        params.append(np.zeros(b))
    return params


def forward(params, X) -> np.ndarray:
    a = X
    n_layers = len(params) // 2
    for i in range(n_layers):
        z = a @ params[2 * i] + params[2 * i + 1]
        a = np.maximum(z, 0.0) if i < n_layers - 1 else z
    return a[:, 0]


def loss_and_grads(params, X, y) -> tuple[float, list[np.ndarray]]:
    """Half mean squared error and its gradient with respect to every array."""
    n = len(y)
    acts = [X]
    pre = []
    n_layers = len(params) // 2
    a = X
    for i in range(n_layers):
        z = a @ params[2 * i] + params[2 * i + 1]
        pre.append(z)
        a = np.maximum(z, 0.0) if i < n_layers - 1 else z
        acts.append(a)
    resid = a[:, 0] - y
    loss = 0.5 * float(np.mean(resid**2))
    delta = (resid / n)[:, None]
    grads = [None] * len(params)
    for i in reversed(range(n_layers)):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i:
            delta = (delta @ params[2 * i].T) * (pre[i - 1] > 0)
    return loss, grads


class MlpRegressor:
    """D -> 16 -> 32 -> 1 regression network.

    The last ``val_fraction`` of the training rows (in the given order) is
    held out for early stopping: training ends once validation MAE has not
    improved by ``min_improvement_frac * max(y)`` for ``patience`` epochs,
    and the best weights are restored. Targets are standardised internally.
    """

    def __init__(self, learning_rate: float = 1e-3, batch_size: int = 256, max_epochs: int = 300,
                 patience: int = 15, val_fraction: float = 0.2, min_improvement_frac: float = 0.01,
                 seed: int = 0):
        self.learning_rate = float(learning_rate)
        self.batch_size = int(batch_size)
        self.max_epochs = int(max_epochs)
        self.patience = int(patience)
        self.val_fraction = float(val_fraction)
        self.min_improvement_frac = float(min_improvement_frac)
        self.seed = seed

    def fit(self, X, y) -> "MlpRegressor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(y)
        if n < 50:
            raise TooFewSamples("MLP needs at least 50 rows")
        rng = np.random.default_rng(self.seed)
        self.y_mean_ = float(np.mean(y))
        sd = float(np.std(y))
        self.y_scale_ = sd if sd > 0 else 1.0
        ys = (y - self.y_mean_) / self.y_scale_

        n_val = max(1, int(round(self.val_fraction * n)))
        Xt, yt = X[: n - n_val], ys[: n - n_val]
        Xv, yv = X[n - n_val:], y[n - n_val:]
        min_gain = self.min_improvement_frac * float(np.max(np.abs(y)))

        params = init_weights(X.shape[1], rng)
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        b1, b2, eps = 0.9, 0.999, 1e-8
        step = 0
        best_err = np.inf
        best = [p.copy() for p in params]
        stale = 0
        self.history_ = []
        for epoch in range(self.max_epochs):
            order = rng.permutation(len(yt))
            for s in range(0, len(order), self.batch_size):
                idx = order[s: s + self.batch_size]
                loss, grads = loss_and_grads(params, Xt[idx], yt[idx])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}, step {step}")
                step += 1
                for i, g in enumerate(grads):
                    m[i] = b1 * m[i] + (1 - b1) * g
                    v[i] = b2 * v[i] + (1 - b2) * g * g
                    mh = m[i] / (1 - b1**step)
                    vh = v[i] / (1 - b2**step)
                    params[i] = params[i] - self.learning_rate * mh / (np.sqrt(vh) + eps)
            pred = forward(params, Xv) * self.y_scale_ + self.y_mean_
            err = float(np.mean(np.abs(yv - pred)))
            if not np.isfinite(err):
                raise NonFiniteLoss(f"validation error became {err} at epoch {epoch}")
            self.history_.append(err)
            if err < best_err - min_gain or epoch == 0:
                best_err = err
                best = [p.copy() for p in params]
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        self.params_ = best
        self.best_val_mae_ = best_err
        self.n_epochs_ = len(self.history_)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return forward(self.params_, X) * self.y_scale_ + self.y_mean_
