"""Gaussian mixture fitting by expectation-maximisation and likelihood filtering.

Restarts are seeded from ``(seed, k, restart)`` and initialised with
k-means++ centres; the restart with the highest final log-likelihood wins.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateComponent, DimensionMismatch, InvalidConfig, TooFewSamples
from .stats import tukey_fences

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
MIN_WEIGHT = 1e-8


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 200
    tol: float = 1e-5
    n_init: int = 5
    cov_reg: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidConfig("max_iter must be >= 1")
        if not self.tol > 0:
            raise InvalidConfig("tol must be positive")
        if self.n_init < 1:
            raise InvalidConfig("n_init must be >= 1")
        if self.cov_reg < 0:
            raise InvalidConfig("cov_reg must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    converged: bool = False
    final_loglik: float = float("nan")
    n_iter: int = 0
    seed: int = 0
    history: list = field(default_factory=list)  # mean log-likelihood per E-step

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "converged": self.converged,
            "final_loglik": self.final_loglik,
            "n_iter": self.n_iter,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GmmModel":
        return cls(
            np.asarray(d["weights"], dtype=float),
            np.asarray(d["means"], dtype=float),
            np.asarray(d["covariances"], dtype=float),
            bool(d.get("converged", False)),
            float(d.get("final_loglik", float("nan"))),
            int(d.get("n_iter", 0)),
            int(d.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "GmmModel":
        return cls.from_dict(json.loads(text))


def logsumexp(a, axis=1, keepdims=False) -> np.ndarray:
    """Row-wise log(sum(exp(a))) shifted by the row maximum; rows of -inf give -inf."""
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return out if keepdims else np.squeeze(out, axis=axis)


def _component_logpdf(X, means, covs) -> np.ndarray:
    """N x k matrix of log N(x_n | mu_j, Sigma_j)."""
    n, d = X.shape
    out = np.empty((n, len(means)))
    for j, (mu, cov) in enumerate(zip(means, covs)):
        L = np.linalg.cholesky(cov)
        # whiten with the inverse Cholesky factor: z = L^-1 (x - mu)
        z = (X - mu) @ np.linalg.inv(L).T
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, j] = -0.5 * (d * LOG_2PI + logdet + np.einsum("ij,ij->i", z, z))
    return out


def _weighted_log_prob(X, model_like) -> np.ndarray:
    w, means, covs = model_like
    with np.errstate(divide="ignore"):
        return _component_logpdf(X, means, covs) + np.log(w)


def score_samples(model: GmmModel, X) -> np.ndarray:
    """Per-row log density of the full mixture (log-sum-exp stabilised)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model has {model.n_features} features, got {X.shape[1]}")
    lp = _weighted_log_prob(X, (model.weights, model.means, model.covariances))
    return logsumexp(lp, axis=1)


def responsibilities(model: GmmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lp = _weighted_log_prob(X, (model.weights, model.means, model.covariances))
    return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


def kmeanspp_centres(X, k, rng) -> np.ndarray:
    n = len(X)
    centres = [X[rng.integers(n)]]
    d2 = np.sum((X - centres[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centres.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centres)


def _m_step(X, resp, cov_reg):
    n, d = X.shape
    nk = resp.sum(axis=0)
    weights = nk / n
    safe = np.maximum(nk, np.finfo(float).tiny)
    means = (resp.T @ X) / safe[:, None]
    covs = np.empty((len(nk), d, d))
    for j in range(len(nk)):
        diff = X - means[j]
        covs[j] = (resp[:, j, None] * diff).T @ diff / safe[j]
        covs[j] = 0.5 * (covs[j] + covs[j].T) + cov_reg * np.eye(d)
    return weights, means, covs


def _reset_component(X, params, j, ll_rows, cov_reg):
    """Re-seed component ``j`` at the worst-explained point with the data covariance."""
    w, means, covs = params
    means = means.copy()
    covs = covs.copy()
    w = w.copy()
    means[j] = X[int(np.argmin(ll_rows))]
    covs[j] = np.atleast_2d(np.cov(X.T, bias=True)) + cov_reg * np.eye(X.shape[1])
    w[j] = 1.0 / len(w)
    return w / w.sum(), means, covs


def _run_em(X, k, cfg: EmConfig, rng):
    n, d = X.shape
    centres = kmeanspp_centres(X, k, rng)
    dist = ((X[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((n, k))
    resp[np.arange(n), np.argmin(dist, axis=1)] = 1.0
    params = _m_step(X, resp, cfg.cov_reg)
    empty = params[0] < MIN_WEIGHT
    if empty.any():
        w, means, covs = params
        global_cov = np.atleast_2d(np.cov(X.T, bias=True)) + cfg.cov_reg * np.eye(d)
        means[empty] = centres[empty]
        covs[empty] = global_cov
        w = np.where(empty, 1.0 / k, w)
        params = (w / w.sum(), means, covs)

    history = []
    resets = 0
    converged = False
    for it in range(cfg.max_iter):
        lp = _weighted_log_prob(X, params)
        ll_rows = logsumexp(lp, axis=1)
        mean_ll = float(ll_rows.mean())
        history.append(mean_ll)
        if it > 0 and abs(mean_ll - history[-2]) <= cfg.tol * abs(history[-2]):
            converged = True
            break
        if it == cfg.max_iter - 1:
            break
        resp = np.exp(lp - ll_rows[:, None])
        params = _m_step(X, resp, cfg.cov_reg)
        small = np.flatnonzero(params[0] < MIN_WEIGHT)
        if len(small):
            resets += 1
            if resets > 1:
                raise DegenerateComponent("component weight underflow recurred")
            for j in small:
                params = _reset_component(X, params, j, ll_rows, cfg.cov_reg)
    return params, history, converged, float(ll_rows.sum())


def gmm_fit(X, k: int, cfg: EmConfig | None = None) -> GmmModel:
    """Fit a k-component full-covariance mixture to a scaled N x D matrix."""
    cfg = cfg or EmConfig()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    if len(X) < 10 * k:
        raise TooFewSamples(f"need >= {10 * k} rows for k={k}, got {len(X)}")
    best = None
    failures = 0
    for restart in range(cfg.n_init):
        rng = np.random.default_rng([cfg.seed, k, restart])
        try:
            params, history, converged, total = _run_em(X, k, cfg, rng)
        except (DegenerateComponent, np.linalg.LinAlgError) as exc:
            failures += 1
            log.debug("EM restart %d for k=%d discarded: %s", restart, k, exc)
            continue
        if best is None or total > best[3]:
            best = (params, history, converged, total)
    if best is None:
        raise DegenerateComponent(f"all {cfg.n_init} EM restarts degenerated for k={k}")
    (w, means, covs), history, converged, total = best
    return GmmModel(w, means, covs, converged, total, len(history), cfg.seed, history)


def gmm_boxplot_filter(X, model: GmmModel, strict: bool = True) -> np.ndarray:
    """Keep flags: rows whose mixture log-likelihood is below the lower fence go.

    High-likelihood rows are never removed. In relaxed mode (``strict`` off)
    a score equal to the lower fence is removed as well, unless the IQR is 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) < 5:
        raise TooFewSamples("box-plot filtering needs >= 5 rows")
    scores = score_samples(model, X)
    fences = tukey_fences(scores)
    if not strict and fences.upper > fences.lower:
        return scores > fences.lower
    return scores >= fences.lower
