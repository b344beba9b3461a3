"""Quartiles, Tukey fences, robust scaling, Mahalanobis distance, chi-square
quantiles and regression error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    NonFinite,
    SingularCovariance,
    ZeroTarget,
)

FENCE_FACTOR = 1.5
COV_JITTER = 1e-9


@dataclass(frozen=True)
class QuartileSummary:
    q0: float
    q1: float
    q2: float
    q3: float
    q4: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


@dataclass(frozen=True)
class TukeyFences:
    lower: float
    upper: float
    relaxed: bool = False


def _finite_1d(values) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInput("need at least one value")
    if not np.all(np.isfinite(x)):
        raise NonFinite("values must be finite")
    return x


def quartiles(values) -> QuartileSummary:
    """Five-number summary using linear interpolation between order statistics."""
    x = _finite_1d(values)
    q = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0])
    return QuartileSummary(*(float(v) for v in q))


def tukey_fences(values, relaxed: bool = False) -> TukeyFences:
    s = quartiles(values)
    return TukeyFences(s.q1 - FENCE_FACTOR * s.iqr, s.q3 + FENCE_FACTOR * s.iqr, relaxed)


def tukey_flags(values, relaxed: bool = False) -> np.ndarray:
    """Boolean outlier flags from the 1.5 IQR box-plot rule.

    Relaxed mode uses inclusive comparisons at the fences. When the IQR is
    zero the fences collapse onto the dense mass, so only values strictly
    outside them are flagged in either mode.
    """
    x = _finite_1d(values)
    f = tukey_fences(x, relaxed)
    if relaxed and f.upper > f.lower:
        return (x <= f.lower) | (x >= f.upper)
    return (x < f.lower) | (x > f.upper)


@dataclass(frozen=True)
class RobustScalerModel:
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    scale: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.q2)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("q1", "q2", "q3", "scale")}


def _as_2d(matrix) -> np.ndarray:
    X = np.asarray(matrix, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch("expected an N x D matrix")
    return X


def robust_fit(matrix) -> RobustScalerModel:
    X = _as_2d(matrix)
    if X.shape[0] == 0:
        raise EmptyInput("robust_fit needs at least one row")
    q1, q2, q3 = np.quantile(X, [0.25, 0.5, 0.75], axis=0)
    iqr = q3 - q1
    scale = np.where(iqr > 0, iqr, 1.0)
    return RobustScalerModel(q1, q2, q3, scale)


def robust_apply(model: RobustScalerModel, matrix) -> np.ndarray:
    X = _as_2d(matrix)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"scaler has {model.n_features} features, got {X.shape[1]}")
    return (X - model.q2) / model.scale


def robust_invert(model: RobustScalerModel, scaled) -> np.ndarray:
    Z = _as_2d(scaled)
    if Z.shape[1] != model.n_features:
        raise DimensionMismatch(f"scaler has {model.n_features} features, got {Z.shape[1]}")
    return Z * model.scale + model.q2


def regularized_cholesky(cov) -> np.ndarray:
    """Lower Cholesky factor of ``cov`` after trace-scaled diagonal jitter."""
    S = np.atleast_2d(np.asarray(cov, dtype=float))
    d = S.shape[0]
    if S.shape != (d, d):
        raise DimensionMismatch("covariance must be square")
    if not np.all(np.isfinite(S)):
        raise SingularCovariance("covariance has non-finite entries")
    jitter = COV_JITTER * max(np.trace(S), 0.0) / d
    try:
        L = np.linalg.cholesky(S + jitter * np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("covariance is not positive definite") from exc
    if not np.all(np.diag(L) > 0):
        raise SingularCovariance("covariance is not positive definite")
    return L


def mahalanobis_sq(x, mean, cov) -> np.ndarray | float:
    """Squared Mahalanobis distance of one point or each row of ``x``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != len(mean):
        raise DimensionMismatch("x and mean differ in dimension")
    L = regularized_cholesky(cov)
    if L.shape[0] != len(mean):
        raise DimensionMismatch("cov and mean differ in dimension")
    from scipy.linalg import solve_triangular

    Z = solve_triangular(L, (X - mean).T, lower=True)
    d2 = np.sum(Z * Z, axis=0)
    return float(d2[0]) if single else d2


# regularized incomplete gamma, series + Lentz continued fraction
_GAMMA_EPS = 1e-15
_GAMMA_ITMAX = 10_000


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_ITMAX):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_cfrac(a, x)


def chi2_cdf(x: float, dof: int) -> float:
    return gamma_p(0.5 * dof, 0.5 * x)


def chi2_quantile(dof: int, p: float, tol: float = 1e-10) -> float:
    """Inverse chi-square CDF by bisection on the incomplete gamma function."""
    if int(dof) != dof or dof < 1:
        raise ValueError("dof must be a positive integer")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    lo, hi = 0.0, max(1.0, float(dof))
    while chi2_cdf(hi, dof) < p:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if len(y) != len(yhat):
        raise LengthMismatch(f"{len(y)} targets vs {len(yhat)} predictions")
    if len(y) == 0:
        raise EmptyInput("metrics need at least one pair")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mape(y, yhat) -> float:
    """Mean absolute percentage error in percent; targets must be non-zero."""
    y, yhat = _pair(y, yhat)
    if np.any(y == 0):
        raise ZeroTarget("MAPE is undefined for zero targets")
    return float(100.0 * np.mean(np.abs(y - yhat) / np.abs(y)))
