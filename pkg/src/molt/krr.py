"""Kernel ridge regression with the cosine kernel."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_features, check_is_fitted, check_targets


class SingularKernelError(np.linalg.LinAlgError):
    pass


def _row_norms(X, name):
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms == 0)
    if len(bad):
        raise ValueError(f"zero-norm row {int(bad[0])} in {name}; cosine kernel undefined")
    return norms


def cosine_kernel(X, Y=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    Xn = X / _row_norms(X, "X")[:, None]
    Yn = Y / _row_norms(Y, "Y")[:, None]
    return np.clip(Xn @ Yn.T, -1.0, 1.0)


@dataclass(frozen=True)
class KrrModel:
    alpha: float
    train_X: np.ndarray
    dual_coeffs: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0


def solve_dual(K, y, alpha):
    """Solve ``(K + alpha I) a = y``; Cholesky first, pivoted LU as fallback."""
    A = K + alpha * np.eye(len(K))
    try:
        c = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        d = np.abs(np.diag(c[0]))
        if (d.min() / d.max()) ** 2 > len(A) * np.finfo(float).eps:
            return scipy.linalg.cho_solve(c, y, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(A, y, assume_a="gen")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            hint = " use alpha > 0" if alpha == 0 else ""
            raise SingularKernelError(f"kernel system is singular at alpha={alpha};{hint}") from None


def krr_fit(X, y, alpha=1.12, standardize=True) -> KrrModel:
    X = check_features(X)
    y = check_targets(y, len(X))
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    mu, scale = 0.0, 1.0
    if standardize:
        mu = float(y.mean())
        sd = float(y.std())
        scale = sd if sd > 0 else 1.0
    z = (y - mu) / scale
    K = cosine_kernel(X)
    a = solve_dual(K, z, alpha)
    return KrrModel(float(alpha), X.copy(), a, mu, scale)


def krr_predict(model: KrrModel, X_query):
    Xq = check_features(X_query, model.train_X.shape[1])
    return model.y_mean + model.y_scale * (cosine_kernel(Xq, model.train_X) @ model.dual_coeffs)


class CosineKernelRidge(RegressorMixin, BaseEstimator):
    """Kernel ridge regressor on the cosine kernel; targets are standardized internally."""

    def __init__(self, alpha=1.12, standardize=True):
        self.alpha = alpha
        self.standardize = standardize

    def fit(self, X, y):
        self.model_ = krr_fit(X, y, self.alpha, self.standardize)
        self.n_features_in_ = self.model_.train_X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return krr_predict(self.model_, X)

    @property
    def dual_coef_(self):
        check_is_fitted(self, "model_")
        return self.model_.dual_coeffs
