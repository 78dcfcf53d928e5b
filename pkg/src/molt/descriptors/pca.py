"""Variance-retaining principal component compression."""
from dataclasses import dataclass

import numpy as np

CUMULATIVE_TOL = 1e-12


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    retained_fraction: float
    zero_variance: bool = False
    total_variance: float = 0.0

    @property
    def n_components(self):
        return len(self.components)

    @property
    def explained_fraction(self):
        total = self.total_variance
        return float(self.explained_variance.sum() / total) if total > 0 else 1.0


def pca_fit(X, retained_fraction=0.99999) -> PcaModel:
    """Smallest principal subspace whose cumulative variance reaches the target.

    Variances use the unbiased (M - 1) normalization. Component signs are
    fixed so each component's largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError(f"pca_fit needs at least 2 rows, got shape {X.shape}")
    if not 0 < retained_fraction <= 1:
        raise ValueError(f"retained_fraction must be in (0, 1], got {retained_fraction}")
    mean = X.mean(axis=0)
    _, sing, vt = np.linalg.svd(X - mean, full_matrices=False)
    variances = sing**2 / (len(X) - 1)
    total = float(variances.sum())
    if total <= 0:
        k = 1
        zero = True
    else:
        cum = np.cumsum(variances) / total
        k = int(np.searchsorted(cum, retained_fraction - CUMULATIVE_TOL) + 1)
        k = min(k, len(variances))
        zero = False
    comps = vt[:k].copy()
    idx = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), idx])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    return PcaModel(mean, comps, variances[:k].copy(), float(retained_fraction), zero, total)


def pca_transform(model: PcaModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.mean):
        raise ValueError(f"expected {len(model.mean)} columns, got shape {X.shape}")
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, Z):
    return np.asarray(Z, dtype=np.float64) @ model.components + model.mean
