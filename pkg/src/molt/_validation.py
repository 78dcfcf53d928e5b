"""Input checks shared by the estimators."""
import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted  # noqa: F401

from .chemdata import LabeledDataset, Molecule


def check_molecules(X):
    """Accept a LabeledDataset, a single Molecule or an iterable of Molecules."""
    if isinstance(X, LabeledDataset):
        return list(X.molecules)
    if isinstance(X, Molecule):
        return [X]
    mols = list(X)
    for i, m in enumerate(mols):
        if not isinstance(m, Molecule):
            raise TypeError(f"element {i} is {type(m).__name__}, expected Molecule")
    return mols


def check_features(X, n_features=None):
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_targets(y, n_samples=None):
    y = check_array(y, ensure_2d=False, dtype=np.float64, ensure_all_finite=True).reshape(-1)
    if n_samples is not None and len(y) != n_samples:
        raise ValueError(f"got {len(y)} targets for {n_samples} samples")
    return y
