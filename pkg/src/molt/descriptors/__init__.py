"""Fixed-width molecular feature vectors: SOAP, simple descriptors and PCA."""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.pipeline import FeatureUnion

from .._validation import check_features, check_is_fitted, check_molecules
from ..chemdata import species_of
from .pca import PcaModel, pca_fit, pca_inverse_transform, pca_transform
from .simple import simple_descriptor_labels, simple_descriptors
from .soap import (
    SoapParams,
    power_spectrum,
    real_sph_harm,
    soap_atomic,
    soap_coefficients,
    soap_column_labels,
    soap_molecular,
)

KINDS = ("soap_atomic", "soap_molecular", "sd", "pca", "soap+sd")


@dataclass
class DescriptorMatrix:
    rows: np.ndarray
    column_labels: list
    kind: str
    row_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.rows.shape[1] != len(self.column_labels):
            raise ValueError(f"{self.rows.shape[1]} columns but {len(self.column_labels)} labels")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("descriptor matrix contains non-finite entries")

    def to_csv(self, path):
        header = (["id"] if self.row_ids else []) + list(self.column_labels)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for i, row in enumerate(self.rows):
                cells = [f"{v:.17g}" for v in row]
                if self.row_ids:
                    cells.insert(0, self.row_ids[i])
                fh.write(",".join(cells) + "\n")


class SoapFeaturizer(TransformerMixin, BaseEstimator):
    """Molecule-averaged SOAP power spectrum.

    ``species=None`` takes the sorted set of elements seen in ``fit``.
    """

    def __init__(self, r_cut=5.63, n_max=7, l_max=7, sigma=1.0, species=None):
        self.r_cut = r_cut
        self.n_max = n_max
        self.l_max = l_max
        self.sigma = sigma
        self.species = species

    def fit(self, X, y=None):
        mols = check_molecules(X)
        species = self.species if self.species is not None else species_of(mols)
        self.params_ = SoapParams(self.r_cut, self.n_max, self.l_max, self.sigma, tuple(sorted(species)))
        self.n_features_out_ = self.params_.n_features
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        mols = check_molecules(X)
        return np.array([soap_molecular(m, self.params_) for m in mols]).reshape(len(mols), -1)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "params_")
        return np.array(soap_column_labels(self.params_), dtype=object)


class SimpleDescriptorFeaturizer(TransformerMixin, BaseEstimator):
    def __init__(self, species=None, cc_bond_cut=1.8):
        self.species = species
        self.cc_bond_cut = cc_bond_cut

    def fit(self, X, y=None):
        mols = check_molecules(X)
        self.species_ = sorted(self.species) if self.species is not None else species_of(mols)
        return self

    def transform(self, X):
        check_is_fitted(self, "species_")
        mols = check_molecules(X)
        out = [simple_descriptors(m, self.species_, self.cc_bond_cut) for m in mols]
        return np.array(out).reshape(len(mols), -1)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "species_")
        return np.array(simple_descriptor_labels(self.species_), dtype=object)


def soap_sd_union(r_cut=9.71, n_max=5, l_max=8, sigma=1.0, species=None, cc_bond_cut=1.8):
    """SOAP block followed by the simple descriptors, as used for boosting."""
    return FeatureUnion([
        ("soap", SoapFeaturizer(r_cut, n_max, l_max, sigma, species)),
        ("sd", SimpleDescriptorFeaturizer(species, cc_bond_cut)),
    ])


class PCACompressor(TransformerMixin, BaseEstimator):
    def __init__(self, retained_fraction=0.99999):
        self.retained_fraction = retained_fraction

    def fit(self, X, y=None):
        X = check_features(X)
        self.model_ = pca_fit(X, self.retained_fraction)
        self.n_features_in_ = X.shape[1]
        self.n_components_ = self.model_.n_components
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return pca_transform(self.model_, check_features(X, self.n_features_in_))

    def inverse_transform(self, Z):
        check_is_fitted(self, "model_")
        return pca_inverse_transform(self.model_, Z)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "model_")
        return np.array([f"pc{i}" for i in range(self.n_components_)], dtype=object)
