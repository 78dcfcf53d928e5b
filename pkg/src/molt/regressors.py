"""Estimator wrappers for the neural models (fit/predict with internal label scaling)."""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import check_features, check_is_fitted, check_molecules, check_targets
from .autodiff import make_rng
from .nets import MLP, MlpConfig, PaiNN, PainnConfig
from .trainer import TrainConfig, train
from .transfer import scaler_fit


def _holdout(n, fraction, seed):
    """Seeded (train, val) index split used when no validation data is given."""
    n_val = max(1, int(np.floor(fraction * n)))
    order = make_rng(seed, "holdout").permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


class _NetworkRegressor(RegressorMixin, BaseEstimator):
    def _train_config(self):
        return TrainConfig(
            lr=self.lr, batch_size=self.batch_size, max_epochs=self.max_epochs,
            lr_decay_factor=self.lr_decay_factor, lr_decay_patience=self.lr_decay_patience,
            early_stop_patience=self.early_stop_patience, seed=self.random_state,
        )

    def _fit(self, inputs, y, val_inputs, y_val, take):
        if val_inputs is None:
            tr, va = _holdout(len(y), self.validation_fraction, self.random_state)
            inputs, val_inputs = take(inputs, tr), take(inputs, va)
            y, y_val = y[tr], y[va]
        self.scaler_ = scaler_fit(y)
        self.network_ = self._build()
        self.network_, self.report_ = train(
            self.network_, (inputs, self.scaler_.apply(y)), (val_inputs, self.scaler_.apply(y_val)),
            self._train_config(),
        )
        return self

    def _predict(self, inputs):
        check_is_fitted(self, "network_")
        return self.scaler_.invert(self.network_.predict(inputs))


class SoapMLPRegressor(_NetworkRegressor):
    """Feed-forward regressor on (typically PCA-compressed) descriptor rows."""

    def __init__(self, n_layers=2, dropout_p=0.3, lr=0.00860, batch_size=10, max_epochs=200,
                 lr_decay_factor=0.5, lr_decay_patience=5, early_stop_patience=30,
                 validation_fraction=0.2, random_state=0):
        self.n_layers = n_layers
        self.dropout_p = dropout_p
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.lr_decay_factor = lr_decay_factor
        self.lr_decay_patience = lr_decay_patience
        self.early_stop_patience = early_stop_patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _build(self):
        cfg = MlpConfig(self.n_features_in_, self.n_layers, self.dropout_p, "swish", self.lr)
        return MLP(cfg, seed=self.random_state)

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_features(X)
        y = check_targets(y, len(X))
        self.n_features_in_ = X.shape[1]
        if X_val is not None:
            X_val = check_features(X_val, X.shape[1])
            y_val = check_targets(y_val, len(X_val))
        return self._fit(X, y, X_val, y_val, lambda a, idx: a[idx])

    def predict(self, X):
        check_is_fitted(self, "network_")
        return self._predict(check_features(X, self.n_features_in_))


class PaiNNRegressor(_NetworkRegressor):
    """PaiNN on molecules; ``elements=None`` takes the elements seen in ``fit``."""

    def __init__(self, r_cut=5.0, n_rbf=20, n_atom_basis=30, n_interactions=3, readout="mean",
                 elements=None, lr=5e-4, batch_size=10, max_epochs=200, lr_decay_factor=0.5,
                 lr_decay_patience=5, early_stop_patience=30, validation_fraction=0.2, random_state=0):
        self.r_cut = r_cut
        self.n_rbf = n_rbf
        self.n_atom_basis = n_atom_basis
        self.n_interactions = n_interactions
        self.readout = readout
        self.elements = elements
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.lr_decay_factor = lr_decay_factor
        self.lr_decay_patience = lr_decay_patience
        self.early_stop_patience = early_stop_patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _build(self):
        cfg = PainnConfig(self.r_cut, self.n_rbf, self.n_atom_basis, self.n_interactions,
                          "cosine", self.readout, tuple(self.elements_))
        return PaiNN(cfg, seed=self.random_state)

    def fit(self, X, y, X_val=None, y_val=None):
        mols = check_molecules(X)
        y = check_targets(y, len(mols))
        val = check_molecules(X_val) if X_val is not None else None
        if val is not None:
            y_val = check_targets(y_val, len(val))
        seen = {int(z) for m in mols + (val or []) for z in m.atomic_numbers}
        self.elements_ = sorted(self.elements) if self.elements is not None else sorted(seen)
        return self._fit(mols, y, val, y_val, lambda a, idx: [a[i] for i in idx])

    def predict(self, X):
        return self._predict(check_molecules(X))
