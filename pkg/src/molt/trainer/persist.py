"""Conversion between fitted models and checkpoint containers."""
import numpy as np

from ..descriptors.pca import PcaModel
from ..gboost import GboostModel, RegressionTree
from ..krr import KrrModel
from ..nets import Network, build_network
from .checkpoint import CheckpointError, ModelCheckpoint


def to_checkpoint(model, scaler=None, provenance=None, extra_config=None, pca=None) -> ModelCheckpoint:
    extra_config = dict(extra_config or {})
    if isinstance(model, Network):
        ckpt = ModelCheckpoint(model.kind, {"model": model.config_dict()}, model.state_dict())
    elif isinstance(model, KrrModel):
        ckpt = ModelCheckpoint(
            "krr",
            {"model": {"alpha": model.alpha, "y_mean": model.y_mean, "y_scale": model.y_scale}},
            {"train_X": model.train_X, "dual_coeffs": model.dual_coeffs},
        )
    elif isinstance(model, GboostModel):
        cfg = {
            "base_value": model.base_value,
            "learning_rate": model.learning_rate,
            "n_trees": len(model.trees),
            "n_features": model.n_features,
            "max_depth": model.trees[0].max_depth if model.trees else 0,
        }
        tensors = {}
        for t, tree in enumerate(model.trees):
            tensors[f"tree.{t}.feature"] = tree.feature
            tensors[f"tree.{t}.threshold"] = tree.threshold
            tensors[f"tree.{t}.left"] = tree.left
            tensors[f"tree.{t}.right"] = tree.right
            tensors[f"tree.{t}.value"] = tree.value
        ckpt = ModelCheckpoint("gboost", {"model": cfg}, tensors)
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    if pca is not None:
        extra_config["pca"] = {"retained_fraction": pca.retained_fraction,
                               "total_variance": pca.total_variance,
                               "zero_variance": pca.zero_variance}
        ckpt.tensors["pca.mean"] = pca.mean
        ckpt.tensors["pca.components"] = pca.components
        ckpt.tensors["pca.explained_variance"] = pca.explained_variance
    ckpt.config.update(extra_config)
    ckpt.scaler = None if scaler is None else (float(scaler[0]), float(scaler[1]))
    ckpt.provenance = dict(provenance or {})
    return ckpt


def from_checkpoint(ckpt: ModelCheckpoint):
    """Rebuild the fitted model stored in ``ckpt`` (PCA, if any, via ``pca_from_checkpoint``)."""
    cfg = ckpt.config.get("model")
    if cfg is None:
        raise CheckpointError("checkpoint config lacks a 'model' entry")
    t = ckpt.tensors
    if ckpt.kind in ("mlp", "painn"):
        net = build_network(ckpt.kind, cfg)
        net.load_state_dict({k: v for k, v in t.items() if not k.startswith("pca.")})
        return net
    if ckpt.kind == "krr":
        return KrrModel(cfg["alpha"], t["train_X"], t["dual_coeffs"], cfg["y_mean"], cfg["y_scale"])
    if ckpt.kind == "gboost":
        trees = [
            RegressionTree(t[f"tree.{i}.feature"], t[f"tree.{i}.threshold"], t[f"tree.{i}.left"],
                           t[f"tree.{i}.right"], t[f"tree.{i}.value"], cfg["max_depth"])
            for i in range(cfg["n_trees"])
        ]
        return GboostModel(cfg["base_value"], cfg["learning_rate"], trees, cfg["n_features"])
    raise CheckpointError(f"unknown model kind {ckpt.kind!r}")


def pca_from_checkpoint(ckpt: ModelCheckpoint):
    if "pca" not in ckpt.config:
        return None
    c = ckpt.config["pca"]
    t = ckpt.tensors
    return PcaModel(t["pca.mean"], t["pca.components"], t["pca.explained_variance"],
                    c["retained_fraction"], c["zero_variance"], c["total_variance"])
