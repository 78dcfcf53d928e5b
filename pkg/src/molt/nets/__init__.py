"""Neural regressors: the descriptor MLP and the PaiNN message-passing network."""
from .base import Network
from .basis import cosine_cutoff, gaussian_rbf
from .mlp import MLP, MlpConfig, mlp_forward
from .painn import MolecularGraph, PaiNN, PainnConfig, build_graph, collate, painn_forward

NETWORKS = {"mlp": (MLP, MlpConfig), "painn": (PaiNN, PainnConfig)}


def build_network(kind, config_dict, seed=0):
    try:
        cls, cfg_cls = NETWORKS[kind]
    except KeyError:
        raise ValueError(f"unknown network kind {kind!r}") from None
    cfg = dict(config_dict)
    if "elements" in cfg:
        cfg["elements"] = tuple(cfg["elements"])
    return cls(cfg_cls(**cfg), seed=seed)
