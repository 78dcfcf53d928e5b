"""Experiment configuration: a YAML document validated into nested dataclasses.

Unknown keys are rejected at every level. Values are checked against the
invariants of the domain types they feed (SoapParams, PainnConfig, ...).
"""
from __future__ import annotations

import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class DataSection:
    structures: str = ""
    labels: str = ""
    unit: str = "dimensionless"
    cheap_labels: str = ""
    split: list = field(default_factory=lambda: [0.6, 0.2, 0.2])
    forbidden: list = field(default_factory=list)
    required: list = field(default_factory=list)


@dataclass
class SoapSection:
    r_cut: float = 5.63
    n_max: int = 7
    l_max: int = 7
    sigma: float = 1.0
    species: list = field(default_factory=list)


@dataclass
class FeatureSection:
    kind: str = "soap"
    soap: SoapSection = field(default_factory=SoapSection)
    cc_bond_cut: float = 1.8
    pca_retained: float = 0.99999


@dataclass
class KrrSection:
    alpha: float = 1.12


@dataclass
class GboostSection:
    n_estimators: int = 295
    learning_rate: float = 0.059
    max_depth: int = 4
    min_leaf: int = 1


@dataclass
class MlpSection:
    n_layers: int = 2
    dropout_p: float = 0.3
    lr: float = 0.00860


@dataclass
class PainnSection:
    r_cut: float = 5.0
    n_rbf: int = 20
    n_atom_basis: int = 30
    n_interactions: int = 3
    readout: str = "mean"
    elements: list = field(default_factory=list)


@dataclass
class TrainSection:
    lr: float = 5e-4
    batch_size: int = 10
    max_epochs: int = 200
    lr_decay_factor: float = 0.5
    lr_decay_patience: int = 5
    early_stop_patience: int = 30
    n_runs: int = 5


@dataclass
class TransferSection:
    pretrain_structures: str = ""
    pretrain_labels: str = ""
    pretrain_unit: str = "dimensionless"
    pretrain_split: list = field(default_factory=lambda: [0, 0, 0])
    pretrain_epochs: int = 200
    n_seeds: int = 3
    checkpoint: str = ""
    discriminative: bool = False
    factor: float = 5.0


@dataclass
class CurveSection:
    sizes: list = field(default_factory=list)
    axis: str = "finetune"
    arms: list = field(default_factory=lambda: ["scratch", "finetune"])


@dataclass
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "out"
    jobs: int = 1
    data: DataSection = field(default_factory=DataSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    krr: KrrSection = field(default_factory=KrrSection)
    gboost: GboostSection = field(default_factory=GboostSection)
    mlp: MlpSection = field(default_factory=MlpSection)
    painn: PainnSection = field(default_factory=PainnSection)
    train: TrainSection = field(default_factory=TrainSection)
    transfer: TransferSection = field(default_factory=TransferSection)
    curve: CurveSection = field(default_factory=CurveSection)
    base_dir: str = field(default=".", repr=False, metadata={"internal": True})

    def path(self, value):
        """Resolve a config-relative path."""
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _coerce(tp, value, where):
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
        return _build(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, (str, int, float)) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return str(value)
    if tp is list:
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return list(value)
    raise ConfigError(f"{where}: unsupported type {tp}")


def _build(cls, data, where=""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if not f.metadata.get("internal")}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where or 'top level'}")
    kwargs = {k: _coerce(hints[k], v, f"{where}.{k}".lstrip(".")) for k, v in data.items()}
    return cls(**kwargs)


def _set_path(tree, dotted, value):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read YAML (optional) and apply ``key.path=value`` overrides; overrides win."""
    data = {}
    base = "."
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        except yaml.YAMLError as err:
            raise ConfigError(f"invalid YAML in {path}: {err}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        base = str(path.parent)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        key, raw = item.split("=", 1)
        _set_path(data, key.strip(), yaml.safe_load(raw))
    cfg = _build(ExperimentConfig, data)
    cfg.base_dir = base
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    """Check every section against the invariants of the types it feeds."""
    from .chemdata import UNITS, SplitSpec, _as_z_set
    from .descriptors import SoapParams
    from .nets import MlpConfig, PainnConfig
    from .trainer import TrainConfig

    try:
        SplitSpec(tuple(cfg.data.split), cfg.seed)
        for unit in (cfg.data.unit, cfg.transfer.pretrain_unit):
            if unit not in UNITS:
                raise ValueError(f"unit must be one of {UNITS}, got {unit!r}")
        _as_z_set(cfg.data.forbidden)
        _as_z_set(cfg.data.required)
        s = cfg.features.soap
        SoapParams(s.r_cut, s.n_max, s.l_max, s.sigma, tuple(sorted(_as_z_set(s.species))) or (1,))
        if cfg.features.kind not in ("soap", "soap+sd", "pca"):
            raise ValueError(f"features.kind must be soap, soap+sd or pca, got {cfg.features.kind!r}")
        if not 0 < cfg.features.pca_retained <= 1:
            raise ValueError("features.pca_retained must be in (0, 1]")
        if cfg.krr.alpha < 0:
            raise ValueError("krr.alpha must be >= 0")
        g = cfg.gboost
        if g.n_estimators < 1 or g.max_depth < 0 or g.min_leaf < 1 or not 0 < g.learning_rate <= 1:
            raise ValueError("gboost settings out of range")
        MlpConfig(1, cfg.mlp.n_layers, cfg.mlp.dropout_p, "swish", cfg.mlp.lr)
        p = cfg.painn
        PainnConfig(p.r_cut, p.n_rbf, p.n_atom_basis, p.n_interactions, "cosine", p.readout,
                    tuple(_as_z_set(p.elements)) or (1,))
        t = cfg.train
        TrainConfig(t.lr, t.batch_size, t.max_epochs, t.lr_decay_factor, t.lr_decay_patience,
                    t.early_stop_patience, cfg.seed)
        if t.n_runs < 1 or cfg.transfer.n_seeds < 1:
            raise ValueError("train.n_runs and transfer.n_seeds must be >= 1")
        if len(cfg.transfer.pretrain_split) != 3 or any(int(c) < 0 for c in cfg.transfer.pretrain_split):
            raise ValueError("transfer.pretrain_split must be three non-negative counts")
        if cfg.transfer.factor <= 0:
            raise ValueError("transfer.factor must be positive")
        if cfg.curve.axis not in ("finetune", "pretrain"):
            raise ValueError("curve.axis must be finetune or pretrain")
        bad = sorted(set(cfg.curve.arms) - {"scratch", "finetune", "discriminative"})
        if bad:
            raise ValueError(f"unknown curve arms {bad}")
        if any(int(s) < 1 for s in cfg.curve.sizes):
            raise ValueError("curve.sizes must be positive integers")
        if cfg.jobs < 1:
            raise ValueError("jobs must be >= 1")
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None


def default_jobs():
    try:
        return max(1, int(os.environ.get("MOLT_JOBS", "1")))
    except ValueError:
        return 1
