"""Transfer learning from cheaply labeled structures to small accurate data sets."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_is_fitted, check_targets
from .chemdata import LabeledDataset, split_by_counts
from .nets import Network, PaiNN, PainnConfig, build_network
from .trainer import (
    ModelCheckpoint,
    RunReport,
    TrainConfig,
    expand_group_lrs,
    from_checkpoint,
    mae,
    multi_seed,
    rmse,
    to_checkpoint,
    train,
)
from .trainer.loop import format_number


class ZeroVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class LabelScaler:
    mu: float
    sigma: float
    unit: str = "dimensionless"

    def apply(self, y):
        return (np.asarray(y, dtype=np.float64) - self.mu) / self.sigma

    def invert(self, z):
        return np.asarray(z, dtype=np.float64) * self.sigma + self.mu

    def as_tuple(self):
        return (self.mu, self.sigma)


def scaler_fit(labels, unit="dimensionless") -> LabelScaler:
    """Mean and population standard deviation of the labels."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if len(y) < 2:
        raise ValueError("scaler_fit needs at least 2 labels")
    sigma = float(y.std())
    if sigma == 0:
        raise ZeroVarianceError("zero label variance")
    return LabelScaler(float(y.mean()), sigma, unit)


def scaler_apply(scaler: LabelScaler, y):
    return scaler.apply(y)


def scaler_invert(scaler: LabelScaler, z):
    return scaler.invert(z)


class LabelStandardizer(TransformerMixin, BaseEstimator):
    """Target z-scoring as a transformer over 1-D label arrays."""

    def __init__(self, unit="dimensionless"):
        self.unit = unit

    def fit(self, y, _=None):
        self.scaler_ = scaler_fit(check_targets(y), self.unit)
        return self

    def transform(self, y):
        check_is_fitted(self, "scaler_")
        return self.scaler_.apply(check_targets(y))

    def inverse_transform(self, z):
        check_is_fitted(self, "scaler_")
        return self.scaler_.invert(check_targets(z))


@dataclass(frozen=True)
class CalibrationFit:
    slope: float
    intercept: float
    fit_mae: float

    def predict(self, y_cheap):
        return self.slope * np.asarray(y_cheap, dtype=np.float64) + self.intercept


def linear_calibrate(y_cheap, y_true) -> CalibrationFit:
    """Least-squares line mapping cheap labels onto the accurate ones."""
    x = np.asarray(y_cheap, dtype=np.float64).reshape(-1)
    y = np.asarray(y_true, dtype=np.float64).reshape(-1)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("linear_calibrate needs two equal-length arrays of at least 2 labels")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ZeroVarianceError("cheap labels are constant; calibration undefined")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    return CalibrationFit(slope, intercept, mae(slope * x + intercept, y))


def assign_discriminative_lrs(layer_group_names, base_lr=5e-4, factor=5.0):
    """Learning rate per layer group, dividing by ``factor`` per step toward the input.

    ``layer_group_names`` runs from the earliest layer to the output layer;
    the last group gets ``base_lr``.
    """
    names = list(layer_group_names)
    if not names:
        raise ValueError("need at least one layer group")
    out = {}
    lr = float(base_lr)
    for name in reversed(names):
        out[name] = lr
        lr = lr / factor
    return {name: out[name] for name in names}


def _evaluate(model, scaler, test: LabeledDataset, report: RunReport):
    pred = scaler.invert(model.predict(list(test.molecules)))
    report.test_mae = mae(pred, test.labels)
    report.test_rmse = rmse(pred, test.labels)
    return pred


def _network(model_config, seed):
    if isinstance(model_config, PainnConfig):
        return PaiNN(model_config, seed=seed)
    kind, cfg = model_config
    return build_network(kind, cfg, seed=seed)


def fit_network(model_config, train_ds, val_ds, test_ds, config: TrainConfig, init=None, param_lrs=None):
    """Standardize labels on the training split, train, report test metrics in label units."""
    scaler = scaler_fit(train_ds.labels, train_ds.unit)
    model = init if init is not None else _network(model_config, config.seed)
    model, report = train(
        model,
        (list(train_ds.molecules), scaler.apply(train_ds.labels)),
        (list(val_ds.molecules), scaler.apply(val_ds.labels)),
        config,
        param_lrs=param_lrs,
    )
    _evaluate(model, scaler, test_ds, report)
    return model, scaler, report


@dataclass
class PretrainResult:
    checkpoint: ModelCheckpoint
    reports: list
    selected: int

    @property
    def seeds(self):
        return [r.seed for r in self.reports]


def select_best(reports):
    """Index of the lowest test MAE; the earliest run wins ties."""
    maes = [r.test_mae for r in reports]
    return int(np.argmin(maes))


def pretrain(dataset: LabeledDataset, model_config, train_config: TrainConfig, split_counts,
             n_seeds=3, split_seed=None, runner=None, jobs=1) -> PretrainResult:
    """Train ``n_seeds`` models on cheap labels and keep the best on the test subset.

    The split is shared by all seeds; seeds ``train_config.seed + k`` drive
    initialization and batch order.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    split_seed = train_config.seed if split_seed is None else split_seed
    tr, va, te = split_by_counts(dataset, split_counts, split_seed)
    if min(len(tr), len(va), len(te)) == 0:
        raise ValueError(f"split counts {tuple(split_counts)} leave an empty subset")
    fingerprint = dataset.fingerprint()

    def default_runner(seed):
        cfg = replace(train_config, seed=seed)
        model, scaler, report = fit_network(model_config, tr, va, te, cfg)
        provenance = {
            "stage": "pretrain",
            "seed": seed,
            "epochs_trained": len(report.trace),
            "best_epoch": report.best_epoch,
            "dataset": fingerprint,
            "test_mae": report.test_mae,
        }
        return to_checkpoint(model, scaler.as_tuple(), provenance, {"unit": dataset.unit}), report

    run = runner or default_runner
    seeds = [train_config.seed + k for k in range(n_seeds)]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    reports = [r for _, r in results]
    for seed, r in zip(seeds, reports):
        r.seed = seed
    best = select_best(reports)
    return PretrainResult(results[best][0], reports, best)


def finetune(checkpoint: ModelCheckpoint, train_ds, val_ds, test_ds, train_config: TrainConfig,
             discriminative=False, factor=5.0, layer_groups=None):
    """Retrain every layer of a pre-trained network on a small data set.

    The fine-tuning labels get their own scaler fitted on ``train_ds``. With
    ``discriminative`` set, each layer group's rate is the next group's rate
    divided by ``factor``, with ``train_config.lr`` at the output.
    """
    model = from_checkpoint(checkpoint)
    if not isinstance(model, Network):
        raise TypeError(f"fine-tuning needs a network checkpoint, got {checkpoint.kind!r}")
    if min(len(train_ds), len(val_ds), len(test_ds)) == 0:
        raise ValueError("fine-tuning splits must be non-empty")
    param_lrs = None
    if discriminative:
        groups = layer_groups if layer_groups is not None else model.layer_groups()
        group_lrs = assign_discriminative_lrs([g for g, _ in groups], train_config.lr, factor)
        param_lrs = expand_group_lrs(groups, group_lrs)
    model, scaler, report = fit_network(None, train_ds, val_ds, test_ds, train_config,
                                        init=model, param_lrs=param_lrs)
    return model, scaler, report


def scratch_arm(model_config, val_ds, test_ds, train_config):
    """Runner training a fresh network on the given training subset."""
    def run(train_subset, seed):
        _, _, report = fit_network(model_config, train_subset, val_ds, test_ds,
                                   replace(train_config, seed=seed))
        return report
    return run


def finetune_arm(checkpoint, val_ds, test_ds, train_config, discriminative=False, factor=5.0):
    def run(train_subset, seed):
        _, _, report = finetune(checkpoint, train_subset, val_ds, test_ds,
                                replace(train_config, seed=seed), discriminative, factor)
        return report
    return run


def pretrain_size_arm(model_config, pretrain_config, split_fractions, fine_train, fine_val, fine_test,
                      finetune_config, n_seeds=3):
    """Runner whose training subset is the pre-training pool: pretrain anew, then fine-tune."""
    def run(pool_subset, seed):
        n = len(pool_subset)
        n_val = max(1, int(np.floor(split_fractions[1] * n)))
        n_test = max(1, int(np.floor(split_fractions[2] * n)))
        counts = (n - n_val - n_test, n_val, n_test)
        result = pretrain(pool_subset, model_config, replace(pretrain_config, seed=seed), counts, n_seeds)
        _, _, report = finetune(result.checkpoint, fine_train, fine_val, fine_test,
                                replace(finetune_config, seed=seed))
        return report
    return run


@dataclass(frozen=True)
class CurvePoint:
    train_size: int
    mae_mean: float
    mae_std: float
    rmse_mean: float
    rmse_std: float


def nested_subset(pool: LabeledDataset, size: int, seed: int) -> LabeledDataset:
    """First ``size`` entries of a seeded permutation, kept in pool order.

    For a fixed seed the subsets are nested: smaller sizes are prefixes of
    the same permutation.
    """
    if size > len(pool):
        raise ValueError(f"size {size} exceeds pool of {len(pool)}")
    if size < 1:
        raise ValueError("size must be positive")
    rng = np.random.default_rng([int(seed), 0xC0DE])
    return pool.subset(sorted(rng.permutation(len(pool))[:size]))


@dataclass
class Curve:
    arm: str
    points: list = field(default_factory=list)


def learning_curve(runner, pool: LabeledDataset, sizes, n_runs=5, seed0=0, arm="arm", jobs=1) -> Curve:
    """Test error against training-set size, ``n_runs`` seeds per size."""
    curve = Curve(arm)
    for size in sizes:
        if size > len(pool):
            raise ValueError(f"size {size} exceeds pool of {len(pool)}")
        agg = multi_seed(lambda s, size=size: runner(nested_subset(pool, size, s), s), n_runs, seed0, jobs)
        curve.points.append(CurvePoint(int(size), agg.mae_mean, agg.mae_std, agg.rmse_mean, agg.rmse_std))
    return curve


CURVE_COLUMNS = ["arm", "size", "mae_mean", "mae_std", "rmse_mean", "rmse_std"]


def write_curves_csv(curves, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for curve in curves:
            for p in curve.points:
                w.writerow([curve.arm, p.train_size, format_number(p.mae_mean), format_number(p.mae_std),
                            format_number(p.rmse_mean), format_number(p.rmse_std)])


def read_curves_csv(path):
    curves = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["arm"], Curve(row["arm"])).points.append(
                CurvePoint(int(row["size"]), float(row["mae_mean"]), float(row["mae_std"]),
                           float(row["rmse_mean"]), float(row["rmse_std"])))
    return list(curves.values())


def plot_curves_svg(curves, path, unit="", xlabel="training examples"):
    """Log-x MAE curves with error bars, written as a deterministic SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "molt", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for curve in curves:
            x = [p.train_size for p in curve.points]
            ax.errorbar(x, [p.mae_mean for p in curve.points], yerr=[p.mae_std for p in curve.points],
                        marker="o", capsize=3, label=curve.arm)
        ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(f"MAE ({unit})" if unit else "MAE")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
