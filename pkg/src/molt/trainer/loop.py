"""Mini-batch training with plateau learning-rate decay and early stopping."""
from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import AdamState, adam_step, backward, make_rng, mse_loss
from ..chemdata import LabeledDataset

IMPROVEMENT_THRESHOLD = 1e-6


def format_number(x):
    return "" if x is None else repr(float(x))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 10
    max_epochs: int = 200
    lr_decay_factor: float = 0.5
    lr_decay_patience: int = 5
    early_stop_patience: int = 30
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 < self.lr_decay_factor < 1:
            raise ValueError(f"lr_decay_factor must be in (0, 1), got {self.lr_decay_factor}")
        if self.lr_decay_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class RunReport:
    trace: list = field(default_factory=list)
    best_epoch: int = 0
    test_mae: float | None = None
    test_rmse: float | None = None
    wall_seconds: float = 0.0
    seed: int | None = None

    @property
    def best_val_loss(self):
        return min(r.val_loss for r in self.trace) if self.trace else None

    @property
    def lr_trace(self):
        return [r.lr for r in self.trace]

    def write_csv(self, path):
        """Per-epoch trace then a summary row; wall time is left out so reruns match."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "lr"])
            for r in self.trace:
                w.writerow([r.epoch, format_number(r.train_loss), format_number(r.val_loss), format_number(r.lr)])
            w.writerow(["summary", "best_epoch", "test_mae", "test_rmse"])
            w.writerow(["summary", self.best_epoch, format_number(self.test_mae), format_number(self.test_rmse)])


def _unpack(data):
    if isinstance(data, LabeledDataset):
        return list(data.molecules), data.labels
    inputs, targets = data
    return inputs, np.asarray(targets, dtype=np.float64).reshape(-1)


def evaluate_loss(model, prepared, targets, batch_size=64):
    pred = predict_prepared(model, prepared, batch_size)
    return float(np.mean((pred - targets) ** 2))


def predict_prepared(model, prepared, batch_size=64):
    n = len(prepared)
    chunks = [
        model.forward(prepared, np.arange(i, min(i + batch_size, n)), training=False).data
        for i in range(0, n, batch_size)
    ]
    return np.concatenate(chunks) if chunks else np.empty(0)


def train(model, train_data, val_data, config: TrainConfig, param_lrs=None, log=None):
    """Fit ``model`` on already-standardized targets.

    ``train_data``/``val_data`` are LabeledDatasets or ``(inputs, targets)``
    pairs understood by ``model.prepare``. ``param_lrs`` maps parameter
    names to starting learning rates; parameters it leaves out use
    ``config.lr``. Plateau decay multiplies every group's rate by the same
    factor. The parameters of the epoch with the lowest validation loss are
    restored before returning.
    """
    start = time.perf_counter()
    report = RunReport(seed=config.seed)
    if config.max_epochs == 0:
        return model, report
    x_train, y_train = _unpack(train_data)
    x_val, y_val = _unpack(val_data)
    if len(y_train) == 0 or len(y_val) == 0:
        raise ValueError("train and validation sets must be non-empty")
    p_train = model.prepare(x_train)
    p_val = model.prepare(x_val)

    base_lr = {name: config.lr for name in model.params}
    if param_lrs is not None:
        unknown = set(param_lrs) - set(base_lr)
        if unknown:
            raise KeyError(f"learning rates given for unknown parameters {sorted(unknown)}")
        base_lr.update(param_lrs)
    scale = 1.0
    state = AdamState()
    best_val = np.inf
    best_state = model.state_dict()
    stall = decay_stall = 0
    step = 0
    n = len(y_train)
    for epoch in range(1, config.max_epochs + 1):
        order = make_rng(config.seed, "shuffle", epoch).permutation(n)
        total = 0.0
        for b in range(0, n, config.batch_size):
            idx = order[b:b + config.batch_size]
            model.zero_grad()
            pred = model.forward(p_train, idx, training=True, rng=make_rng(config.seed, "dropout", step))
            loss = mse_loss(pred, y_train[idx])
            backward(loss)
            grads = {k: p.grad for k, p in model.params.items()}
            lrs = {k: v * scale for k, v in base_lr.items()}
            adam_step(model.params, grads, state, lrs)
            total += loss.item() * len(idx)
            step += 1
        val_loss = evaluate_loss(model, p_val, y_val)
        report.trace.append(EpochRecord(epoch, total / n, val_loss, config.lr * scale))
        if log is not None:
            log(report.trace[-1])
        if val_loss < best_val - IMPROVEMENT_THRESHOLD:
            stall = decay_stall = 0
        else:
            stall += 1
            decay_stall += 1
        if val_loss < best_val:
            best_val = val_loss
            report.best_epoch = epoch
            best_state = model.state_dict()
        if stall >= config.early_stop_patience:
            break
        if decay_stall >= config.lr_decay_patience:
            scale *= config.lr_decay_factor
            decay_stall = 0
    model.load_state_dict(best_state)
    report.wall_seconds = time.perf_counter() - start
    return model, report


def expand_group_lrs(groups, group_lrs):
    """Per-parameter rates from ``[(group, [param names])]`` and a group -> lr map."""
    out = {}
    for group, names in groups:
        for name in names:
            out[name] = group_lrs[group]
    return out


@dataclass
class AggregateReport:
    reports: list
    mae_mean: float
    mae_std: float
    rmse_mean: float
    rmse_std: float
    seeds: list = field(default_factory=list)

    def write_csv(self, path, label="run"):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "seed", "test_mae", "test_rmse"])
            for seed, r in zip(self.seeds, self.reports):
                w.writerow([label, seed, format_number(r.test_mae), format_number(r.test_rmse)])
            w.writerow(["mean", "", format_number(self.mae_mean), format_number(self.rmse_mean)])
            w.writerow(["std", "", format_number(self.mae_std), format_number(self.rmse_std)])


def aggregate(reports, seeds=None):
    maes = np.array([r.test_mae for r in reports], dtype=np.float64)
    rmses = np.array([r.test_rmse for r in reports], dtype=np.float64)
    return AggregateReport(
        list(reports), float(maes.mean()), float(maes.std()), float(rmses.mean()), float(rmses.std()),
        list(seeds) if seeds is not None else list(range(len(reports))),
    )


def multi_seed(runner, n_runs=5, seed0=0, jobs=1):
    """Run ``runner(seed)`` for consecutive seeds and aggregate test metrics.

    Standard deviations are population (ddof=0). Runs may execute on
    ``jobs`` threads; results are always reduced in seed order.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = [seed0 + k for k in range(n_runs)]
    if jobs > 1 and n_runs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(runner, s) for s in seeds]
            reports = [f.result() for f in futures]
    else:
        reports = [runner(s) for s in seeds]
    return aggregate(reports, seeds)
