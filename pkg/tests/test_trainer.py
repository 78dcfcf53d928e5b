import math
import time

import numpy as np
import pytest

from molt.autodiff import Tensor, mul, reshape
from molt.chemdata import Molecule
from molt.krr import krr_fit, krr_predict
from molt.gboost import gboost_fit, gboost_predict
from molt.descriptors import pca_fit
from molt.nets import MLP, MlpConfig, PaiNN, PainnConfig
from molt.nets.base import Network
from molt.trainer import (
    CheckpointError,
    ModelCheckpoint,
    RunReport,
    TrainConfig,
    from_checkpoint,
    load_checkpoint,
    mae,
    multi_seed,
    pca_from_checkpoint,
    rmse,
    save_checkpoint,
    to_checkpoint,
    train,
)


class Scalar(Network):
    """pred = w * x for scalar inputs; handy for scripting validation curves."""

    kind = "scalar"

    def __init__(self, w=0.0):
        super().__init__()
        self._add("w", np.array([w]))

    def prepare(self, inputs):
        return np.asarray(inputs, dtype=np.float64)

    def forward(self, prepared, indices, training=False, rng=None):
        x = prepared[np.asarray(indices)]
        return reshape(mul(self.params["w"], Tensor(x)), (len(x),))


# --- metrics ---------------------------------------------------------------

def test_metrics_examples():
    assert (mae([1, 2], [1, 2]), rmse([1, 2], [1, 2])) == (0.0, 0.0)
    assert (mae([1, -1], [0, 0]), rmse([1, -1], [0, 0])) == (1.0, 1.0)
    assert mae([0, 2], [0, 0]) == 1.0
    assert rmse([0, 2], [0, 0]) == pytest.approx(1.41421356, abs=1e-8)
    with pytest.raises(ValueError):
        mae([], [])
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


# --- train ------------------------------------------------------------------

def test_config_invariants():
    for bad in (dict(lr=0), dict(lr_decay_factor=1.0), dict(lr_decay_factor=0), dict(lr_decay_patience=0),
                dict(early_stop_patience=0), dict(loss="mae")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    cfg = TrainConfig()
    assert (cfg.lr, cfg.lr_decay_factor, cfg.lr_decay_patience, cfg.batch_size) == (5e-4, 0.5, 5, 10)


def test_zero_epochs_unchanged():
    model = Scalar(0.3)
    model, report = train(model, ([1.0], [1.0]), ([1.0], [1.0]), TrainConfig(max_epochs=0))
    assert report.trace == [] and model.params["w"].data[0] == 0.3


def test_empty_sets_rejected():
    with pytest.raises(ValueError):
        train(Scalar(), ([], []), ([1.0], [1.0]), TrainConfig(max_epochs=1))


def test_worsening_validation_early_stop():
    # training pulls w toward +1 while the validation target is -1
    model, report = train(Scalar(0.0), ([1.0], [1.0]), ([1.0], [-1.0]),
                          TrainConfig(lr=0.05, max_epochs=50, early_stop_patience=3, lr_decay_patience=10))
    vals = [r.val_loss for r in report.trace]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert len(report.trace) == 4 and report.best_epoch == 1
    # parameters restored from epoch 1
    assert (model.params["w"].data[0] + 1) ** 2 == pytest.approx(vals[0], rel=1e-14)


def test_plateau_decay_exact_factor():
    # x = 0 on validation: the validation loss never moves
    _, report = train(Scalar(0.0), ([1.0, 2.0], [1.0, 2.0]), ([0.0], [1.0]),
                      TrainConfig(lr=0.01, max_epochs=17, early_stop_patience=100, lr_decay_patience=5))
    lrs = report.lr_trace
    assert lrs == [0.01] * 6 + [0.005] * 5 + [0.0025] * 5 + [0.00125]
    for a, b in zip(lrs, lrs[1:]):
        assert b == a or b == a * 0.5


def test_improvement_threshold():
    # improvements below 1e-6 do not reset patience but still move the best state
    class Scripted(Scalar):
        pass

    losses = iter([1.0, 1.0 - 5e-7, 1.0 - 9e-7, 1.0 - 9.5e-7])
    import molt.trainer.loop as loop

    orig = loop.evaluate_loss
    loop.evaluate_loss = lambda *a, **k: next(losses)
    try:
        _, report = train(Scripted(), ([1.0], [1.0]), ([1.0], [1.0]),
                          TrainConfig(max_epochs=10, early_stop_patience=3, lr_decay_patience=10))
    finally:
        loop.evaluate_loss = orig
    assert len(report.trace) == 4 and report.best_epoch == 4


def test_training_deterministic_and_restores_best(rng):
    X = rng.normal(size=(30, 6))
    y = X[:, 0] - 0.5 * X[:, 1]
    cfg = TrainConfig(lr=1e-2, max_epochs=25, seed=3)
    runs = []
    for _ in range(2):
        net, report = train(MLP(MlpConfig(6), seed=1), (X[:20], y[:20]), (X[20:], y[20:]), cfg)
        runs.append((net.state_dict(), report))
    (sa, ra), (sb, rb) = runs
    assert [(r.train_loss, r.val_loss, r.lr) for r in ra.trace] == [(r.train_loss, r.val_loss, r.lr) for r in rb.trace]
    for k in sa:
        np.testing.assert_array_equal(sa[k], sb[k])
    net = MLP(MlpConfig(6))
    net.load_state_dict(sa)
    val = float(np.mean((net.predict(X[20:]) - y[20:]) ** 2))
    assert val == pytest.approx(ra.best_val_loss, rel=1e-12)
    assert ra.trace[ra.best_epoch - 1].val_loss == ra.best_val_loss


def test_short_last_batch_and_param_lrs(rng):
    X = rng.normal(size=(7,))
    model, report = train(Scalar(0.0), (X, 2 * X), (X, 2 * X),
                          TrainConfig(lr=0.1, batch_size=3, max_epochs=3), param_lrs={"w": 0.2})
    assert len(report.trace) == 3
    with pytest.raises(KeyError):
        train(Scalar(0.0), (X, X), (X, X), TrainConfig(max_epochs=1), param_lrs={"nope": 1.0})


def test_painn_overfit_smoke():
    # fast version; the 2000-epoch fixture lives in the acceptance suite
    g = np.random.default_rng(0)
    mols = [Molecule(f"m{i}", g.choice([1, 6, 8], 4), g.normal(size=(4, 3)) * 1.2) for i in range(4)]
    y = g.normal(size=4)
    cfg = PainnConfig(r_cut=4.0, n_rbf=8, n_atom_basis=8, n_interactions=1, elements=(1, 6, 8))
    _, report = train(PaiNN(cfg), (mols, y), (mols, y), TrainConfig(lr=5e-3, max_epochs=60))
    assert report.trace[-1].train_loss < 0.5 * report.trace[0].train_loss


def test_report_csv(tmp_path):
    r = RunReport(best_epoch=1, test_mae=0.5, test_rmse=0.25, wall_seconds=3.0)
    from molt.trainer import EpochRecord

    r.trace.append(EpochRecord(1, 0.1, 0.2, 5e-4))
    r.write_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == (
        "epoch,train_loss,val_loss,lr\n1,0.1,0.2,0.0005\n"
        "summary,best_epoch,test_mae,test_rmse\nsummary,1,0.5,0.25\n"
    )


# --- multi_seed ---------------------------------------------------------------

def _stub(value_of_seed):
    def run(seed):
        return RunReport(test_mae=value_of_seed(seed), test_rmse=2 * value_of_seed(seed))
    return run


def test_multi_seed_examples():
    one = multi_seed(_stub(lambda s: 0.7), n_runs=1)
    assert (one.mae_mean, one.mae_std) == (0.7, 0.0)
    same = multi_seed(_stub(lambda s: 0.3), n_runs=5, seed0=11)
    assert same.mae_std == 0.0 and same.rmse_std == 0.0 and same.seeds == [11, 12, 13, 14, 15]
    idx = multi_seed(_stub(float), n_runs=5)
    assert idx.mae_mean == 2.0 and idx.mae_std == pytest.approx(math.sqrt(2), abs=1e-15)
    vals = np.array([r.test_rmse for r in idx.reports])
    assert idx.rmse_mean == vals.mean() and idx.rmse_std == vals.std()
    with pytest.raises(ValueError):
        multi_seed(_stub(float), n_runs=0)


def test_multi_seed_concurrent_order():
    def run(seed):
        time.sleep(0.02 * (5 - seed))
        return RunReport(test_mae=float(seed), test_rmse=0.0)
    agg = multi_seed(run, n_runs=5, jobs=3)
    assert [r.test_mae for r in agg.reports] == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_multi_seed_propagates_failure():
    def run(seed):
        if seed == 2:
            raise RuntimeError("boom")
        return RunReport(test_mae=0.0, test_rmse=0.0)
    with pytest.raises(RuntimeError, match="boom"):
        multi_seed(run, 4)


# --- checkpoints ----------------------------------------------------------------

def test_checkpoint_round_trip_bytes(tmp_path, small_molecules):
    cfg = PainnConfig(r_cut=3.0, n_rbf=5, n_atom_basis=6, n_interactions=2, elements=(1, 6, 8, 16))
    net = PaiNN(cfg, seed=4)
    ckpt = to_checkpoint(net, (1.5, 0.25), {"seed": 4, "epochs_trained": 0, "dataset": "abc"})
    path = tmp_path / "a.mltc"
    save_checkpoint(ckpt, path)
    again = load_checkpoint(path, expected_kind="painn")
    save_checkpoint(again, tmp_path / "b.mltc")
    assert path.read_bytes() == (tmp_path / "b.mltc").read_bytes()
    assert again.scaler == (1.5, 0.25) and again.provenance["seed"] == 4
    restored = from_checkpoint(again)
    np.testing.assert_array_equal(restored.predict(small_molecules), net.predict(small_molecules))


def test_checkpoint_corruption(tmp_path):
    net = MLP(MlpConfig(4), seed=0)
    blob = bytearray(to_checkpoint(net, (0.0, 1.0)).to_bytes())
    bad = bytearray(blob)
    bad[-20] ^= 0x01
    with pytest.raises(CheckpointError, match="checksum"):
        ModelCheckpoint.from_bytes(bytes(bad))
    with pytest.raises(CheckpointError, match="magic"):
        ModelCheckpoint.from_bytes(b"XXXXX" + bytes(blob[5:]))
    with pytest.raises(CheckpointError, match="truncated"):
        ModelCheckpoint.from_bytes(bytes(blob[:-3]))
    with pytest.raises(CheckpointError, match="trailing"):
        ModelCheckpoint.from_bytes(bytes(blob) + b"\0")


def test_checkpoint_architecture_mismatch(tmp_path):
    net = MLP(MlpConfig(4), seed=0)
    ckpt = to_checkpoint(net)
    ckpt.save(tmp_path / "m.mltc")
    with pytest.raises(CheckpointError, match="architecture"):
        load_checkpoint(tmp_path / "m.mltc", expected_kind="painn")
    with pytest.raises(CheckpointError, match="architecture"):
        load_checkpoint(tmp_path / "m.mltc", expected_config={"model": {"input_dim": 5}})
    load_checkpoint(tmp_path / "m.mltc", expected_config=ckpt.config)


def test_checkpoint_section_layout():
    import struct
    import zlib

    ckpt = ModelCheckpoint("x", {}, {"t": np.array([1.0, 2.0])})
    blob = ckpt.to_bytes()
    assert blob[:5] == b"MLTC1" and struct.unpack_from("<I", blob, 5)[0] == 3
    tail = blob[-(4 + 1 + 1 + 4 + 8 + 16 + 4):]
    name_len, = struct.unpack_from("<I", tail, 0)
    assert name_len == 1 and tail[4:5] == b"t"
    tag, rank = struct.unpack_from("<BI", tail, 5)
    assert (tag, rank) == (1, 1)
    assert struct.unpack_from("<Q", tail, 10)[0] == 2
    assert np.frombuffer(tail[18:34], "<f8").tolist() == [1.0, 2.0]
    assert struct.unpack_from("<I", tail, 34)[0] == zlib.crc32(tail[:34])


def test_classical_checkpoints(rng, tmp_path):
    X, y = rng.normal(size=(12, 4)), rng.normal(size=12)
    krr = krr_fit(X, y, 0.5)
    gb = gboost_fit(X, y, 5, 0.3, 2)
    pca = pca_fit(X, 0.9)
    for model, predict in ((krr, krr_predict), (gb, gboost_predict)):
        ckpt = to_checkpoint(model, pca=pca)
        back = ModelCheckpoint.from_bytes(ckpt.to_bytes())
        assert back.to_bytes() == ckpt.to_bytes()
        np.testing.assert_array_equal(predict(from_checkpoint(back), X), predict(model, X))
        p = pca_from_checkpoint(back)
        np.testing.assert_array_equal(p.components, pca.components)
