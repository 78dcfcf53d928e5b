"""Command-line entry point: ``molt <command> [--config FILE] [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training or
runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import chemdata
from .chemdata import DatasetError, ParseError, SplitSpec, load_dataset, split_dataset
from .config import ConfigError, ExperimentConfig, default_jobs, load_config
from .descriptors import (
    DescriptorMatrix,
    SoapParams,
    pca_fit,
    pca_transform,
    simple_descriptor_labels,
    simple_descriptors,
    soap_column_labels,
    soap_molecular,
)
from .gboost import gboost_fit, gboost_predict
from .krr import krr_fit, krr_predict
from .nets import MLP, MlpConfig, PainnConfig
from .trainer import (
    CheckpointError,
    TrainConfig,
    load_checkpoint,
    mae,
    multi_seed,
    rmse,
    to_checkpoint,
    train,
)
from .transfer import (
    finetune,
    finetune_arm,
    fit_network,
    learning_curve,
    linear_calibrate,
    plot_curves_svg,
    pretrain,
    pretrain_size_arm,
    scaler_fit,
    scratch_arm,
    write_curves_csv,
)

log = logging.getLogger("molt")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


class DataError(Exception):
    pass


# helpers --------------------------------------------------------------------

def _output_dir(cfg):
    out = cfg.path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cfg, structures, labels, unit):
    if not structures or not labels:
        raise ConfigError("data paths (structures and labels) must be set")
    try:
        return load_dataset(cfg.path(structures), cfg.path(labels), unit)
    except (DatasetError, ParseError, OSError) as err:
        raise DataError(str(err)) from None


def _main_dataset(cfg):
    return _load(cfg, cfg.data.structures, cfg.data.labels, cfg.data.unit)


def _z_list(items):
    return sorted(chemdata._as_z_set(items))


def _soap_params(cfg, molecules):
    s = cfg.features.soap
    species = _z_list(s.species) or chemdata.species_of(molecules)
    return SoapParams(s.r_cut, s.n_max, s.l_max, s.sigma, tuple(species))


def _features(cfg, molecules, kind):
    """Raw descriptor rows (no PCA) and labels for ``soap`` or ``soap+sd``."""
    try:
        params = _soap_params(cfg, molecules)
        soap = np.array([soap_molecular(m, params) for m in molecules])
        labels = soap_column_labels(params)
        if kind == "soap+sd":
            universe = list(params.species)
            sd = np.array([simple_descriptors(m, universe, cfg.features.cc_bond_cut) for m in molecules])
            return np.hstack([soap, sd]), labels + simple_descriptor_labels(universe), params
        return soap, labels, params
    except ValueError as err:
        raise DataError(str(err)) from None


def _split(cfg, ds):
    return split_dataset(ds, SplitSpec(tuple(cfg.data.split), cfg.seed))


def _train_config(cfg, seed=None, lr=None, max_epochs=None):
    t = cfg.train
    return TrainConfig(
        lr=t.lr if lr is None else lr, batch_size=t.batch_size,
        max_epochs=t.max_epochs if max_epochs is None else max_epochs,
        lr_decay_factor=t.lr_decay_factor, lr_decay_patience=t.lr_decay_patience,
        early_stop_patience=t.early_stop_patience, seed=cfg.seed if seed is None else seed,
    )


def _painn_config(cfg, molecules):
    p = cfg.painn
    elements = _z_list(p.elements) or chemdata.species_of(molecules)
    return PainnConfig(p.r_cut, p.n_rbf, p.n_atom_basis, p.n_interactions, "cosine", p.readout, tuple(elements))


def _write_summary(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("model,seed,test_mae,test_rmse\n")
        for model, seed, m, r in rows:
            fh.write(f"{model},{seed},{float(m)!r},{float(r)!r}\n")


def _write_runs(out, name, pending):
    # files are written here, after every run has finished, in seed order
    for seed in sorted(pending):
        report, ckpt = pending[seed]
        report.write_csv(out / f"trace_{name}_seed{seed}.csv")
        ckpt.save(out / f"{name}_seed{seed}.mltc")


# commands -------------------------------------------------------------------

def cmd_featurize(cfg: ExperimentConfig, args):
    ds = _main_dataset(cfg)
    mols = list(ds.molecules)
    kind = cfg.features.kind
    X, labels, _ = _features(cfg, mols, "soap+sd" if kind == "soap+sd" else "soap")
    if kind == "pca":
        model = pca_fit(X, cfg.features.pca_retained)
        X = pca_transform(model, X)
        labels = [f"pc{i}" for i in range(X.shape[1])]
    out = _output_dir(cfg) / "descriptors.csv"
    DescriptorMatrix(X, labels, "soap_molecular" if kind == "soap" else kind, ds.ids).to_csv(out)
    print(f"wrote {len(X)} x {X.shape[1]} descriptors to {out}")
    return EXIT_OK


def _fit_classical(cfg, model, train_ds, test_ds, out):
    kind = "soap+sd" if model == "gboost" else "soap"
    X, labels, params = _features(cfg, list(train_ds.molecules) + list(test_ds.molecules), kind)
    Xtr, Xte = X[:len(train_ds)], X[len(train_ds):]
    if model == "krr":
        fitted = krr_fit(Xtr, train_ds.labels, cfg.krr.alpha)
        pred = krr_predict(fitted, Xte)
    else:
        g = cfg.gboost
        fitted = gboost_fit(Xtr, train_ds.labels, g.n_estimators, g.learning_rate, g.max_depth, g.min_leaf)
        pred = gboost_predict(fitted, Xte)
    extra = {"soap": {"r_cut": params.r_cut, "n_max": params.n_max, "l_max": params.l_max,
                      "sigma": params.sigma, "species": list(params.species)},
             "features": kind, "unit": train_ds.unit}
    ckpt = to_checkpoint(fitted, None, {"seed": cfg.seed, "dataset": train_ds.fingerprint()}, extra)
    ckpt.save(out / f"{model}.mltc")
    return mae(pred, test_ds.labels), rmse(pred, test_ds.labels)


def _mlp_runner(cfg, train_ds, val_ds, test_ds, pending):
    mols = list(train_ds.molecules) + list(val_ds.molecules) + list(test_ds.molecules)
    X, _, _ = _features(cfg, mols, "soap")
    a, b = len(train_ds), len(train_ds) + len(val_ds)
    pca = pca_fit(X[:a], cfg.features.pca_retained) if a >= 2 else None
    Z = pca_transform(pca, X) if pca is not None else X
    scaler = scaler_fit(train_ds.labels, train_ds.unit)

    def run(seed):
        mcfg = MlpConfig(Z.shape[1], cfg.mlp.n_layers, cfg.mlp.dropout_p, "swish", cfg.mlp.lr)
        net = MLP(mcfg, seed=seed)
        net, report = train(net, (Z[:a], scaler.apply(train_ds.labels)), (Z[a:b], scaler.apply(val_ds.labels)),
                            _train_config(cfg, seed, lr=cfg.mlp.lr))
        pred = scaler.invert(net.predict(Z[b:]))
        report.test_mae, report.test_rmse = mae(pred, test_ds.labels), rmse(pred, test_ds.labels)
        ckpt = to_checkpoint(net, scaler.as_tuple(), {"seed": seed, "epochs_trained": len(report.trace),
                                                       "dataset": train_ds.fingerprint()},
                             {"unit": train_ds.unit}, pca=pca)
        pending[seed] = (report, ckpt)
        return report
    return run


def _painn_runner(cfg, train_ds, val_ds, test_ds, pending):
    pcfg = _painn_config(cfg, list(train_ds.molecules) + list(val_ds.molecules) + list(test_ds.molecules))

    def run(seed):
        model, scaler, report = fit_network(pcfg, train_ds, val_ds, test_ds, _train_config(cfg, seed))
        ckpt = to_checkpoint(model, scaler.as_tuple(), {"seed": seed, "epochs_trained": len(report.trace),
                                                         "dataset": train_ds.fingerprint()},
                             {"unit": train_ds.unit})
        pending[seed] = (report, ckpt)
        return report
    return run


def cmd_train(cfg: ExperimentConfig, args):
    ds = _main_dataset(cfg)
    tr, va, te = _split(cfg, ds)
    if len(te) == 0:
        raise ConfigError("data.split leaves an empty test set")
    out = _output_dir(cfg)
    model = args.model
    if model in ("krr", "gboost"):
        # classical models have no early stopping: validation rows join training
        train_ds = chemdata.LabeledDataset(tr.molecules + va.molecules,
                                           np.concatenate([tr.labels, va.labels]), tr.unit)
        m, r = _fit_classical(cfg, model, train_ds, te, out)
        rows = [(model, cfg.seed, m, r)]
    else:
        if len(tr) < 2 or len(va) == 0:
            raise ConfigError("neural models need >= 2 training and >= 1 validation molecules")
        pending = {}
        runner = (_mlp_runner if model == "mlp" else _painn_runner)(cfg, tr, va, te, pending)
        agg = multi_seed(runner, cfg.train.n_runs, cfg.seed, cfg.jobs)
        _write_runs(out, model, pending)
        rows = [(model, s, rep.test_mae, rep.test_rmse) for s, rep in zip(agg.seeds, agg.reports)]
        rows += [(model, "mean", agg.mae_mean, agg.rmse_mean), (model, "std", agg.mae_std, agg.rmse_std)]
    _write_summary(out / f"summary_{model}.csv", rows)
    for row in rows:
        print(f"{row[0]} seed={row[1]} test_mae={row[2]:.6g} test_rmse={row[3]:.6g}")
    return EXIT_OK


def _pretrain_dataset(cfg):
    t = cfg.transfer
    return _load(cfg, t.pretrain_structures, t.pretrain_labels, t.pretrain_unit)


def cmd_pretrain(cfg: ExperimentConfig, args):
    ds = _pretrain_dataset(cfg)
    counts = [int(c) for c in cfg.transfer.pretrain_split]
    if sum(counts) == 0:
        n_val = n_test = max(1, len(ds) // 10)
        counts = [len(ds) - n_val - n_test, n_val, n_test]
    pcfg = _painn_config(cfg, ds.molecules)
    tcfg = _train_config(cfg, max_epochs=cfg.transfer.pretrain_epochs)
    try:
        result = pretrain(ds, pcfg, tcfg, counts, cfg.transfer.n_seeds, jobs=cfg.jobs)
    except DatasetError as err:
        raise DataError(str(err)) from None
    out = _output_dir(cfg)
    result.checkpoint.save(out / "pretrained.mltc")
    _write_summary(out / "summary_pretrain.csv",
                   [("painn", r.seed, r.test_mae, r.test_rmse) for r in result.reports])
    print(f"selected seed {result.reports[result.selected].seed} "
          f"(test MAE {result.reports[result.selected].test_mae:.6g}) -> {out / 'pretrained.mltc'}")
    return EXIT_OK


def _checkpoint(cfg, args):
    path = getattr(args, "checkpoint", None) or cfg.path(cfg.transfer.checkpoint)
    if not path:
        raise ConfigError("transfer.checkpoint (or --checkpoint) must be set")
    try:
        return load_checkpoint(path, expected_kind="painn")
    except (OSError, CheckpointError) as err:
        raise DataError(f"cannot read checkpoint {path}: {err}") from None


def _fine_splits(cfg):
    ds = _main_dataset(cfg)
    tr, va, te = _split(cfg, ds)
    if min(len(tr), len(va), len(te)) == 0 or len(tr) < 2:
        raise ConfigError("data.split must leave >= 2 training and non-empty val/test sets")
    return tr, va, te


def cmd_finetune(cfg: ExperimentConfig, args):
    ckpt = _checkpoint(cfg, args)
    tr, va, te = _fine_splits(cfg)
    discriminative = cfg.transfer.discriminative or args.discriminative
    out = _output_dir(cfg)

    def run(seed):
        model, scaler, report = finetune(ckpt, tr, va, te, _train_config(cfg, seed),
                                         discriminative, cfg.transfer.factor)
        pending[seed] = (report, to_checkpoint(
            model, scaler.as_tuple(),
            {"stage": "finetune", "seed": seed, "epochs_trained": len(report.trace), "dataset": tr.fingerprint()},
            {"unit": tr.unit}))
        return report

    name = "finetune_discriminative" if discriminative else "finetune"
    pending = {}
    agg = multi_seed(run, cfg.train.n_runs, cfg.seed, cfg.jobs)
    _write_runs(out, name, pending)
    rows = [(name, s, r.test_mae, r.test_rmse) for s, r in zip(agg.seeds, agg.reports)]
    rows += [(name, "mean", agg.mae_mean, agg.rmse_mean), (name, "std", agg.mae_std, agg.rmse_std)]
    _write_summary(out / f"summary_{name}.csv", rows)
    print(f"fine-tuned MAE {agg.mae_mean:.6g} +- {agg.mae_std:.6g} over {len(agg.reports)} runs")
    return EXIT_OK


def cmd_curve(cfg: ExperimentConfig, args):
    sizes = [int(s) for s in (args.sizes.split(",") if args.sizes else cfg.curve.sizes)]
    if not sizes:
        raise ConfigError("curve sizes must be given (curve.sizes or --sizes)")
    tr, va, te = _fine_splits(cfg)
    tcfg = _train_config(cfg)
    pcfg = _painn_config(cfg, list(tr.molecules) + list(va.molecules) + list(te.molecules))
    curves = []
    try:
        if cfg.curve.axis == "finetune":
            for arm in cfg.curve.arms:
                if arm == "scratch":
                    runner = scratch_arm(pcfg, va, te, tcfg)
                else:
                    runner = finetune_arm(_checkpoint(cfg, args), va, te, tcfg,
                                          arm == "discriminative", cfg.transfer.factor)
                curves.append(learning_curve(runner, tr, sizes, cfg.train.n_runs, cfg.seed, arm, cfg.jobs))
        else:
            pool = _pretrain_dataset(cfg)
            ptcfg = _train_config(cfg, max_epochs=cfg.transfer.pretrain_epochs)
            pcfg = _painn_config(cfg, list(pool.molecules) + list(tr.molecules))
            runner = pretrain_size_arm(pcfg, ptcfg, (0.8, 0.1, 0.1), tr, va, te, tcfg, cfg.transfer.n_seeds)
            curves.append(learning_curve(runner, pool, sizes, cfg.train.n_runs, cfg.seed, "pretrain_size", cfg.jobs))
    except ValueError as err:
        if "exceeds pool" in str(err):
            raise ConfigError(str(err)) from None
        raise
    out = _output_dir(cfg)
    write_curves_csv(curves, out / "curve.csv")
    if args.plot:
        xlabel = "fine-tuning examples" if cfg.curve.axis == "finetune" else "pre-training examples"
        plot_curves_svg(curves, out / "curve.svg", tr.unit, xlabel)
    print(f"wrote {sum(len(c.points) for c in curves)} curve points to {out / 'curve.csv'}")
    return EXIT_OK


def cmd_calibrate(cfg: ExperimentConfig, args):
    truth = _main_dataset(cfg)
    if not cfg.data.cheap_labels:
        raise ConfigError("data.cheap_labels must be set")
    try:
        cheap = dict(chemdata.read_labels_csv(cfg.path(cfg.data.cheap_labels)))
    except (DatasetError, ParseError) as err:
        raise DataError(str(err)) from None
    missing = [i for i in truth.ids if i not in cheap]
    if missing:
        raise DataError(f"cheap labels missing for id {missing[0]!r}")
    y_cheap = np.array([cheap[i] for i in truth.ids])
    fit = linear_calibrate(y_cheap, truth.labels)
    out = _output_dir(cfg)
    with open(out / "calibration.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("slope,intercept,fit_mae,unit\n")
        fh.write(f"{fit.slope!r},{fit.intercept!r},{fit.fit_mae!r},{truth.unit}\n")
    print(f"a = {fit.slope:.10g}, b = {fit.intercept:.10g}, mae = {fit.fit_mae:.10g} {truth.unit}")
    return EXIT_OK


def cmd_filter(cfg: ExperimentConfig, args):
    ds = _main_dataset(cfg)
    forbidden = args.forbidden.split(",") if args.forbidden is not None else cfg.data.forbidden
    required = args.required.split(",") if args.required is not None else cfg.data.required
    try:
        kept = chemdata.filter_by_elements(ds, [s for s in forbidden if s.strip()],
                                           [s for s in required if s.strip()])
    except ParseError as err:
        raise ConfigError(str(err)) from None
    out = _output_dir(cfg)
    chemdata.write_labels_csv(out / "filtered_labels.csv", kept.ids, kept.labels)
    (out / "filtered_ids.txt").write_text("".join(f"{i}\n" for i in kept.ids), encoding="utf-8")
    print(f"kept {len(kept)} of {len(ds)} molecules")
    return EXIT_OK


COMMANDS = {
    "featurize": (cmd_featurize, "compute SOAP / SOAP+SD / PCA descriptors to CSV"),
    "train": (cmd_train, "train krr, gboost, mlp or painn and write a summary CSV plus checkpoints"),
    "pretrain": (cmd_pretrain, "pre-train PaiNN on cheap labels, keep the best of n seeds"),
    "finetune": (cmd_finetune, "fine-tune a pre-trained checkpoint on the target data"),
    "curve": (cmd_curve, "learning curves over training-set sizes (CSV, optional SVG)"),
    "calibrate": (cmd_calibrate, "least-squares line from cheap labels to accurate labels"),
    "filter": (cmd_filter, "keep molecules by forbidden / required elements"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="molt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", "-c", help="YAML experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value, e.g. --set train.max_epochs=5 (repeatable)")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--output-dir", "-o", help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, default=None,
                       help="concurrent runs (default: config, else $MOLT_JOBS, else 1)")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if name == "train":
            p.add_argument("--model", required=True, choices=["krr", "gboost", "mlp", "painn"], help="model family to train")
        if name in ("finetune", "curve"):
            p.add_argument("--checkpoint", help="pre-trained checkpoint (overrides transfer.checkpoint)")
        if name == "finetune":
            p.add_argument("--discriminative", action="store_true", help="layer-wise learning rates")
        if name == "curve":
            p.add_argument("--sizes", help="comma-separated training-set sizes")
            p.add_argument("--plot", action="store_true", help="also write curve.svg")
        if name == "filter":
            p.add_argument("--forbidden", help="comma-separated element symbols to exclude")
            p.add_argument("--required", help="comma-separated element symbols that must be present")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.output_dir is not None:
        overrides.append(f"output_dir={args.output_dir}")
    try:
        cfg = load_config(args.config, overrides)
        if args.jobs is not None:
            cfg.jobs = args.jobs
        elif "jobs" not in _explicit_keys(args.config) | {o.split("=", 1)[0].strip() for o in overrides}:
            cfg.jobs = default_jobs()
        if cfg.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.output_dir is not None:
            cfg.output_dir = str(Path(args.output_dir).resolve())
        func = COMMANDS[args.command][0]
        return func(cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except Exception as err:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


def _explicit_keys(path):
    if path is None:
        return set()
    import yaml

    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError):
        return set()
    return set(data) if isinstance(data, dict) else set()


if __name__ == "__main__":
    sys.exit(main())
