"""Command-line entry point.

Subcommands cover the experiment lifecycle:

    wii generate   synthesize a labeled dataset file
    wii preprocess convert raw I/Q into a feature representation
    wii reduce     band / training-SNR / PCA / subsampling reduction
    wii train      train a CNN on a feature file
    wii evaluate   metrics CSVs for a model on a feature file
    wii run        one named preset end to end (dataset -> report dir)
    wii compare    side-by-side accuracy/timing table of report dirs

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure. WII_THREADS caps worker threads; WII_BACKEND selects the
numba/numpy kernel path.
"""

import argparse
import os
import sys

import numpy as np

from .catalog import SNR_GRID_DB
from .errors import (
    ConfigError,
    NumericError,
    UsageError,
    WiiError,
)
from .presets import PRESETS, get_preset
from .transform import Representation

_REPR_CHOICES = {r.value: r for r in Representation}


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the interface contract
    # reserves 2 for data errors, so route usage problems through 1.
    def error(self, message):
        raise UsageError(message)


def _parse_snr_list(text):
    if text.strip().lower() == "all":
        return tuple(SNR_GRID_DB)
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as e:
        raise UsageError(f"bad SNR list {text!r}: {e}") from e


def _read_train_config(path):
    """Flat key=value config file -> TrainConfig."""
    from .network import TrainConfig

    cfg = TrainConfig()
    coerce = {
        "lr": float,
        "batch_size": int,
        "dropout": float,
        "beta1": float,
        "beta2": float,
        "eps": float,
        "patience": int,
        "max_epochs": int,
        "seed": int,
    }
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in coerce:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            attr = "dropout_p" if key == "dropout" else key
            setattr(cfg, attr, coerce[key](value.strip()))
    cfg.validate()
    return cfg


def _apply_train_overrides(cfg, args):
    for key in ("lr", "batch_size", "patience", "max_epochs"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "dropout", None) is not None:
        cfg.dropout_p = args.dropout
    cfg.validate()
    return cfg


def _cmd_generate(args):
    from .datagen import GenConfig, build_dataset
    from .dataio import write_dataset

    config = GenConfig(
        vectors_per_cell=args.vectors_per_cell,
        snr_list=_parse_snr_list(args.snrs),
        train_fraction=args.train_fraction,
        seed=args.seed,
    )
    dataset = build_dataset(config)
    write_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} records to {args.out}")


def _cmd_preprocess(args):
    from .dataio import read_dataset, write_features
    from .pipeline import dataset_to_features

    dataset = read_dataset(getattr(args, "in"))
    fs = dataset_to_features(dataset, _REPR_CHOICES[args.repr])
    write_features(fs, args.out)
    print(f"wrote {len(fs)} feature records ({args.repr}) to {args.out}")


def _cmd_reduce(args):
    from .dataio import read_features, write_features
    from .reduction import (
        BandSpec,
        SubsampleSpec,
        band_bin_indices,
        observable_classes,
        pca_fit,
        pca_project,
        pca_rate_to_k,
        snr_filter,
        subsample_apply,
        subsample_resolve,
    )

    if args.pca_rate is not None and args.subsample is not None:
        raise UsageError("use --pca-rate or --subsample, not both")
    fs = read_features(getattr(args, "in"))
    values = fs.values
    keep = np.ones(len(fs), dtype=bool)

    if args.band:
        band = BandSpec.parse(args.band)
        if not fs.repr.is_frequency_domain:
            from .errors import RepresentationError

            raise RepresentationError("band selection needs frequency-domain features")
        keep &= np.isin(fs.class_ids, sorted(observable_classes(band)))
        values = values[:, band_bin_indices(band), :]

    if args.train_snr is not None:
        # training-set selection: drop train records at other SNRs,
        # validation records stay full-grid
        train_keep = snr_filter(fs.snrs_db, fs.splits, args.train_snr, "train")
        keep &= train_keep | (fs.splits == 1)

    values = values[keep]
    class_ids = fs.class_ids[keep]
    snrs = fs.snrs_db[keep]
    splits = fs.splits[keep]
    train_mask = splits == 0

    if args.pca_rate is not None:
        d = values.shape[1] * values.shape[2]
        k = pca_rate_to_k(args.pca_rate, d)
        pca = pca_fit(values[train_mask], k)
        values = pca_project(pca, values).astype(np.float32).reshape(-1, k // 2, 2)
    elif args.subsample is not None:
        spec = subsample_resolve(
            SubsampleSpec(method=args.subsample, rate=args.rate, seed=args.seed),
            values[train_mask],
        )
        values = subsample_apply(spec, values)

    from .dataio import FeatureSet

    write_features(FeatureSet(values, class_ids, snrs, splits, fs.repr), args.out)
    print(f"wrote {values.shape[0]} reduced records ({values.shape[1]} rows) to {args.out}")


def _cmd_train(args):
    from .dataio import read_features
    from .network import ARCH_BUILDERS, TrainConfig, build_model, train
    from .pipeline import save_model
    from .seeding import derive_seed

    fs = read_features(args.data)
    cfg = _read_train_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    _apply_train_overrides(cfg, args)

    class_ids = sorted(set(fs.class_ids.tolist()))
    col_of = {cid: i for i, cid in enumerate(class_ids)}
    labels = np.array([col_of[c] for c in fs.class_ids.tolist()])
    x = np.ascontiguousarray(fs.values[..., None], dtype=np.float32)
    train_mask = fs.splits == 0
    val_mask = fs.splits == 1

    arch = ARCH_BUILDERS[args.arch](
        fs.rows, len(class_ids), dropout_p=cfg.dropout_p,
        dropout_after_conv1=args.conv1_dropout,
    )
    model = build_model(arch, seed=derive_seed(cfg.seed, "init"))
    report = train(
        model, x[train_mask], labels[train_mask], x[val_mask], labels[val_mask], cfg
    )
    save_model(model, class_ids, fs.repr, args.out)
    print(
        f"trained {args.arch} for {report.epochs_run} epochs "
        f"({report.seconds_per_epoch:.2f}s/epoch), best val accuracy "
        f"{report.best_val_accuracy:.4f}; model -> {args.out}"
    )


def _cmd_evaluate(args):
    from .dataio import read_features
    from .evaluate import emit_report
    from .pipeline import evaluate_model, load_model

    model, header = load_model(args.model)
    fs = read_features(args.data)
    if fs.rows != model.arch.input_shape[0]:
        from .errors import ShapeError

        raise ShapeError(
            f"feature rows {fs.rows} != model input length "
            f"{model.arch.input_shape[0]}"
        )
    val = fs.subset(fs.splits == 1)
    x = np.ascontiguousarray(val.values[..., None], dtype=np.float32)
    metrics = evaluate_model(
        model, x, val.class_ids, val.snrs_db, header["class_ids"]
    )
    paths = emit_report(metrics, args.out)
    print(f"overall accuracy {metrics.overall_accuracy:.4f}; reports in {args.out}")
    return 0 if paths else 2


def _cmd_run(args):
    from .network import TrainConfig
    from .pipeline import run_experiment

    preset = get_preset(args.preset)
    cfg = _read_train_config(args.config) if args.config else TrainConfig()
    _apply_train_overrides(cfg, args)
    if args.deterministic:
        _pin_threads()
    metrics, report = run_experiment(
        preset, args.data, args.out, root_seed=args.seed, train_config=cfg
    )
    print(
        f"preset {preset.name}: accuracy {metrics.overall_accuracy:.4f}, "
        f"{report.epochs_run} epochs at {report.seconds_per_epoch:.2f}s/epoch; "
        f"reports in {args.out}"
    )


def _pin_threads():
    # bitwise reproducibility holds for a fixed thread count; pin it so
    # reruns on the same machine agree regardless of ambient env changes
    from .kernels import HAVE_NUMBA

    n = int(os.environ.get("WII_THREADS", "0")) or None
    if HAVE_NUMBA:
        import numba

        numba.set_num_threads(n or numba.get_num_threads())
    try:
        import threadpoolctl

        global _limiter
        _limiter = threadpoolctl.threadpool_limits(limits=n)
    except ImportError:  # pragma: no cover
        pass


def _cmd_compare(args):
    from .pipeline import compare_reports

    compare_reports(args.dirs, args.out)
    print(f"comparison -> {args.out}")


def build_parser():
    p = _Parser(prog="wii", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a labeled I/Q dataset")
    g.add_argument("--vectors-per-cell", type=int, required=True)
    g.add_argument("--snrs", default="all", help='comma list of dB values or "all"')
    g.add_argument("--train-fraction", type=float, default=480.0 / 715.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    pp = sub.add_parser("preprocess", help="convert I/Q records to features")
    pp.add_argument("--repr", choices=sorted(_REPR_CHOICES), required=True)
    pp.add_argument("--in", required=True)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=_cmd_preprocess)

    r = sub.add_parser("reduce", help="band/SNR/PCA/subsampling reduction")
    r.add_argument("--in", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--band", help='e.g. "2429-2431" or "2422-2424,2429-2431" (MHz)')
    r.add_argument("--train-snr", type=int, help="keep only this SNR in the train split")
    r.add_argument("--pca-rate", type=float, help="compression rate, e.g. 0.0625")
    r.add_argument("--subsample", choices=("random", "uniform", "hmr"))
    r.add_argument("--rate", type=float, default=0.25, help="subsampling rate")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=_cmd_reduce)

    t = sub.add_parser("train", help="train a CNN on a feature file")
    t.add_argument("--arch", choices=("proposed", "baseline"), default="proposed")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="key=value training config file")
    t.add_argument("--conv1-dropout", action="store_true")
    for flag, typ in (
        ("--seed", int),
        ("--lr", float),
        ("--batch-size", int),
        ("--dropout", float),
        ("--patience", int),
        ("--max-epochs", int),
    ):
        t.add_argument(flag, type=typ)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="metrics CSVs for a model on features")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_evaluate)

    ru = sub.add_parser("run", help="run a named experiment preset")
    ru.add_argument("--preset", choices=sorted(PRESETS), required=True)
    ru.add_argument("--data", required=True, help="dataset file from `wii generate`")
    ru.add_argument("--out", required=True, help="report directory")
    ru.add_argument("--seed", type=int, default=0)
    ru.add_argument("--config", help="key=value training config file")
    ru.add_argument("--deterministic", action="store_true")
    for flag, typ in (
        ("--lr", float),
        ("--batch-size", int),
        ("--dropout", float),
        ("--patience", int),
        ("--max-epochs", int),
    ):
        ru.add_argument(flag, type=typ)
    ru.set_defaults(func=_cmd_run)

    c = sub.add_parser("compare", help="compare report directories")
    c.add_argument("dirs", nargs="+")
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        rc = args.func(args)
        return int(rc or 0)
    except (UsageError, ConfigError) as e:
        print(f"wii: usage error: {e}", file=sys.stderr)
        return 1
    except (NumericError, FloatingPointError) as e:
        print(f"wii: numeric failure: {e}", file=sys.stderr)
        return 3
    except (WiiError, OSError) as e:
        print(f"wii: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
