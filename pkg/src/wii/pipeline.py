"""End-to-end experiment execution: dataset -> features -> reductions ->
training -> metrics -> report directory.

One root seed fans out to the stage streams (model init, shuffling and
dropout, subsampling) through labeled derivation, so a rerun of the same
preset on the same dataset reproduces every result CSV byte for byte;
only wall-clock entries (timing.csv, manifest) differ.
"""

import os
import platform
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .catalog import CLASS_IDS
from .datagen import Dataset
from .dataio import FeatureSet, read_dataset, write_model
from .errors import DataError, ShapeError
from .evaluate import Metrics, emit_report, evaluate_predictions
from .kernels import BACKEND, HAVE_NUMBA
from .network import (
    ARCH_BUILDERS,
    Model,
    TrainConfig,
    TrainReport,
    build_model,
    softmax,
    train,
)
from .presets import ExperimentPreset
from .reduction import (
    SubsampleSpec,
    band_bin_indices,
    observable_classes,
    pca_fit,
    pca_project,
    pca_rate_to_k,
    subsample_apply,
    subsample_resolve,
)
from .seeding import derive_seed
from .transform import Representation, features_batch


def dataset_to_features(dataset: Dataset, kind: Representation) -> FeatureSet:
    """Vectorized feature extraction over a whole dataset."""
    values = features_batch(dataset.iq, kind).astype(np.float32)
    return FeatureSet(
        values=values,
        class_ids=dataset.class_ids,
        snrs_db=dataset.snrs_db,
        splits=dataset.splits,
        repr_kind=kind,
    )


@dataclass
class PreparedData:
    """Feature tensors ready for the network, plus label bookkeeping."""

    train_x: np.ndarray  # (n, L, 2, 1) float32
    train_y: np.ndarray  # class-column indices
    val_x: np.ndarray
    val_y: np.ndarray
    val_snrs: np.ndarray
    val_class_ids: np.ndarray
    class_ids: list  # sorted catalog ids covered by the model
    input_rows: int


def prepare_features(fs: FeatureSet, preset: ExperimentPreset, root_seed) -> PreparedData:
    """Apply the preset's reductions to a feature set.

    Order: band -> training-SNR filter -> (PCA | subsampling). Band
    selection also restricts the class set to observable classes and
    drops the others' records. PCA/subsampling are fit/resolved on the
    training records only, then applied to both splits.
    """
    values = fs.values
    class_col = fs.class_ids.astype(np.int64)
    snr_col = fs.snrs_db.astype(np.int64)
    split_col = fs.splits

    if preset.band is not None:
        if not fs.repr.is_frequency_domain:
            from .errors import RepresentationError

            raise RepresentationError("band selection needs frequency-domain features")
        keep_ids = observable_classes(preset.band)
        mask = np.isin(class_col, sorted(keep_ids))
        values, class_col = values[mask], class_col[mask]
        snr_col, split_col = snr_col[mask], split_col[mask]
        values = values[:, band_bin_indices(preset.band), :]
        class_ids = sorted(keep_ids)
    else:
        class_ids = sorted(set(class_col.tolist()) or set(CLASS_IDS))

    train_mask = split_col == 0
    val_mask = split_col == 1
    if preset.train_snr is not None:
        train_mask &= snr_col == preset.train_snr
        if not train_mask.any():
            from .errors import EmptySelectionError

            raise EmptySelectionError(
                f"no training records at {preset.train_snr} dB"
            )

    train_v = values[train_mask]
    val_v = values[val_mask]

    if preset.pca_rate is not None:
        d = values.shape[1] * values.shape[2]
        k = pca_rate_to_k(preset.pca_rate, d)
        pca = pca_fit(train_v, k)
        train_v = pca_project(pca, train_v).astype(np.float32).reshape(-1, k // 2, 2)
        val_v = pca_project(pca, val_v).astype(np.float32).reshape(-1, k // 2, 2)
    elif preset.subsample is not None:
        method, rate = preset.subsample
        spec = subsample_resolve(
            SubsampleSpec(method=method, rate=rate, seed=derive_seed(root_seed, "subsample")),
            train_v,
        )
        train_v = subsample_apply(spec, train_v)
        val_v = subsample_apply(spec, val_v)

    col_of = {cid: i for i, cid in enumerate(class_ids)}
    to_cols = np.vectorize(col_of.__getitem__, otypes=[np.int64])
    rows = train_v.shape[1]
    return PreparedData(
        train_x=np.ascontiguousarray(train_v[..., None], dtype=np.float32),
        train_y=to_cols(class_col[train_mask]),
        val_x=np.ascontiguousarray(val_v[..., None], dtype=np.float32),
        val_y=to_cols(class_col[val_mask]),
        val_snrs=snr_col[val_mask],
        val_class_ids=class_col[val_mask],
        class_ids=class_ids,
        input_rows=rows,
    )


def build_preset_model(preset: ExperimentPreset, data: PreparedData, root_seed,
                       dropout_p=0.6) -> Model:
    arch = ARCH_BUILDERS[preset.arch](
        data.input_rows,
        len(data.class_ids),
        dropout_p=dropout_p,
        dropout_after_conv1=preset.extra_conv1_dropout,
    )
    return build_model(arch, seed=derive_seed(root_seed, "init"))


def predict_in_batches(model: Model, x, batch_size=256):
    out = []
    for start in range(0, x.shape[0], batch_size):
        out.append(softmax(model.forward_logits(x[start : start + batch_size])))
    return np.concatenate(out, axis=0)


def evaluate_model(model: Model, x, class_col, snr_col, class_ids, timing=None) -> Metrics:
    probs = predict_in_batches(model, x)
    return evaluate_predictions(probs, class_col, snr_col, class_ids, timing=timing)


def model_header(model: Model, class_ids, repr_kind, extra=None):
    arch = model.arch
    header = {
        "arch": {
            "input_shape": list(arch.input_shape),
            "num_classes": arch.num_classes,
            "convs": [list(c) for c in arch.convs],
            "dense": list(arch.dense),
            "dropout_p": arch.dropout_p,
            "dropout_after_conv1": arch.dropout_after_conv1,
        },
        "class_ids": list(class_ids),
        "repr": repr_kind.value,
        "param_count": model.param_count,
    }
    if extra:
        header.update(extra)
    return header


def save_model(model: Model, class_ids, repr_kind, path, extra=None):
    arrays = [arr for _, arr, _ in model.param_tensors()]
    write_model(model_header(model, class_ids, repr_kind, extra), arrays, path)


def load_model(path):
    """Rebuild a Model (and its class ids) from a checkpoint."""
    from .dataio import read_model
    from .network import ArchSpec

    header, payload = read_model(path)
    a = header["arch"]
    arch = ArchSpec(
        input_shape=tuple(a["input_shape"]),
        num_classes=a["num_classes"],
        convs=tuple(tuple(c) for c in a["convs"]),
        dense=tuple(a["dense"]),
        dropout_p=a["dropout_p"],
        dropout_after_conv1=a["dropout_after_conv1"],
    )
    model = build_model(arch, seed=0)
    if payload.size != model.param_count:
        raise ShapeError(
            f"checkpoint has {payload.size} parameters, architecture needs "
            f"{model.param_count}"
        )
    model.set_flat_params(payload.astype(np.float32))
    return model, header


def _write_manifest(path, entries):
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def run_experiment(
    preset: ExperimentPreset,
    dataset_path,
    out_dir,
    root_seed=0,
    train_config: TrainConfig | None = None,
):
    """Execute the full pipeline for one preset; returns (Metrics, TrainReport).

    Writes model.wiim, the four metrics CSVs and manifest.txt into
    out_dir. All stage seeds derive from root_seed.
    """
    preset.validate()
    t_wall = time.perf_counter()
    dataset = read_dataset(dataset_path)
    if len(dataset) == 0:
        raise DataError("dataset is empty")

    fs = dataset_to_features(dataset, preset.repr)
    data = prepare_features(fs, preset, root_seed)

    cfg = train_config or TrainConfig()
    cfg.seed = derive_seed(root_seed, "train")
    model = build_preset_model(preset, data, root_seed, dropout_p=cfg.dropout_p)
    report = train(model, data.train_x, data.train_y, data.val_x, data.val_y, cfg)

    timing = {
        "seconds_per_epoch": report.seconds_per_epoch,
        "epochs": report.epochs_run,
        "total_seconds": report.total_seconds,
    }
    metrics = evaluate_model(
        model, data.val_x, data.val_class_ids, data.val_snrs, data.class_ids, timing
    )

    os.makedirs(out_dir, exist_ok=True)
    save_model(
        model,
        data.class_ids,
        preset.repr,
        os.path.join(out_dir, "model.wiim"),
        extra={"preset": preset.name},
    )
    emit_report(metrics, out_dir)
    manifest = {
        "preset": preset.name,
        "root_seed": root_seed,
        "dataset": os.path.abspath(dataset_path),
        "dataset_records": len(dataset),
        "repr": preset.repr.value,
        "band": "" if preset.band is None else ",".join(
            f"{lo}-{hi}" for lo, hi in preset.band.ranges
        ),
        "train_snr": "" if preset.train_snr is None else preset.train_snr,
        "pca_rate": "" if preset.pca_rate is None else preset.pca_rate,
        "subsample": ""
        if preset.subsample is None
        else f"{preset.subsample[0]}@{preset.subsample[1]}",
        "arch": preset.arch,
        "extra_conv1_dropout": preset.extra_conv1_dropout,
        "input_rows": data.input_rows,
        "num_classes": len(data.class_ids),
        "class_ids": ",".join(str(c) for c in data.class_ids),
        "train_records": len(data.train_y),
        "val_records": len(data.val_y),
        "lr": cfg.lr,
        "batch_size": cfg.batch_size,
        "dropout_p": cfg.dropout_p,
        "patience": cfg.patience,
        "max_epochs": cfg.max_epochs,
        "epochs_run": report.epochs_run,
        "seconds_per_epoch": report.seconds_per_epoch,
        "best_val_accuracy": report.best_val_accuracy,
        "overall_accuracy": metrics.overall_accuracy,
        "param_count": model.param_count,
        "backend": BACKEND,
        "numba": HAVE_NUMBA,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "wall_clock_seconds": round(time.perf_counter() - t_wall, 3),
    }
    _write_manifest(os.path.join(out_dir, "manifest.txt"), manifest)
    return metrics, report


def _read_kv_csv(path):
    import csv

    from .errors import FormatError

    if not os.path.exists(path):
        raise FormatError(f"missing report file {path}")
    out = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["metric", "value"]:
            raise FormatError(f"{path} is not a metric,value CSV")
        for key, value in reader:
            out[key] = value
    return out


def compare_reports(dirs, out_path):
    """Side-by-side comparison CSV; speedups are relative to dirs[0]."""
    from .errors import UsageError
    from .evaluate import SUMMARY_CSV, TIMING_CSV, _write_csv

    if len(dirs) < 2:
        raise UsageError("compare needs at least two report directories")
    rows = []
    base_acc = base_epoch = base_total = None
    for d in dirs:
        summary = _read_kv_csv(os.path.join(d, SUMMARY_CSV))
        timing = _read_kv_csv(os.path.join(d, TIMING_CSV))
        if "overall_accuracy" not in summary:
            from .errors import FormatError

            raise FormatError(f"{d}: summary.csv lacks overall_accuracy")
        acc = float(summary["overall_accuracy"])
        spe = float(timing.get("seconds_per_epoch", "nan"))
        epochs = float(timing.get("epochs", "nan"))
        total = float(timing.get("total_seconds", "nan"))
        if base_acc is None:
            base_acc, base_epoch, base_total = acc, spe, total
        rows.append(
            (
                d,
                acc,
                spe,
                epochs,
                total,
                acc - base_acc,
                base_epoch / spe,
                base_total / total,
            )
        )
    _write_csv(
        out_path,
        [
            "report_dir",
            "overall_accuracy",
            "seconds_per_epoch",
            "epochs",
            "total_seconds",
            "accuracy_delta",
            "epoch_speedup",
            "total_speedup",
        ],
        rows,
    )
    return out_path
