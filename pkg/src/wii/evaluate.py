"""Metrics over an evaluation split: accuracies, confusion, CSV reports.

Technology grouping follows the channel plan: classes 1-10 Bluetooth,
11-13 WiFi, 14-15 Zigbee. Per-SNR accuracy is computed over each SNR
slice of the evaluation set. Ties in the posterior argmax break toward
the lowest class id.
"""

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .catalog import TECHNOLOGIES, technology_of
from .errors import DataError, LabelError


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64, rows true, cols predicted
    class_ids: list

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def trace(self):
        return int(np.trace(self.counts))


@dataclass
class Metrics:
    overall_accuracy: float
    per_technology: dict  # technology -> accuracy (present technologies only)
    per_snr: dict  # snr_db -> accuracy
    confusion: ConfusionMatrix
    timing: dict = field(default_factory=dict)
    # seconds_per_epoch / epochs / total_seconds when a TrainReport is attached


def evaluate_predictions(probs, true_ids, snrs_db, class_ids, timing=None) -> Metrics:
    """Aggregate posterior rows into Metrics.

    probs: (n, K) posteriors over `class_ids` (sorted); true_ids holds
    catalog class ids which must all be present in class_ids.
    """
    class_ids = list(class_ids)
    n = probs.shape[0]
    if n == 0:
        raise DataError("no records to evaluate")
    id_to_col = {cid: i for i, cid in enumerate(class_ids)}
    true_ids = np.asarray(true_ids)
    unknown = set(np.unique(true_ids)) - set(class_ids)
    if unknown:
        raise LabelError(f"classes {sorted(unknown)} absent from the model class set")
    true_cols = np.array([id_to_col[c] for c in true_ids.tolist()])
    pred_cols = probs.argmax(axis=1)  # np.argmax returns the first (lowest) max

    k = len(class_ids)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true_cols, pred_cols), 1)

    correct = pred_cols == true_cols
    overall = float(correct.mean())

    per_tech = {}
    techs = [technology_of(c) for c in class_ids]
    for tech in TECHNOLOGIES:
        member_cols = [i for i, t in enumerate(techs) if t == tech]
        if not member_cols:
            continue
        mask = np.isin(true_cols, member_cols)
        if mask.any():
            per_tech[tech] = float(correct[mask].mean())

    per_snr = {}
    snrs_db = np.asarray(snrs_db)
    for snr in sorted(set(snrs_db.tolist())):
        mask = snrs_db == snr
        per_snr[int(snr)] = float(correct[mask].mean())

    return Metrics(
        overall_accuracy=overall,
        per_technology=per_tech,
        per_snr=per_snr,
        confusion=ConfusionMatrix(counts=counts, class_ids=class_ids),
        timing=dict(timing) if timing else {},
    )


def _write_csv(path, header, rows):
    # repr-style float formatting and fixed newlines keep reruns byte-identical
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(buf.getvalue())


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


SUMMARY_CSV = "summary.csv"
SNR_CSV = "accuracy_vs_snr.csv"
CONFUSION_CSV = "confusion.csv"
TIMING_CSV = "timing.csv"


def emit_report(metrics: Metrics, out_dir):
    """Write the four report CSVs; returns their paths.

    summary/accuracy_vs_snr/confusion are deterministic functions of the
    metrics; timing.csv carries wall-clock numbers and is the only file
    expected to differ between reruns.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    rows = [("overall_accuracy", metrics.overall_accuracy)]
    for tech in TECHNOLOGIES:
        if tech in metrics.per_technology:
            rows.append((f"accuracy_{tech.lower()}", metrics.per_technology[tech]))
    rows.append(("num_classes", len(metrics.confusion.class_ids)))
    rows.append(("num_records", metrics.confusion.total))
    paths[SUMMARY_CSV] = os.path.join(out_dir, SUMMARY_CSV)
    _write_csv(paths[SUMMARY_CSV], ["metric", "value"], rows)

    paths[SNR_CSV] = os.path.join(out_dir, SNR_CSV)
    _write_csv(
        paths[SNR_CSV],
        ["snr_db", "accuracy"],
        [(snr, acc) for snr, acc in sorted(metrics.per_snr.items())],
    )

    paths[CONFUSION_CSV] = os.path.join(out_dir, CONFUSION_CSV)
    ids = metrics.confusion.class_ids
    _write_csv(
        paths[CONFUSION_CSV],
        ["true_class"] + [f"pred_{c}" for c in ids],
        [
            [cid] + [int(x) for x in row]
            for cid, row in zip(ids, metrics.confusion.counts)
        ],
    )

    paths[TIMING_CSV] = os.path.join(out_dir, TIMING_CSV)
    trows = [(key, metrics.timing[key]) for key in sorted(metrics.timing)]
    _write_csv(paths[TIMING_CSV], ["metric", "value"], trows)
    return paths
