"""Binary file formats: datasets, feature sets, model checkpoints.

All integers are little-endian. Layouts:

Dataset file (magic "WII1"):
    magic[4] | version u16 | record count u64 | vector_len u16
    then per record: class_id u8 | snr_db i8 | split u8 (0=train,1=val)
                     | vector_len x (I f32, Q f32)

Feature file (magic "WIIF"):
    magic[4] | version u16 | record count u64 | rows u16 | cols u8
    | repr u8 (0=time-iq, 1=freq-iq, 2=freq-amp-phase)
    then per record: class_id u8 | snr_db i8 | split u8
                     | rows*cols f32 (row-major)

Model checkpoint (magic "WIIM"):
    magic[4] | version u16 | header_len u32 | header json (utf-8)
    then per parameter tensor, in the model's canonical order: raw f32.
    The json header carries the architecture descriptor, class ids and
    the feature pipeline tag needed to evaluate the model.
"""

import json
import struct

import numpy as np

from .catalog import CaptureSpec
from .datagen import Dataset
from .errors import CorruptionError, FormatError
from .transform import Representation

DATASET_MAGIC = b"WII1"
FEATURE_MAGIC = b"WIIF"
MODEL_MAGIC = b"WIIM"
FORMAT_VERSION = 1

_REPR_TAGS = {
    Representation.TIME_IQ: 0,
    Representation.FREQ_IQ: 1,
    Representation.FREQ_AMP_PHASE: 2,
}
_TAG_REPRS = {v: k for k, v in _REPR_TAGS.items()}


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CorruptionError(f"truncated file: expected {n} bytes of {what}")
    return buf


def _check_magic(f, magic, version_expected):
    got = f.read(len(magic))
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<H", _read_exact(f, 2, "version"))
    if version != version_expected:
        raise FormatError(f"unsupported format version {version}")


def write_dataset(dataset: Dataset, path):
    """Write a dataset; read_dataset(write_dataset(d)) is bit-exact."""
    n = len(dataset)
    vlen = dataset.iq.shape[1] if n else dataset.capture.vector_len
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<HQH", FORMAT_VERSION, n, vlen))
        # interleave labels and samples record by record
        rec = np.zeros(
            n,
            dtype=np.dtype(
                [
                    ("class_id", "u1"),
                    ("snr_db", "i1"),
                    ("split", "u1"),
                    ("iq", "<f4", (vlen, 2)),
                ]
            ),
        )
        rec["class_id"] = dataset.class_ids
        rec["snr_db"] = dataset.snrs_db
        rec["split"] = dataset.splits
        if n:
            rec["iq"][:, :, 0] = dataset.iq.real
            rec["iq"][:, :, 1] = dataset.iq.imag
        f.write(rec.tobytes())


def read_dataset(path, capture=None) -> Dataset:
    with open(path, "rb") as f:
        _check_magic(f, DATASET_MAGIC, FORMAT_VERSION)
        n, vlen = struct.unpack("<QH", _read_exact(f, 10, "header"))
        dt = np.dtype(
            [
                ("class_id", "u1"),
                ("snr_db", "i1"),
                ("split", "u1"),
                ("iq", "<f4", (vlen, 2)),
            ]
        )
        buf = _read_exact(f, n * dt.itemsize, "records")
        if f.read(1):
            raise CorruptionError("trailing bytes after the last record")
    rec = np.frombuffer(buf, dtype=dt)
    iq = np.empty((n, vlen), dtype=np.complex64)
    iq.real = rec["iq"][:, :, 0]
    iq.imag = rec["iq"][:, :, 1]
    if capture is None:
        capture = CaptureSpec() if vlen == 128 else CaptureSpec(vector_len=vlen)
    return Dataset(
        capture=capture,
        class_ids=rec["class_id"].copy(),
        snrs_db=rec["snr_db"].copy(),
        splits=rec["split"].copy(),
        iq=iq,
        seed=None,
    )


class FeatureSet:
    """Labeled feature matrices sharing one shape and representation."""

    def __init__(self, values, class_ids, snrs_db, splits, repr_kind):
        self.values = values  # float32 (n, rows, cols)
        self.class_ids = np.asarray(class_ids, dtype=np.uint8)
        self.snrs_db = np.asarray(snrs_db, dtype=np.int8)
        self.splits = np.asarray(splits, dtype=np.uint8)
        self.repr = repr_kind

    def __len__(self):
        return self.values.shape[0]

    @property
    def rows(self):
        return self.values.shape[1]

    def subset(self, mask):
        return FeatureSet(
            self.values[mask],
            self.class_ids[mask],
            self.snrs_db[mask],
            self.splits[mask],
            self.repr,
        )


def write_features(fs: FeatureSet, path):
    n, rows, cols = fs.values.shape
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<HQHBB", FORMAT_VERSION, n, rows, cols, _REPR_TAGS[fs.repr]))
        rec = np.zeros(
            n,
            dtype=np.dtype(
                [
                    ("class_id", "u1"),
                    ("snr_db", "i1"),
                    ("split", "u1"),
                    ("values", "<f4", (rows, cols)),
                ]
            ),
        )
        rec["class_id"] = fs.class_ids
        rec["snr_db"] = fs.snrs_db
        rec["split"] = fs.splits
        if n:
            rec["values"] = fs.values
        f.write(rec.tobytes())


def read_features(path) -> FeatureSet:
    with open(path, "rb") as f:
        _check_magic(f, FEATURE_MAGIC, FORMAT_VERSION)
        n, rows, cols, tag = struct.unpack("<QHBB", _read_exact(f, 12, "header"))
        if tag not in _TAG_REPRS:
            raise FormatError(f"unknown representation tag {tag}")
        dt = np.dtype(
            [
                ("class_id", "u1"),
                ("snr_db", "i1"),
                ("split", "u1"),
                ("values", "<f4", (rows, cols)),
            ]
        )
        buf = _read_exact(f, n * dt.itemsize, "records")
        if f.read(1):
            raise CorruptionError("trailing bytes after the last record")
    rec = np.frombuffer(buf, dtype=dt)
    return FeatureSet(
        values=rec["values"].astype(np.float32, copy=True),
        class_ids=rec["class_id"].copy(),
        snrs_db=rec["snr_db"].copy(),
        splits=rec["split"].copy(),
        repr_kind=_TAG_REPRS[tag],
    )


def write_model(header: dict, param_arrays, path):
    """Write a checkpoint: json header + canonical-order f32 blobs."""
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<HI", FORMAT_VERSION, len(blob)))
        f.write(blob)
        for arr in param_arrays:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_model(path):
    """Read a checkpoint; returns (header, flat f32 payload)."""
    with open(path, "rb") as f:
        _check_magic(f, MODEL_MAGIC, FORMAT_VERSION)
        (hlen,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
        try:
            header = json.loads(_read_exact(f, hlen, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptionError(f"unreadable model header: {e}") from e
        payload = np.frombuffer(f.read(), dtype="<f4")
    return header, payload
