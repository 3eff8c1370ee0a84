"""Training-cost reduction: band selection, SNR selection, PCA, subsampling.

All four techniques shrink what the classifier sees. Band selection
slices contiguous frequency bins (and drops classes that are no longer
observable), SNR selection trains on a single-SNR slice, PCA projects
the flattened feature vector onto its top covariance eigenvectors, and
the three subsampling schemes keep a fixed subset of feature rows.
"""

from dataclasses import dataclass, field

import numpy as np

from .catalog import CAPTURE, CATALOG
from .errors import (
    DataError,
    DimensionError,
    EmptySelectionError,
    RangeError,
    RepresentationError,
)
from .seeding import rng_for


# ----------------------------------------------------------------------
# band selection
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BandSpec:
    """Disjoint absolute-frequency ranges inside the captured window."""

    ranges: tuple  # of (low_mhz, high_mhz)

    def __post_init__(self):
        if not self.ranges:
            raise RangeError("band must contain at least one range")
        prev_high = None
        for low, high in self.ranges:
            if high <= low:
                raise RangeError(f"empty band range ({low}, {high})")
            if prev_high is not None and low < prev_high:
                raise RangeError("band ranges must be sorted and disjoint")
            prev_high = high

    @staticmethod
    def parse(text):
        """Parse "2429-2431" or "2422-2424,2429-2431" (MHz)."""
        ranges = []
        for part in text.split(","):
            lo, _, hi = part.partition("-")
            ranges.append((float(lo), float(hi)))
        return BandSpec(tuple(sorted(ranges)))

    @property
    def total_width(self):
        return sum(high - low for low, high in self.ranges)


def _round_up_to_even(x):
    n = round(x)
    return n + 1 if n % 2 else n


def band_to_bins(band: BandSpec, capture=CAPTURE):
    """Map MHz ranges onto shifted-FFT bin ranges [(start, stop), ...].

    A range starts at the bin containing its low edge and spans its
    width rounded up to an even number of bins, so conv arithmetic stays
    symmetric. The 2 MHz ranges used throughout map to 26 bins.
    """
    delta = capture.bin_spacing
    f_min = capture.low_edge
    n = capture.vector_len
    out = []
    for low, high in band.ranges:
        if low < f_min - 1e-9 or high > capture.high_edge + 1e-9:
            raise RangeError(
                f"band ({low}, {high}) outside capture "
                f"({f_min}, {capture.high_edge})"
            )
        start = int(np.floor((low - f_min) / delta + 1e-9))
        count = max(2, _round_up_to_even((high - low) / delta))
        stop = min(start + count, n)
        out.append((start, stop))
    for (s0, e0), (s1, e1) in zip(out, out[1:]):
        if s1 < e0:
            raise RangeError("band ranges overlap after bin rounding")
    return out


def band_bin_indices(band: BandSpec, capture=CAPTURE):
    ranges = band_to_bins(band, capture)
    return np.concatenate([np.arange(s, e) for s, e in ranges])


def observable_classes(band: BandSpec):
    """Class ids whose channel interval overlaps any band range."""
    ids = set()
    for spec in CATALOG:
        for low, high in band.ranges:
            if spec.low_edge < high and low < spec.high_edge:
                ids.add(spec.class_id)
                break
    return ids


def apply_band(features, band: BandSpec, capture=CAPTURE):
    """Restrict a frequency-domain FeatureMatrix to the selected bins."""
    from .transform import FeatureMatrix

    if not features.repr.is_frequency_domain or features.bin_freqs is None:
        raise RepresentationError("band selection needs frequency-domain features")
    idx = band_bin_indices(band, capture)
    return FeatureMatrix(
        values=features.values[idx],
        repr=features.repr,
        bin_freqs=features.bin_freqs[idx],
    )


# ----------------------------------------------------------------------
# SNR selection
# ----------------------------------------------------------------------


def snr_filter(snrs_db, splits, snr_db, split):
    """Boolean mask of records in `split` captured at exactly `snr_db`.

    Training-set selection only; validation stays full-grid. Raises if
    the SNR is absent from the given split.
    """
    from .datagen import SPLIT_TRAIN, SPLIT_VAL

    want = SPLIT_TRAIN if split == "train" else SPLIT_VAL
    mask = (np.asarray(snrs_db) == snr_db) & (np.asarray(splits) == want)
    if not mask.any():
        raise EmptySelectionError(f"no {split} records at {snr_db} dB")
    return mask


# ----------------------------------------------------------------------
# PCA
# ----------------------------------------------------------------------


@dataclass
class PcaModel:
    """Orthonormal top-k eigenbasis of the training-feature covariance."""

    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), rows orthonormal
    eigenvalues: np.ndarray  # (k,), non-increasing

    @property
    def k(self):
        return self.components.shape[0]

    @property
    def d(self):
        return self.components.shape[1]


def _flatten(values):
    # (n, L, 2) -> (n, 2L); both columns are treated jointly.
    v = np.asarray(values)
    return v.reshape(v.shape[0], -1)


def pca_fit(train_values, k) -> PcaModel:
    """Fit PCA on flattened training features.

    Components are eigenvectors of the empirical covariance ordered by
    non-increasing eigenvalue, with the sign fixed so each component's
    largest-magnitude coordinate is positive.
    """
    x = _flatten(train_values).astype(np.float64)
    n, d = x.shape
    if k > d:
        raise DimensionError(f"k={k} exceeds feature dimension d={d}")
    if n < k + 1:
        raise DimensionError(f"need at least k+1={k + 1} training vectors, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / n
    evals, evecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(evals, kind="stable")[::-1][:k]
    comps = evecs[:, order].T.copy()
    evals = evals[order].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=comps, eigenvalues=evals)


def pca_project(model: PcaModel, values):
    """Project flattened features onto the component basis: C @ (x - mean)."""
    x = _flatten(np.atleast_2d(values) if np.asarray(values).ndim == 1 else values)
    if x.shape[1] != model.d:
        raise DimensionError(f"feature dimension {x.shape[1]} != model d={model.d}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, projected):
    return np.asarray(projected) @ model.components + model.mean


def pca_rate_to_k(rate, d):
    """Retained dimensions for a compression rate; bumped up to even so
    the projected vector reshapes back into two feature columns."""
    k = max(2, round(rate * d))
    return k + 1 if k % 2 else k


# ----------------------------------------------------------------------
# sub-Nyquist subsampling
# ----------------------------------------------------------------------

RANDOM = "random"
UNIFORM = "uniform"
HIGH_MAGNITUDE_RANK = "hmr"

SUBSAMPLE_METHODS = (RANDOM, UNIFORM, HIGH_MAGNITUDE_RANK)


@dataclass
class SubsampleSpec:
    """Row-subset selector shared by every record of a dataset."""

    method: str
    rate: float
    seed: int = 0
    indices: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.method not in SUBSAMPLE_METHODS:
            raise DimensionError(f"unknown subsampling method {self.method!r}")
        if not 0.0 < self.rate <= 1.0:
            raise DimensionError(f"subsampling rate {self.rate} outside (0, 1]")


def _subsample_count(rate, length):
    # round() is the bankers' rounding the row-count contract is pinned
    # to (52 rows at rate 1/8 -> 6).
    return max(1, round(rate * length))


def subsample_resolve(spec: SubsampleSpec, train_values) -> SubsampleSpec:
    """Fill spec.indices from the training set (sorted, strictly increasing).

    uniform: indices {0, s, 2s, ...} with stride s = round(1/rate);
    random: a seeded draw of distinct rows; hmr: rows with the largest
    mean magnitude sqrt(col0^2 + col1^2) over the training records.
    """
    v = np.asarray(train_values)
    if v.ndim != 3:
        raise DimensionError("expected (n, rows, cols) training features")
    n, length, _ = v.shape
    if spec.rate * length < 1.0 - 1e-12:
        raise DimensionError(f"rate {spec.rate} keeps no rows of {length}")
    count = _subsample_count(spec.rate, length)
    if spec.method == UNIFORM:
        stride = max(1, round(1.0 / spec.rate))
        idx = np.arange(count) * stride
        idx = idx[idx < length]
    elif spec.method == RANDOM:
        rng = rng_for(spec.seed, "subsample")
        idx = np.sort(rng.choice(length, size=count, replace=False))
    else:
        if n == 0:
            raise DataError("high-magnitude ranking needs a nonempty training set")
        mag = np.sqrt((v.astype(np.float64) ** 2).sum(axis=2)).mean(axis=0)
        ranked = np.argsort(-mag, kind="stable")[:count]
        idx = np.sort(ranked)
    return SubsampleSpec(
        method=spec.method, rate=spec.rate, seed=spec.seed, indices=idx.astype(np.int64)
    )


def subsample_apply(spec: SubsampleSpec, values):
    """Select the resolved rows from (rows, cols) or (n, rows, cols)."""
    if spec.indices is None:
        raise DimensionError("subsample spec not resolved yet")
    v = np.asarray(values)
    length = v.shape[-2]
    if spec.indices.size and spec.indices.max() >= length:
        raise DimensionError(
            f"subsample index {spec.indices.max()} out of range for {length} rows"
        )
    return v[..., spec.indices, :]
