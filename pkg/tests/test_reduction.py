import numpy as np
import pytest

from wii.catalog import CAPTURE
from wii.errors import (
    DataError,
    DimensionError,
    EmptySelectionError,
    RangeError,
    RepresentationError,
)
from wii.reduction import (
    BandSpec,
    SubsampleSpec,
    apply_band,
    band_bin_indices,
    band_to_bins,
    observable_classes,
    snr_filter,
    subsample_apply,
    subsample_resolve,
)
from wii.transform import FeatureMatrix, Representation, bin_offsets


def bins_oracle(low_mhz):
    # f_k = -5 MHz + k * 0.078125 MHz relative to 2426.5
    return (low_mhz - 2421.5) / 0.078125


def test_band_to_bins_upper_2mhz():
    assert bins_oracle(2429.0) == pytest.approx(96.0)
    assert band_to_bins(BandSpec(((2429.0, 2431.0),))) == [(96, 122)]


def test_band_to_bins_lower_2mhz():
    assert int(bins_oracle(2422.0)) == 6  # 6.4 floors to 6
    assert band_to_bins(BandSpec(((2422.0, 2424.0),))) == [(6, 32)]


def test_band_to_bins_full_band():
    assert band_to_bins(BandSpec(((2421.5, 2431.5),))) == [(0, 128)]


def test_band_bin_centers_stay_inside_requested_ranges():
    freqs = bin_offsets(128) + CAPTURE.capture_center
    for ranges in (((2429.0, 2431.0),), ((2422.0, 2424.0), (2429.0, 2431.0))):
        spans = band_to_bins(BandSpec(ranges))
        for (lo, hi), (start, stop) in zip(ranges, spans):
            centers = freqs[start:stop]
            delta = CAPTURE.bin_spacing
            assert (centers >= lo - delta / 2 - 1e-9).all()
            assert (centers <= hi + delta / 2 + 1e-9).all()
        flat = [i for s, e in spans for i in range(s, e)]
        assert sorted(set(flat)) == flat  # disjoint and sorted


def test_band_outside_capture_rejected():
    with pytest.raises(RangeError):
        band_to_bins(BandSpec(((2410.0, 2412.0),)))
    with pytest.raises(RangeError):
        band_to_bins(BandSpec(((2431.0, 2433.0),)))


def test_bandspec_validation():
    with pytest.raises(RangeError):
        BandSpec(())
    with pytest.raises(RangeError):
        BandSpec(((2425.0, 2424.0),))
    with pytest.raises(RangeError):
        BandSpec(((2422.0, 2425.0), (2424.0, 2426.0)))


def test_observable_classes_upper_2mhz():
    assert observable_classes(BandSpec(((2429.0, 2431.0),))) == {
        8, 9, 10, 11, 12, 13, 15,
    }


def test_observable_classes_4mhz():
    got = observable_classes(BandSpec(((2422.0, 2424.0), (2429.0, 2431.0))))
    assert got == {1, 2, 3, 8, 9, 10, 11, 12, 13, 15}
    techs = {"Bluetooth": {1, 2, 3, 8, 9, 10}, "WiFi": {11, 12, 13}, "Zigbee": {15}}
    assert got == set().union(*techs.values())


def test_observable_classes_full_band():
    assert observable_classes(BandSpec(((2421.5, 2431.5),))) == set(range(1, 16))


def test_observable_classes_monotone_in_ranges():
    one = observable_classes(BandSpec(((2429.0, 2431.0),)))
    two = observable_classes(BandSpec(((2422.0, 2424.0), (2429.0, 2431.0))))
    assert one <= two


def _freq_features(rng, rows=128):
    return FeatureMatrix(
        values=rng.standard_normal((rows, 2)).astype(np.float32),
        repr=Representation.FREQ_IQ,
        bin_freqs=bin_offsets(rows),
    )


def test_apply_band_row_counts():
    rng = np.random.default_rng(0)
    fm = _freq_features(rng)
    cut = apply_band(fm, BandSpec(((2429.0, 2431.0),)))
    assert cut.values.shape == (26, 2)
    assert cut.bin_freqs.shape == (26,)
    both = apply_band(fm, BandSpec(((2422.0, 2424.0), (2429.0, 2431.0))))
    assert both.values.shape == (52, 2)
    # lower range comes first
    assert both.bin_freqs[0] < 0 < both.bin_freqs[-1]
    full = apply_band(fm, BandSpec(((2421.5, 2431.5),)))
    assert np.array_equal(full.values, fm.values)


def test_apply_band_rejects_time_domain():
    rng = np.random.default_rng(1)
    fm = FeatureMatrix(
        values=rng.standard_normal((128, 2)).astype(np.float32),
        repr=Representation.TIME_IQ,
        bin_freqs=None,
    )
    with pytest.raises(RepresentationError):
        apply_band(fm, BandSpec(((2429.0, 2431.0),)))


def test_snr_filter_counts_and_errors():
    snrs = np.repeat([-10, -10, 0, 0], 5)
    splits = np.tile([0, 0, 0, 1, 1], 4)
    mask = snr_filter(snrs, splits, -10, "train")
    assert mask.sum() == 6
    assert (snrs[mask] == -10).all()
    with pytest.raises(EmptySelectionError):
        snr_filter(snrs, splits, 20, "train")


def test_uniform_subsample_stride4():
    rng = np.random.default_rng(2)
    train = rng.standard_normal((10, 128, 2))
    spec = subsample_resolve(SubsampleSpec(method="uniform", rate=0.25), train)
    assert np.array_equal(spec.indices, np.arange(0, 128, 4))
    assert len(spec.indices) == 32


def test_uniform_subsample_bankers_rounding():
    # 52 rows at rate 1/8 keeps round(6.5) = 6 rows
    rng = np.random.default_rng(3)
    train = rng.standard_normal((4, 52, 2))
    spec = subsample_resolve(SubsampleSpec(method="uniform", rate=1 / 8), train)
    assert len(spec.indices) == 6
    assert np.array_equal(spec.indices, np.arange(6) * 8)


def test_random_subsample_deterministic_and_distinct():
    rng = np.random.default_rng(4)
    train = rng.standard_normal((3, 128, 2))
    a = subsample_resolve(SubsampleSpec(method="random", rate=0.25, seed=11), train)
    b = subsample_resolve(SubsampleSpec(method="random", rate=0.25, seed=11), train)
    assert np.array_equal(a.indices, b.indices)
    assert len(set(a.indices.tolist())) == 32
    assert (np.diff(a.indices) > 0).all()
    c = subsample_resolve(SubsampleSpec(method="random", rate=0.25, seed=12), train)
    assert not np.array_equal(a.indices, c.indices)


def test_hmr_picks_high_energy_rows():
    # brute-force oracle: rows 5 and 9 carry 10x the energy
    rng = np.random.default_rng(5)
    train = rng.standard_normal((50, 16, 2)) * 0.1
    train[:, 5, :] += 3.0
    train[:, 9, :] -= 3.0
    spec = subsample_resolve(
        SubsampleSpec(method="hmr", rate=2 / 16), train
    )
    assert np.array_equal(spec.indices, [5, 9])
    # seed-independent
    spec2 = subsample_resolve(
        SubsampleSpec(method="hmr", rate=2 / 16, seed=999), train
    )
    assert np.array_equal(spec2.indices, spec.indices)


def test_hmr_empty_training_set():
    with pytest.raises(DataError):
        subsample_resolve(
            SubsampleSpec(method="hmr", rate=0.5), np.zeros((0, 8, 2))
        )


def test_subsample_apply_identity_and_counts():
    rng = np.random.default_rng(6)
    train = rng.standard_normal((5, 128, 2))
    full = subsample_resolve(SubsampleSpec(method="uniform", rate=1.0), train)
    assert np.array_equal(subsample_apply(full, train), train)
    quarter = subsample_resolve(SubsampleSpec(method="uniform", rate=0.25), train)
    assert subsample_apply(quarter, train).shape == (5, 32, 2)


def test_subsample_compose_with_band():
    # band first (52 rows), then rate-1/8 subsample -> 6 rows
    rng = np.random.default_rng(7)
    fm = _freq_features(rng)
    banded = apply_band(fm, BandSpec(((2422.0, 2424.0), (2429.0, 2431.0))))
    train = banded.values[None, ...]
    spec = subsample_resolve(SubsampleSpec(method="uniform", rate=1 / 8), train)
    assert subsample_apply(spec, banded.values).shape == (6, 2)


def test_subsample_apply_out_of_range():
    spec = SubsampleSpec(method="uniform", rate=0.5, indices=np.array([0, 99]))
    with pytest.raises(DimensionError):
        subsample_apply(spec, np.zeros((4, 16, 2)))


def test_subsample_unresolved_and_bad_args():
    with pytest.raises(DimensionError):
        subsample_apply(SubsampleSpec(method="uniform", rate=0.5), np.zeros((4, 16, 2)))
    with pytest.raises(DimensionError):
        SubsampleSpec(method="nope", rate=0.5)
    with pytest.raises(DimensionError):
        SubsampleSpec(method="uniform", rate=0.0)
