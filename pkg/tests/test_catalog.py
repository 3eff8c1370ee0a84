import pytest

from wii.catalog import (
    CAPTURE,
    CATALOG,
    SNR_GRID_DB,
    baseband_offset,
    class_spec,
    technology_of,
)
from wii.errors import CatalogError

# the full channel plan: (id, technology, center MHz, width MHz)
EXPECTED = [
    (1, "Bluetooth", 2422.0, 1.0),
    (2, "Bluetooth", 2423.0, 1.0),
    (3, "Bluetooth", 2424.0, 1.0),
    (4, "Bluetooth", 2425.0, 1.0),
    (5, "Bluetooth", 2426.0, 1.0),
    (6, "Bluetooth", 2427.0, 1.0),
    (7, "Bluetooth", 2428.0, 1.0),
    (8, "Bluetooth", 2429.0, 1.0),
    (9, "Bluetooth", 2430.0, 1.0),
    (10, "Bluetooth", 2431.0, 1.0),
    (11, "WiFi", 2422.0, 20.0),
    (12, "WiFi", 2427.0, 20.0),
    (13, "WiFi", 2432.0, 20.0),
    (14, "Zigbee", 2425.0, 2.0),
    (15, "Zigbee", 2430.0, 2.0),
]


def test_catalog_matches_channel_plan_cell_by_cell():
    assert len(CATALOG) == 15
    for spec, (cid, tech, center, width) in zip(CATALOG, EXPECTED):
        assert spec.class_id == cid
        assert spec.technology == tech
        assert spec.center_freq == center
        assert spec.channel_width == width


def test_baseband_offsets_inside_half_band_plus_wifi_margin():
    for spec in CATALOG:
        assert -5.5 <= baseband_offset(spec) <= 5.5


def test_capture_geometry():
    assert CAPTURE.capture_center == 2426.5
    assert CAPTURE.sample_rate == 10.0
    assert CAPTURE.vector_len == 128
    assert CAPTURE.duration_us == pytest.approx(12.8)
    assert CAPTURE.low_edge == 2421.5
    assert CAPTURE.high_edge == 2431.5
    assert CAPTURE.bin_spacing == pytest.approx(0.078125)


def test_snr_grid_is_2db_steps():
    assert SNR_GRID_DB == tuple(range(-20, 21, 2))
    assert len(SNR_GRID_DB) == 21


def test_class_lookup_and_technology():
    assert class_spec(1).technology == "Bluetooth"
    assert technology_of(11) == "WiFi"
    assert technology_of(15) == "Zigbee"
    for bad in (0, 16, -3, "x"):
        with pytest.raises(CatalogError):
            class_spec(bad)
