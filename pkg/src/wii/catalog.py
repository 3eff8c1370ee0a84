"""Channel catalog and capture geometry for the 2.4 GHz ISM band study.

Fifteen channels from three technologies share the observed band:
ten Bluetooth hop channels (1 MHz), three WiFi channels (20 MHz nominal),
and two Zigbee channels (2 MHz). The receiver samples a 10 MHz window
centered at 2426.5 MHz (2421.5-2431.5 MHz) at 10 MS/s, 128 samples per
capture, i.e. 12.8 us snapshots.
"""

from dataclasses import dataclass

from .errors import CatalogError

BLUETOOTH = "Bluetooth"
WIFI = "WiFi"
ZIGBEE = "Zigbee"

TECHNOLOGIES = (BLUETOOTH, WIFI, ZIGBEE)


@dataclass(frozen=True)
class ClassSpec:
    """One interference class: technology plus channel placement."""

    class_id: int
    technology: str
    center_freq: float  # MHz, absolute
    channel_width: float  # MHz

    @property
    def low_edge(self):
        return self.center_freq - self.channel_width / 2.0

    @property
    def high_edge(self):
        return self.center_freq + self.channel_width / 2.0


@dataclass(frozen=True)
class CaptureSpec:
    """Receiver geometry of one capture window."""

    capture_center: float = 2426.5  # MHz
    sample_rate: float = 10.0  # MS/s
    vector_len: int = 128

    @property
    def duration_us(self):
        return self.vector_len / self.sample_rate

    @property
    def low_edge(self):
        return self.capture_center - self.sample_rate / 2.0

    @property
    def high_edge(self):
        return self.capture_center + self.sample_rate / 2.0

    @property
    def bin_spacing(self):
        """FFT bin spacing in MHz (shifted ordering, bin 0 at the low edge)."""
        return self.sample_rate / self.vector_len

    def bin_offsets(self):
        """Baseband frequency offset of each shifted FFT bin, in MHz."""
        import numpy as np

        k = np.arange(self.vector_len)
        return -self.sample_rate / 2.0 + k * self.bin_spacing


CAPTURE = CaptureSpec()

# The fixed 15-class channel plan. Bluetooth ids 1-10 step 1 MHz across
# 2422-2431; WiFi ids 11-13 sit on the 2422/2427/2432 MHz channels and
# overlap the capture window only partially; Zigbee ids 14-15 are the
# 2425/2430 MHz channels.
CATALOG = tuple(
    [ClassSpec(i, BLUETOOTH, 2421.0 + i, 1.0) for i in range(1, 11)]
    + [
        ClassSpec(11, WIFI, 2422.0, 20.0),
        ClassSpec(12, WIFI, 2427.0, 20.0),
        ClassSpec(13, WIFI, 2432.0, 20.0),
        ClassSpec(14, ZIGBEE, 2425.0, 2.0),
        ClassSpec(15, ZIGBEE, 2430.0, 2.0),
    ]
)

CLASS_IDS = tuple(spec.class_id for spec in CATALOG)

SNR_GRID_DB = tuple(range(-20, 21, 2))  # 21 values


def class_spec(class_id):
    """Look up a catalog entry; raises CatalogError for unknown ids."""
    if not isinstance(class_id, (int,)) or not 1 <= class_id <= len(CATALOG):
        raise CatalogError(f"unknown class id {class_id!r} (valid: 1-{len(CATALOG)})")
    return CATALOG[class_id - 1]


def technology_of(class_id):
    return class_spec(class_id).technology


def baseband_offset(spec, capture=CAPTURE):
    """Channel center relative to the capture center, in MHz."""
    return spec.center_freq - capture.capture_center
