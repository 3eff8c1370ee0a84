"""Synthetic 15-class I/Q dataset generation.

Real captures of Bluetooth/WiFi/Zigbee packets are replaced by
spectrally faithful surrogate waveforms: what the classifiers key on is
spectral occupancy and shape, so each surrogate reproduces its
technology's modulation family, bandwidth and channel placement rather
than a full MAC/PHY stack:

- Bluetooth: GFSK at 1 Msym/s, modulation index 0.32, Gaussian BT=0.5
  (basic-rate hop channel).
- Zigbee: O-QPSK with half-sine chip shaping at 2 Mchip/s (MSK-like
  2 MHz channel).
- WiFi: OFDM on the 312.5 kHz subcarrier grid of a 20 MHz channel with
  the 52-subcarrier occupied set and a null DC carrier, synthesized at
  4x rate (40 MS/s) and brickwall-decimated into the 10 MHz capture, so
  channel edges fall inside the window exactly as in real captures.

Every frame gets a uniform random carrier phase and symbol-timing
offset, is normalized to unit average power, and is deterministic given
its seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .catalog import CAPTURE, CATALOG, SNR_GRID_DB, CaptureSpec, ClassSpec, class_spec
from .errors import ConfigError, DegenerateSignalError
from .kernels import fft_batch
from .seeding import derive_seed, rng_for

SPLIT_TRAIN = 0
SPLIT_VAL = 1
SPLIT_NAMES = ("train", "val")

TRAIN_FRACTION_DEFAULT = 480.0 / 715.0

# Margin (in samples at the capture rate) synthesized beyond the capture
# so the timing offset can slide without running off the waveform.
_TIMING_MARGIN = 32

# OFDM surrogate constants: 64-point subcarrier grid of a 20 MHz channel,
# occupied set +-1..+-26 (DC null), synthesized on a 128-point grid at 4x
# the capture rate.
_OFDM_OVERSAMPLE = 4
_OFDM_NFFT = 128
_OFDM_ACTIVE = np.concatenate([np.arange(-26, 0), np.arange(1, 27)])


@dataclass(frozen=True)
class SampleRecord:
    """One labeled capture."""

    class_id: int
    snr_db: int
    iq: np.ndarray
    split: str


@dataclass
class Dataset:
    """Array-backed record collection (one row per SampleRecord)."""

    capture: CaptureSpec
    class_ids: np.ndarray  # uint8 (n,)
    snrs_db: np.ndarray  # int8 (n,)
    splits: np.ndarray  # uint8 (n,), 0=train 1=val
    iq: np.ndarray  # complex64 (n, vector_len)
    seed: int | None = None

    def __len__(self):
        return self.class_ids.shape[0]

    def record(self, i) -> SampleRecord:
        return SampleRecord(
            class_id=int(self.class_ids[i]),
            snr_db=int(self.snrs_db[i]),
            iq=self.iq[i],
            split=SPLIT_NAMES[self.splits[i]],
        )

    def __iter__(self):
        return (self.record(i) for i in range(len(self)))

    def subset(self, mask) -> "Dataset":
        return Dataset(
            capture=self.capture,
            class_ids=self.class_ids[mask],
            snrs_db=self.snrs_db[mask],
            splits=self.splits[mask],
            iq=self.iq[mask],
            seed=self.seed,
        )

    def split_mask(self, split):
        want = SPLIT_TRAIN if split == "train" else SPLIT_VAL
        return self.splits == want


@dataclass
class GenConfig:
    """Scale and determinism knobs for dataset synthesis."""

    vectors_per_cell: int
    snr_list: tuple = tuple(SNR_GRID_DB)
    train_fraction: float = TRAIN_FRACTION_DEFAULT
    seed: int = 0

    def validate(self):
        if self.vectors_per_cell < 1:
            raise ConfigError("vectors_per_cell must be >= 1")
        if len(self.snr_list) == 0:
            raise ConfigError("snr_list must not be empty")
        bad = [s for s in self.snr_list if s not in SNR_GRID_DB]
        if bad:
            raise ConfigError(f"SNR values {bad} not on the -20..20 dB step-2 grid")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")


def _gaussian_taps(bt, sps, span_symbols=4):
    """FIR taps of a Gaussian pulse filter with bandwidth-time product bt."""
    # 3 dB bandwidth B = bt / T; alpha from the standard Gaussian LPF form.
    t = np.arange(-span_symbols / 2.0, span_symbols / 2.0 + 1.0 / sps, 1.0 / sps)
    alpha = np.sqrt(np.log(2.0) / 2.0) / bt
    h = (np.sqrt(np.pi) / alpha) * np.exp(-((np.pi * t / alpha) ** 2))
    return h / h.sum()


def _bluetooth_baseband(rng, n_out, sps):
    """GFSK baseband at unit symbol rate scale, n_out samples."""
    # Modulation index 0.6: indices near the basic-rate 0.32 collapse the
    # averaged PSD to a <0.3 MHz spike; 0.6 fills the 1 MHz hop channel
    # (~0.8 MHz half-power width) while staying a GFSK waveform.
    mod_index = 0.6
    lead = 2 * sps  # skip the filter ramp-in
    n_sym = int(np.ceil((n_out + lead) / sps)) + 4
    bits = rng.integers(0, 2, n_sym) * 2.0 - 1.0
    nrz = np.repeat(bits, sps)
    shaped = np.convolve(nrz, _gaussian_taps(0.5, sps), mode="same")
    # Instantaneous frequency: peak deviation h_mod / (2 T_sym).
    freq = 0.5 * mod_index * shaped / sps  # cycles per sample
    phase = 2.0 * np.pi * np.cumsum(freq)
    return np.exp(1j * phase)[lead : lead + n_out]


def _zigbee_baseband(rng, n_out, fs_msps):
    """O-QPSK with half-sine chip shaping at 2 Mchip/s."""
    chip_rate = 2.0  # Mchip/s
    spc = int(round(fs_msps / chip_rate))  # samples per chip
    n_chip = int(np.ceil(n_out / spc)) + 8
    chips = rng.integers(0, 2, n_chip) * 2.0 - 1.0
    # Even chips drive I, odd chips drive Q, offset by one chip period;
    # each chip is shaped by a half-sine spanning two chip periods.
    pulse = np.sin(np.pi * np.arange(2 * spc) / (2.0 * spc))
    total = n_chip * spc + 2 * spc
    i_imp = np.zeros(total)
    q_imp = np.zeros(total)
    for k in range(0, n_chip - 1, 2):
        i_imp[k * spc] = chips[k]
        q_imp[k * spc + spc] = chips[k + 1]
    i_wave = np.convolve(i_imp, pulse)[:total]
    q_wave = np.convolve(q_imp, pulse)[:total]
    return (i_wave + 1j * q_wave)[spc : spc + n_out]


def _wifi_capture(rng, offset_mhz, capture):
    """OFDM surrogate mixed to offset and brickwall-decimated into band."""
    n = capture.vector_len
    fs_hi = capture.sample_rate * _OFDM_OVERSAMPLE
    n_hi = n * _OFDM_OVERSAMPLE
    n_sym = int(np.ceil((n_hi + _TIMING_MARGIN * _OFDM_OVERSAMPLE) / _OFDM_NFFT)) + 1
    # One OFDM symbol per IFFT of the 128-point grid; QPSK on the
    # occupied subcarriers.
    spec = np.zeros((n_sym, _OFDM_NFFT), dtype=np.complex128)
    symbols = (
        rng.integers(0, 2, (n_sym, _OFDM_ACTIVE.size)) * 2 - 1
    ) + 1j * (rng.integers(0, 2, (n_sym, _OFDM_ACTIVE.size)) * 2 - 1)
    spec[:, _OFDM_ACTIVE % _OFDM_NFFT] = symbols
    wave = fft_batch(spec, inverse=True).reshape(-1)
    start = rng.integers(0, _TIMING_MARGIN * _OFDM_OVERSAMPLE)
    wave = wave[start : start + n_hi]
    t = np.arange(n_hi) / fs_hi  # microseconds
    wave = wave * np.exp(2j * np.pi * offset_mhz * t)
    # Anti-alias + decimate in one step: keep the +-fs/2 band of the
    # oversampled spectrum and invert on the capture grid.
    spec_hi = np.fft.fftshift(fft_batch(wave))
    keep = spec_hi[(n_hi - n) // 2 : (n_hi + n) // 2]
    return fft_batch(np.fft.ifftshift(keep), inverse=True)


def synth_frame(spec: ClassSpec, capture: CaptureSpec = CAPTURE, seed: int = 0):
    """Synthesize one unit-power baseband frame for a channel class.

    The returned complex64 vector has its power spectral density
    concentrated at the class's offset from the capture center with
    roughly the channel's -3 dB bandwidth (WiFi is truncated by the
    capture edges). Deterministic given (spec, capture, seed).
    """
    spec = class_spec(spec.class_id)  # validates against the catalog
    rng = rng_for(seed, "frame")
    offset = spec.center_freq - capture.capture_center
    n = capture.vector_len
    fs = capture.sample_rate

    if spec.technology == "WiFi":
        wave = _wifi_capture(rng, offset, capture)
    else:
        n_gen = n + _TIMING_MARGIN
        if spec.technology == "Bluetooth":
            sps = int(round(fs / 1.0))  # 1 Msym/s
            base = _bluetooth_baseband(rng, n_gen, sps)
        else:
            base = _zigbee_baseband(rng, n_gen, fs)
        start = rng.integers(0, _TIMING_MARGIN)
        base = base[start : start + n]
        t = np.arange(n) / fs
        wave = base * np.exp(2j * np.pi * offset * t)

    wave = wave * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    power = np.mean(np.abs(wave) ** 2)
    if power <= 0:
        raise DegenerateSignalError("surrogate produced a zero-power frame")
    return (wave / np.sqrt(power)).astype(np.complex64)


def apply_awgn(x, snr_db, seed=0):
    """Add circularly symmetric complex Gaussian noise at the target SNR.

    Noise variance is P_x * 10^(-snr_db/10) with P_x the empirical mean
    power of x. Deterministic given seed.
    """
    x = np.asarray(x)
    if x.size == 0:
        raise DegenerateSignalError("cannot calibrate noise against an empty signal")
    p_sig = float(np.mean(np.abs(x.astype(np.complex128)) ** 2))
    if not np.isfinite(p_sig) or p_sig <= 0.0:
        raise DegenerateSignalError("cannot calibrate noise against zero-power signal")
    var = p_sig * 10.0 ** (-snr_db / 10.0)
    rng = rng_for(seed, "noise")
    noise = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    noise = noise.reshape(x.shape) * np.sqrt(var / 2.0)
    return (x + noise).astype(x.dtype if x.dtype == np.complex64 else np.complex128)


def build_dataset(config: GenConfig, capture: CaptureSpec = CAPTURE) -> Dataset:
    """Generate the full (class x SNR x index) grid of labeled records.

    Record order is class-major, then SNR ascending, then index. The
    first round(train_fraction * vectors_per_cell) records of each cell
    are the training split. Each record's waveform and noise come from
    independent streams derived from (seed, class, SNR, index), so any
    subset is reproducible in isolation.
    """
    config.validate()
    snrs = sorted(config.snr_list)
    vpc = config.vectors_per_cell
    n_train = round(config.train_fraction * vpc)
    total = len(CATALOG) * len(snrs) * vpc

    class_col = np.empty(total, dtype=np.uint8)
    snr_col = np.empty(total, dtype=np.int8)
    split_col = np.empty(total, dtype=np.uint8)
    iq = np.empty((total, capture.vector_len), dtype=np.complex64)

    row = 0
    for spec in CATALOG:
        for snr in snrs:
            for idx in range(vpc):
                rec_seed = derive_seed(config.seed, "record", spec.class_id, snr, idx)
                frame = synth_frame(spec, capture, rec_seed)
                iq[row] = apply_awgn(frame, snr, rec_seed)
                class_col[row] = spec.class_id
                snr_col[row] = snr
                split_col[row] = SPLIT_TRAIN if idx < n_train else SPLIT_VAL
                row += 1

    return Dataset(
        capture=capture,
        class_ids=class_col,
        snrs_db=snr_col,
        splits=split_col,
        iq=iq,
        seed=config.seed,
    )
