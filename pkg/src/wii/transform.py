"""Feature representations of raw I/Q captures.

Three representations feed the classifiers: the raw time-domain I/Q
pair, the DC-centered spectrum as I/Q, and the same spectrum as
amplitude/phase. Spectra use unitary 1/sqrt(N) scaling so feature
magnitudes stay comparable across representations, and DC-centered
("shifted") bin ordering so a frequency band is a contiguous row slice.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import CAPTURE
from .errors import ShapeError
from .kernels import fft_batch


class Representation(Enum):
    TIME_IQ = "time-iq"
    FREQ_IQ = "freq-iq"
    FREQ_AMP_PHASE = "freq-amp-phase"

    @property
    def is_frequency_domain(self):
        return self is not Representation.TIME_IQ


@dataclass
class FeatureMatrix:
    """Real-valued (L, 2) feature matrix for one capture.

    bin_freqs holds the MHz offset (from the capture center) of each row
    for frequency-domain representations; None for time domain or after
    row-mixing reductions.
    """

    values: np.ndarray
    repr: Representation
    bin_freqs: np.ndarray | None = field(default=None)

    @property
    def rows(self):
        return self.values.shape[0]


def fft_shifted(x):
    """Unnormalized DFT with DC-centered ordering.

    Row index k corresponds to frequency offset (-fs/2 + k*fs/N); length
    must be a power of two. Accepts a vector or a (B, N) batch.
    """
    X = fft_batch(x)
    return np.fft.fftshift(X, axes=-1)


def ifft_shifted(X):
    """Inverse of fft_shifted (includes the 1/N factor)."""
    return fft_batch(np.fft.ifftshift(np.asarray(X), axes=-1), inverse=True)


def _scaled_spectrum(iq):
    iq = np.atleast_2d(np.asarray(iq))
    n = iq.shape[-1]
    return fft_shifted(iq) / np.sqrt(n).astype(np.result_type(iq.dtype, np.float32))


def to_features(iq, kind, capture=CAPTURE):
    """Convert one I/Q vector into a FeatureMatrix of the given kind."""
    iq = np.asarray(iq)
    if iq.ndim != 1:
        raise ShapeError(f"expected a 1-D I/Q vector, got shape {iq.shape}")
    values = features_batch(iq[None, :], kind)[0]
    freqs = None
    if kind.is_frequency_domain:
        freqs = bin_offsets(iq.shape[0], capture)
    return FeatureMatrix(values=values, repr=kind, bin_freqs=freqs)


def features_batch(iq, kind):
    """Vectorized to_features over a (B, N) complex batch -> (B, N, 2)."""
    iq = np.asarray(iq)
    real_t = np.float32 if iq.dtype == np.complex64 else np.float64
    if kind is Representation.TIME_IQ:
        return np.stack([iq.real, iq.imag], axis=-1).astype(real_t, copy=False)
    X = _scaled_spectrum(iq)
    if kind is Representation.FREQ_IQ:
        return np.stack([X.real, X.imag], axis=-1).astype(real_t, copy=False)
    amp = np.abs(X)
    # atan2(0, 0) is implementation-defined; pin empty bins to phase 0,
    # and fold atan2's -pi onto +pi so phase stays in (-pi, pi].
    phase = np.where(amp > 0, np.arctan2(X.imag, X.real), 0.0)
    phase = np.where(phase <= -np.pi, np.pi, phase)
    return np.stack([amp, phase], axis=-1).astype(real_t, copy=False)


def bin_offsets(n, capture=CAPTURE):
    """MHz offset from the capture center for each shifted bin."""
    fs = capture.sample_rate
    return (-fs / 2.0 + np.arange(n) * (fs / n)).astype(np.float64)
