"""Named experiment presets mirroring the study grid.

Each preset fixes representation, reductions and architecture; scale
(vectors per cell, SNR grid) and the root seed stay free so the same
preset runs at desk scale or paper scale. FFT I/Q is the default
representation; the PCA/subsampling presets use amp/phase features,
which compress better.
"""

from dataclasses import dataclass, replace

from .catalog import SNR_GRID_DB
from .errors import ConfigError, UsageError
from .reduction import (
    HIGH_MAGNITUDE_RANK,
    RANDOM,
    UNIFORM,
    BandSpec,
)
from .transform import Representation

BAND_2MHZ = BandSpec(((2429.0, 2431.0),))
BAND_4MHZ = BandSpec(((2422.0, 2424.0), (2429.0, 2431.0)))


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    repr: Representation = Representation.FREQ_IQ
    band: BandSpec | None = None
    train_snr: int | None = None
    pca_rate: float | None = None
    subsample: tuple | None = None  # (method, rate)
    arch: str = "proposed"
    extra_conv1_dropout: bool = False
    vectors_per_cell: int = 60
    snr_list: tuple = tuple(SNR_GRID_DB)

    def validate(self):
        if self.pca_rate is not None and self.subsample is not None:
            raise ConfigError("a preset may use PCA or subsampling, not both")
        if self.arch not in ("proposed", "baseline"):
            raise ConfigError(f"unknown architecture {self.arch!r}")


def _build_presets():
    presets = [
        ExperimentPreset(name="full-10mhz"),
        ExperimentPreset(
            name="full-10mhz-amp-phase", repr=Representation.FREQ_AMP_PHASE
        ),
        ExperimentPreset(name="band-4mhz", band=BAND_4MHZ),
        # The narrowest variant trains faster with an extra dropout after
        # the first conv layer; accuracy impact is negligible.
        ExperimentPreset(name="band-2mhz", band=BAND_2MHZ, extra_conv1_dropout=True),
        ExperimentPreset(name="snr-10db-10mhz", train_snr=-10),
        ExperimentPreset(name="snr-2db-4mhz", band=BAND_4MHZ, train_snr=-2),
        ExperimentPreset(name="baseline-10mhz", arch="baseline"),
    ]
    for denom in (2, 4, 8, 16):
        presets.append(
            ExperimentPreset(
                name=f"pca-{denom}x",
                repr=Representation.FREQ_AMP_PHASE,
                pca_rate=1.0 / denom,
            )
        )
    for denom in (2, 4, 8):
        presets.append(
            ExperimentPreset(
                name=f"band4-pca-{denom}x",
                repr=Representation.FREQ_AMP_PHASE,
                band=BAND_4MHZ,
                pca_rate=1.0 / denom,
            )
        )
    for method in (RANDOM, UNIFORM, HIGH_MAGNITUDE_RANK):
        for denom in (2, 4, 8, 16):
            presets.append(
                ExperimentPreset(
                    name=f"sub-{method}-{denom}x",
                    repr=Representation.FREQ_AMP_PHASE,
                    subsample=(method, 1.0 / denom),
                )
            )
    return {p.name: p for p in presets}


PRESETS = _build_presets()


def get_preset(name, **overrides) -> ExperimentPreset:
    if name not in PRESETS:
        raise UsageError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    preset = PRESETS[name]
    if overrides:
        preset = replace(preset, **overrides)
    preset.validate()
    return preset
