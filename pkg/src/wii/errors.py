"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems -> 1, data/format
problems -> 2, numeric failures -> 3.
"""


class WiiError(Exception):
    """Base class for all package errors."""


class UsageError(WiiError):
    """Bad command-line arguments or config keys."""


class CatalogError(WiiError):
    """Unknown channel class id."""


class ConfigError(WiiError):
    """Invalid generation or training configuration."""


class DegenerateSignalError(WiiError):
    """Signal with zero power where noise calibration needs a reference."""


class FormatError(WiiError):
    """File does not carry the expected magic/version."""


class CorruptionError(WiiError):
    """File payload is truncated or inconsistent with its header."""


class RangeError(WiiError):
    """Frequency band outside the captured range."""


class RepresentationError(WiiError):
    """Operation applied to an incompatible feature representation."""


class EmptySelectionError(WiiError):
    """A filter matched no records."""


class DimensionError(WiiError):
    """Dimension mismatch in a reduction operation."""


class ShapeError(WiiError):
    """Tensor shape mismatch in the network."""


class LabelError(WiiError):
    """Class label outside the model's class set."""


class DataError(WiiError):
    """Empty or unusable data set."""


class NumericError(WiiError):
    """Non-finite values or a diverged computation."""
