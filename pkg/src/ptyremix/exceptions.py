"""Exception classes for ptyremix services and the CLI."""

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


class PtyRemixError(Exception):
    """Base class; `exit_code` is what the CLI returns when this escapes."""
    exit_code = EXIT_USAGE


class DimensionError(PtyRemixError):
    """Raised when array sizes are invalid or inconsistent with each other."""
    pass


class GeometryError(PtyRemixError):
    """Raised when a probe window falls outside the object."""
    pass


class ConfigError(PtyRemixError):
    """Raised when a configuration document or flag combination is invalid."""
    pass


class SpliceError(PtyRemixError):
    """Raised when real positions are missing from the simulated grid."""
    pass


class DegenerateProbeError(PtyRemixError):
    """Raised when the probe has no intensity to normalize the update by."""
    pass


class MetricError(PtyRemixError):
    """Raised when a metric cannot be evaluated (e.g. an empty mask)."""
    pass


class DataError(PtyRemixError):
    """Raised when diffraction data violates its invariants (negative intensity)."""
    pass


class FormatError(PtyRemixError):
    """Raised when a PTA/PTD file is malformed."""
    pass


class ImageError(PtyRemixError):
    """Raised when an input image cannot be decoded or has the wrong shape."""
    pass


class StorageError(PtyRemixError):
    """Raised when reading or writing a file fails."""
    exit_code = EXIT_IO


class NumericalError(PtyRemixError):
    """Raised when NaN or Inf shows up in a result."""
    exit_code = EXIT_NUMERICAL
