"""Exception types raised across the package."""


class QuadinfoError(Exception):
    """Base class for all package-specific errors."""


class ExceptionalPointError(QuadinfoError):
    """Eigenvector request refused: the two-mode matrix is (numerically) defective."""


class DegenerateGridError(QuadinfoError):
    """No grid node carries usable mode amplitude (e.g. the cavity misses the grid)."""


class GridMismatchError(QuadinfoError):
    """Two fields that must share a grid were built on different grids."""


class EmptyCloudError(QuadinfoError):
    """No sample survived the interior-retention rule."""


class ZeroWeightError(QuadinfoError):
    """Total statistical weight is zero; weighted statistics are undefined."""


class IsotropicCovarianceError(QuadinfoError):
    """Second moments carry no orientation information (isotropic cloud)."""


class DegenerateWindowError(QuadinfoError):
    """Histogram window collapsed to zero extent along at least one axis."""


class NotNormalizedError(QuadinfoError):
    """Input vector is not a probability distribution within tolerance."""


class ConfigError(QuadinfoError):
    """Bad or inconsistent run configuration."""


class ParseError(QuadinfoError):
    """Malformed text input.  Carries the 1-based line number when known."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class VersionError(QuadinfoError):
    """Unsupported file-format version tag."""


class ShapeMismatchError(QuadinfoError):
    """Declared array shape does not match the data actually present."""


class RunFailedError(QuadinfoError):
    """Pipeline run aborted: too many per-point failures or a fatal anchor failure."""
