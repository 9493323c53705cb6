"""
Validation helpers for arrays passed between services.
"""

import numpy as np

from ptyremix.exceptions import DimensionError, NumericalError


def as_complex_field(values, name: str = "field") -> np.ndarray:
    """
    Return a read-only complex128 copy of a 2-D array, or raise.

    Raises:
        DimensionError: if the array is not 2-D or has an empty axis
        NumericalError: if any value is NaN or Inf
    """
    field = np.array(values, dtype=np.complex128)
    if field.ndim != 2 or field.shape[0] < 1 or field.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {field.shape}")
    if not np.all(np.isfinite(field)):
        raise NumericalError(f"{name} contains NaN or Inf")
    field.flags.writeable = False
    return field


def as_real_image(values, name: str = "image") -> np.ndarray:
    """Return a read-only float64 copy of a finite 2-D array, or raise."""
    image = np.array(values, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] < 1 or image.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise NumericalError(f"{name} contains NaN or Inf")
    image.flags.writeable = False
    return image


def require_square(array: np.ndarray, name: str) -> int:
    """Return the side length of a square array, or raise DimensionError."""
    rows, cols = array.shape
    if rows != cols:
        raise DimensionError(f"{name} must be square, got {rows}x{cols}")
    return rows


def require_finite(array: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"{name} contains NaN or Inf")
