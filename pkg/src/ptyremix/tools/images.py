"""PNG input (8/16-bit grayscale) and rendering of complex fields."""

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ptyremix.exceptions import ImageError
from ptyremix.tools.storage import read_bytes, write_bytes

_SIXTEEN_BIT_MODES = {"I;16", "I;16L", "I;16B", "I"}


def read_gray_png(path: Path) -> np.ndarray:
    """Grayscale image scaled to [0, 1]: 8-bit by 1/255, 16-bit by 1/65535."""
    blob = read_bytes(path)
    try:
        with Image.open(io.BytesIO(blob)) as image:
            image.load()
            if image.mode in _SIXTEEN_BIT_MODES:
                values = np.asarray(image, dtype=np.float64)
                scale = 65535.0
            else:
                values = np.asarray(image.convert("L"), dtype=np.float64)
                scale = 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageError(f"cannot decode image {path}: {exc}") from exc

    if values.ndim != 2:
        raise ImageError(f"{path} is not a single-channel image")
    if values.min() < 0 or values.max() > scale:
        raise ImageError(f"{path} has values outside the {int(scale)} range")
    return values / scale


def render_phase(field: np.ndarray) -> np.ndarray:
    """Phase mapped linearly from [-pi, pi] to [0, 255]."""
    scaled = (np.angle(field) + np.pi) / (2.0 * np.pi) * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def render_amplitude(field: np.ndarray) -> np.ndarray:
    """Amplitude normalized by its maximum to [0, 255]."""
    amplitude = np.abs(field)
    peak = amplitude.max()
    if peak > 0:
        amplitude = amplitude / peak
    return np.clip(np.rint(amplitude * 255.0), 0, 255).astype(np.uint8)


def encode_png(pixels: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(buffer, format="PNG")
    return buffer.getvalue()


def write_png(path: Path, pixels: np.ndarray) -> None:
    write_bytes(path, encode_png(pixels))
