"""Ptychography forward model: probes, phantoms, exit waves, diffraction and noise."""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ptyremix.exceptions import DataError, DimensionError, GeometryError, NumericalError
from ptyremix.models import DiffractionRecord, DiffractionStack, Position, Provenance, ScanGeometry
from ptyremix.schemas import NoiseSpec, ProbeSpec
from ptyremix.settings import get_settings
from ptyremix.utils.validators import as_complex_field, as_real_image, require_square

logger = logging.getLogger(__name__)


def exit_wave(obj: np.ndarray, probe: np.ndarray, pos: tuple[int, int]) -> np.ndarray:
    """Probe times the object patch whose top-left corner sits at `pos`."""
    size = require_square(probe, "probe")
    row, col = int(pos[0]), int(pos[1])
    if row < 0 or col < 0 or row + size > obj.shape[0] or col + size > obj.shape[1]:
        raise GeometryError(f"{size}x{size} window at {(row, col)} leaves the {obj.shape[0]}x{obj.shape[1]} object")
    return probe * obj[row:row + size, col:col + size]


def diffract(psi: np.ndarray) -> np.ndarray:
    """Far-field intensity |F psi|^2 with an orthonormal DFT, so the total is conserved."""
    return np.abs(np.fft.fft2(psi, norm="ortho")) ** 2


def check_scan_sizes(obj: np.ndarray, probe: np.ndarray, geometry: ScanGeometry) -> None:
    object_size = require_square(obj, "object")
    probe_size = require_square(probe, "probe")
    if object_size != geometry.object_size or probe_size != geometry.probe_size:
        raise DimensionError(
            f"geometry is for a {geometry.object_size}px object and {geometry.probe_size}px probe, "
            f"got {object_size}px object and {probe_size}px probe"
        )


def simulate_scan(
    obj: np.ndarray,
    probe: np.ndarray,
    geometry: ScanGeometry,
    provenance: Provenance = Provenance.simulated,
    workers: int | None = None,
) -> DiffractionStack:
    """
    Simulate one diffraction pattern per scan position.

    Records follow the geometry order. With `workers > 1` positions are
    evaluated on a thread pool; each pattern depends only on its position,
    so the result does not depend on scheduling.
    """
    obj = as_complex_field(obj, "object")
    probe = as_complex_field(probe, "probe")
    check_scan_sizes(obj, probe, geometry)
    workers = workers or get_settings().simulate_workers

    def _record(pos: Position) -> DiffractionRecord:
        return DiffractionRecord(pos, provenance, diffract(exit_wave(obj, probe, pos)))

    if workers > 1 and len(geometry) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(_record, geometry.positions))
    else:
        records = tuple(_record(pos) for pos in geometry.positions)

    logger.debug("simulated %d %s patterns", len(records), provenance.value)
    return DiffractionStack(geometry.probe_size, records)


def add_poisson_noise(stack: DiffractionStack, noise: NoiseSpec) -> DiffractionStack:
    """
    Replace every pixel by Poisson(d * photon_scale) / photon_scale.

    Each record draws from its own stream seeded by (seed, record index), so
    the outcome is fixed per (record, pixel) whatever order records are noised in.
    """
    records = []
    for index, record in enumerate(stack.records):
        rng = np.random.default_rng(np.random.SeedSequence([noise.seed, index]))
        try:
            counts = rng.poisson(record.intensity * noise.photon_scale)
        except ValueError as exc:
            raise NumericalError(f"record {index}: cannot draw Poisson counts: {exc}") from exc
        records.append(DiffractionRecord(record.position, record.provenance, counts / noise.photon_scale))
    return DiffractionStack(stack.probe_size, tuple(records))


def make_probe(spec: ProbeSpec) -> np.ndarray:
    """
    Flat-phase disk probe centred on pixel (S//2, S//2).

    A pixel is inside when its distance to the centre is at most diameter / 2;
    everything outside is exactly 0. The gaussian_edge profile keeps a flat core
    of radius R - 2 sigma and rolls off as exp(-(r - core)^2 / (2 sigma^2)) up
    to the rim.
    """
    size = spec.size
    center = size // 2
    rows, cols = np.indices((size, size), dtype=np.float64)
    radius = np.hypot(rows - center, cols - center)
    rim = spec.diameter / 2.0

    inside = radius <= rim
    if spec.profile == "tophat":
        amplitude = np.where(inside, spec.amplitude, 0.0)
    else:
        core = max(rim - 2.0 * spec.sigma, 0.0)
        rolloff = np.exp(-(np.maximum(radius - core, 0.0) ** 2) / (2.0 * spec.sigma ** 2))
        amplitude = np.where(inside, spec.amplitude * rolloff, 0.0)
    return as_complex_field(amplitude, "probe")


def make_phantom(gray: np.ndarray, phase_max: float = 1.0) -> np.ndarray:
    """Phase-only object exp(j * gray * phase_max) from a grayscale image in [0, 1]."""
    gray = as_real_image(gray, "gray")
    if np.any(gray < 0.0) or np.any(gray > 1.0):
        raise DataError("grayscale values must lie in [0, 1]")
    return as_complex_field(np.exp(1j * gray * phase_max), "phantom")


def synthetic_gray(size: int, seed: int = 0, blobs: int = 12, margin: int | None = None) -> np.ndarray:
    """
    Smooth grayscale test image in [0, 1]: a sum of random Gaussian blobs,
    tapered to exactly zero within `margin` pixels of the border.
    """
    if size < 1:
        raise DimensionError(f"size must be positive, got {size}")
    margin = size // 10 if margin is None else margin
    rng = np.random.default_rng(seed)
    rows, cols = np.indices((size, size), dtype=np.float64)

    image = np.zeros((size, size))
    for _ in range(blobs):
        r0, c0 = rng.uniform(margin, max(margin, size - margin), size=2)
        width = rng.uniform(size / 16.0, size / 6.0)
        height = rng.uniform(0.2, 1.0)
        image += height * np.exp(-((rows - r0) ** 2 + (cols - c0) ** 2) / (2.0 * width ** 2))

    if margin > 0:
        edge = np.minimum.reduce([rows, cols, size - 1 - rows, size - 1 - cols])
        taper = np.clip((edge - margin) / margin, 0.0, 1.0)
        image *= 0.5 - 0.5 * np.cos(np.pi * taper)

    peak = image.max()
    if peak > 0:
        image /= peak
    return np.clip(image, 0.0, 1.0)
