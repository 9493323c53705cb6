"""Objectives and quality metrics for reconstructions."""

import logging
from typing import Iterator

import numpy as np
from pydantic import ValidationError

from ptyremix.exceptions import DimensionError, MetricError, NumericalError
from ptyremix.models import DiffractionRecord, DiffractionStack, ScanGeometry
from ptyremix.schemas import MetricReport
from ptyremix.services.forward_service import exit_wave
from ptyremix.utils.validators import as_complex_field, as_real_image, require_square

logger = logging.getLogger(__name__)


def total_variation(x: np.ndarray) -> float:
    """
    Anisotropic TV: summed absolute forward differences along rows and columns,
    without wrap-around. Complex input is measured on its phase map.
    """
    image = np.angle(x) if np.iscomplexobj(x) else np.asarray(x, dtype=np.float64)
    if image.ndim != 2:
        raise DimensionError(f"TV needs a 2-D image, got shape {image.shape}")
    return float(np.abs(np.diff(image, axis=0)).sum() + np.abs(np.diff(image, axis=1)).sum())


def _model_spectra(
    x: np.ndarray, probe: np.ndarray, stack: DiffractionStack
) -> Iterator[tuple[DiffractionRecord, np.ndarray]]:
    x = as_complex_field(x, "object")
    probe = as_complex_field(probe, "probe")
    require_square(x, "object")
    if require_square(probe, "probe") != stack.probe_size:
        raise DimensionError(f"stack holds {stack.probe_size}px patterns, probe is {probe.shape[0]}px")
    for record in stack.records:
        yield record, np.abs(np.fft.fft2(exit_wave(x, probe, record.position), norm="ortho"))


def l1_misfit(x: np.ndarray, probe: np.ndarray, stack: DiffractionStack) -> float:
    """Sum over records of || d - |F(P . x)|^2 ||_1."""
    return float(sum(np.abs(record.intensity - modulus ** 2).sum() for record, modulus in _model_spectra(x, probe, stack)))


def poisson_nll(x: np.ndarray, probe: np.ndarray, stack: DiffractionStack, zero_guard: float = 1e-12) -> float:
    """
    Poisson negative log-likelihood data term, dropping terms that depend on d only:
    sum of |F psi|^2 - 2 d log(|F psi| + eps).
    """
    return float(
        sum(
            (modulus ** 2 - 2.0 * record.intensity * np.log(modulus + zero_guard)).sum()
            for record, modulus in _model_spectra(x, probe, stack)
        )
    )


def coverage_mask(geometry: ScanGeometry, probe: np.ndarray | None = None) -> np.ndarray:
    """Pixels lit by at least one window; with a probe, only by its nonzero support."""
    size = geometry.probe_size
    support = np.ones((size, size), dtype=bool) if probe is None else np.abs(probe) > 0
    if support.shape != (size, size):
        raise DimensionError(f"probe is {support.shape}, geometry expects {size}x{size}")
    mask = np.zeros((geometry.object_size, geometry.object_size), dtype=bool)
    for row, col in geometry.positions:
        mask[row:row + size, col:col + size] |= support
    return mask


def gray_from_field(field: np.ndarray, phase_max: float = 1.0) -> np.ndarray:
    """Grayscale reading of a phase-only object, the inverse of make_phantom."""
    return np.angle(field) / phase_max


def aligned_error_map(
    recon: np.ndarray,
    truth_gray: np.ndarray,
    phase_max: float = 1.0,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """
    Per-pixel squared phase error in grayscale units after removing the global
    phase offset, estimated as the circular mean of the phase difference over `mask`.
    """
    recon = as_complex_field(recon, "reconstruction")
    truth_gray = as_real_image(truth_gray, "truth")
    if recon.shape != truth_gray.shape:
        raise DimensionError(f"reconstruction is {recon.shape}, truth is {truth_gray.shape}")
    mask = np.ones(recon.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != recon.shape:
        raise DimensionError(f"mask is {mask.shape}, reconstruction is {recon.shape}")
    if not mask.any():
        raise MetricError("mask selects no pixels")

    difference = np.angle(recon) - truth_gray * phase_max
    offset = np.angle(np.mean(np.exp(1j * difference[mask])))
    residual = np.angle(np.exp(1j * (difference - offset)))
    return (residual / phase_max) ** 2


def aligned_mse(
    recon: np.ndarray,
    truth_gray: np.ndarray,
    phase_max: float = 1.0,
    mask: np.ndarray | None = None,
) -> float:
    """Phase MSE against a grayscale ground truth, over the whole image or a coverage mask."""
    errors = aligned_error_map(recon, truth_gray, phase_max, mask)
    if mask is None:
        return float(errors.mean())
    return float(errors[np.asarray(mask, dtype=bool)].mean())


def field_distance(a: np.ndarray, b: np.ndarray, phase_max: float = 1.0, mask: np.ndarray | None = None) -> float:
    """Aligned MSE between two reconstructions, reading `b` as the reference."""
    return aligned_mse(a, gray_from_field(b, phase_max), phase_max, mask)


def evaluate(
    recon: np.ndarray,
    truth_gray: np.ndarray,
    probe: np.ndarray,
    stack: DiffractionStack,
    phase_max: float = 1.0,
    mask: np.ndarray | None = None,
    zero_guard: float = 1e-12,
) -> MetricReport:
    """Full metric report of a reconstruction against ground truth and its data."""
    geometry = ScanGeometry(recon.shape[0], stack.probe_size, 1, tuple(stack.positions))
    coverage = coverage_mask(geometry, probe)
    try:
        report = MetricReport(
            aligned_mse=aligned_mse(recon, truth_gray, phase_max, mask),
            tv_value=total_variation(recon),
            poisson_nll=poisson_nll(recon, probe, stack, zero_guard),
            l1_misfit=l1_misfit(recon, probe, stack),
            coverage_fraction=float(coverage.mean()),
        )
    except ValidationError as exc:
        raise NumericalError(f"metric report is not finite: {exc}") from exc
    logger.debug("metrics: %s", report.to_json())
    return report
