"""ePIE object updates with a known probe, optionally weighted per record provenance."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ptyremix.exceptions import DegenerateProbeError, DimensionError, GeometryError, NumericalError
from ptyremix.models import DiffractionRecord, DiffractionStack, Provenance, ScanOrder
from ptyremix.schemas import EpieOptions
from ptyremix.utils.validators import as_complex_field, require_square

logger = logging.getLogger(__name__)


@dataclass
class EpieState:
    obj: np.ndarray
    rng: np.random.Generator
    sweep: int = 0
    last_update_norm: float = float("inf")


@dataclass(frozen=True, eq=False)
class EpieResult:
    x_hat: np.ndarray
    sweeps_run: int
    final_update_norm: float
    update_norms: tuple[float, ...] = field(default_factory=tuple)


def _probe_step(probe: np.ndarray) -> np.ndarray:
    """P* / max|P|^2, the per-pixel object step before alpha."""
    peak = float(np.max(np.abs(probe) ** 2))
    if peak == 0.0:
        raise DegenerateProbeError("probe is identically zero")
    return np.conj(probe) / peak


def _alpha(provenance: Provenance, opts: EpieOptions) -> float:
    return opts.alpha_real if provenance is Provenance.real else opts.alpha_sim


def _update_patch(
    obj: np.ndarray,
    probe: np.ndarray,
    step: np.ndarray,
    row: int,
    col: int,
    magnitude: np.ndarray,
    alpha: float,
    zero_guard: float,
) -> None:
    size = probe.shape[0]
    patch = obj[row:row + size, col:col + size]
    psi = probe * patch
    spectrum = np.fft.fft2(psi, norm="ortho")
    projected = np.fft.ifft2(magnitude * spectrum / (np.abs(spectrum) + zero_guard), norm="ortho")
    patch += alpha * step * (projected - psi)


def _check_record(obj: np.ndarray, probe_size: int, record: DiffractionRecord) -> None:
    if record.size != probe_size:
        raise DimensionError(f"record is {record.size}x{record.size}, probe is {probe_size}x{probe_size}")
    row, col = record.position
    if row < 0 or col < 0 or row + probe_size > obj.shape[0] or col + probe_size > obj.shape[1]:
        raise GeometryError(f"record window at {tuple(record.position)} leaves the object")


def epie_pattern_update(
    x: np.ndarray,
    probe: np.ndarray,
    record: DiffractionRecord,
    opts: EpieOptions,
) -> np.ndarray:
    """
    One ePIE step against a single diffraction record.

    The exit wave's Fourier modulus is replaced by sqrt(d) (the zero guard keeps
    the division finite), and only the window under the probe is corrected by
    alpha * P* / max|P|^2 * (psi' - psi). alpha is `alpha_real` for real records
    and `alpha_sim` for simulated ones. Returns a new array.
    """
    obj = np.array(as_complex_field(x, "object"))
    probe = as_complex_field(probe, "probe")
    size = require_square(probe, "probe")
    _check_record(obj, size, record)
    _update_patch(
        obj,
        probe,
        _probe_step(probe),
        record.position.row,
        record.position.col,
        np.sqrt(record.intensity),
        _alpha(record.provenance, opts),
        opts.zero_guard,
    )
    return obj


def epie_sweep(state: EpieState, probe: np.ndarray, stack: DiffractionStack, opts: EpieOptions,
               magnitudes: list[np.ndarray] | None = None) -> float:
    """Apply every record once, in raster or freshly shuffled order; return the relative change."""
    step = _probe_step(probe)
    if magnitudes is None:
        magnitudes = [np.sqrt(record.intensity) for record in stack.records]
    order = range(len(stack)) if opts.order is ScanOrder.raster else state.rng.permutation(len(stack))

    before = state.obj.copy()
    for index in order:
        record = stack.records[index]
        _update_patch(
            state.obj,
            probe,
            step,
            record.position.row,
            record.position.col,
            magnitudes[index],
            _alpha(record.provenance, opts),
            opts.zero_guard,
        )

    reference = np.linalg.norm(before)
    change = np.linalg.norm(state.obj - before)
    state.sweep += 1
    state.last_update_norm = float(change / reference) if reference > 0 else float(change)
    return state.last_update_norm


def run_epie(x0: np.ndarray, probe: np.ndarray, stack: DiffractionStack, opts: EpieOptions) -> EpieResult:
    """
    Run ePIE sweeps from `x0` with a fixed probe.

    Stops after `opts.sweeps` sweeps, or earlier once the relative object change
    of a sweep drops below `opts.stop_tol` (0 disables early stopping).
    Identical inputs and seed give bit-identical results.
    """
    obj = np.array(as_complex_field(x0, "initial object"))
    probe = as_complex_field(probe, "probe")
    require_square(obj, "object")
    size = require_square(probe, "probe")
    if len(stack) == 0:
        raise DimensionError("cannot run ePIE on an empty diffraction stack")
    if stack.probe_size != size:
        raise DimensionError(f"stack holds {stack.probe_size}px patterns, probe is {size}px")
    for record in stack.records:
        _check_record(obj, size, record)

    state = EpieState(obj=obj, rng=np.random.default_rng(opts.seed))
    magnitudes = [np.sqrt(record.intensity) for record in stack.records]
    norms = []
    while state.sweep < opts.sweeps:
        norm = epie_sweep(state, probe, stack, opts, magnitudes)
        norms.append(norm)
        logger.debug("epie sweep %d: relative update %.3e", state.sweep, norm)
        if not np.isfinite(norm):
            raise NumericalError(f"ePIE diverged at sweep {state.sweep}")
        if opts.stop_tol > 0 and norm < opts.stop_tol:
            break

    logger.info(
        "epie finished",
        extra={"sweeps": state.sweep, "records": len(stack), "final_update_norm": state.last_update_norm},
    )
    state.obj.flags.writeable = False
    return EpieResult(state.obj, state.sweep, state.last_update_norm, tuple(norms))
