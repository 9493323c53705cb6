"""Oversample-and-splice reconstruction: dense data simulated from an initial
estimate, real patterns spliced in, then provenance-weighted ePIE."""

import logging
from dataclasses import dataclass

import numpy as np

from ptyremix.exceptions import ConfigError, DimensionError, SpliceError
from ptyremix.models import DiffractionRecord, DiffractionStack, Provenance, ScanGeometry, raster_geometry
from ptyremix.schemas import AuditTrail, RemixConfig, RemixReport, RemixRoundReport
from ptyremix.services.epie_service import EpieResult, run_epie
from ptyremix.services.forward_service import simulate_scan
from ptyremix.services.metrics_service import aligned_mse, gray_from_field, l1_misfit
from ptyremix.utils.audit import add_error, end_step, new_audit, start_step
from ptyremix.utils.validators import as_complex_field, require_square

logger = logging.getLogger(__name__)

SEED_MOD = 2**64


@dataclass(frozen=True, eq=False)
class RemixOutcome:
    x_hat: np.ndarray
    report: RemixReport


def oversampled_geometry(real_geom: ScanGeometry, oversample: int) -> ScanGeometry:
    """Raster over the same object with the step divided by `oversample`."""
    if oversample < 1:
        raise ConfigError(f"oversampling ratio must be >= 1, got {oversample}")
    if real_geom.step % oversample != 0:
        raise ConfigError(
            f"scan step {real_geom.step} is not divisible by oversampling ratio {oversample}; "
            "real positions would not land on the dense grid"
        )
    return raster_geometry(real_geom.object_size, real_geom.probe_size, real_geom.step // oversample)


def splice(real: DiffractionStack, simulated: DiffractionStack) -> DiffractionStack:
    """
    Substitute measured patterns into the dense simulated stack.

    The result keeps the simulated order. Records at real positions carry the
    measured intensity tagged Real; all others stay Simulated.
    """
    if real.probe_size != simulated.probe_size:
        raise DimensionError(f"real patterns are {real.probe_size}px, simulated are {simulated.probe_size}px")

    measured = {}
    for record in real.records:
        if record.position in measured:
            raise SpliceError(f"real stack has two patterns at {tuple(record.position)}")
        measured[record.position] = record

    dense_positions = set(simulated.positions)
    missing = [tuple(pos) for pos in measured if pos not in dense_positions]
    if missing:
        raise SpliceError(f"{len(missing)} real positions are not on the simulated grid, first {missing[0]}")

    records = []
    for record in simulated.records:
        if record.position in measured:
            records.append(DiffractionRecord(record.position, Provenance.real, measured[record.position].intensity))
        else:
            records.append(DiffractionRecord(record.position, Provenance.simulated, record.intensity))
    return DiffractionStack(simulated.probe_size, tuple(records))


def _remix_round(
    init: np.ndarray,
    probe: np.ndarray,
    real: DiffractionStack,
    real_geom: ScanGeometry,
    cfg: RemixConfig,
    weight: float,
    seed: int,
) -> tuple[EpieResult, DiffractionStack]:
    init = as_complex_field(init, "initial reconstruction")
    size = require_square(init, "initial reconstruction")
    if size != real_geom.object_size:
        raise DimensionError(f"initial reconstruction is {size}px, scan geometry is for {real_geom.object_size}px")

    dense = oversampled_geometry(real_geom, cfg.oversample)
    simulated = simulate_scan(init, probe, dense, Provenance.simulated)
    mixed = splice(real, simulated)
    logger.info(
        "spliced %d real into %d dense patterns",
        mixed.count(Provenance.real),
        len(mixed),
        extra={"oversample": cfg.oversample, "weight": weight, "dense_step": dense.step},
    )

    # the initial estimate only enters through the simulated data
    x0 = np.ones((size, size), dtype=np.complex128)
    return run_epie(x0, probe, mixed, cfg.epie_options(weight=weight, seed=seed)), mixed


def remix_once(
    init: np.ndarray,
    probe: np.ndarray,
    real: DiffractionStack,
    real_geom: ScanGeometry,
    cfg: RemixConfig,
) -> np.ndarray:
    """One oversample, splice and weighted-ePIE round; returns the reconstruction."""
    result, _ = _remix_round(init, probe, real, real_geom, cfg, cfg.weight, cfg.seed)
    return result.x_hat


def remix_pipeline(
    init: np.ndarray,
    probe: np.ndarray,
    real: DiffractionStack,
    real_geom: ScanGeometry,
    cfg: RemixConfig,
    truth: np.ndarray | None = None,
    phase_max: float = 1.0,
    mask: np.ndarray | None = None,
) -> RemixOutcome:
    """
    Repeat remix rounds, feeding each reconstruction back as the next initial
    estimate. The weight is multiplied by `w_decay` after every round and round
    k uses seed `cfg.seed + k`. With `truth` the report carries aligned MSE.
    """
    audit = new_audit()
    truth_gray = gray_from_field(as_complex_field(truth, "truth"), phase_max) if truth is not None else None
    current = init
    weight = cfg.weight
    rounds = []

    for index in range(cfg.outer_iters):
        step = start_step(audit, f"remix_round_{index}")
        try:
            result, mixed = _remix_round(current, probe, real, real_geom, cfg, weight, (cfg.seed + index) % SEED_MOD)
        except Exception as exc:
            add_error(audit, f"round {index}: {exc}")
            end_step(step, "failed")
            raise
        mse = aligned_mse(result.x_hat, truth_gray, phase_max, mask) if truth_gray is not None else None
        real_misfit = l1_misfit(result.x_hat, probe, mixed.select(Provenance.real))
        simulated_misfit = l1_misfit(result.x_hat, probe, mixed.select(Provenance.simulated))
        duration = end_step(step, f"weight={weight:g} sweeps={result.sweeps_run}")

        rounds.append(
            RemixRoundReport(
                round=index,
                weight=weight,
                sweeps_run=result.sweeps_run,
                final_update_norm=result.final_update_norm,
                real_misfit=real_misfit,
                simulated_misfit=simulated_misfit,
                aligned_mse=mse,
                duration_s=duration,
            )
        )
        logger.info(
            "remix round %d done",
            index,
            extra={"weight": weight, "aligned_mse": mse, "real_misfit": real_misfit},
        )
        current = result.x_hat
        weight *= cfg.w_decay

    report = RemixReport(rounds=rounds, audit=AuditTrail.model_validate(audit))
    return RemixOutcome(current, report)
