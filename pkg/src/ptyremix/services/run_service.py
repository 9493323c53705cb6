"""Loading and saving the artifacts of a configured remix run."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ptyremix.exceptions import ConfigError, DimensionError, NumericalError
from ptyremix.models import DiffractionStack, Provenance, ScanGeometry, infer_geometry, raster_geometry
from ptyremix.schemas import NoiseSpec, RemixConfig, RunConfig
from ptyremix.services.forward_service import add_poisson_noise, simulate_scan
from ptyremix.services.remix_service import RemixOutcome, remix_pipeline
from ptyremix.tools.pta import read_pta, write_pta
from ptyremix.tools.ptd import read_ptd
from ptyremix.tools.storage import write_text
from ptyremix.utils.validators import as_complex_field

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RunInputs:
    init: np.ndarray
    probe: np.ndarray
    real: DiffractionStack | None
    geometry: ScanGeometry | None
    truth: np.ndarray | None = None


def load_field(path: Path, name: str) -> np.ndarray:
    array = read_pta(path)
    if array.ndim != 2:
        raise DimensionError(f"{name} in {path} must be 2-D, got {array.ndim} dimensions")
    return as_complex_field(array, name)


def simulate_real(
    truth: np.ndarray,
    probe: np.ndarray,
    geometry: ScanGeometry,
    noise: NoiseSpec | None = None,
) -> DiffractionStack:
    """Measured data stand-in: the scan of a known object, Poisson-noised if asked."""
    stack = simulate_scan(truth, probe, geometry, Provenance.real)
    return add_poisson_noise(stack, noise) if noise is not None else stack


def load_fields(config: RunConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Initial estimate, probe and (optional) truth of a run."""
    init = load_field(config.init, "initial reconstruction")
    probe = load_field(config.probe, "probe")
    truth = load_field(config.truth, "truth") if config.truth is not None else None
    return init, probe, truth


def load_inputs(config: RunConfig, step: int | None = None) -> RunInputs:
    """
    Read the run's fields and obtain the real stack: from `config.real` when
    given, else simulated from truth at `step`.
    """
    step = step or config.step
    init, probe, truth = load_fields(config)
    size = init.shape[0]

    if config.real is not None:
        real = read_ptd(config.real)
        geometry = infer_geometry(real, size, step)
    elif truth is not None and step is not None:
        geometry = raster_geometry(size, probe.shape[0], step)
        real = simulate_real(truth, probe, geometry, config.noise)
    else:
        raise ConfigError("a run needs either a real stack, or a truth object and a scan step")
    return RunInputs(init=init, probe=probe, real=real, geometry=geometry, truth=truth)


def execute_remix(
    inputs: RunInputs,
    remix: RemixConfig,
    phase_max: float,
    output: Path | None = None,
    report: Path | None = None,
) -> RemixOutcome:
    """Run the remix pipeline and write its reconstruction and report."""
    outcome = remix_pipeline(
        inputs.init,
        inputs.probe,
        inputs.real,
        inputs.geometry,
        remix,
        truth=inputs.truth,
        phase_max=phase_max,
    )
    if not np.all(np.isfinite(outcome.x_hat)):
        raise NumericalError("reconstruction contains NaN or Inf")
    if output is not None:
        write_pta(output, outcome.x_hat)
        outcome.report.output = str(output)
        logger.info("wrote reconstruction %s", output)
    if report is not None:
        write_text(report, json.dumps(outcome.report.model_dump(mode="json"), indent=2))
    return outcome
