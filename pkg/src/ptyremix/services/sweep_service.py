"""Parameter sweeps over weight, oversampling ratio or scan overlap."""

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter
from typing import Literal

import numpy as np

from ptyremix.exceptions import ConfigError
from ptyremix.models import raster_geometry
from ptyremix.schemas import EpieOptions, RunConfig
from ptyremix.services.epie_service import run_epie
from ptyremix.services.metrics_service import aligned_mse, gray_from_field
from ptyremix.services.run_service import RunInputs, execute_remix, load_fields, load_inputs, simulate_real
from ptyremix.settings import get_settings
from ptyremix.tools.storage import write_text

logger = logging.getLogger(__name__)

SweepParam = Literal["weight", "oversample", "overlap"]
CSV_HEADER = ["value", "aligned_mse", "runtime_s", "status", "error", "init_mse", "epie_mse"]


@dataclass
class SweepRow:
    value: str
    aligned_mse: float | None = None
    runtime_s: float = 0.0
    status: str = "ok"
    error: str = ""
    init_mse: float | None = None
    epie_mse: float | None = None


def _as_int(value: str) -> int:
    number = float(value)
    if not number.is_integer():
        raise ConfigError(f"sweep value {value} must be an integer")
    return int(number)


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


class SweepOrchestrator:
    """Runs one remix pipeline per sweep value; a failing value is recorded and skipped."""

    def __init__(self, config: RunConfig, workers: int | None = None):
        if config.truth is None:
            raise ConfigError("a sweep needs a truth object to score reconstructions")
        self.config = config
        self.workers = workers or get_settings().sweep_workers
        self._base: RunInputs | None = None

    def _prepare(self, param: SweepParam) -> None:
        """Load what every value shares, once, before fanning out."""
        if param == "overlap":
            init, probe, truth = load_fields(self.config)
            self._base = RunInputs(init, probe, None, None, truth)
        else:
            self._base = load_inputs(self.config)

    def _inputs_for(self, param: SweepParam, value: str) -> tuple[RunInputs, RunConfig]:
        base = self._base
        remix = self.config.remix
        if param == "weight":
            remix = remix.model_copy(update={"weight": float(value)})
            if not remix.weight > 0:
                raise ConfigError(f"weight must be positive, got {value}")
            inputs = base
        elif param == "oversample":
            remix = remix.model_copy(update={"oversample": _as_int(value)})
            if remix.oversample < 1:
                raise ConfigError(f"oversampling ratio must be >= 1, got {value}")
            inputs = base
        elif param == "overlap":
            geometry = raster_geometry(base.init.shape[0], base.probe.shape[0], _as_int(value))
            real = simulate_real(base.truth, base.probe, geometry, self.config.noise)
            inputs = RunInputs(base.init, base.probe, real, geometry, base.truth)
        else:
            raise ConfigError(f"unknown sweep parameter {param}")
        return inputs, self.config.model_copy(update={"remix": remix})

    def _output_for(self, param: SweepParam, value: str) -> Path:
        output = self.config.output
        return output.with_name(f"{output.stem}_{param}-{value}{output.suffix or '.pta'}")

    def _run_value(self, param: SweepParam, value: str, baselines: bool) -> SweepRow:
        row = SweepRow(value=value)
        started = perf_counter()
        try:
            inputs, config = self._inputs_for(param, value)
            outcome = execute_remix(inputs, config.remix, config.phase_max, output=self._output_for(param, value))
            row.aligned_mse = outcome.report.rounds[-1].aligned_mse
            if baselines:
                self._fill_baselines(row, inputs, config)
        except Exception as exc:
            logger.warning("sweep %s=%s failed: %s", param, value, exc)
            row.status = "error"
            row.error = str(exc)
        row.runtime_s = perf_counter() - started
        return row

    def _fill_baselines(self, row: SweepRow, inputs: RunInputs, config: RunConfig) -> None:
        """Scores of the initial estimate alone and of plain ePIE on the real records."""
        truth_gray = gray_from_field(inputs.truth, config.phase_max)
        row.init_mse = aligned_mse(inputs.init, truth_gray, config.phase_max)
        remix = config.remix
        options = EpieOptions(
            sweeps=remix.epie_sweeps,
            order=remix.epie_order,
            seed=remix.seed,
            alpha_real=remix.alpha_base,
            zero_guard=remix.zero_guard,
            stop_tol=remix.stop_tol,
        )
        x0 = np.ones_like(inputs.init)
        row.epie_mse = aligned_mse(run_epie(x0, inputs.probe, inputs.real, options).x_hat, truth_gray, config.phase_max)

    def run(self, param: SweepParam, values: list[str], baselines: bool = False) -> list[SweepRow]:
        logger.info("sweep started", extra={"param": param, "values": values, "workers": self.workers})
        try:
            self._prepare(param)
        except Exception as exc:
            logger.warning("sweep inputs failed to load: %s", exc)
            return [SweepRow(value=v, status="error", error=str(exc)) for v in values]

        if self.workers > 1 and len(values) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(lambda v: self._run_value(param, v, baselines), values))
        else:
            rows = [self._run_value(param, v, baselines) for v in values]
        logger.info("sweep finished", extra={"failed": sum(r.status != "ok" for r in rows)})
        return rows


def rows_to_csv(rows: list[SweepRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([
            row.value,
            _fmt(row.aligned_mse),
            f"{row.runtime_s:.3f}",
            row.status,
            row.error,
            _fmt(row.init_mse),
            _fmt(row.epie_mse),
        ])
    return buffer.getvalue()


def write_sweep_csv(path: Path, rows: list[SweepRow]) -> None:
    write_text(path, rows_to_csv(rows))
