import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ptyremix.exceptions import ConfigError, NumericalError, PtyRemixError
from ptyremix.models import Provenance, ScanGeometry, ScanOrder, infer_geometry, raster_geometry
from ptyremix.schemas import (
    EpieOptions,
    NoiseSpec,
    ProbeSpec,
    RunConfig,
    load_run_config,
    parse_model,
    weighted_alphas,
)
from ptyremix.services.epie_service import run_epie
from ptyremix.services.forward_service import add_poisson_noise, make_phantom, make_probe, simulate_scan, synthetic_gray
from ptyremix.services.metrics_service import coverage_mask, evaluate, gray_from_field
from ptyremix.services.run_service import execute_remix, load_field, load_inputs
from ptyremix.services.sweep_service import SweepOrchestrator, write_sweep_csv
from ptyremix.settings import get_settings
from ptyremix.tools.images import read_gray_png, render_amplitude, render_phase, write_png
from ptyremix.tools.pta import read_pta, write_pta
from ptyremix.tools.ptd import read_ptd, write_ptd
from ptyremix.tools.scan_csv import positions_to_csv, read_positions_csv, write_positions_csv
from ptyremix.tools.storage import write_text
from ptyremix.utils.logging import setup_logging

logger = logging.getLogger(__name__)


def cmd_phantom(args: argparse.Namespace) -> int:
    if args.image is not None:
        gray = read_gray_png(args.image)
    else:
        gray = synthetic_gray(args.synthetic, seed=args.seed)
    write_pta(args.output, make_phantom(gray, args.phase_max))
    logger.info("wrote phantom %s", args.output, extra={"shape": list(gray.shape)})
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    spec = parse_model(
        ProbeSpec,
        {
            "size": args.size,
            "diameter": args.diameter if args.diameter is not None else args.size,
            "profile": args.profile,
            "sigma": args.sigma,
            "amplitude": args.amplitude,
        },
    )
    write_pta(args.output, make_probe(spec))
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    geometry = raster_geometry(args.object_size, args.probe_size, args.step)
    logger.info(
        "raster scan: %d positions, overlap %.1f%%",
        len(geometry),
        geometry.overlap,
    )
    if args.output is None:
        sys.stdout.write(positions_to_csv(geometry))
    else:
        write_positions_csv(args.output, geometry)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    obj = load_field(args.object, "object")
    probe = load_field(args.probe, "probe")
    if args.positions is not None:
        geometry = ScanGeometry(obj.shape[0], probe.shape[0], args.step or 1, tuple(read_positions_csv(args.positions)))
    elif args.step is not None:
        geometry = raster_geometry(obj.shape[0], probe.shape[0], args.step)
    else:
        raise ConfigError("simulate needs --positions or --step")
    stack = simulate_scan(obj, probe, geometry, Provenance(args.provenance), workers=args.workers)
    write_ptd(args.output, stack)
    logger.info("wrote %d patterns to %s", len(stack), args.output)
    return 0


def cmd_noise(args: argparse.Namespace) -> int:
    noise = parse_model(NoiseSpec, {"photon_scale": args.photon_scale, "seed": args.seed})
    write_ptd(args.output, add_poisson_noise(read_ptd(args.stack), noise))
    return 0


def cmd_epie(args: argparse.Namespace) -> int:
    stack = read_ptd(args.stack)
    probe = load_field(args.probe, "probe")
    if args.init is not None:
        x0 = load_field(args.init, "initial object")
    elif args.object_size is not None:
        x0 = np.ones((args.object_size, args.object_size), dtype=np.complex128)
    else:
        raise ConfigError("epie needs --init or --object-size")
    if args.weight <= 0:
        raise ConfigError(f"--weight must be positive, got {args.weight}")
    alpha_real, alpha_sim = weighted_alphas(args.alpha, args.weight)
    options = parse_model(
        EpieOptions,
        {
            "sweeps": args.sweeps,
            "order": args.order,
            "seed": args.seed,
            "alpha_real": alpha_real,
            "alpha_sim": alpha_sim,
            "zero_guard": get_settings().zero_guard,
            "stop_tol": args.stop_tol,
        },
    )
    result = run_epie(x0, probe, stack, options)
    if not np.all(np.isfinite(result.x_hat)):
        raise NumericalError("reconstruction contains NaN or Inf")
    write_pta(args.output, result.x_hat)
    logger.info("epie wrote %s", args.output, extra={"sweeps": result.sweeps_run})
    return 0


_REMIX_FLAGS = {
    "oversample": "oversample",
    "weight": "weight",
    "w_decay": "w_decay",
    "outer": "outer_iters",
    "sweeps": "epie_sweeps",
    "order": "epie_order",
    "seed": "seed",
    "alpha": "alpha_base",
    "stop_tol": "stop_tol",
}
_RUN_FLAGS = ("init", "probe", "real", "truth", "output", "report", "step", "phase_max")


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """RunConfig from --config (if any) with every explicitly given flag applied on top."""
    data: dict[str, Any] = load_run_config(args.config).model_dump() if args.config else {}
    for name in _RUN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    remix = dict(data.get("remix") or {})
    for flag, field in _REMIX_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            remix[field] = value
    data["remix"] = remix
    if getattr(args, "photon_scale", None) is not None:
        data["noise"] = {"photon_scale": args.photon_scale, "seed": args.noise_seed}
    for required in ("init", "probe", "output"):
        if data.get(required) is None:
            raise ConfigError(f"--{required} is required when the config does not set it")
    return parse_model(RunConfig, data)


def cmd_remix(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    inputs = load_inputs(config)
    execute_remix(inputs, config.remix, config.phase_max, output=config.output, report=config.report)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    recon = load_field(args.recon, "reconstruction")
    truth = read_pta(args.truth)
    truth_gray = truth if np.isrealobj(truth) else gray_from_field(truth, args.phase_max)
    probe = load_field(args.probe, "probe")
    stack = read_ptd(args.stack)

    mask = None
    if args.mask == "coverage":
        mask = coverage_mask(infer_geometry(stack, recon.shape[0]), probe)
    report = evaluate(recon, truth_gray, probe, stack, args.phase_max, mask, get_settings().zero_guard)
    text = report.to_json()
    if args.output is not None:
        write_text(args.output, text + "\n")
    sys.stdout.write(text + "\n")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    field = load_field(args.field, "field")
    pixels = render_phase(field) if args.mode == "phase" else render_amplitude(field)
    write_png(args.output, pixels)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    rows = SweepOrchestrator(config, workers=args.workers).run(args.param, args.values, baselines=args.baselines)
    write_sweep_csv(args.output, rows)
    logger.info("wrote sweep %s", args.output, extra={"rows": len(rows)})
    return 0


def _add_remix_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="RunConfig JSON; flags override its fields")
    parser.add_argument("--init", type=Path, help="initial reconstruction (PTA)")
    parser.add_argument("--probe", type=Path, help="probe (PTA)")
    parser.add_argument("--real", type=Path, help="measured stack (PTD)")
    parser.add_argument("--truth", type=Path, help="ground-truth object (PTA), for reports")
    parser.add_argument("--step", type=int, help="real scan step; inferred from the stack when omitted")
    parser.add_argument("-o", "--output", type=Path, help="reconstruction (PTA)")
    parser.add_argument("--report", type=Path, help="per-round report (JSON)")
    parser.add_argument("--phase-max", dest="phase_max", type=float)
    parser.add_argument("--oversample", type=int)
    parser.add_argument("--weight", type=float)
    parser.add_argument("--w-decay", dest="w_decay", type=float)
    parser.add_argument("--outer", type=int)
    parser.add_argument("--sweeps", type=int)
    parser.add_argument("--order", choices=[o.value for o in ScanOrder])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--stop-tol", dest="stop_tol", type=float)
    parser.add_argument("--photon-scale", dest="photon_scale", type=float,
                        help="noise real data simulated from --truth")
    parser.add_argument("--noise-seed", dest="noise_seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog=settings.app_name, description="Ptychography simulation and reconstruction")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="phase-only object from a grayscale image")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--image", type=Path, help="8- or 16-bit grayscale PNG")
    source.add_argument("--synthetic", type=int, metavar="SIZE", help="smooth random phantom of this size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase-max", dest="phase_max", type=float, default=settings.phase_max)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("probe", help="disk probe")
    p.add_argument("--size", type=int, default=60)
    p.add_argument("--diameter", type=float)
    p.add_argument("--profile", choices=["tophat", "gaussian_edge"], default="tophat")
    p.add_argument("--sigma", type=float)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_probe)

    p = sub.add_parser("scan", help="raster scan positions as CSV")
    p.add_argument("--object-size", dest="object_size", type=int, required=True)
    p.add_argument("--probe-size", dest="probe_size", type=int, required=True)
    p.add_argument("--step", type=int, required=True)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("simulate", help="far-field diffraction stack of an object")
    p.add_argument("--object", type=Path, required=True)
    p.add_argument("--probe", type=Path, required=True)
    p.add_argument("--positions", type=Path, help="CSV from `scan`")
    p.add_argument("--step", type=int, help="raster step when no positions file is given")
    p.add_argument("--provenance", choices=[p.value for p in Provenance], default=Provenance.real.value)
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("noise", help="Poisson noise on a stack")
    p.add_argument("--stack", type=Path, required=True)
    p.add_argument("--photon-scale", dest="photon_scale", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_noise)

    p = sub.add_parser("epie", help="plain ePIE reconstruction")
    p.add_argument("--stack", type=Path, required=True)
    p.add_argument("--probe", type=Path, required=True)
    p.add_argument("--init", type=Path)
    p.add_argument("--object-size", dest="object_size", type=int)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--order", choices=[o.value for o in ScanOrder], default=ScanOrder.random_shuffle.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--weight", type=float, default=1.0, help="real : simulated step ratio is 1 : 1/weight")
    p.add_argument("--stop-tol", dest="stop_tol", type=float, default=0.0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_epie)

    p = sub.add_parser("remix", help="oversample, splice and weighted ePIE")
    _add_remix_flags(p)
    p.set_defaults(handler=cmd_remix)

    p = sub.add_parser("metrics", help="metric report as JSON")
    p.add_argument("--recon", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True, help="grayscale (real) or phantom (complex) PTA")
    p.add_argument("--probe", type=Path, required=True)
    p.add_argument("--stack", type=Path, required=True)
    p.add_argument("--phase-max", dest="phase_max", type=float, default=settings.phase_max)
    p.add_argument("--mask", choices=["full", "coverage"], default="full")
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("render", help="phase or amplitude PNG")
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--mode", choices=["phase", "amplitude"], default="phase")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser("sweep", help="remix over a list of parameter values")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--param", choices=["weight", "oversample", "overlap"], required=True)
    p.add_argument("--values", nargs="+", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--baselines", action="store_true", help="also score the initial estimate and plain ePIE")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(handler=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else settings.log_level, settings.log_json)
    try:
        return args.handler(args)
    except PtyRemixError as exc:
        logger.error("%s failed: %s", args.command, exc, extra={"exit_code": exc.exit_code})
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
