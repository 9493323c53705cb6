import numpy as np
import pytest
from numpy.testing import assert_array_equal

from helpers import random_stack, smooth_bump
from ptyremix.exceptions import ConfigError, DimensionError, SpliceError
from ptyremix.models import DiffractionRecord, DiffractionStack, Position, Provenance, ScanOrder, raster_geometry
from ptyremix.schemas import EpieOptions, ProbeSpec, RemixConfig, weighted_alphas
from ptyremix.services.epie_service import run_epie
from ptyremix.services.forward_service import make_phantom, make_probe, simulate_scan, synthetic_gray
from ptyremix.services.metrics_service import aligned_mse, coverage_mask, field_distance
from ptyremix.services.remix_service import oversampled_geometry, remix_once, remix_pipeline, splice


def test_oversampled_geometry_divides_step():
    dense = oversampled_geometry(raster_geometry(240, 60, 60), 3)
    assert dense.step == 20
    assert len(dense) == 100
    assert set(raster_geometry(240, 60, 60).positions) <= set(dense.positions)


def test_oversampled_geometry_rejects_indivisible_step():
    with pytest.raises(ConfigError):
        oversampled_geometry(raster_geometry(240, 60, 45), 4)


def test_oversample_one_is_identity():
    geometry = raster_geometry(240, 60, 60)
    assert oversampled_geometry(geometry, 1).positions == geometry.positions


def test_oversample_two_grid():
    dense = oversampled_geometry(raster_geometry(240, 60, 60), 2)
    assert dense.step == 30
    assert len(dense) == 49


def test_splice_substitutes_real_patterns(small_truth, small_probe):
    real_geom = raster_geometry(48, 16, 16)
    real = simulate_scan(small_truth, small_probe, real_geom, Provenance.real)
    simulated = simulate_scan(np.ones((48, 48)), small_probe, oversampled_geometry(real_geom, 4))
    mixed = splice(real, simulated)

    assert len(mixed) == len(simulated)
    assert mixed.positions == simulated.positions
    assert mixed.count(Provenance.real) == len(real)
    measured = {record.position: record.intensity for record in real}
    for record, original in zip(mixed, simulated):
        if record.position in measured:
            assert record.provenance is Provenance.real
            assert_array_equal(record.intensity, measured[record.position])
        else:
            assert record.provenance is Provenance.simulated
            assert_array_equal(record.intensity, original.intensity)


def test_splice_retags_everything_when_not_oversampled(rng):
    simulated = random_stack(rng, 4, 6)
    simulated = DiffractionStack(4, tuple(
        DiffractionRecord(r.position, Provenance.simulated, r.intensity) for r in simulated
    ))
    real = DiffractionStack(4, tuple(
        DiffractionRecord(r.position, Provenance.real, r.intensity + 1.0) for r in simulated
    ))
    mixed = splice(real, simulated)
    assert mixed.count(Provenance.real) == 6
    assert_array_equal(mixed[2].intensity, real[2].intensity)


def test_splice_rejects_off_grid_position(small_probe):
    simulated = DiffractionStack(16, (DiffractionRecord(Position(0, 0), Provenance.simulated, np.ones((16, 16))),))
    real = DiffractionStack(16, (DiffractionRecord(Position(0, 3), Provenance.real, np.ones((16, 16))),))
    with pytest.raises(SpliceError):
        splice(real, simulated)


def test_splice_rejects_duplicate_real_positions():
    record = DiffractionRecord(Position(0, 0), Provenance.real, np.ones((4, 4)))
    simulated = DiffractionStack(4, (DiffractionRecord(Position(0, 0), Provenance.simulated, np.ones((4, 4))),))
    with pytest.raises(SpliceError):
        splice(DiffractionStack(4, (record, record)), simulated)


def test_splice_rejects_size_mismatch():
    real = DiffractionStack(4, (DiffractionRecord(Position(0, 0), Provenance.real, np.ones((4, 4))),))
    simulated = DiffractionStack(8, (DiffractionRecord(Position(0, 0), Provenance.simulated, np.ones((8, 8))),))
    with pytest.raises(DimensionError):
        splice(real, simulated)


def test_remix_config_weights_simulated_step():
    opts = RemixConfig(weight=20.0, alpha_base=1.0).epie_options()
    assert opts.alpha_real == 1.0
    assert opts.alpha_sim == pytest.approx(0.05)
    assert RemixConfig().epie_options(weight=4.0, seed=9).seed == 9


@pytest.mark.parametrize(
    "alpha, weight, expected",
    [(1.0, 1.0, (1.0, 1.0)), (0.5, 10.0, (0.5, 0.05)), (1.0, 1e-4, (1e-4, 1.0)), (0.8, 0.5, (0.4, 0.8))],
)
def test_weighted_alphas_keep_ratio_and_cap_steps(alpha, weight, expected):
    alpha_real, alpha_sim = weighted_alphas(alpha, weight)
    assert (alpha_real, alpha_sim) == pytest.approx(expected)
    assert max(alpha_real, alpha_sim) == pytest.approx(alpha)
    assert alpha_sim == pytest.approx(alpha_real / weight)


def test_splice_at_desk_geometry(desk_truth, desk_probe):
    real_geom = raster_geometry(240, 60, 60)
    real = simulate_scan(desk_truth, desk_probe, real_geom, Provenance.real)
    dense = oversampled_geometry(real_geom, 3)
    mixed = splice(real, simulate_scan(np.ones((240, 240)), desk_probe, dense))

    assert len(real) == 16
    assert len(mixed) == 100
    assert mixed.count(Provenance.real) == 16
    measured = {record.position: record.intensity for record in real}
    for record in mixed.select(Provenance.real):
        assert_array_equal(record.intensity, measured[record.position])


def test_remix_rejects_wrong_init_size(small_truth, small_probe):
    real_geom = raster_geometry(48, 16, 16)
    real = simulate_scan(small_truth, small_probe, real_geom, Provenance.real)
    with pytest.raises(DimensionError):
        remix_once(np.ones((40, 40)), small_probe, real, real_geom, RemixConfig(oversample=2, epie_sweeps=1))


def test_remix_is_deterministic(small_truth, small_probe):
    real_geom = raster_geometry(48, 16, 16)
    real = simulate_scan(small_truth, small_probe, real_geom, Provenance.real)
    init = small_truth * np.exp(1j * smooth_bump(48, 0.2))
    cfg = RemixConfig(oversample=4, weight=5.0, epie_sweeps=5, seed=3)
    assert_array_equal(
        remix_once(init, small_probe, real, real_geom, cfg),
        remix_once(init, small_probe, real, real_geom, cfg),
    )


WEIGHT_GRID = (1.0, 1e2, 1e4, 1e6)
GRID_SWEEPS = 30


def _weight_grid_rounds(truth, probe, weights):
    """Single remix rounds over `weights` from a corrupted init, in raster order."""
    real_geom = raster_geometry(48, 16, 16)
    real = simulate_scan(truth, probe, real_geom, Provenance.real)
    init = truth * np.exp(1j * smooth_bump(48, 0.4))
    outcomes = []
    for weight in weights:
        cfg = RemixConfig(oversample=4, weight=weight, epie_sweeps=GRID_SWEEPS, epie_order=ScanOrder.raster)
        outcomes.append(remix_pipeline(init, probe, real, real_geom, cfg))
    return real_geom, real, outcomes


def test_large_weight_approaches_real_only_epie(small_truth, small_probe):
    real_geom, real, outcomes = _weight_grid_rounds(small_truth, small_probe, WEIGHT_GRID)
    plain = run_epie(
        np.ones((48, 48)), small_probe, real, EpieOptions(sweeps=GRID_SWEEPS, order=ScanOrder.raster),
    ).x_hat
    mask = coverage_mask(real_geom, small_probe)

    distances = [field_distance(outcome.x_hat, plain, 1.0, mask) for outcome in outcomes]
    for earlier, later in zip(distances, distances[1:]):
        assert later <= earlier * (1 + 1e-9)
    assert distances[-1] < 0.05 * distances[0]


def test_simulated_misfit_falls_as_weight_falls(small_truth, small_probe):
    _, _, outcomes = _weight_grid_rounds(small_truth, small_probe, WEIGHT_GRID[::-1])
    misfits = [outcome.report.rounds[0].simulated_misfit for outcome in outcomes]
    for earlier, later in zip(misfits, misfits[1:]):
        assert later <= earlier * (1 + 1e-9)
    assert misfits[-1] < misfits[0]


def test_tiny_weight_stays_stable_and_fits_the_simulated_data(small_truth, small_probe):
    _, _, (tiny, unit) = _weight_grid_rounds(small_truth, small_probe, (1e-4, 1.0))
    assert np.isfinite(tiny.x_hat).all()
    assert tiny.report.rounds[0].sweeps_run == GRID_SWEEPS
    assert tiny.report.rounds[0].simulated_misfit < unit.report.rounds[0].simulated_misfit


def test_pipeline_reports_rounds_and_audit(small_truth, small_probe):
    real_geom = raster_geometry(48, 16, 16)
    real = simulate_scan(small_truth, small_probe, real_geom, Provenance.real)
    cfg = RemixConfig(oversample=2, weight=8.0, w_decay=0.5, outer_iters=3, epie_sweeps=3, seed=10)
    outcome = remix_pipeline(np.ones((48, 48)), small_probe, real, real_geom, cfg, truth=small_truth)

    report = outcome.report
    assert [r.round for r in report.rounds] == [0, 1, 2]
    assert [r.weight for r in report.rounds] == [8.0, 4.0, 2.0]
    assert all(r.aligned_mse is not None and r.sweeps_run == 3 for r in report.rounds)
    assert [s.name for s in report.audit.steps] == ["remix_round_0", "remix_round_1", "remix_round_2"]
    assert all(s.duration_s is not None and s.duration_s >= 0 for s in report.audit.steps)
    assert report.audit.errors == []
    with pytest.raises(ValueError):
        outcome.x_hat[0, 0] = 0


def test_pipeline_round_zero_matches_remix_once(small_truth, small_probe):
    real_geom = raster_geometry(48, 16, 16)
    real = simulate_scan(small_truth, small_probe, real_geom, Provenance.real)
    init = small_truth * np.exp(1j * smooth_bump(48, 0.2))
    cfg = RemixConfig(oversample=2, epie_sweeps=4, seed=6)
    outcome = remix_pipeline(init, small_probe, real, real_geom, cfg)
    assert_array_equal(outcome.x_hat, remix_once(init, small_probe, real, real_geom, cfg))
    assert outcome.report.rounds[0].aligned_mse is None


def test_pipeline_reraises_round_failure(small_truth, small_probe):
    real_geom = raster_geometry(48, 16, 12)
    real = simulate_scan(small_truth, small_probe, real_geom, Provenance.real)
    with pytest.raises(ConfigError):
        remix_pipeline(np.ones((48, 48)), small_probe, real, real_geom, RemixConfig(oversample=5, epie_sweeps=1))


@pytest.mark.slow
def test_remix_from_truth_reproduces_truth():
    gray = synthetic_gray(64, seed=5)
    truth = make_phantom(gray, 1.0)
    probe = make_probe(ProbeSpec(size=16, diameter=16))
    real_geom = raster_geometry(64, 16, 12)
    real = simulate_scan(truth, probe, real_geom, Provenance.real)
    cfg = RemixConfig(oversample=3, weight=20.0, epie_sweeps=2000, seed=1, stop_tol=1e-12)
    x_hat = remix_once(truth, probe, real, real_geom, cfg)
    assert aligned_mse(x_hat, gray, 1.0) < 1e-6


@pytest.mark.slow
def test_outer_rounds_do_not_increase_error():
    gray = synthetic_gray(64, seed=5)
    truth = make_phantom(gray, 1.0)
    probe = make_probe(ProbeSpec(size=16, diameter=16))
    real_geom = raster_geometry(64, 16, 12)
    real = simulate_scan(truth, probe, real_geom, Provenance.real)
    init = truth * np.exp(1j * smooth_bump(64, 0.05))
    mask = coverage_mask(real_geom, probe)
    cfg = RemixConfig(oversample=3, weight=20.0, outer_iters=4, epie_sweeps=1500, seed=2, stop_tol=1e-12)
    outcome = remix_pipeline(init, probe, real, real_geom, cfg, truth=truth, mask=mask)

    errors = [r.aligned_mse for r in outcome.report.rounds]
    for earlier, later in zip(errors, errors[1:]):
        assert later <= earlier * 1.01 + 1e-12
    assert errors[-1] < 1e-5


@pytest.mark.slow
def test_remix_beats_sparse_epie(desk_gray, desk_truth, desk_probe):
    real_geom = raster_geometry(240, 60, 60)
    real = simulate_scan(desk_truth, desk_probe, real_geom, Provenance.real)
    init = desk_truth * np.exp(1j * smooth_bump(240, 0.3, width=30.0))
    opts = EpieOptions(sweeps=300, seed=4)
    plain = run_epie(np.ones((240, 240)), desk_probe, real, opts).x_hat
    cfg = RemixConfig(oversample=3, weight=20.0, outer_iters=2, epie_sweeps=300, seed=4)
    remixed = remix_pipeline(init, desk_probe, real, real_geom, cfg).x_hat
    assert aligned_mse(remixed, desk_gray) < aligned_mse(plain, desk_gray)


@pytest.mark.slow
def test_dense_scan_converges_and_sparse_is_worse(desk_gray, desk_truth, desk_probe):
    opts = EpieOptions(sweeps=3000, seed=0, stop_tol=1e-10)
    dense = simulate_scan(desk_truth, desk_probe, raster_geometry(240, 60, 15))
    sparse = simulate_scan(desk_truth, desk_probe, raster_geometry(240, 60, 60))
    dense_mse = aligned_mse(run_epie(np.ones((240, 240)), desk_probe, dense, opts).x_hat, desk_gray)
    sparse_mse = aligned_mse(run_epie(np.ones((240, 240)), desk_probe, sparse, opts).x_hat, desk_gray)
    assert dense_mse < 1e-4
    assert sparse_mse >= 10 * dense_mse


def test_denser_scan_reconstructs_better(small_gray, small_truth, small_probe):
    opts = EpieOptions(sweeps=60, seed=0)
    mask = coverage_mask(raster_geometry(48, 16, 16), small_probe)
    dense = simulate_scan(small_truth, small_probe, raster_geometry(48, 16, 4))
    sparse = simulate_scan(small_truth, small_probe, raster_geometry(48, 16, 16))
    dense_mse = aligned_mse(run_epie(np.ones((48, 48)), small_probe, dense, opts).x_hat, small_gray, 1.0, mask)
    sparse_mse = aligned_mse(run_epie(np.ones((48, 48)), small_probe, sparse, opts).x_hat, small_gray, 1.0, mask)
    assert dense_mse < sparse_mse


def test_splice_of_empty_real_stack(small_truth, small_probe):
    simulated = simulate_scan(small_truth, small_probe, raster_geometry(48, 16, 8))
    mixed = splice(DiffractionStack(16, ()), simulated)
    assert mixed.count(Provenance.real) == 0
    for a, b in zip(mixed, simulated):
        assert a.position == b.position
        assert_array_equal(a.intensity, b.intensity)


@pytest.mark.slow
def test_zero_overlap_rounds_improve_a_corrupted_init(desk_gray, desk_truth, desk_probe):
    real_geom = raster_geometry(240, 60, 60)
    real = simulate_scan(desk_truth, desk_probe, real_geom, Provenance.real)
    init = desk_truth * np.exp(1j * smooth_bump(240, 0.1, width=40.0))
    cfg = RemixConfig(oversample=3, weight=20.0, outer_iters=3, epie_sweeps=500, seed=3)
    outcome = remix_pipeline(init, desk_probe, real, real_geom, cfg, truth=desk_truth)
    errors = [r.aligned_mse for r in outcome.report.rounds]
    assert errors[1] < errors[0]
    assert errors[2] < errors[1]
