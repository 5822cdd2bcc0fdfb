import numpy as np
import pytest

from ghostcorr import ComplexField, ConfigurationError, GridSpec
from ghostcorr.bench import (
    BeamSplitter,
    Detector,
    ExperimentConfig,
    ObjectMask,
    apply_object,
    bucket,
    calibrate,
    run_coherent,
    run_shot,
    split,
)
from ghostcorr.field_grid import intensity, total_energy
from ghostcorr.optics import point_invert
from ghostcorr.oracle import analytic_diffraction
from ghostcorr.analysis import normalized_cross_correlation
from ghostcorr.speckle_source import SourceSpec, frame_seed, sample_frame

GRID = GridSpec(128, 64, 6.0)
SOURCE = SourceSpec(mode="spectral", d0=10_000.0)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def config(mode="ghost_diffraction", obj=None, **kw):
    return ExperimentConfig(SOURCE, GRID, obj or ObjectMask.needle_in_slit(GRID), arm2_mode=mode, **kw)


def test_splitter_must_be_lossless():
    with pytest.raises(ConfigurationError):
        BeamSplitter(0.7, 0.7)
    BeamSplitter(1.0, 0.0)
    BeamSplitter(0.6, 0.8j)


def test_split_examples():
    a = random_field(GridSpec(8, 8, 1.0))
    b1, b2 = split(a, BeamSplitter(1.0, 0.0))
    assert np.array_equal(b1.values, a.values)
    assert not b2.values.any()
    b1, b2 = split(a, BeamSplitter())
    np.testing.assert_allclose(intensity(b1).values, intensity(a).values / 2, rtol=1e-15)
    np.testing.assert_allclose(intensity(b2).values, intensity(a).values / 2, rtol=1e-15)


def test_split_cross_term():
    a = random_field(GridSpec(8, 8, 1.0), 1)
    bs = BeamSplitter(0.6, 0.8j)
    b1, b2 = split(a, bs)
    lhs = b1.values * b2.values.conj()
    rhs = bs.t * np.conj(bs.r) * np.abs(a.values) ** 2
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_split_conserves_intensity_pixelwise():
    a = random_field(GridSpec(16, 16, 1.0), 2)
    b1, b2 = split(a, BeamSplitter(0.6, 0.8))
    total = intensity(b1).values + intensity(b2).values
    np.testing.assert_allclose(total, intensity(a).values, rtol=1e-15)


def test_needle_in_slit_transmission():
    grid = GridSpec(1000, 2, 1.0)
    t = ObjectMask.needle_in_slit(grid, 160.0, 690.0).transmission[0].real
    x = grid.x
    assert np.all(t[np.abs(x) < 80] == 0)
    assert np.all(t[(np.abs(x) > 80) & (np.abs(x) < 345)] == 1)
    assert np.all(t[np.abs(x) > 345] == 0)


def test_mask_edges_use_area_coverage():
    grid = GridSpec(16, 2, 2.0)
    # edges at +-4 um cut the pixels centered there in half
    t = dict(zip(grid.x, ObjectMask.single_slit(grid, 8.0).transmission[0].real))
    assert t[0.0] == 1.0 and t[2.0] == 1.0 and t[-2.0] == 1.0
    assert t[4.0] == 0.5 and t[-4.0] == 0.5
    assert t[6.0] == 0.0


def test_mask_builders_validate():
    with pytest.raises(ConfigurationError):
        ObjectMask.needle_in_slit(GRID, 700.0, 690.0)
    with pytest.raises(ConfigurationError):
        ObjectMask.double_slit(GRID, 100.0, 50.0)
    with pytest.raises(ValueError):
        ObjectMask(GRID, 2 * np.ones(GRID.shape))


def test_apply_object():
    a = random_field(GRID, 3)
    assert np.array_equal(apply_object(a, ObjectMask.uniform(GRID)).values, a.values)
    out = apply_object(a, ObjectMask.needle_in_slit(GRID))
    assert total_energy(out) <= total_energy(a)
    with pytest.raises(ValueError):
        apply_object(a, ObjectMask.uniform(GridSpec(8, 8, 1.0)))


def test_raster_mask_roundtrip(tmp_path):
    from ghostcorr.io import write_pgm

    grid = GridSpec(8, 6, 1.0)
    img = np.zeros(grid.shape)
    img[1, 2] = 1.0
    write_pgm(tmp_path / "m.pgm", img)
    mask = ObjectMask.from_pgm(tmp_path / "m.pgm", grid)
    assert mask.transmission[1, 2] == 1.0
    assert mask.transmission.real.sum() == 1.0
    with pytest.raises(ConfigurationError):
        ObjectMask.from_pgm(tmp_path / "m.pgm", GridSpec(6, 6, 1.0))


def test_run_shot_is_deterministic_and_finite():
    cfg = config()
    a, b = run_shot(cfg, 7), run_shot(cfg, 7)
    assert np.array_equal(a.frame1.values, b.frame1.values)
    assert np.array_equal(a.frame2.values, b.frame2.values)
    assert np.isfinite(a.frame1.values).all() and (a.frame1.values >= 0).all()
    assert not np.array_equal(a.frame1.values, run_shot(cfg, 8).frame1.values)


def test_arm1_is_unchanged_by_arm2_mode():
    gd, gi = config("ghost_diffraction"), config("ghost_image")
    for i in range(3):
        s = frame_seed(4, i)
        assert np.array_equal(run_shot(gd, s).frame1.values, run_shot(gi, s).frame1.values)
    assert gd.with_mode("ghost_image").arm2_mode == "ghost_image"


def test_config_validates():
    with pytest.raises(ConfigurationError):
        config("holography")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(SOURCE, GRID, ObjectMask.uniform(GridSpec(8, 8, 1.0)))
    with pytest.raises(ConfigurationError):
        config(object_arm=3)


def test_coherent_probe_gives_diffraction_pattern():
    grid = GridSpec(2048, 4, 6.0)
    cfg = ExperimentConfig(SOURCE, grid, ObjectMask.needle_in_slit(grid))
    shot = run_coherent(cfg)
    out = cfg.arm1.output_grid(grid, SOURCE.wavelength)
    row = shot.frame1.values[2]
    keep = np.abs(out.x) < 300
    ref = analytic_diffraction("needle_in_slit", out.x[keep], SOURCE.wavelength, 80_000.0)
    assert normalized_cross_correlation(row[keep], ref) > 0.999


def test_coherent_probe_in_arm2_images_the_object():
    grid = GridSpec(256, 4, 5.0)
    mask = ObjectMask.needle_in_slit(grid)
    cfg = ExperimentConfig(SOURCE, grid, mask, arm2_mode="ghost_image")
    shot = run_coherent(cfg, object_arm=2)
    # |m r T(-m x)|^2 on the grid of pitch 5 / m
    expected = 1.2**2 * 0.5 * np.abs(point_invert(mask.transmission)) ** 2
    np.testing.assert_allclose(shot.frame2.values, expected, atol=1e-12)
    # arm 1 now sees no object: a single focal spot
    assert shot.frame1.values.max() == pytest.approx(shot.frame1.values.sum())


def test_single_shot_shows_no_diffraction_pattern():
    # the window is narrower than the beam, so the pinhole is relayed
    grid = GridSpec(2048, 320, 6.0)
    cfg = ExperimentConfig(SourceSpec(), grid, ObjectMask.needle_in_slit(grid))
    shot = run_shot(cfg, frame_seed(1, 0))
    out = cfg.arm1.output_grid(grid, SOURCE.wavelength)
    keep = np.abs(out.x) < 250
    ref = analytic_diffraction("needle_in_slit", out.x[keep], SOURCE.wavelength, 80_000.0)
    frame = shot.frame1.values[:, keep]
    assert abs(normalized_cross_correlation(frame, np.broadcast_to(ref, frame.shape))) < 0.2


def test_detector_binning_and_poisson():
    f = random_field(GridSpec(8, 8, 1.0), 5)
    frame = Detector(binning=2).detect(f, None)
    assert frame.grid.shape == (4, 4) and frame.grid.dx == 2.0
    assert frame.values.sum() == pytest.approx(intensity(f).values.sum())
    with pytest.raises(ConfigurationError):
        Detector(binning=3).detect(f, None)
    noisy = Detector(poisson=True, photons_per_unit=100.0).detect(f, np.random.default_rng(0))
    assert np.all(np.isclose(noisy.values * 100, np.round(noisy.values * 100)))


def test_poisson_noise_is_reproducible():
    cfg = config(detector=Detector(poisson=True, photons_per_unit=50.0))
    assert np.array_equal(run_shot(cfg, 3).frame2.values, run_shot(cfg, 3).frame2.values)


def test_bucket_examples():
    frame = np.full((4, 5), 2.5)
    assert bucket(frame, np.ones((4, 5), bool)) == pytest.approx(2.5 * 20)
    assert bucket(np.zeros((4, 5)), np.ones((4, 5), bool)) == 0.0
    with pytest.raises(ValueError):
        bucket(frame, np.zeros((4, 5), bool))
    with pytest.raises(ValueError):
        bucket(frame, np.ones((3, 5), bool))


def test_bucket_over_illuminated_support_is_full_integral():
    cfg = config()
    cal = calibrate(cfg, 4, seed=0)
    region = cal.bucket_region(0.0)
    shot = run_shot(cfg, 1)
    support = cal.mean1 > 0
    assert bucket(shot.frame1, region | support) == pytest.approx(shot.frame1.values.sum(), rel=1e-12)


def test_calibration_is_independent_of_main_stream():
    cfg = config()
    cal = calibrate(cfg, 4, seed=1)
    mean = sum(run_shot(cfg, frame_seed(1, i)).frame1.values for i in range(4)) / 4
    assert not np.allclose(cal.mean1, mean)
    region = cal.bucket_region(0.01)
    assert region.any() and not region.all()
