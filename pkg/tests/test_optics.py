import numpy as np
import pytest

from ghostcorr import ComplexField, ConfigurationError, GridSpec, SamplingError
from ghostcorr.bench import ObjectMask
from ghostcorr.field_grid import intensity, total_energy
from ghostcorr.optics import (
    Aperture,
    FreeSpace,
    MagnifyingImager,
    OpticalSystem,
    ThinLens,
    TwoF,
    aperture_mask,
    apply_lens,
    critical_distance,
    fresnel_propagate,
    imaging_system,
    impulse_response,
    point_invert,
    two_f_system,
)
from ghostcorr.scenarios import half_max_width

LAM = 0.6328


def gaussian_beam(grid, w0):
    return ComplexField(grid, np.exp(-grid.r2() / w0**2))


def rms_radius(field):
    # 1/e^2 intensity radius along x from the second moment
    frame = intensity(field)
    x, _ = field.grid.coords()
    var = np.sum(frame.values * x**2) / np.sum(frame.values)
    return 2 * np.sqrt(var)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def test_zero_distance_is_identity():
    f = random_field(GridSpec(16, 16, 1.0))
    assert np.array_equal(fresnel_propagate(f, 0.0, LAM).values, f.values)


def test_negative_distance_rejected():
    with pytest.raises(ConfigurationError):
        fresnel_propagate(random_field(GridSpec(8, 8, 1.0)), -1.0, LAM)
    with pytest.raises(ConfigurationError):
        FreeSpace(-1.0)


@pytest.mark.parametrize("z", [300.0, 5_000.0])
def test_propagation_conserves_energy(z):
    grid = GridSpec(128, 128, 2.0)
    f = gaussian_beam(grid, 30.0)
    out = fresnel_propagate(f, z, LAM)
    assert total_energy(out) == pytest.approx(total_energy(f), rel=1e-10)


def test_method_choice_follows_critical_distance():
    grid = GridSpec(128, 128, 2.0)
    zc = critical_distance(grid, LAM)[0]
    f = gaussian_beam(grid, 30.0)
    assert fresnel_propagate(f, 0.5 * zc, LAM).grid == grid
    assert fresnel_propagate(f, 2 * zc, LAM).grid != grid
    with pytest.raises(SamplingError):
        fresnel_propagate(f, 2 * zc, LAM, method="transfer")
    with pytest.raises(SamplingError):
        fresnel_propagate(f, 0.5 * zc, LAM, method="impulse")


def test_anisotropic_grid_between_critical_distances_is_rejected():
    grid = GridSpec(256, 64, 2.0)
    lo, hi = sorted(critical_distance(grid, LAM))
    with pytest.raises(SamplingError):
        fresnel_propagate(gaussian_beam(grid, 20.0), 0.5 * (lo + hi), LAM)


@pytest.mark.parametrize("z", [1_000.0, 8_000.0])
def test_gaussian_beam_width_matches_closed_form(z):
    w0 = 40.0
    grid = GridSpec(256, 256, 2.0)
    out = fresnel_propagate(gaussian_beam(grid, w0), z, LAM)
    expected = w0 * np.sqrt(1 + (LAM * z / (np.pi * w0**2)) ** 2)
    assert rms_radius(out) == pytest.approx(expected, rel=0.01)


def test_lens_keeps_modulus():
    f = random_field(GridSpec(32, 32, 1.0))
    out = apply_lens(f, 5_000.0, LAM)
    np.testing.assert_allclose(np.abs(out.values), np.abs(f.values), rtol=1e-15)


def test_lens_focuses_plane_wave_to_center():
    grid = GridSpec(128, 128, 4.0)
    f = 60_000.0
    focused = fresnel_propagate(apply_lens(ComplexField.plane_wave(grid), f, LAM), f, LAM)
    frame = intensity(focused).values
    assert np.unravel_index(np.argmax(frame), frame.shape) == focused.grid.center_index()


def test_two_thin_lenses_combine():
    grid = GridSpec(32, 32, 3.0)
    f1, f2 = 4_000.0, -7_000.0
    field = ComplexField.plane_wave(grid)
    both = apply_lens(apply_lens(field, f1, LAM), f2, LAM).values
    single = apply_lens(field, 1 / (1 / f1 + 1 / f2), LAM).values
    np.testing.assert_allclose(both, single, rtol=0, atol=1e-12)


def test_zero_focal_length_rejected():
    with pytest.raises(ConfigurationError):
        ThinLens(0.0)
    with pytest.raises(ConfigurationError):
        two_f_system(ComplexField.zeros(GridSpec(4, 4, 1.0)), 0.0, LAM)


def test_two_f_of_uniform_input_is_a_centered_spot():
    grid = GridSpec(64, 64, 5.0)
    out = two_f_system(ComplexField.plane_wave(grid), 80_000.0, LAM)
    frame = intensity(out).values
    assert frame[out.grid.center_index()] == pytest.approx(frame.sum())


def test_two_f_conserves_energy_and_sets_output_pitch():
    grid = GridSpec(64, 32, 5.0)
    f = random_field(grid, 3)
    out = two_f_system(f, 80_000.0, LAM)
    assert total_energy(out) == pytest.approx(total_energy(f), rel=1e-10)
    assert out.grid.dx == pytest.approx(LAM * 80_000.0 / (64 * 5.0))
    assert out.grid.dy == pytest.approx(LAM * 80_000.0 / (32 * 5.0))


def test_two_f_padding_refines_output_pitch():
    grid = GridSpec(32, 32, 5.0)
    f = random_field(grid, 4)
    out = two_f_system(f, 80_000.0, LAM, pad=2)
    assert out.grid.shape == (64, 64)
    assert out.grid.dx == pytest.approx(LAM * 80_000.0 / (64 * 5.0))
    assert total_energy(out) == pytest.approx(total_energy(f), rel=1e-10)


def test_slit_first_zero_at_lambda_f_over_w():
    grid = GridSpec(2048, 4, 6.0)
    mask = ObjectMask.single_slit(grid, 690.0)
    out = two_f_system(ComplexField(grid, mask.transmission), 80_000.0, LAM)
    row = intensity(out).values[2]
    x = out.grid.x
    expected = LAM * 80_000.0 / 690.0
    assert expected == pytest.approx(73.4, abs=0.05)
    near = (x > 0) & (x < 1.5 * expected)
    i = np.flatnonzero(near)[np.argmin(row[near])]
    assert abs(x[i] - expected) <= out.grid.dx


def test_double_two_f_is_point_inversion():
    grid = GridSpec(32, 32, 5.0)
    f = random_field(grid, 5)
    # a 2f map takes pitch p to lambda f / (n p); choose f so the grid returns to itself
    focal = 32 * 5.0**2 / LAM
    twice = two_f_system(two_f_system(f, focal, LAM), focal, LAM)
    np.testing.assert_allclose(twice.values, -point_invert(f.values), atol=1e-10 * np.abs(f.values).max())


def test_imaging_m1_is_point_inversion():
    f = random_field(GridSpec(15, 16, 1.0), 6)
    out = imaging_system(f, 1.0)
    assert np.array_equal(out.values, point_invert(f.values))
    # the center pixel maps to itself
    c = f.grid.center_index()
    assert out.values[c] == f.values[c]


def test_imaging_conserves_energy_and_scales_pitch():
    f = random_field(GridSpec(32, 32, 6.0), 7)
    out = imaging_system(f, 1.2)
    assert out.grid.dx == pytest.approx(5.0)
    assert total_energy(out) == pytest.approx(total_energy(f), rel=1e-12)


def test_imaging_resampled_output_matches_exact_map():
    grid = GridSpec(64, 64, 4.0)
    f = gaussian_beam(grid, 40.0)
    exact = imaging_system(f, 1.2)
    resampled = imaging_system(f, 1.2, out_grid=GridSpec(60, 60, exact.grid.dx))
    c0 = 64 // 2 - 60 // 2
    np.testing.assert_allclose(resampled.values, exact.values[c0:c0 + 60, c0:c0 + 60], atol=1e-6)
    assert total_energy(resampled) == pytest.approx(total_energy(exact), rel=1e-6)


def test_imaging_rejects_window_outside_input():
    f = ComplexField.zeros(GridSpec(16, 16, 1.0))
    with pytest.raises(ConfigurationError):
        imaging_system(f, 1.2, out_grid=GridSpec(64, 64, 1.0))
    with pytest.raises(ConfigurationError):
        MagnifyingImager(0.0)


def test_needle_in_slit_image_width():
    grid = GridSpec(256, 8, 5.0)
    mask = ObjectMask.needle_in_slit(grid, 160.0, 690.0)
    out = imaging_system(ComplexField(grid, mask.transmission), 1.2)
    row = intensity(out).values[4]
    assert half_max_width(out.grid.x, row) == pytest.approx(690 / 1.2, abs=out.grid.dx)


def test_aperture_masks():
    g = GridSpec(32, 32, 1.0)
    assert aperture_mask(g, "circle", 10.0).sum() == np.sum(g.r2() <= 25.0)
    assert aperture_mask(g, "rect", (5.0, 3.0)).sum() == 5 * 3
    assert aperture_mask(g, "slit", 4.0).sum() == 5 * 32
    with pytest.raises(ValueError):
        aperture_mask(g, "hexagon", 3.0)
    with pytest.raises(ConfigurationError):
        Aperture("circle", 0.0)


def test_aperture_reduces_energy():
    f = random_field(GridSpec(32, 32, 1.0), 8)
    out = Aperture("circle", 12.0).apply(f, LAM)
    assert total_energy(out) < total_energy(f)


def test_empty_system_is_identity_and_composition_associates():
    grid = GridSpec(16, 16, 4.0)
    f = random_field(grid, 9)
    assert np.array_equal(OpticalSystem().apply(f, LAM).values, f.values)
    a = OpticalSystem([ThinLens(3_000.0)])
    b = OpticalSystem([FreeSpace(100.0)])
    c = OpticalSystem([Aperture("circle", 40.0)])
    left = ((a + b) + c).apply(f, LAM).values
    right = (a + (b + c)).apply(f, LAM).values
    assert np.array_equal(left, right)


def test_impulse_response_of_identity_is_identity():
    grid = GridSpec(6, 5, 1.0)
    h = impulse_response(OpticalSystem(), grid, LAM)
    assert np.array_equal(h, np.eye(grid.size))


def test_two_f_kernel_is_unitary():
    grid = GridSpec(16, 16, 5.0)
    h = impulse_response(OpticalSystem([TwoF(80_000.0)]), grid, LAM)
    out_grid = OpticalSystem([TwoF(80_000.0)]).output_grid(grid, LAM)
    # unitary once the pitch change is folded into the amplitudes
    u = h * np.sqrt(out_grid.pixel_area / grid.pixel_area)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(grid.size), atol=1e-10)


def test_kernel_matches_operator_on_random_field():
    grid = GridSpec(12, 10, 5.0)
    system = OpticalSystem([ThinLens(50_000.0), FreeSpace(200.0), Aperture("circle", 40.0), TwoF(80_000.0)])
    h = impulse_response(system, grid, LAM)
    f = random_field(grid, 10)
    out = system.apply(f, LAM).values.ravel()
    np.testing.assert_allclose(h @ f.values.ravel(), out, atol=1e-10 * np.abs(out).max())


def test_impulse_response_refuses_large_grids():
    with pytest.raises(ConfigurationError):
        impulse_response(OpticalSystem(), GridSpec(65, 64, 1.0), LAM)
