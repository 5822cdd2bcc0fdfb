"""Paraxial scalar propagation operators and their composition into arms.

Every operator maps a :class:`ComplexField` to a new one and conserves
:func:`~ghostcorr.field_grid.total_energy` unless it is an aperture or mask.
Constant phase factors such as ``exp(ikz)`` are dropped; only intensities are
ever correlated downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .field_grid import ComplexField, ConfigurationError, GridSpec, SamplingError, centered_fft2


def critical_distance(grid: GridSpec, wavelength: float) -> tuple[float, float]:
    """Per-axis distance ``n * pitch**2 / wavelength`` separating the Fresnel regimes.

    The transfer-function propagator samples its chirp without aliasing for
    ``z <= z_c``; the single-transform propagator samples its input and output
    chirps without aliasing for ``z >= z_c``.
    """
    return (grid.n_x * grid.dx**2 / wavelength, grid.n_y * grid.dy**2 / wavelength)


@lru_cache(maxsize=32)
def _transfer_function(grid: GridSpec, z: float, wavelength: float) -> np.ndarray:
    fx, fy = grid.frequencies()
    return np.exp(-1j * np.pi * wavelength * z * (fx**2 + fy**2))


@lru_cache(maxsize=32)
def _chirp(grid: GridSpec, curvature: float) -> np.ndarray:
    # exp(i*pi*r^2*curvature); curvature = 1/(wavelength*R)
    return np.exp(1j * np.pi * curvature * grid.r2())


def fresnel_propagate(
    field: ComplexField, z: float, wavelength: float, method: str = "auto", periodic: bool = False
) -> ComplexField:
    """Paraxial free-space propagation by ``z`` micrometers.

    Parameters
    ----------
    field : ComplexField
        Input field.
    z : float
        Propagation distance [um], ``z >= 0``.
    wavelength : float
        Wavelength [um].
    method : {"auto", "transfer", "impulse"}
        ``"transfer"`` multiplies the angular spectrum by the Fresnel transfer
        function and keeps the grid; valid for ``z <= z_c`` on both axes.
        ``"impulse"`` is the single-transform form; the output pitch becomes
        ``wavelength * z / (n * pitch)`` and it is valid for ``z >= z_c``.
        ``"auto"`` picks whichever is valid.
    periodic : bool
        Declare the field periodic over the window. The transfer-function
        form is then exact at any ``z`` and its limit is not enforced.

    Raises
    ------
    ConfigurationError
        If the chosen method would alias its quadratic phase.
    """
    if z < 0:
        raise ConfigurationError(f"propagation distance z must be >= 0, got {z}")
    if z == 0:
        return field
    grid = field.grid
    zc_lo, zc_hi = sorted(critical_distance(grid, wavelength))
    if periodic and method == "auto":
        method = "transfer"
    if method == "auto":
        if z <= zc_lo:
            method = "transfer"
        elif z >= zc_hi:
            method = "impulse"
        else:
            raise SamplingError(
                f"z={z:g} um lies between the per-axis critical distances "
                f"{zc_lo:g} and {zc_hi:g} um; adjust the grid pitch or n_x/n_y"
            )
    if method == "transfer":
        if not periodic and z > zc_lo * (1 + 1e-12):
            raise SamplingError(
                f"z={z:g} um exceeds transfer-function limit {zc_lo:g} um; reduce pitch or z"
            )
        spectrum = centered_fft2(field.values)
        out = centered_fft2(spectrum * _transfer_function(grid, z, wavelength), inverse=True)
        return ComplexField(grid, out)
    if method == "impulse":
        if z < zc_hi * (1 - 1e-12):
            raise SamplingError(
                f"z={z:g} um is below impulse-response limit {zc_hi:g} um; increase pitch or z"
            )
        curvature = 1.0 / (wavelength * z)
        out_grid = grid.with_pitch(wavelength * z / (grid.n_x * grid.dx), wavelength * z / (grid.n_y * grid.dy))
        scale = np.sqrt(grid.pixel_area / out_grid.pixel_area)
        spectrum = centered_fft2(field.values * _chirp(grid, curvature))
        out = -1j * scale * _chirp(out_grid, curvature) * spectrum
        return ComplexField(out_grid, out)
    raise ValueError(f"unknown method {method!r}")


def apply_lens(field: ComplexField, f: float, wavelength: float) -> ComplexField:
    """Thin-lens phase ``exp(-i*pi*r**2 / (wavelength*f))``."""
    if f == 0:
        raise ConfigurationError("focal length must be non-zero")
    return ComplexField(field.grid, field.values * _chirp(field.grid, -1.0 / (wavelength * f)))


def two_f_system(field: ComplexField, f: float, wavelength: float, pad: int = 1) -> ComplexField:
    """Exact scaled Fourier transform from front to back focal plane of a lens.

    Output sample ``x`` corresponds to spatial frequency ``x / (wavelength*f)``
    cycles/um, i.e. angular wavenumber ``q = 2*pi*x / (wavelength*f)``. The
    output pitch is ``wavelength*f / (pad * n * pitch)``. ``pad > 1`` zero-pads
    the input symmetrically, refining the output sampling.
    """
    if f == 0:
        raise ConfigurationError("focal length must be non-zero")
    values, grid = field.values, field.grid
    if pad != 1:
        if pad < 1 or int(pad) != pad:
            raise ValueError("pad must be a positive integer")
        ny, nx = grid.shape
        grid = GridSpec(nx * pad, ny * pad, grid.dx, grid.pitch_y)
        padded = np.zeros(grid.shape, dtype=np.complex128)
        oy, ox = grid.n_y // 2 - ny // 2, grid.n_x // 2 - nx // 2
        padded[oy:oy + ny, ox:ox + nx] = values
        values = padded
    out_grid = grid.with_pitch(abs(wavelength * f) / (grid.n_x * grid.dx), abs(wavelength * f) / (grid.n_y * grid.dy))
    scale = np.sqrt(grid.pixel_area / out_grid.pixel_area)
    return ComplexField(out_grid, -1j * scale * centered_fft2(values))


def _inversion_index(n: int) -> np.ndarray:
    c = n // 2
    return (2 * c - np.arange(n)) % n


def point_invert(values: np.ndarray) -> np.ndarray:
    """Map the sample at ``x`` to ``-x`` about the grid center (periodic wrap)."""
    ny, nx = values.shape[-2:]
    return values[..., _inversion_index(ny)[:, None], _inversion_index(nx)[None, :]]


def imaging_system(
    field: ComplexField, m: float, out_grid: Optional[GridSpec] = None
) -> ComplexField:
    """Ideal conjugate-plane imager, ``out(x) = m * in(-m * x)``.

    The amplitude factor ``m`` keeps the 2-D energy constant. By default the
    output lives on the input grid rescaled to pitch ``pitch / m``, which makes
    the mapping an exact point inversion with no interpolation. With
    ``out_grid`` the input is resampled by cubic interpolation instead.

    Raises
    ------
    ConfigurationError
        If ``out_grid`` requests points whose preimage lies outside the input.
    """
    if not m > 0:
        raise ConfigurationError(f"magnification must be positive, got {m}")
    grid = field.grid
    if out_grid is None:
        return ComplexField(grid.with_pitch(grid.dx / m, grid.dy / m), m * point_invert(field.values))
    x, y = out_grid.coords()
    src_x = -m * x / grid.dx + grid.n_x // 2
    src_y = -m * y / grid.dy + grid.n_y // 2
    if src_x.min() < 0 or src_x.max() > grid.n_x - 1 or src_y.min() < 0 or src_y.max() > grid.n_y - 1:
        raise ConfigurationError(
            f"output window {out_grid.extent} um x m={m} exceeds input support {grid.extent} um"
        )
    yy, xx = np.broadcast_arrays(src_y, src_x)
    coords = np.stack([yy, xx])
    re = ndimage.map_coordinates(field.values.real, coords, order=3, mode="nearest")
    im = ndimage.map_coordinates(field.values.imag, coords, order=3, mode="nearest")
    return ComplexField(out_grid, m * (re + 1j * im))


def aperture_mask(grid: GridSpec, shape: str, size) -> np.ndarray:
    """Binary transmission of a centered hard aperture.

    ``shape`` is ``"circle"`` (size = diameter), ``"rect"`` (size = (width,
    height)) or ``"slit"`` (size = width along x, unbounded in y).
    """
    x, y = grid.coords()
    if shape == "circle":
        return (x**2 + y**2 <= (size / 2.0) ** 2).astype(float)
    if shape == "rect":
        w, h = size
        return ((np.abs(x) <= w / 2.0) & (np.abs(y) <= h / 2.0)).astype(float)
    if shape == "slit":
        return np.broadcast_to((np.abs(x) <= size / 2.0).astype(float), grid.shape).copy()
    raise ValueError(f"unknown aperture shape {shape!r}")


# ---------------------------------------------------------------- elements


@dataclass(frozen=True)
class FreeSpace:
    z: float
    method: str = "auto"

    def __post_init__(self):
        if self.z < 0:
            raise ConfigurationError(f"FreeSpace.z must be >= 0, got {self.z}")

    def apply(self, field, wavelength):
        return fresnel_propagate(field, self.z, wavelength, self.method)


@dataclass(frozen=True)
class ThinLens:
    f: float

    def __post_init__(self):
        if self.f == 0:
            raise ConfigurationError("ThinLens.f must be non-zero")

    def apply(self, field, wavelength):
        return apply_lens(field, self.f, wavelength)


@dataclass(frozen=True)
class Aperture:
    shape: str
    size: Union[float, tuple]

    def __post_init__(self):
        sizes = np.atleast_1d(self.size)
        if not (sizes > 0).all():
            raise ConfigurationError(f"aperture size must be positive, got {self.size}")

    def apply(self, field, wavelength):
        return ComplexField(field.grid, field.values * aperture_mask(field.grid, self.shape, self.size))


@dataclass(frozen=True)
class MagnifyingImager:
    """Ideal inverting imager; ``m`` maps object coordinates onto ``-x/m``."""

    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ConfigurationError(f"magnification must be positive, got {self.m}")

    def apply(self, field, wavelength):
        return imaging_system(field, self.m)


@dataclass(frozen=True)
class TwoF:
    f: float
    pad: int = 1

    def apply(self, field, wavelength):
        return two_f_system(field, self.f, wavelength, self.pad)


@dataclass(frozen=True, eq=False)
class Transmission:
    """Pixel-wise complex mask; must be defined on the grid it meets."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def apply(self, field, wavelength):
        if field.grid != self.grid:
            raise ValueError(f"mask grid {self.grid} does not match field grid {field.grid}")
        return ComplexField(field.grid, field.values * self.values)


@dataclass(frozen=True)
class OpticalSystem:
    """Ordered chain of elements; the empty system is the identity.

    ``a + b`` concatenates chains (apply ``a`` first), which is associative.
    """

    elements: tuple = ()

    def __init__(self, elements: Sequence = ()):
        object.__setattr__(self, "elements", tuple(elements))

    def __add__(self, other: "OpticalSystem") -> "OpticalSystem":
        return OpticalSystem(self.elements + tuple(other.elements))

    def apply(self, field: ComplexField, wavelength: float) -> ComplexField:
        for element in self.elements:
            field = element.apply(field, wavelength)
        return field

    def output_grid(self, grid: GridSpec, wavelength: float) -> GridSpec:
        return self.apply(ComplexField.zeros(grid), wavelength).grid


MAX_DENSE_PIXELS = 64 * 64


def impulse_response(system: OpticalSystem, grid: GridSpec, wavelength: float) -> np.ndarray:
    """Dense kernel ``h[out_pixel, in_pixel]`` of a linear optical system.

    Column ``j`` is the system's response to a unit amplitude at input pixel
    ``j`` (row-major flattening), so ``out.ravel() == h @ in.ravel()``.
    """
    if grid.size > MAX_DENSE_PIXELS:
        raise ConfigurationError(f"dense impulse response limited to 64x64 grids, got {grid.shape}")
    out_grid = system.output_grid(grid, wavelength)
    if out_grid.size > MAX_DENSE_PIXELS:
        raise ConfigurationError(f"output grid {out_grid.shape} too large for a dense kernel")
    h = np.empty((out_grid.size, grid.size), dtype=np.complex128)
    impulse = np.zeros(grid.size, dtype=np.complex128)
    for j in range(grid.size):
        impulse[j] = 1.0
        h[:, j] = system.apply(ComplexField(grid, impulse.reshape(grid.shape)), wavelength).values.ravel()
        impulse[j] = 0.0
    return h
