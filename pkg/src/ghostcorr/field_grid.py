"""Sampled complex fields on uniform, centered 2-D grids.

Arrays are stored row-major with shape ``(n_y, n_x)``; axis 1 is the
x coordinate. Sample ``(j, i)`` sits at physical position
``((i - n_x // 2) * pitch_x, (j - n_y // 2) * pitch_y)`` so that the grid
center coincides with index ``n // 2`` on both axes. All lengths are in
micrometers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft


class ConfigurationError(ValueError):
    """A parameter combination that cannot be simulated faithfully."""


class SamplingError(ConfigurationError):
    """The grid under-resolves a field or aliases a quadratic phase."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform sampling of the transverse plane.

    Parameters
    ----------
    n_x, n_y : int
        Pixel counts along x and y.
    pitch : float
        Pixel size along x [um]. Also used along y unless ``pitch_y`` is given.
    pitch_y : float, optional
        Pixel size along y [um]. Rectangular grids acquire anisotropic pitch
        after a 2f transform, which is why this is allowed at all.
    """

    n_x: int
    n_y: int
    pitch: float
    pitch_y: Optional[float] = None

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 2:
            raise ConfigurationError(f"grid needs at least 2x2 pixels, got {self.n_x}x{self.n_y}")
        if not self.pitch > 0 or not self.dy > 0:
            raise ConfigurationError(f"pitch must be positive, got {self.pitch}")

    @classmethod
    def square(cls, n: int, pitch: float) -> "GridSpec":
        return cls(n, n, pitch)

    @property
    def dx(self) -> float:
        return float(self.pitch)

    @property
    def dy(self) -> float:
        return float(self.pitch if self.pitch_y is None else self.pitch_y)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_y, self.n_x)

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    @property
    def pixel_area(self) -> float:
        return self.dx * self.dy

    @property
    def extent(self) -> tuple[float, float]:
        """Physical width of the window along (x, y) [um]."""
        return (self.n_x * self.dx, self.n_y * self.dy)

    @property
    def freq_pitch(self) -> tuple[float, float]:
        """Spatial-frequency sample spacing along (x, y) [cycles/um]."""
        return (1.0 / (self.n_x * self.dx), 1.0 / (self.n_y * self.dy))

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_x) - self.n_x // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.n_y) - self.n_y // 2) * self.dy

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable (x, y) coordinate arrays of shape (1, n_x) and (n_y, 1)."""
        return self.x[None, :], self.y[:, None]

    def r2(self) -> np.ndarray:
        x, y = self.coords()
        return x**2 + y**2

    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Centered frequency coordinates (fx, fy) matching :func:`dft_unitary` output."""
        fx = (np.arange(self.n_x) - self.n_x // 2) * self.freq_pitch[0]
        fy = (np.arange(self.n_y) - self.n_y // 2) * self.freq_pitch[1]
        return fx[None, :], fy[:, None]

    def center_index(self) -> tuple[int, int]:
        """(row, column) of the sample at the physical origin."""
        return (self.n_y // 2, self.n_x // 2)

    def with_pitch(self, dx: float, dy: float) -> "GridSpec":
        return GridSpec(self.n_x, self.n_y, dx, None if np.isclose(dx, dy, rtol=1e-15, atol=0) else dy)


def _check_values(grid: GridSpec, values: np.ndarray, dtype) -> np.ndarray:
    values = np.asarray(values, dtype=dtype)
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
    if not np.isfinite(values).all():
        raise ValueError("field contains non-finite values")
    return values


@dataclass(frozen=True)
class ComplexField:
    """Complex scalar amplitude sampled on ``grid``; intensity is ``|values|**2``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, np.complex128))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def plane_wave(cls, grid: GridSpec, amplitude: complex = 1.0) -> "ComplexField":
        return cls(grid, np.full(grid.shape, amplitude, dtype=np.complex128))

    def replace(self, values: np.ndarray, grid: Optional[GridSpec] = None) -> "ComplexField":
        return ComplexField(self.grid if grid is None else grid, values)

    def __mul__(self, other) -> "ComplexField":
        if isinstance(other, ComplexField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            other = other.values
        return ComplexField(self.grid, self.values * other)

    __rmul__ = __mul__


@dataclass(frozen=True)
class IntensityFrame:
    """Non-negative detected intensity on ``grid``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _check_values(self.grid, self.values, np.float64)
        if (values < 0).any():
            raise ValueError("intensity must be non-negative")
        object.__setattr__(self, "values", values)


def intensity(field: ComplexField) -> IntensityFrame:
    """Square-law detection, ``|E|**2`` per pixel."""
    v = field.values
    return IntensityFrame(field.grid, v.real**2 + v.imag**2)


def centered_fft2(values: np.ndarray, inverse: bool = False, axes=(-2, -1)) -> np.ndarray:
    """Unitary 2-D DFT with the zero frequency at index ``n // 2``."""
    fn = scipy.fft.ifft2 if inverse else scipy.fft.fft2
    shifted = scipy.fft.ifftshift(values, axes=axes)
    return scipy.fft.fftshift(fn(shifted, axes=axes, norm="ortho", workers=-1), axes=axes)


def dft_unitary(field: ComplexField, direction: str = "forward") -> ComplexField:
    """Centered, orthonormal 2-D DFT of a field.

    The returned field lives on the reciprocal grid, whose pitch is the
    frequency spacing ``1 / (n * pitch)`` in cycles/um. No pitch factors
    enter the transform itself, so ``sum(|values|**2)`` is preserved exactly;
    :func:`total_energy` is preserved only when the caller rescales amplitudes
    by ``pitch_in / pitch_out`` per axis, as the propagators do.
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    out = centered_fft2(field.values, inverse=direction == "inverse")
    fx, fy = field.grid.freq_pitch
    return ComplexField(field.grid.with_pitch(fx, fy), out)


def total_energy(field) -> float:
    """Integrated intensity ``sum(|E|**2) * pixel_area``."""
    v = field.values
    if np.iscomplexobj(v):
        v = v.real**2 + v.imag**2
    return float(np.sum(v) * field.grid.pixel_area)
