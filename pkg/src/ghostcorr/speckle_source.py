"""Thermal speckle source: independent frames of a circular-Gaussian field.

Two generators share one :class:`SourceSpec`:

* ``physical`` draws i.i.d. random phasors over a disc of diameter ``d0``,
  propagates them to the pinhole plane with a single-transform Fresnel step,
  clips with the pinhole, and relays the result to the near-field plane.
  When no ray reaching the window touches the pinhole the two steps
  collapse into one.
* ``spectral`` filters white noise so that the ensemble correlation is an
  exact, stationary Gaussian with the same central curvature as the
  physical source.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
import scipy.fft

from .field_grid import ComplexField, ConfigurationError, GridSpec, SamplingError, centered_fft2
from .optics import aperture_mask, critical_distance, fresnel_propagate

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

MIN_SPECKLE_PIXELS = 3.0


@dataclass(frozen=True)
class SourceSpec:
    """Geometry of the speckle source. Lengths in micrometers.

    Defaults follow the experiment: HeNe wavelength, 10 mm illuminated spot,
    400 mm to a 3 mm diaphragm. The diaphragm-to-object leg is not reported
    beyond the diaphragm being close to the object; the 20 mm default puts
    ``wavelength * z_total / d0`` at 26.6 um, between the 25 um and 30 um
    estimates for the near-field speckle.
    """

    wavelength: float = 0.6328
    d0: float = 10_000.0
    z0: float = 400_000.0
    pinhole_d: float = 3_000.0
    z_pinhole_to_near: float = 20_000.0
    mean_intensity: float = 1.0
    mode: str = "physical"

    def __post_init__(self):
        for name in ("wavelength", "d0", "z0", "pinhole_d", "mean_intensity"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"SourceSpec.{name} must be > 0, got {getattr(self, name)}")
        if self.z_pinhole_to_near < 0:
            raise ConfigurationError("SourceSpec.z_pinhole_to_near must be >= 0")
        if self.mode not in ("physical", "spectral"):
            raise ConfigurationError(f"SourceSpec.mode must be 'physical' or 'spectral', got {self.mode!r}")

    @property
    def z_total(self) -> float:
        return self.z0 + self.z_pinhole_to_near

    @property
    def speckle_size(self) -> float:
        """Near-field speckle size ``wavelength * z / d0`` [um]."""
        return self.wavelength * self.z_total / self.d0

    @property
    def coherence_length(self) -> float:
        """Gaussian 1/e^(1/2) length ``l`` of ``|Gamma| ~ exp(-d^2 / (2 l^2))`` [um].

        Chosen to match the curvature at the origin of the disc source's
        ``2 J1(v)/v`` correlation, giving ``l = 2 wavelength z / (pi d0)``.
        """
        return 2.0 * self.wavelength * self.z_total / (np.pi * self.d0)

    def validate(self, grid: GridSpec) -> None:
        """Reject grids that under-resolve the speckle or alias the source chirp."""
        finest = max(grid.dx, grid.dy)
        if self.speckle_size < MIN_SPECKLE_PIXELS * finest:
            raise SamplingError(
                f"speckle size {self.speckle_size:.3g} um spans fewer than {MIN_SPECKLE_PIXELS:g} "
                f"pixels of pitch {finest:.3g} um; reduce the pitch"
            )
        if self.mode == "physical":
            zc = max(critical_distance(grid, self.wavelength))
            if self.z0 < zc:
                raise SamplingError(
                    f"source distance z0={self.z0:g} um is below the critical distance {zc:g} um, "
                    f"so the pinhole-plane Fresnel phase would alias; reduce n or the pitch"
                )


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def frame_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Seed of frame ``index`` in the stream rooted at ``base_seed``.

    Equal to ``SeedSequence(base_seed).spawn(...)[index]``, so any shard of
    the stream can be regenerated independently.
    """
    return np.random.SeedSequence(base_seed, spawn_key=(index,))


def _circular_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def needs_relay(source: SourceSpec, grid: GridSpec) -> bool:
    """True if the pinhole clips rays from the source disc to the window.

    A window point at radius ``r`` sees the whole source when
    ``(r z0 + d0/2 z_pn) / z_total <= pinhole_d / 2``; the test uses the
    window corners. Otherwise the pinhole shapes the field and is modelled.
    """
    r = 0.5 * np.hypot(grid.n_x * grid.dx, grid.n_y * grid.dy)
    reach = (r * source.z0 + 0.5 * source.d0 * source.z_pinhole_to_near) / source.z_total
    return reach > 0.5 * source.pinhole_d


def relay_grid(source: SourceSpec, grid: GridSpec) -> GridSpec:
    """Window for the pinhole-to-near relay: the grid, widened where needed.

    The clipped beam spreads to ``pinhole_d z_total / z0 + d0 z_pn / z0``;
    the relay is periodic, so the window must hold all of it (and the
    pinhole) or light would wrap around.
    """
    zp = source.z_pinhole_to_near
    beam = source.pinhole_d * source.z_total / source.z0 + source.d0 * zp / source.z0
    need = 1.1 * max(beam, source.pinhole_d) + 8.0 * np.sqrt(source.wavelength * zp)
    n_x = max(grid.n_x, scipy.fft.next_fast_len(int(np.ceil(need / grid.dx))))
    n_y = max(grid.n_y, scipy.fft.next_fast_len(int(np.ceil(need / grid.dy))))
    return GridSpec(n_x, n_y, grid.dx, None if grid.dy == grid.dx else grid.dy)


@lru_cache(maxsize=16)
def _physical_plan(source: SourceSpec, grid: GridSpec):
    relay = needs_relay(source, grid)
    # without clipping the source is carried to the near field in one step;
    # otherwise stop at the diaphragm and relay on a widened window
    work = relay_grid(source, grid) if relay else grid
    lz = source.wavelength * (source.z0 if relay else source.z_total)
    src_grid = GridSpec(work.n_x, work.n_y, lz / (work.n_x * work.dx), lz / (work.n_y * work.dy))
    disc = aperture_mask(src_grid, "circle", source.d0) > 0
    n_disc = int(disc.sum())
    if n_disc < 100:
        raise SamplingError(f"source disc covers only {n_disc} source samples; enlarge the grid")
    if relay and max(critical_distance(work, source.wavelength)) > source.z0:
        raise SamplingError(
            f"widened relay window {work.shape} aliases the source-to-pinhole step at z0={source.z0:g} um; "
            f"increase the pitch or z0"
        )
    chirp = np.exp(1j * np.pi * work.r2() / lz)
    pinhole = aperture_mask(work, "circle", source.pinhole_d) if relay else 1.0
    scale = np.sqrt(source.mean_intensity * work.size / n_disc)
    (cy, cx), (oy, ox) = work.center_index(), grid.center_index()
    crop = (slice(cy - oy, cy - oy + grid.n_y), slice(cx - ox, cx - ox + grid.n_x))
    return np.flatnonzero(disc.ravel()), scale * chirp * pinhole, relay, work, crop


def periodic_gaussian(lag: np.ndarray, period: float, length: float) -> np.ndarray:
    """Gaussian summed over periodic images, ``sum_k exp(-(lag + k period)^2 / (2 length^2))``.

    Normalized to 1 at zero lag. Unlike a minimum-image truncation it has a
    non-negative spectrum, so it is a valid stationary correlation on the
    periodic window.
    """
    k = np.arange(-3, 4)
    lag = np.asarray(lag, dtype=float)[..., None]
    total = np.exp(-((lag + k * period) ** 2) / (2.0 * length**2)).sum(axis=-1)
    return total / np.exp(-((k * period) ** 2) / (2.0 * length**2)).sum()


def gaussian_profile(grid: GridSpec, length: float, peak: float = 1.0) -> np.ndarray:
    """Periodic Gaussian ``peak * g(dx) g(dy)`` over lags in FFT (uncentered) order.

    Element ``[j, i]`` is the lag ``(i * dx, j * dy)``.
    """
    gx = periodic_gaussian(np.arange(grid.n_x) * grid.dx, grid.n_x * grid.dx, length)
    gy = periodic_gaussian(np.arange(grid.n_y) * grid.dy, grid.n_y * grid.dy, length)
    return peak * gy[:, None] * gx[None, :]


@lru_cache(maxsize=16)
def _spectral_filter(source: SourceSpec, grid: GridSpec) -> np.ndarray:
    c = gaussian_profile(grid, source.coherence_length, source.mean_intensity)
    s = np.fft.fft2(c).real
    return np.sqrt(np.clip(s, 0.0, None))


def sample_frame(source: SourceSpec, grid: GridSpec, seed: SeedLike) -> ComplexField:
    """One independent realization of the near-field speckle field.

    Identical seeds give bit-identical frames.
    """
    source.validate(grid)
    rng = as_generator(seed)
    if source.mode == "spectral":
        w = _circular_gaussian(rng, grid.shape)
        values = np.fft.ifft2(_spectral_filter(source, grid) * w, norm="ortho")
        return ComplexField(grid, values)
    idx, post, relay, work, crop = _physical_plan(source, grid)
    src = np.zeros(work.size, dtype=np.complex128)
    src[idx] = _circular_gaussian(rng, (idx.size,))
    out = ComplexField(work, post * centered_fft2(src.reshape(work.shape)))
    if relay:
        out = fresnel_propagate(out, source.z_pinhole_to_near, source.wavelength, method="transfer", periodic=True)
    return ComplexField(grid, out.values[crop])


@dataclass(frozen=True)
class CorrelationMap:
    """Second-order field correlation ``Gamma(x, x') = <a*(x) a(x')>``.

    ``form == "matrix"``: ``values[j, k]`` pairs flattened pixels ``j`` and
    ``k``. ``form == "profile"``: ``values`` is the lag profile
    ``Gamma(d)`` on the centered grid, lag zero at the center pixel.
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    form: str = "matrix"
    n_frames: int = 0

    def diagonal(self) -> np.ndarray:
        if self.form == "matrix":
            return np.real(np.diag(self.values)).reshape(self.grid.shape)
        raise ValueError("diagonal is only defined for the matrix form")


def ensemble_gamma(
    source: SourceSpec, grid: GridSpec, n_frames: int, seed: int, form: str = "matrix"
) -> CorrelationMap:
    """Ensemble estimate ``(1/n) sum a*(x) a(x')`` over independent frames.

    The matrix form is limited to grids of at most 64x64 pixels. The profile
    form averages over all pixel pairs with a given (periodic) lag and is
    meaningful for stationary fields.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    if form == "matrix":
        if grid.size > 64 * 64:
            raise ConfigurationError(f"full-matrix Gamma limited to 64x64 grids, got {grid.shape}")
        acc = np.zeros((grid.size, grid.size), dtype=np.complex128)
        for i in range(n_frames):
            a = sample_frame(source, grid, frame_seed(seed, i)).values.ravel()
            acc += np.outer(a.conj(), a)
        acc /= n_frames
        acc = 0.5 * (acc + acc.conj().T)
        return CorrelationMap(grid, acc, "matrix", n_frames)
    if form == "profile":
        acc = np.zeros(grid.shape, dtype=np.complex128)
        for i in range(n_frames):
            spec = np.fft.fft2(sample_frame(source, grid, frame_seed(seed, i)).values)
            acc += np.fft.ifft2(np.abs(spec) ** 2)
        acc = np.fft.fftshift(acc) / (n_frames * grid.size)
        return CorrelationMap(grid, acc, "profile", n_frames)
    raise ValueError(f"unknown form {form!r}")
