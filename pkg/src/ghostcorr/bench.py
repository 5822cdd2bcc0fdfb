"""Two-arm correlation bench: beam splitter, object, arm optics and detectors.

The object arm (arm 1) is fixed: object, then a lens in 2f geometry so the
detector records the far field of the object plane. The reference arm
(arm 2) either images the object plane with magnification ``m``
(``ghost_image``) or Fourier transforms it like arm 1
(``ghost_diffraction``). Switching modes never touches arm 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .field_grid import ComplexField, ConfigurationError, GridSpec, IntensityFrame, intensity
from .optics import MagnifyingImager, OpticalSystem, Transmission, TwoF, aperture_mask
from .speckle_source import SeedLike, SourceSpec, frame_seed, sample_frame

ARM2_MODES = ("ghost_image", "ghost_diffraction")


@dataclass(frozen=True)
class BeamSplitter:
    """Lossless splitter, ``b1 = t a``, ``b2 = r a`` (the vacuum port is dark)."""

    t: complex = 1 / np.sqrt(2)
    r: complex = 1 / np.sqrt(2)

    def __post_init__(self):
        loss = abs(self.t) ** 2 + abs(self.r) ** 2 - 1.0
        if abs(loss) > 1e-12:
            raise ConfigurationError(f"beam splitter must be lossless, |t|^2+|r|^2-1 = {loss:.3g}")

    @property
    def tr2(self) -> float:
        return abs(self.t * self.r) ** 2


def split(field: ComplexField, bs: BeamSplitter) -> tuple[ComplexField, ComplexField]:
    return ComplexField(field.grid, bs.t * field.values), ComplexField(field.grid, bs.r * field.values)


# ------------------------------------------------------------------ objects


def _box_coverage(x: np.ndarray, pitch: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of each pixel ``[x - p/2, x + p/2]`` overlapping ``[lo, hi]``."""
    left = np.maximum(x - pitch / 2, lo)
    right = np.minimum(x + pitch / 2, hi)
    return np.clip(right - left, 0.0, None) / pitch


@dataclass(frozen=True, eq=False)
class ObjectMask:
    """Complex transmission ``T`` on a grid, ``|T| <= 1``.

    Builders rasterize edges by area coverage, so a pixel straddling an edge
    transmits the covered fraction.
    """

    grid: GridSpec
    transmission: np.ndarray = field(repr=False)
    kind: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.transmission, dtype=np.complex128)
        if t.shape != self.grid.shape:
            raise ValueError(f"mask shape {t.shape} does not match grid {self.grid.shape}")
        if (np.abs(t) > 1 + 1e-12).any():
            raise ValueError("|T| must not exceed 1")
        object.__setattr__(self, "transmission", t)

    @classmethod
    def uniform(cls, grid: GridSpec) -> "ObjectMask":
        return cls(grid, np.ones(grid.shape), "uniform")

    @classmethod
    def single_slit(cls, grid: GridSpec, width: float = 690.0) -> "ObjectMask":
        row = _box_coverage(grid.x, grid.dx, -width / 2, width / 2)
        return cls(grid, np.broadcast_to(row, grid.shape), "single_slit", (width,))

    @classmethod
    def needle_in_slit(cls, grid: GridSpec, needle_d: float = 160.0, slit_w: float = 690.0) -> "ObjectMask":
        """Opaque needle of diameter ``needle_d`` centered in a slit ``slit_w`` wide.

        Both are uniform along y.
        """
        if needle_d >= slit_w:
            raise ConfigurationError("needle must be narrower than the slit")
        x = grid.x
        row = _box_coverage(x, grid.dx, -slit_w / 2, slit_w / 2) - _box_coverage(x, grid.dx, -needle_d / 2, needle_d / 2)
        return cls(grid, np.broadcast_to(row, grid.shape), "needle_in_slit", (needle_d, slit_w))

    @classmethod
    def double_slit(cls, grid: GridSpec, width: float, separation: float) -> "ObjectMask":
        if separation <= width:
            raise ConfigurationError("slit separation must exceed the slit width")
        x = grid.x
        row = _box_coverage(x, grid.dx, separation / 2 - width / 2, separation / 2 + width / 2)
        row = row + _box_coverage(x, grid.dx, -separation / 2 - width / 2, -separation / 2 + width / 2)
        return cls(grid, np.broadcast_to(row, grid.shape), "double_slit", (width, separation))

    @classmethod
    def aperture(cls, grid: GridSpec, diameter: float) -> "ObjectMask":
        """Hard circular aperture (pinhole) centered on the grid."""
        return cls(grid, aperture_mask(grid, "circle", diameter), "aperture", (diameter,))

    @classmethod
    def from_pgm(cls, path, grid: GridSpec) -> "ObjectMask":
        """Grayscale raster mapped linearly to ``|T|`` in [0, 1], zero phase."""
        from .io import read_pgm

        img, maxval = read_pgm(path)
        if img.shape != grid.shape:
            raise ConfigurationError(f"mask image {img.shape} does not match grid {grid.shape}")
        # image rows run top to bottom, grid rows run along +y
        return cls(grid, img[::-1].astype(float) / maxval, "raster", (str(path),))


def apply_object(field: ComplexField, mask: ObjectMask) -> ComplexField:
    if field.grid != mask.grid:
        raise ValueError(f"object grid {mask.grid} does not match field grid {field.grid}")
    return ComplexField(field.grid, field.values * mask.transmission)


# ----------------------------------------------------------------- detector


@dataclass(frozen=True)
class Detector:
    """CCD model: pixel binning and optional Poisson photocounting.

    With ``poisson`` the frame is ``Poisson(I * photons_per_unit) /
    photons_per_unit``. ``bucket_threshold`` selects arm-1 pixels whose
    calibrated mean exceeds that fraction of the peak mean.
    """

    binning: int = 1
    poisson: bool = False
    photons_per_unit: float = 1000.0
    bucket_threshold: float = 0.01

    def __post_init__(self):
        if self.binning < 1:
            raise ConfigurationError("detector binning must be >= 1")
        if self.poisson and not self.photons_per_unit > 0:
            raise ConfigurationError("photons_per_unit must be > 0")

    def detect(self, field: ComplexField, rng: Optional[np.random.Generator]) -> IntensityFrame:
        frame = intensity(field)
        values, grid = frame.values, frame.grid
        b = self.binning
        if b > 1:
            if grid.n_x % b or grid.n_y % b:
                raise ConfigurationError(f"binning {b} does not divide grid {grid.shape}")
            values = values.reshape(grid.n_y // b, b, grid.n_x // b, b).sum(axis=(1, 3))
            grid = GridSpec(grid.n_x // b, grid.n_y // b, grid.dx * b, grid.dy * b if grid.pitch_y else None)
        if self.poisson:
            values = rng.poisson(values * self.photons_per_unit) / self.photons_per_unit
        return IntensityFrame(grid, values)


# ------------------------------------------------------------- experiment


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything needed to produce one shot.

    ``object_arm`` moves the object into the reference arm (2) while leaving
    the optics untouched, which is used for the exchange-symmetry check.
    """

    source: SourceSpec
    grid: GridSpec
    object: ObjectMask
    arm2_mode: str = "ghost_diffraction"
    bs: BeamSplitter = BeamSplitter()
    focal_length: float = 80_000.0
    magnification: float = 1.2
    two_f_pad: int = 1
    detector: Detector = Detector()
    object_arm: int = 1

    def __post_init__(self):
        if self.arm2_mode not in ARM2_MODES:
            raise ConfigurationError(f"arm2_mode must be one of {ARM2_MODES}, got {self.arm2_mode!r}")
        if self.object.grid != self.grid:
            raise ConfigurationError("object mask grid differs from the simulation grid")
        if self.object_arm not in (1, 2):
            raise ConfigurationError("object_arm must be 1 or 2")
        self.source.validate(self.grid)

    def with_mode(self, arm2_mode: str) -> "ExperimentConfig":
        return replace(self, arm2_mode=arm2_mode)

    @cached_property
    def arm1(self) -> OpticalSystem:
        mask = [Transmission(self.grid, self.object.transmission)] if self.object_arm == 1 else []
        return OpticalSystem(mask + [TwoF(self.focal_length, self.two_f_pad)])

    @cached_property
    def arm2(self) -> OpticalSystem:
        mask = [Transmission(self.grid, self.object.transmission)] if self.object_arm == 2 else []
        if self.arm2_mode == "ghost_image":
            return OpticalSystem(mask + [MagnifyingImager(self.magnification)])
        return OpticalSystem(mask + [TwoF(self.focal_length, self.two_f_pad)])


@dataclass(frozen=True)
class ShotRecord:
    frame1: IntensityFrame
    frame2: IntensityFrame
    seed: object = None


def _seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _child(ss: np.random.SeedSequence, k: int) -> np.random.SeedSequence:
    # pure function of ss, unlike ss.spawn() which advances its counter
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,))


def run_shot(config: ExperimentConfig, seed: SeedLike) -> ShotRecord:
    """Simulate one acquisition; bit-reproducible for a given seed."""
    ss = _seed_sequence(seed)
    a = sample_frame(config.source, config.grid, _child(ss, 0))
    return _detect_pair(config, a, ss)


def run_coherent(config: ExperimentConfig, object_arm: Optional[int] = None) -> ShotRecord:
    """Replace the speckle source by a uniform plane wave of the source's mean intensity.

    ``object_arm=2`` places the object in the reference arm, as done when the
    conjugate plane was located with laser light.
    """
    if object_arm is not None and object_arm != config.object_arm:
        config = replace(config, object_arm=object_arm)
    a = ComplexField.plane_wave(config.grid, np.sqrt(config.source.mean_intensity))
    return _detect_pair(config, a, np.random.SeedSequence(0))


def _detect_pair(config: ExperimentConfig, a: ComplexField, ss: np.random.SeedSequence) -> ShotRecord:
    b1, b2 = split(a, config.bs)
    lam = config.source.wavelength
    rng = np.random.default_rng(_child(ss, 1)) if config.detector.poisson else None
    f1 = config.detector.detect(config.arm1.apply(b1, lam), rng)
    f2 = config.detector.detect(config.arm2.apply(b2, lam), rng)
    return ShotRecord(f1, f2, ss)


def shot_stream(config: ExperimentConfig, base_seed: int, start: int, stop: int):
    """Shots ``start .. stop-1`` of the seed stream rooted at ``base_seed``."""
    for i in range(start, stop):
        yield run_shot(config, frame_seed(base_seed, i))


# ------------------------------------------------------------------ bucket


def bucket(frame: Union[IntensityFrame, np.ndarray], region: np.ndarray) -> float:
    """Sum of the frame over a boolean pixel region."""
    values = frame.values if isinstance(frame, IntensityFrame) else np.asarray(frame)
    region = np.asarray(region, dtype=bool)
    if region.shape != values.shape[-2:]:
        raise ValueError(f"region shape {region.shape} does not match frame {values.shape[-2:]}")
    if not region.any():
        raise ValueError("bucket region is empty")
    return values[..., region].sum(axis=-1)


@dataclass(frozen=True)
class Calibration:
    """Noise-free ensemble means used for bucket selection and accumulator shifts."""

    mean1: np.ndarray
    mean2: np.ndarray
    n_frames: int

    def bucket_region(self, threshold: float = 0.01) -> np.ndarray:
        return self.mean1 > threshold * self.mean1.max()


CALIBRATION_STREAM = 0x9E3779B9


def calibrate(config: ExperimentConfig, n_frames: int = 32, seed: int = 0) -> Calibration:
    """Mean frames over a short noise-free ensemble drawn from a separate seed stream."""
    quiet = replace(config, detector=replace(config.detector, poisson=False))
    m1 = m2 = 0.0
    for shot in shot_stream(quiet, seed + CALIBRATION_STREAM, 0, n_frames):
        m1 = m1 + shot.frame1.values
        m2 = m2 + shot.frame2.values
    return Calibration(m1 / n_frames, m2 / n_frames, n_frames)
