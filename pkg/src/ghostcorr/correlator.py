"""Streaming estimators of the intensity-fluctuation correlation.

``G(x1, x2) = <I1(x1) I2(x2)> - <I1(x1)> <I2(x2)>`` is accumulated in one of
four reductions:

``full``
    dense over every pixel pair (small windows only),
``bucket``
    arm 1 summed over a region (bucket detector) against every arm-2 pixel,
``difference``
    averaged over ``x1`` at fixed offset ``d = x2 - x1``,
``auto``
    like ``difference`` but both factors come from the same arm.

All running sums use Neumaier compensated summation. Frames may be
accumulated after subtracting a fixed per-pixel shift (typically a
calibration mean); covariances are shift invariant, and the shift keeps the
raw moments used for standard errors well conditioned.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft

from .bench import ShotRecord, bucket
from .field_grid import GridSpec
from .io import write_csv

MODES = ("full", "bucket", "difference", "auto")
MAX_FULL_PIXELS = 64 * 64


class CompensatedSum:
    """Elementwise Neumaier summation of equally shaped arrays."""

    __slots__ = ("total", "comp")

    def __init__(self, shape=()):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, x) -> None:
        s = self.total
        t = s + x
        big = np.abs(s) >= np.abs(x)
        self.comp += np.where(big, (s - t) + x, (x - t) + s)
        self.total = t

    def merged(self, other: "CompensatedSum") -> "CompensatedSum":
        out = CompensatedSum(self.total.shape)
        out.total = self.total.copy()
        out.comp = self.comp.copy()
        out.add(other.total)
        out.add(other.comp)
        return out

    @property
    def value(self) -> np.ndarray:
        return self.total + self.comp


def linear_xcorr(a: np.ndarray, b: np.ndarray, max_shift: tuple[int, int]) -> np.ndarray:
    """Non-circular ``c[dy, dx] = sum_x a[y, x] * b[y + dy, x + dx]`` over in-grid pairs.

    The output has shape ``(..., 2*my + 1, 2*mx + 1)`` with zero offset at
    the center; leading axes are treated as a batch. With ``my == 0`` only
    rows at equal y are paired.
    """
    mx, my = max_shift
    ny, nx = a.shape[-2:]
    lx = scipy.fft.next_fast_len(nx + mx, real=True)
    if my == 0:
        fa = scipy.fft.rfft(a, n=lx, axis=-1)
        fb = scipy.fft.rfft(b, n=lx, axis=-1)
        r = scipy.fft.irfft(np.einsum("...ij,...ij->...j", fa.conj(), fb), n=lx)
        return np.concatenate([r[..., lx - mx:], r[..., : mx + 1]], axis=-1)[..., None, :]
    ly = scipy.fft.next_fast_len(ny + my, real=False)
    fa = scipy.fft.rfft2(a, s=(ly, lx))
    fb = scipy.fft.rfft2(b, s=(ly, lx))
    r = scipy.fft.irfft2(fa.conj() * fb, s=(ly, lx))
    rows = np.concatenate([np.arange(ly - my, ly), np.arange(my + 1)])
    cols = np.concatenate([np.arange(lx - mx, lx), np.arange(mx + 1)])
    return r[..., rows[:, None], cols[None, :]]


def overlap_counts(shape: tuple[int, int], max_shift: tuple[int, int]) -> np.ndarray:
    """Number of valid ``x1`` for each offset of :func:`linear_xcorr`."""
    mx, my = max_shift
    ny, nx = shape
    cx = nx - np.abs(np.arange(-mx, mx + 1))
    cy = (ny - np.abs(np.arange(-my, my + 1))) if my else np.array([ny])
    return (cy[:, None] * cx[None, :]).astype(float)


@dataclass
class CorrelationResult:
    """Finalized estimate of ``G`` with baseline ``<I1><I2>`` and standard error.

    ``coords`` maps axis names to 1-D coordinate arrays [um] so that
    ``values.shape`` matches their lengths in order.
    """

    mode: str
    values: np.ndarray
    baseline: np.ndarray
    stderr: np.ndarray
    n_frames: int
    coords: dict = field(default_factory=dict)
    mean1: Optional[np.ndarray] = None
    mean2: Optional[np.ndarray] = None
    warning: Optional[str] = None

    @property
    def normalized(self) -> np.ndarray:
        """``<I1 I2> / (<I1><I2>)``, the normalized fourth-order correlation."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.values + self.baseline) / self.baseline

    def columns(self) -> dict:
        names = list(self.coords)
        grids = np.meshgrid(*[self.coords[k] for k in names], indexing="ij")
        cols = {f"{k}_um": g.ravel() for k, g in zip(names, grids)}
        cols.update(value=self.values.ravel(), baseline=self.baseline.ravel(), stderr=self.stderr.ravel())
        return cols

    def to_csv(self, path) -> None:
        write_csv(path, self.columns())


class CorrelationAccumulator:
    """Sufficient statistics for ``G`` in one reduction mode.

    Use the ``full``, ``bucket``, ``difference`` or ``auto`` constructors.
    ``accumulate`` mutates in place and returns ``self``; ``merge`` returns a
    new accumulator equal to accumulating both frame sets.
    """

    def __init__(
        self,
        mode: str,
        grid1: GridSpec,
        grid2: GridSpec,
        *,
        region=None,
        max_shift=(0, 0),
        arm: int = 2,
        window=None,
        shift1=None,
        shift2=None,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.grid1 = grid1
        self.grid2 = grid2
        self.region = None if region is None else np.asarray(region, dtype=bool)
        self.max_shift = tuple(int(s) for s in max_shift)
        self.arm = arm
        self.window = None if window is None else tuple(int(w) for w in window)
        self.n_frames = 0

        if mode == "bucket":
            if self.region is None or self.region.shape != grid1.shape or not self.region.any():
                raise ValueError("bucket mode needs a non-empty region on the arm-1 grid")
        if mode in ("difference", "auto"):
            if mode == "difference" and grid1.shape != grid2.shape:
                raise ValueError("difference mode needs both arms on a common grid")
            shape = self._frame_shape()
            if not (0 <= self.max_shift[0] < shape[1] and 0 <= self.max_shift[1] < shape[0]):
                raise ValueError(f"max_shift {self.max_shift} out of range for grid {shape}")
        if mode == "full" and (self._n1() > MAX_FULL_PIXELS or self._n2() > MAX_FULL_PIXELS):
            raise ValueError("full mode is limited to windows of at most 64x64 pixels")

        self.shift1 = np.zeros(self._x_shape()) if shift1 is None else np.asarray(shift1, float).reshape(self._x_shape())
        self.shift2 = np.zeros(self._y_shape()) if shift2 is None else np.asarray(shift2, float).reshape(self._y_shape())
        self.sums = {name: CompensatedSum(shape) for name, shape in self._sum_shapes().items()}

    # -- constructors -------------------------------------------------

    @classmethod
    def full(cls, grid1, grid2, window=None, shift1=None, shift2=None):
        """Dense ``G`` over all pixel pairs of ``window = (row0, row1, col0, col1)``."""
        return cls("full", grid1, grid2, window=window, shift1=shift1, shift2=shift2)

    @classmethod
    def bucket_mode(cls, grid1, grid2, region, shift_bucket=None, shift2=None):
        return cls("bucket", grid1, grid2, region=region, shift1=shift_bucket, shift2=shift2)

    @classmethod
    def difference(cls, grid, max_shift, shift1=None, shift2=None):
        return cls("difference", grid, grid, max_shift=max_shift, shift1=shift1, shift2=shift2)

    @classmethod
    def auto(cls, grid, max_shift, arm=2, shift=None):
        return cls("auto", grid, grid, max_shift=max_shift, arm=arm, shift1=shift, shift2=shift)

    # -- shapes -------------------------------------------------------

    def _frame_shape(self):
        return (self.grid1 if (self.mode != "auto" or self.arm == 1) else self.grid2).shape

    def _window_shape(self, grid):
        if self.window is None:
            return grid.shape
        r0, r1, c0, c1 = self.window
        return (r1 - r0, c1 - c0)

    def _n1(self):
        return int(np.prod(self._window_shape(self.grid1)))

    def _n2(self):
        return int(np.prod(self._window_shape(self.grid2)))

    def _x_shape(self):
        if self.mode == "full":
            return (self._n1(),)
        if self.mode == "bucket":
            return (1,)
        return self._frame_shape()

    def _y_shape(self):
        if self.mode == "full":
            return (self._n2(),)
        if self.mode == "bucket":
            return (self.grid2.size,)
        return self._frame_shape()

    def _offset_shape(self):
        mx, my = self.max_shift
        return (2 * my + 1, 2 * mx + 1)

    def _sum_shapes(self):
        if self.mode in ("full", "bucket"):
            k, n = self._x_shape()[0], self._y_shape()[0]
            return {
                "x": (k,), "y": (n,), "xx": (k,), "yy": (n,),
                "xy": (k, n), "xxyy": (k, n), "xxy": (k, n), "xyy": (k, n),
            }
        shape = self._frame_shape()
        return {"x": shape, "y": shape, "c": self._offset_shape(), "cc": self._offset_shape()}

    def _compatible(self, other) -> bool:
        same_region = (self.region is None and other.region is None) or (
            self.region is not None and other.region is not None and np.array_equal(self.region, other.region)
        )
        return (
            self.mode == other.mode
            and self.grid1 == other.grid1
            and self.grid2 == other.grid2
            and self.max_shift == other.max_shift
            and self.arm == other.arm
            and self.window == other.window
            and same_region
            and np.array_equal(self.shift1, other.shift1)
            and np.array_equal(self.shift2, other.shift2)
        )

    # -- accumulation -------------------------------------------------

    def _crop(self, frames):
        if self.window is None:
            return frames
        r0, r1, c0, c1 = self.window
        return frames[..., r0:r1, c0:c1]

    def accumulate(self, shot: ShotRecord) -> "CorrelationAccumulator":
        if self.mode == "auto":
            if (shot.frame1 if self.arm == 1 else shot.frame2).grid != self.grid1:
                raise ValueError(f"arm-{self.arm} grid does not match the accumulator configuration")
            return self.accumulate_frames(shot.frame1.values, shot.frame2.values)
        if shot.frame1.grid != self.grid1 or shot.frame2.grid != self.grid2:
            raise ValueError("shot grids do not match the accumulator configuration")
        return self.accumulate_frames(shot.frame1.values, shot.frame2.values)

    def accumulate_frames(self, frames1: np.ndarray, frames2: np.ndarray) -> "CorrelationAccumulator":
        """Add one frame pair ``(ny, nx)`` or a stack ``(batch, ny, nx)``.

        In ``auto`` mode only the frames of the configured arm are read.
        """
        f1 = np.asarray(frames1, dtype=float)
        f2 = np.asarray(frames2, dtype=float)
        if self.mode == "auto":
            f1 = f2 = f1 if self.arm == 1 else f2
        if f1.ndim == 2:
            f1, f2 = f1[None], f2[None]
        if f1.shape[1:] != self.grid1.shape or f2.shape[1:] != self.grid2.shape or len(f1) != len(f2):
            raise ValueError(f"frame shapes {f1.shape}, {f2.shape} do not match accumulator grids")
        if len(f1) == 0:
            return self
        if self.mode in ("full", "bucket"):
            if self.mode == "full":
                x = self._crop(f1).reshape(len(f1), -1)
                y = self._crop(f2).reshape(len(f2), -1)
            else:
                x = bucket(f1, self.region)[:, None]
                y = f2.reshape(len(f2), -1)
            self._add_moments(x - self.shift1, y - self.shift2)
        else:
            self._add_offsets(f1 - self.shift1, f2 - self.shift2)
        self.n_frames += len(f1)
        return self

    def _add_moments(self, x, y):
        s = self.sums
        x2, y2 = x * x, y * y
        s["x"].add(x.sum(0))
        s["y"].add(y.sum(0))
        s["xx"].add(x2.sum(0))
        s["yy"].add(y2.sum(0))
        s["xy"].add(x.T @ y)
        s["xxyy"].add(x2.T @ y2)
        s["xxy"].add(x2.T @ y)
        s["xyy"].add(x.T @ y2)

    def _add_offsets(self, a, b):
        s = self.sums
        c = linear_xcorr(a, b, self.max_shift)
        s["x"].add(a.sum(0))
        s["y"].add(b.sum(0))
        s["c"].add(c.sum(0))
        s["cc"].add((c * c).sum(0))

    def empty_like(self) -> "CorrelationAccumulator":
        """A fresh accumulator with this configuration and no frames."""
        out = CorrelationAccumulator.__new__(CorrelationAccumulator)
        out.__dict__.update(self.__dict__)
        out.sums = {k: CompensatedSum(v.total.shape) for k, v in self.sums.items()}
        out.n_frames = 0
        return out

    def merge(self, other: "CorrelationAccumulator") -> "CorrelationAccumulator":
        if not self._compatible(other):
            raise ValueError("cannot merge accumulators with different mode, grid, region or shift")
        out = CorrelationAccumulator.__new__(CorrelationAccumulator)
        out.__dict__.update(self.__dict__)
        out.sums = {k: v.merged(other.sums[k]) for k, v in self.sums.items()}
        out.n_frames = self.n_frames + other.n_frames
        return out

    # -- finalization -------------------------------------------------

    def finalize(self) -> CorrelationResult:
        """Unbiased (``n - 1``) covariance estimate with per-coordinate standard error.

        A single frame yields ``G = 0`` and a warning flag.
        """
        n = self.n_frames
        if n < 1:
            raise ValueError("cannot finalize an empty accumulator")
        s = {k: v.value for k, v in self.sums.items()}
        m1, m2 = s["x"] / n, s["y"] / n
        if self.mode in ("full", "bucket"):
            g, se, base = self._finalize_moments(s, m1, m2, n)
        else:
            g, se, base = self._finalize_offsets(s, m1, m2, n)
        warning = None
        if n == 1:
            warning = "single frame: covariance undefined, reported as zero"
            warnings.warn(warning, RuntimeWarning, stacklevel=2)
            g = np.zeros_like(g)
            se = np.zeros_like(se)
        return CorrelationResult(
            self.mode, g, base, se, n, self._coords(), mean1=m1 + self.shift1, mean2=m2 + self.shift2, warning=warning
        )

    def _finalize_moments(self, s, m1, m2, n):
        mxy = s["xy"] / n
        a, b = m1[:, None], m2[None, :]
        cov = mxy - a * b
        g = cov * (n / (n - 1)) if n > 1 else cov
        # fourth central moment of the product from raw moments
        m4 = (
            s["xxyy"] / n
            - 2 * b * s["xxy"] / n
            - 2 * a * s["xyy"] / n
            + b**2 * (s["xx"] / n)[:, None]
            + a**2 * (s["yy"] / n)[None, :]
            + 4 * a * b * mxy
            - 3 * a**2 * b**2
        )
        var = np.clip(m4 - cov**2, 0.0, None)
        se = np.sqrt(var / (n - 1)) if n > 1 else np.zeros_like(var)
        base = (a + self.shift1[:, None]) * (b + self.shift2[None, :])
        if self.mode == "bucket":
            shape = self.grid2.shape
            return g.reshape(shape), se.reshape(shape), base.reshape(shape)
        return g, se, base

    def _finalize_offsets(self, s, m1, m2, n):
        counts = overlap_counts(m1.shape, self.max_shift)
        mean_c = s["c"] / n
        cov = (mean_c - linear_xcorr(m1, m2, self.max_shift)) / counts
        g = cov * (n / (n - 1)) if n > 1 else cov
        var = np.clip(s["cc"] / n - mean_c**2, 0.0, None) / counts**2
        se = np.sqrt(var / (n - 1)) if n > 1 else np.zeros_like(var)
        base = linear_xcorr(m1 + self.shift1, m2 + self.shift2, self.max_shift) / counts
        return g, se, base

    def _coords(self) -> dict:
        if self.mode == "bucket":
            return {"y": self.grid2.y, "x": self.grid2.x}
        if self.mode == "full":
            return {"pixel1": np.arange(self._n1(), dtype=float), "pixel2": np.arange(self._n2(), dtype=float)}
        grid = self.grid1 if (self.mode != "auto" or self.arm == 1) else self.grid2
        mx, my = self.max_shift
        return {"dy": np.arange(-my, my + 1) * grid.dy, "dx": np.arange(-mx, mx + 1) * grid.dx}

    def pixel_coords(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        """Physical (x, y) of each flattened full-mode pixel of ``arm``."""
        grid = self.grid1 if arm == 1 else self.grid2
        x, y = grid.x, grid.y
        if self.window is not None:
            r0, r1, c0, c1 = self.window
            x, y = x[c0:c1], y[r0:r1]
        xx, yy = np.meshgrid(x, y)
        return xx.ravel(), yy.ravel()


def accumulate(acc: CorrelationAccumulator, shot: ShotRecord) -> CorrelationAccumulator:
    return acc.accumulate(shot)


def finalize_g(acc: CorrelationAccumulator) -> CorrelationResult:
    if acc.n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    return acc.finalize()


def _require(acc, mode):
    if acc.mode != mode:
        raise ValueError(f"expected a {mode}-mode accumulator, got {acc.mode!r}")


def ghost_image(acc: CorrelationAccumulator) -> CorrelationResult:
    """Bucket-arm covariance with every reference pixel, a 2-D image over ``x2``."""
    _require(acc, "bucket")
    return acc.finalize()


def ghost_diffraction(acc: CorrelationAccumulator) -> CorrelationResult:
    """``G(x1, x1 + d)`` averaged over ``x1``, as a function of ``d = x2 - x1``.

    For ghost diffraction the pattern is ``|T~((x1 - x2) 2 pi / (lambda F))|^2``,
    i.e. mirrored in ``d``; symmetric objects are unaffected.
    """
    _require(acc, "difference")
    return acc.finalize()


@dataclass
class SiegertProfile:
    """Normalized intensity autocorrelation ``<I I'> / (<I><I'>)`` along x.

    ``normalized`` is 2 at zero separation for fully developed speckle and
    relaxes to 1 well beyond the coherence length.
    """

    separation: np.ndarray
    normalized: np.ndarray
    stderr: np.ndarray
    result: CorrelationResult

    def excess_map(self) -> np.ndarray:
        """2-D ``normalized - 1`` over (dy, dx), the measured ``|Gamma|^2`` shape."""
        return self.result.normalized - 1.0


def siegert_autocorrelation(acc: CorrelationAccumulator) -> SiegertProfile:
    _require(acc, "auto")
    res = acc.finalize()
    row = acc.max_shift[1]
    norm = res.normalized
    return SiegertProfile(res.coords["dx"], norm[row], res.stderr[row] / res.baseline[row], res)


@dataclass
class ConditionalProfile:
    """Conditional detection profile split into its two terms.

    ``broad`` is ``<I2(x2)>``; ``narrow`` is ``G(x1, x2) / <I1(x1)>``, the
    correlation peak; ``total`` is their sum, ``<I1 I2> / <I1>``.
    """

    x: np.ndarray
    y: np.ndarray
    broad: np.ndarray
    narrow: np.ndarray
    index1: int

    @property
    def total(self) -> np.ndarray:
        return self.broad + self.narrow


def conditional_probability(acc: CorrelationAccumulator, x1) -> ConditionalProfile:
    """Profile over ``x2`` given detection at arm-1 pixel ``x1``.

    ``x1`` is a flattened full-mode pixel index or a physical ``(x, y)`` pair,
    which selects the nearest pixel.
    """
    _require(acc, "full")
    res = acc.finalize()
    if np.ndim(x1) == 0:
        j = int(x1)
    else:
        px, py = acc.pixel_coords(1)
        j = int(np.argmin((px - x1[0]) ** 2 + (py - x1[1]) ** 2))
    mean1 = res.mean1
    if not mean1[j] > 1e-12 * max(np.abs(mean1).max(), 1e-300):
        raise ValueError(f"<I1> vanishes at pixel {j}; conditional probability undefined")
    x2, y2 = acc.pixel_coords(2)
    return ConditionalProfile(x2, y2, res.mean2, res.values[j] / mean1[j], j)
