"""Deterministic reference values for the Monte Carlo pipeline.

:func:`g_quadrature` evaluates the two-arm correlation kernel

    G(x1, x2) = |tr|^2 |sum_{x1', x2'} h1*(x1, x1') h2(x2, x2') Gamma(x1', x2')|^2

by dense matrix products, with ``Gamma(x, x') = <a*(x) a(x')>`` prescribed
analytically. :func:`analytic_diffraction` gives closed-form far-field
patterns of the slit masks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .field_grid import ConfigurationError, GridSpec
from .speckle_source import periodic_gaussian

MAX_PIXELS = 64 * 64


def gaussian_gamma_matrix(grid: GridSpec, length: float, peak: float = 1.0) -> np.ndarray:
    """Dense stationary Gaussian correlation on the periodic window.

    ``Gamma[j, k] = peak * g(x_k - x_j) g(y_k - y_j)`` over flattened pixels,
    where ``g`` is the Gaussian of width ``length`` summed over periodic
    images; this is the correlation the spectral source reproduces.
    """
    if grid.size > MAX_PIXELS:
        raise ConfigurationError(f"dense Gamma limited to 64x64 grids, got {grid.shape}")
    iy, ix = np.divmod(np.arange(grid.size), grid.n_x)
    gx = periodic_gaussian((ix[None, :] - ix[:, None]) * grid.dx, grid.n_x * grid.dx, length)
    gy = periodic_gaussian((iy[None, :] - iy[:, None]) * grid.dy, grid.n_y * grid.dy, length)
    return peak * gx * gy


@dataclass(frozen=True, eq=False)
class OracleProblem:
    """Inputs of the correlation kernel: ``gamma`` (N x N), ``h1`` (M1 x N), ``h2`` (M2 x N)."""

    gamma: np.ndarray = field(repr=False)
    h1: np.ndarray = field(repr=False)
    h2: np.ndarray = field(repr=False)
    tr2: float = 0.25

    def __post_init__(self):
        n = self.gamma.shape[0]
        if self.gamma.shape != (n, n) or self.h1.shape[1] != n or self.h2.shape[1] != n:
            raise ValueError(
                f"dimension mismatch: gamma {self.gamma.shape}, h1 {self.h1.shape}, h2 {self.h2.shape}"
            )
        if n > MAX_PIXELS or self.h1.shape[0] > MAX_PIXELS or self.h2.shape[0] > MAX_PIXELS:
            raise ConfigurationError("oracle limited to 64x64 grids")
        if not np.allclose(self.gamma, self.gamma.conj().T, rtol=0, atol=1e-12 * np.abs(self.gamma).max()):
            raise ValueError("gamma must be Hermitian")


def g_quadrature(problem: OracleProblem) -> np.ndarray:
    """Dense ``G[x1, x2]`` of shape (M1, M2)."""
    amp = problem.h1.conj() @ problem.gamma @ problem.h2.T
    return problem.tr2 * (amp.real**2 + amp.imag**2)


def _sinc(u):
    # sin(u) / u
    return np.sinc(np.asarray(u) / np.pi)


def analytic_diffraction(
    kind: str, x, wavelength: float, focal_length: float, slit_w: float = 690.0, needle_d: float = 160.0
) -> np.ndarray:
    """Far-field intensity ``|T~(q)|^2`` at focal-plane positions ``x`` [um].

    ``q = 2 pi x / (wavelength F)``. The single slit gives
    ``(w sinc(q w / 2))^2``; the needle in a slit subtracts the needle's
    transform, ``(w sinc(q w / 2) - d sinc(q d / 2))^2``. Not normalized
    (the value at ``x = 0`` is ``(w - d)^2``).
    """
    q = 2 * np.pi * np.asarray(x, dtype=float) / (wavelength * focal_length)
    if kind == "single_slit":
        amp = slit_w * _sinc(q * slit_w / 2)
    elif kind == "needle_in_slit":
        amp = slit_w * _sinc(q * slit_w / 2) - needle_d * _sinc(q * needle_d / 2)
    else:
        raise ValueError(f"no closed form for mask kind {kind!r}")
    return amp**2


def first_zero(wavelength: float, focal_length: float, slit_w: float) -> float:
    """Position of the first single-slit zero, ``lambda F / w``."""
    return wavelength * focal_length / slit_w


def z_scores(mc: np.ndarray, stderr: np.ndarray, reference: np.ndarray, floor: float = 1e-9) -> np.ndarray:
    """``(mc - reference) / stderr`` per coordinate.

    The standard error is floored at ``floor * max|reference|`` so that
    coordinates where both estimates vanish compare at rounding level
    instead of dividing by a vanishing error.
    """
    tol = floor * np.max(np.abs(reference))
    return (mc - reference) / np.sqrt(stderr**2 + tol**2)
