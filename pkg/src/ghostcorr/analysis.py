"""Gaussian peak fits, coherence lengths and the resolution product."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .io import read_kv, write_kv

FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))
MAX_ITERATIONS = 200
PARAM_TOL = 1e-10


@dataclass(frozen=True)
class GaussianFitResult:
    amplitude: float
    center: float
    sigma: float
    baseline: float
    residual_norm: float
    converged: bool
    iterations: int
    sigma_err: float = float("nan")
    curve: str = ""

    def evaluate(self, x):
        return gaussian(np.asarray(x, float), self.amplitude, self.center, self.sigma, self.baseline)


def gaussian(x, amplitude, center, sigma, baseline):
    return baseline + amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def initial_guess(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Deterministic start: outer-20% median baseline, argmax center, HWHM width."""
    n = len(x)
    k = max(1, int(round(0.1 * n)))
    baseline = float(np.median(np.concatenate([y[:k], y[-k:]])))
    i = int(np.argmax(y))
    amplitude = float(y[i] - baseline)
    half = baseline + amplitude / 2
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < n - 1 and y[hi] > half:
        hi += 1
    hwhm = 0.5 * (x[hi] - x[lo])
    step = np.min(np.abs(np.diff(x)))
    sigma = max(hwhm, 0.5 * step) / (FWHM_PER_SIGMA / 2)
    return np.array([amplitude, float(x[i]), sigma, baseline])


def fit_gaussian_peak(
    x: Sequence[float], y: Sequence[float], init: Optional[Sequence[float]] = None, curve: str = ""
) -> GaussianFitResult:
    """Least-squares fit of ``baseline + amplitude * exp(-(x - c)^2 / (2 sigma^2))``.

    Levenberg-Marquardt, at most 200 iterations, parameter tolerance 1e-10.
    Returns the best parameters found with ``converged=False`` if the cap is
    hit.

    Raises
    ------
    ValueError
        Fewer than 6 samples, or a flat profile with nothing to fit.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 6 or x.shape != y.shape:
        raise ValueError("need at least 6 samples of equal length")
    if np.ptp(y) <= 1e-14 * max(np.abs(y).max(), 1e-300):
        raise ValueError("degenerate flat profile")
    p0 = np.asarray(init, dtype=float) if init is not None else initial_guess(x, y)
    # work in units of the sample spacing so the tolerances are scale free
    x0, dx = float(x.mean()), float(np.ptp(x) / (x.size - 1))
    yscale = float(np.max(np.abs(y)))
    u = (x - x0) / dx
    q0 = np.array([p0[0] / yscale, (p0[1] - x0) / dx, abs(p0[2]) / dx, p0[3] / yscale])

    def resid(q):
        return gaussian(u, *q) - y / yscale

    def jac(q):
        a, c, s, _ = q
        e = np.exp(-0.5 * ((u - c) / s) ** 2)
        return np.stack([e, a * e * (u - c) / s**2, a * e * (u - c) ** 2 / s**3, np.ones_like(u)], axis=1)

    sol = least_squares(
        resid, q0, jac=jac, method="lm", xtol=PARAM_TOL, ftol=PARAM_TOL, gtol=PARAM_TOL,
        max_nfev=MAX_ITERATIONS,
    )
    a, c, s, b = sol.x
    # status 0 means the evaluation cap was reached
    converged = bool(sol.status > 0 and s != 0)
    iterations = int(sol.nfev)
    sigma_err = float("nan")
    dof = x.size - 4
    if dof > 0:
        jtj = sol.jac.T @ sol.jac
        try:
            cov = np.linalg.inv(jtj) * (2 * sol.cost / dof)
            sigma_err = float(np.sqrt(abs(cov[2, 2]))) * dx
        except np.linalg.LinAlgError:
            pass
    return GaussianFitResult(
        amplitude=float(a * yscale),
        center=float(c * dx + x0),
        sigma=float(abs(s) * dx),
        baseline=float(b * yscale),
        residual_norm=float(np.linalg.norm(sol.fun) * yscale),
        converged=converged,
        iterations=iterations,
        sigma_err=sigma_err,
        curve=curve,
    )


@dataclass(frozen=True)
class CoherenceReport:
    """Coherence lengths and resolution product from the two fitted peaks.

    ``delta_x_n = 2 m sigma_n`` (near field, referred back to the object
    plane), ``delta_x_f = 2 sigma_f``, ``delta_q = 2 pi delta_x_f / (lambda F)``.
    """

    sigma_n: float
    sigma_f: float
    m: float
    wavelength: float
    focal_length: float
    delta_x_n: float
    delta_x_f: float
    delta_q: float
    product: float
    product_err: float
    fitted_curve: str = "normalized intensity autocorrelation (|Gamma|^2 peak)"

    def to_file(self, path) -> None:
        write_kv(path, {k: repr(v) if isinstance(v, float) else v for k, v in asdict(self).items()})

    @classmethod
    def from_file(cls, path) -> "CoherenceReport":
        kv = read_kv(path)
        return cls(**{k: (v if k == "fitted_curve" else float(v)) for k, v in kv.items()})


def coherence_report(
    near_fit: GaussianFitResult, far_fit: GaussianFitResult, m: float, wavelength: float, focal_length: float
) -> CoherenceReport:
    if not (near_fit.converged and far_fit.converged):
        raise ValueError("both Gaussian fits must have converged")
    dxn = 2.0 * m * near_fit.sigma
    dxf = 2.0 * far_fit.sigma
    dq = 2.0 * np.pi * dxf / (wavelength * focal_length)
    rel = np.hypot(
        np.nan_to_num(near_fit.sigma_err / near_fit.sigma), np.nan_to_num(far_fit.sigma_err / far_fit.sigma)
    )
    product = dxn * dq
    return CoherenceReport(
        sigma_n=near_fit.sigma, sigma_f=far_fit.sigma, m=m, wavelength=wavelength, focal_length=focal_length,
        delta_x_n=dxn, delta_x_f=dxf, delta_q=dq, product=product, product_err=float(product * rel),
    )


def section_average(image: np.ndarray, axis: int = 0, rows: Optional[int] = None) -> np.ndarray:
    """Mean of the central ``rows`` lines taken along ``axis``.

    ``axis=0`` averages rows (horizontal sections) into a profile over x.
    """
    image = np.asarray(image)
    extent = image.shape[axis]
    rows = extent if rows is None else rows
    if not 1 <= rows <= extent:
        raise ValueError(f"rows={rows} outside 1..{extent}")
    start = (extent - rows) // 2
    return np.take(image, np.arange(start, start + rows), axis=axis).mean(axis=axis)


def predict_speckle_sizes(
    wavelength: float, d0: float, z: float, pinhole_d: float, focal_length: float
) -> tuple[float, float]:
    """Order-of-magnitude speckle sizes ``lambda z / D0`` and ``lambda F / D``.

    Unit proportionality constants; the exact factor depends on aperture shape.
    """
    return wavelength * z / d0, wavelength * focal_length / pinhole_d


def normalized_cross_correlation(a, b) -> float:
    """Pearson correlation of two equally sampled profiles."""
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    a = a - a.mean()
    b = b - b.mean()
    return float(a @ b / np.sqrt((a @ a) * (b @ b)))


def normalized_rms(measured, model) -> float:
    """RMS residual after the best affine rescaling of ``measured`` onto ``model``,
    divided by the peak-to-peak range of ``model``."""
    measured = np.asarray(measured, float).ravel()
    model = np.asarray(model, float).ravel()
    design = np.stack([measured, np.ones_like(measured)], axis=1)
    coef, *_ = np.linalg.lstsq(design, model, rcond=None)
    resid = design @ coef - model
    return float(np.sqrt(np.mean(resid**2)) / np.ptp(model))


def dip_contrast(profile, x, needle_halfwidth: float, slit_halfwidth: float) -> float:
    """Needle dip depth relative to the slit plateau, ``1 - center / plateau``.

    The plateau is the mean over the open parts of the slit.
    """
    profile = np.asarray(profile, float)
    x = np.asarray(x, float)
    center = profile[np.abs(x) <= 0.25 * needle_halfwidth].mean()
    open_ = (np.abs(x) >= needle_halfwidth + 0.25 * (slit_halfwidth - needle_halfwidth)) & (
        np.abs(x) <= slit_halfwidth - 0.25 * (slit_halfwidth - needle_halfwidth)
    )
    plateau = profile[open_].mean()
    return float(1.0 - center / plateau)
