"""Near- and far-field speckle size against source and pinhole diameter.

The near-field correlation width follows lambda z / D0 and ignores the
pinhole; the far-field width follows lambda F / D. Small grids and the
spectral source keep this fast, so only the D0 trend is physical here;
run the siegert scenarios for the pinhole trend.
"""
from ghostcorr import GridSpec
from ghostcorr.analysis import FWHM_PER_SIGMA, predict_speckle_sizes
from ghostcorr.scenarios import defaults_for, run_scenario, with_overrides
from ghostcorr.speckle_source import SourceSpec

grid = GridSpec(128, 128, 5.0)
print(" D0 [mm]   fitted |Gamma| FWHM [um]   lambda z / D0 [um]")
for d0 in (5_000.0, 7_500.0, 10_000.0, 15_000.0):
    src = SourceSpec(mode="spectral", d0=d0)
    run = with_overrides(defaults_for("siegert-near"), source=src, grid=grid, n_frames=400, max_shift=(12, 12))
    s = run_scenario(run).summary
    # the fit is of |Gamma|^2 on the detector plane: sqrt(2) gives |Gamma|,
    # dividing by m refers it to the object
    fwhm = FWHM_PER_SIGMA * s["sigma"] * 2**0.5 / run.magnification
    predicted, _ = predict_speckle_sizes(src.wavelength, d0, src.z_total, src.pinhole_d, run.focal_length)
    print(f"{d0 / 1000:7.1f}   {fwhm:23.1f}   {predicted:18.1f}")
