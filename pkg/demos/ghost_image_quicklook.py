"""Ghost image of a needle in a slit from a few hundred frames.

Runs the bucket-correlation scenario on a reduced grid with the spectral
source and prints the section profile next to the coherent image.

    python demos/ghost_image_quicklook.py [n_frames]
"""
import sys

import numpy as np

from ghostcorr import GridSpec
from ghostcorr.scenarios import ObjectSpec, defaults_for, run_scenario, with_overrides
from ghostcorr.speckle_source import SourceSpec

n_frames = int(sys.argv[1]) if len(sys.argv) > 1 else 800

run = with_overrides(
    defaults_for("ghost-image"),
    n_frames=n_frames,
    source=SourceSpec(mode="spectral"),
    grid=GridSpec(128, 64, 5.0),
    object=ObjectSpec("needle_in_slit", needle_d=60.0, slit_w=240.0),
    max_shift=(8, 8),
)
res = run_scenario(run)
prof = res.profiles["ghost_image_section"]

# normalise both traces to their own maximum for a side-by-side look
ghost = prof["ghost"] / prof["ghost"].max()
coherent = prof["coherent"] / prof["coherent"].max()
for x, g, c in zip(prof["x_um"][::4], ghost[::4], coherent[::4]):
    print(f"{x:8.1f} um  {'#' * int(40 * max(g, 0)):40s}  {'*' * int(20 * c)}")

s = res.summary
print(f"\nNRMS vs blurred coherent image: {s['nrms']:.3f}")
print(f"needle dip ratio:               {s['dip_ratio']:.3f}")
print(f"slit width ghost / coherent:    {s['ghost_slit_width']:.1f} / {s['coherent_slit_width']:.1f} um")
