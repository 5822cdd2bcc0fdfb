"""Monte Carlo G against the dense quadrature on a 32x32 grid.

A matched correlation width passes the 3-SE test; doubling the width used
by the quadrature makes it fail.
"""
from ghostcorr.scenarios import ORACLE_DEFAULTS, oracle_check, with_overrides

for scale in (1.0, 2.0):
    run = with_overrides(ORACLE_DEFAULTS, n_frames=3_000, gamma_scale=scale)
    s = oracle_check(run).summary
    verdict = "PASS" if s["passed"] else "FAIL"
    print(f"gamma width x{scale:.0f}: {100 * s['fraction_within_3se']:5.1f}% within 3 SE, "
          f"max |z| = {s['max_abs_z']:.1f}  {verdict}")
