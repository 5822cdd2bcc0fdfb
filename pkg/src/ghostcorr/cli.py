"""Command line front end: ``ghostcorr simulate | analyze | oracle-check | list-scenarios``.

Exit status: 0 success, 1 usage or configuration error, 2 numerical failure
(aliasing, under-resolution, unconverged fit), 3 acceptance failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .analysis import GaussianFitResult, coherence_report, fit_gaussian_peak
from .field_grid import ConfigurationError, SamplingError
from .io import read_csv, sha256, write_csv, write_kv, write_pgm
from .scenarios import SCENARIOS, ScenarioResult, evaluate_checks, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3
OUTPUT_ENV = "GHOSTCORR_OUTPUT_DIR"


class NumericalFailure(RuntimeError):
    """A fit did not converge; maps to exit status 2."""


def default_output_dir(scenario: str) -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "ghostcorr-output")) / scenario


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_outputs(result: ScenarioResult, run, out: Path) -> Path:
    """Write CSV profiles, PGM images, summary, resolved config and the manifest.

    Returns the manifest path. Files are written in sorted name order and
    contain no timestamps, so identical inputs give identical bytes.
    """
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfgmod.to_dict(run)
    files = []
    for name in sorted(result.profiles):
        write_csv(out / f"{name}.csv", result.profiles[name])
        files.append(f"{name}.csv")
    bounds = {}
    for name in sorted(result.images):
        lo, hi = write_pgm(out / f"{name}.pgm", result.images[name])
        bounds[name] = (lo, hi)
        files.append(f"{name}.pgm")
    write_kv(out / "summary.txt", {k: _fmt(v) for k, v in result.summary.items()})
    files.append("summary.txt")
    (out / "config.toml").write_text(cfgmod.dumps(resolved))
    files.append("config.toml")

    manifest = {
        "scenario": run.scenario,
        "version": __version__,
        "seed": run.seed,
        "n_frames": run.n_frames,
        "chunk_frames": run.chunk,
        "output_dir": str(out),
    }
    manifest.update({f"config.{k}": _fmt(v) for k, v in cfgmod.flatten(resolved).items()})
    for name, (lo, hi) in bounds.items():
        manifest[f"image.{name}.min"] = repr(lo)
        manifest[f"image.{name}.max"] = repr(hi)
    for f in files:
        manifest[f"sha256.{f}"] = sha256(out / f)
    path = out / "manifest.txt"
    write_kv(path, manifest)
    return path


def _resolve(args, scenario=None):
    raw = cfgmod.load(args.config) if getattr(args, "config", None) else {}
    if scenario is not None:
        raw["scenario"] = scenario
    elif args.scenario:
        raw["scenario"] = args.scenario
    raw = cfgmod.apply_overrides(raw, args.set or [])
    if args.frames is not None:
        raw["n_frames"] = args.frames
    if args.seed is not None:
        raw["seed"] = args.seed
    if "n_frames" in raw and isinstance(raw["n_frames"], int) and raw["n_frames"] < 1:
        raise cfgmod.SchemaError("n_frames", f"must be >= 1, got {raw['n_frames']}")
    return cfgmod.from_dict(raw)


def _report(result: ScenarioResult, run, check: bool) -> int:
    for key, value in result.summary.items():
        print(f"{key} = {_fmt(value)}")
    status = EXIT_OK
    if result.summary.get("fit_converged") is False:
        print("error: Gaussian fit did not converge", file=sys.stderr)
        status = EXIT_NUMERICAL
    if check:
        failed = False
        for label, ok in evaluate_checks(run.scenario, result.summary):
            print(f"{'PASS' if ok else 'FAIL'} {run.scenario}: {label}")
            failed |= not ok
        if failed and status == EXIT_OK:
            status = EXIT_ACCEPTANCE
    return status


def cmd_simulate(args) -> int:
    run = _resolve(args)
    result = run_scenario(run, args.threads)
    out = Path(args.out) if args.out else default_output_dir(run.scenario)
    manifest = write_outputs(result, run, out)
    print(f"wrote {manifest}")
    return _report(result, run, args.check)


def cmd_oracle_check(args) -> int:
    if args.gamma_scale is not None:
        args.set = (args.set or []) + [f"analysis.gamma_scale={args.gamma_scale!r}"]
    run = _resolve(args, scenario="oracle-check")
    result = run_scenario(run, args.threads)
    out = Path(args.out) if args.out else default_output_dir(run.scenario)
    write_outputs(result, run, out)
    s = result.summary
    print(f"fraction within 3 SE = {s['fraction_within_3se']:.4f} (max |z| = {s['max_abs_z']:.3g})")
    print("PASS" if s["passed"] else "FAIL")
    return EXIT_OK if s["passed"] else EXIT_ACCEPTANCE


def _load_profile(path: Path, stem: str) -> tuple[np.ndarray, np.ndarray]:
    if path.is_dir():
        path = path / f"{stem}.csv"
    table = read_csv(path)
    for xk, yk in (("separation_um", "normalized"), ("x_um", "value")):
        if xk in table and yk in table:
            return table[xk], table[yk]
    raise ConfigurationError(f"{path}: expected columns separation_um,normalized")


def _fit(path, stem, label) -> GaussianFitResult:
    x, y = _load_profile(Path(path), stem)
    try:
        fit = fit_gaussian_peak(x, y, curve=label)
    except ValueError as exc:
        raise NumericalFailure(f"{label} profile cannot be fitted: {exc}") from None
    if not fit.converged:
        raise NumericalFailure(f"{label} fit did not converge after {fit.iterations} evaluations")
    return fit


def _injected(sigma: float, label: str) -> GaussianFitResult:
    return GaussianFitResult(1.0, 0.0, sigma, 1.0, 0.0, True, 0, 0.0, label)


def cmd_analyze(args) -> int:
    if (args.near is None) == (args.sigma_n is None) or (args.far is None) == (args.sigma_f is None):
        raise ConfigurationError("give exactly one of --near/--sigma-n and one of --far/--sigma-f")
    near = _fit(args.near, "siegert_near", "near") if args.near else _injected(args.sigma_n, "near")
    far = _fit(args.far, "siegert_far", "far") if args.far else _injected(args.sigma_f, "far")
    report = coherence_report(near, far, args.magnification, args.lambda_um, args.focal_length_um)
    out = Path(args.out) if args.out else default_output_dir("analysis")
    out.mkdir(parents=True, exist_ok=True)
    report.to_file(out / "coherence_report.txt")
    for fit, path, stem in ((near, args.near, "siegert_near"), (far, args.far, "siegert_far")):
        if path:
            x, y = _load_profile(Path(path), stem)
            write_csv(out / f"{stem}_fit.csv", {"separation_um": x, "normalized": y, "fit": fit.evaluate(x)})
    print(f"delta_x_n = {report.delta_x_n:.4g} um")
    print(f"delta_x_f = {report.delta_x_f:.4g} um")
    print(f"delta_q = {report.delta_q:.4g} 1/um")
    print(f"product = {report.product:.4g} +/- {report.product_err:.2g}")
    if args.max_product is not None and not report.product < args.max_product:
        print(f"FAIL product {report.product:.4g} >= {args.max_product:g}")
        return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_list(args) -> int:
    for s in SCENARIOS.values():
        print(f"{s.name:20s} {s.output:20s} {s.defaults.n_frames:6d} frames  {s.description}")
    print(f"{'oracle-check':20s} {'G vs quadrature':20s} {10_000:6d} frames  Monte Carlo against dense quadrature")
    return EXIT_OK


def _add_run_options(p, with_scenario=True):
    p.add_argument("config", nargs="?", help="TOML configuration file")
    if with_scenario:
        p.add_argument("--scenario", choices=sorted(SCENARIOS), help="scenario name (overrides the file)")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one field")
    p.add_argument("--frames", type=int, help="number of frames")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV}/<scenario>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostcorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ghostcorr {__version__}")
    parser.add_argument("--list-scenarios", action="store_true", help="list scenarios and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="run a scenario and write its outputs")
    _add_run_options(p)
    p.add_argument("--check", action="store_true", help="apply acceptance thresholds (exit 3 on failure)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-check", help="Monte Carlo G against dense quadrature on a small grid")
    _add_run_options(p, with_scenario=False)
    p.add_argument("--gamma-scale", type=float, help="width factor of the reference correlation (1 = matched)")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("analyze", help="fit near/far autocorrelations and report the resolution product")
    p.add_argument("--near", help="siegert-near output directory or CSV")
    p.add_argument("--far", help="siegert-far output directory or CSV")
    p.add_argument("--sigma-n", type=float, help="near-field Gaussian sigma [um] instead of --near")
    p.add_argument("--sigma-f", type=float, help="far-field Gaussian sigma [um] instead of --far")
    p.add_argument("--magnification", type=float, default=1.2)
    p.add_argument("--lambda-um", type=float, default=0.6328)
    p.add_argument("--focal-length-um", type=float, default=80_000.0)
    p.add_argument("--max-product", type=float, help="exit 3 unless the product is below this value")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV}/analysis)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("list-scenarios", help="list scenario names")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.list_scenarios:
        return cmd_list(args)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except SamplingError as exc:
        print(f"sampling error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalFailure as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
