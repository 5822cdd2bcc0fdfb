"""Run configuration files: versioned TOML with unit-suffixed keys.

A file names a scenario and overrides any subset of its defaults::

    schema_version = 1
    scenario = "ghost-diffraction"
    n_frames = 500
    seed = 7

    [source]
    lambda_um = 0.6328
    d0_um = 10000.0

    [grid]
    n_x = 2048
    n_y = 512
    pitch_um = 6.0

Unknown sections or keys, wrong types and out-of-range values raise
:class:`SchemaError` naming the offending field.
"""
from __future__ import annotations

import sys
from dataclasses import replace

from .bench import BeamSplitter, Detector
from .field_grid import ConfigurationError, GridSpec
from .scenarios import ObjectSpec, RunConfig, defaults_for
from .speckle_source import SourceSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1


class SchemaError(ConfigurationError):
    """A configuration field is unknown, mistyped or out of range."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field


# section -> key -> (python type, RunConfig path)
_TOP = {"scenario": str, "n_frames": int, "seed": int, "schema_version": int}
SCHEMA = {
    "source": {
        "mode": str,
        "lambda_um": float,
        "d0_um": float,
        "z0_um": float,
        "pinhole_d_um": float,
        "z_pinhole_to_near_um": float,
        "mean_intensity": float,
    },
    "grid": {"n_x": int, "n_y": int, "pitch_um": float, "pitch_y_um": float},
    "object": {
        "kind": str,
        "needle_d_um": float,
        "slit_w_um": float,
        "separation_um": float,
        "aperture_d_um": float,
        "path": str,
    },
    "optics": {"focal_length_um": float, "magnification": float, "two_f_pad": int},
    "detector": {"binning": int, "poisson": bool, "photons_per_unit": float, "bucket_threshold": float},
    "beam_splitter": {"t": float, "r": float},
    "analysis": {
        "max_shift_x_px": int,
        "max_shift_y_px": int,
        "section_rows": int,
        "calibration_frames": int,
        "window_px": int,
        "gamma_scale": float,
    },
}


def to_dict(run: RunConfig) -> dict:
    """Nested dict of every schema field, the inverse of :func:`from_dict`."""
    s, g, o = run.source, run.grid, run.object
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": run.scenario,
        "n_frames": run.n_frames,
        "seed": run.seed,
        "source": {
            "mode": s.mode,
            "lambda_um": s.wavelength,
            "d0_um": s.d0,
            "z0_um": s.z0,
            "pinhole_d_um": s.pinhole_d,
            "z_pinhole_to_near_um": s.z_pinhole_to_near,
            "mean_intensity": s.mean_intensity,
        },
        "grid": {"n_x": g.n_x, "n_y": g.n_y, "pitch_um": g.dx, "pitch_y_um": g.dy},
        "object": {
            "kind": o.kind,
            "needle_d_um": o.needle_d,
            "slit_w_um": o.slit_w,
            "separation_um": o.separation,
            "aperture_d_um": o.aperture_d,
            "path": o.path,
        },
        "optics": {
            "focal_length_um": run.focal_length,
            "magnification": run.magnification,
            "two_f_pad": run.two_f_pad,
        },
        "detector": {
            "binning": run.detector.binning,
            "poisson": run.detector.poisson,
            "photons_per_unit": run.detector.photons_per_unit,
            "bucket_threshold": run.detector.bucket_threshold,
        },
        "beam_splitter": {"t": float(abs(run.bs.t)), "r": float(abs(run.bs.r))},
        "analysis": {
            "max_shift_x_px": run.max_shift[0],
            "max_shift_y_px": run.max_shift[1],
            "section_rows": run.section_rows,
            "calibration_frames": run.calibration_frames,
            "window_px": run.window,
            "gamma_scale": run.gamma_scale,
        },
    }


def _check_type(name: str, value, kind):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, bool):
        raise SchemaError(name, f"expected an integer, got {value!r}")
    if not isinstance(value, kind):
        raise SchemaError(name, f"expected {kind.__name__}, got {type(value).__name__} {value!r}")
    return value


def validate(raw: dict) -> dict:
    """Check names and types of every field in a parsed file (partial files allowed).

    Returns a copy with integers promoted wherever a float is expected.
    """
    out = {}
    for key, value in raw.items():
        if key in _TOP:
            out[key] = _check_type(key, value, _TOP[key])
        elif key in SCHEMA:
            if not isinstance(value, dict):
                raise SchemaError(key, "expected a table")
            out[key] = {}
            for sub, v in value.items():
                if sub not in SCHEMA[key]:
                    raise SchemaError(f"{key}.{sub}", f"unknown field; expected one of {sorted(SCHEMA[key])}")
                out[key][sub] = _check_type(f"{key}.{sub}", v, SCHEMA[key][sub])
        else:
            raise SchemaError(key, f"unknown field; expected one of {sorted(_TOP) + sorted(SCHEMA)}")
    version = out.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported version {version}; this build reads {SCHEMA_VERSION}")
    return out


def _positive(name, value):
    if not value > 0:
        raise SchemaError(name, f"must be > 0, got {value}")
    return value


def from_dict(raw: dict) -> RunConfig:
    """Resolve a (partial) configuration against its scenario defaults."""
    raw = validate(raw)
    if "scenario" not in raw:
        raise SchemaError("scenario", "missing; name one of the scenarios")
    merged = to_dict(defaults_for(raw["scenario"]))
    for key, value in raw.items():
        if isinstance(value, dict):
            merged[key].update(value)
        else:
            merged[key] = value
    src, g, o = merged["source"], merged["grid"], merged["object"]
    opt, det, bs, an = merged["optics"], merged["detector"], merged["beam_splitter"], merged["analysis"]
    if merged["n_frames"] < 1:
        raise SchemaError("n_frames", f"must be >= 1, got {merged['n_frames']}")
    try:
        source = SourceSpec(
            wavelength=src["lambda_um"], d0=src["d0_um"], z0=src["z0_um"], pinhole_d=src["pinhole_d_um"],
            z_pinhole_to_near=src["z_pinhole_to_near_um"], mean_intensity=src["mean_intensity"], mode=src["mode"],
        )
    except ConfigurationError as exc:
        raise SchemaError("source", str(exc)) from None
    for k in ("n_x", "n_y"):
        if g[k] < 2:
            raise SchemaError(f"grid.{k}", f"must be >= 2, got {g[k]}")
    _positive("grid.pitch_um", g["pitch_um"])
    _positive("grid.pitch_y_um", g["pitch_y_um"])
    pitch_y = None if g["pitch_y_um"] == g["pitch_um"] else g["pitch_y_um"]
    grid = GridSpec(g["n_x"], g["n_y"], g["pitch_um"], pitch_y)
    for k in ("needle_d_um", "slit_w_um", "aperture_d_um"):
        _positive(f"object.{k}", o[k])
    obj = ObjectSpec(o["kind"], o["needle_d_um"], o["slit_w_um"], o["separation_um"], o["aperture_d_um"], o["path"])
    if obj.kind not in ("uniform", "single_slit", "needle_in_slit", "double_slit", "aperture", "raster"):
        raise SchemaError("object.kind", f"unknown mask kind {obj.kind!r}")
    if obj.kind == "raster" and not obj.path:
        raise SchemaError("object.path", "required for raster masks")
    if opt["focal_length_um"] == 0:
        raise SchemaError("optics.focal_length_um", "must be non-zero")
    _positive("optics.magnification", opt["magnification"])
    if opt["two_f_pad"] < 1:
        raise SchemaError("optics.two_f_pad", f"must be >= 1, got {opt['two_f_pad']}")
    if det["binning"] < 1:
        raise SchemaError("detector.binning", f"must be >= 1, got {det['binning']}")
    _positive("detector.photons_per_unit", det["photons_per_unit"])
    try:
        splitter = BeamSplitter(bs["t"], bs["r"])
    except ConfigurationError as exc:
        raise SchemaError("beam_splitter", str(exc)) from None
    for k in ("max_shift_x_px", "max_shift_y_px"):
        if an[k] < 0:
            raise SchemaError(f"analysis.{k}", f"must be >= 0, got {an[k]}")
    for k in ("section_rows", "calibration_frames", "window_px"):
        if an[k] < 1:
            raise SchemaError(f"analysis.{k}", f"must be >= 1, got {an[k]}")
    _positive("analysis.gamma_scale", an["gamma_scale"])
    return RunConfig(
        scenario=merged["scenario"],
        n_frames=merged["n_frames"],
        seed=merged["seed"],
        source=source,
        grid=grid,
        object=obj,
        focal_length=opt["focal_length_um"],
        magnification=opt["magnification"],
        two_f_pad=opt["two_f_pad"],
        detector=Detector(det["binning"], det["poisson"], det["photons_per_unit"], det["bucket_threshold"]),
        bs=splitter,
        max_shift=(an["max_shift_x_px"], an["max_shift_y_px"]),
        section_rows=an["section_rows"],
        calibration_frames=an["calibration_frames"],
        window=an["window_px"],
        gamma_scale=an["gamma_scale"],
    )


def parse_override(item: str) -> tuple[list[str], object]:
    """``"source.d0_um=5000"`` -> (["source", "d0_um"], 5000).

    The value is read as a TOML value; bare words are taken as strings.
    """
    key, sep, text = item.partition("=")
    if not sep or not key.strip():
        raise SchemaError(item, "override must look like section.key=value")
    try:
        value = tomllib.loads(f"v = {text.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = text.strip()
    return key.strip().split("."), value


def apply_overrides(raw: dict, overrides) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for item in overrides:
        path, value = parse_override(item)
        if len(path) == 1:
            out[path[0]] = value
        elif len(path) == 2:
            out.setdefault(path[0], {})
            if not isinstance(out[path[0]], dict):
                raise SchemaError(path[0], "expected a table")
            out[path[0]][path[1]] = value
        else:
            raise SchemaError(".".join(path), "nesting deeper than section.key is not supported")
    return out


def load(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(str(path), f"not valid TOML ({exc})") from None


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(config: dict) -> str:
    """TOML text for a flat-tables dict such as :func:`to_dict` output."""
    lines = [f"{k} = {_toml_value(v)}" for k, v in config.items() if not isinstance(v, dict)]
    for section, table in config.items():
        if isinstance(table, dict):
            lines += ["", f"[{section}]"] + [f"{k} = {_toml_value(v)}" for k, v in table.items()]
    return "\n".join(lines) + "\n"


def flatten(config: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in config.items():
        if isinstance(v, dict):
            out.update(flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


def with_frames_seed(run: RunConfig, n_frames=None, seed=None) -> RunConfig:
    changes = {}
    if n_frames is not None:
        changes["n_frames"] = n_frames
    if seed is not None:
        changes["seed"] = seed
    return replace(run, **changes)
