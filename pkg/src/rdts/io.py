"""Text file formats: count traces, profiles, grids, constants and manifests.

Every writer is deterministic: the same inputs give byte-identical files.
Readers raise :class:`~rdts.errors.ConfigError` on malformed input so the
command line can map it to a validation failure.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from rdts.calibration import CalibrationRegion
from rdts.errors import ConfigError
from rdts.otdr import CHANNELS, CountHistogram
from rdts.raman import CalibrationConstants, RamanConstants
from rdts.reconstruction import TemperatureProfile, ThermogramGrid

SCHEMA_VERSION = "1.0"

TRACE_KEYS = ("schema_version", "channel", "bin_width_s", "integration_time_s",
              "repetition_rate_hz", "group_index", "seed")


def _num(x) -> str:
    return repr(float(x))


def _check_version(found, source) -> None:
    if found != SCHEMA_VERSION:
        raise ConfigError(f"{source}: schema_version {found!r}, expected {SCHEMA_VERSION!r}")


# ---------------------------------------------------------------- JSON

def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


# ---------------------------------------------------------------- traces

def trace_text(hist: CountHistogram) -> str:
    header = {
        "schema_version": SCHEMA_VERSION,
        "channel": hist.channel,
        "bin_width_s": _num(hist.bin_width),
        "integration_time_s": _num(hist.integration_time),
        "repetition_rate_hz": _num(hist.repetition_rate),
        "group_index": _num(hist.group_index),
        "seed": "none" if hist.seed is None else str(int(hist.seed)),
    }
    lines = [f"# {k}={header[k]}" for k in TRACE_KEYS]
    lines.extend(str(int(c)) for c in hist.counts)
    return "\n".join(lines) + "\n"


def write_trace(path, hist: CountHistogram) -> Path:
    path = Path(path)
    path.write_text(trace_text(hist))
    return path


def read_trace(path) -> CountHistogram:
    path = Path(path)
    header: dict[str, str] = {}
    counts = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise ConfigError(f"{path}:{n}: header line without '='")
            header[key.strip()] = value.strip()
            continue
        try:
            c = int(line)
        except ValueError:
            raise ConfigError(f"{path}:{n}: count {line!r} is not an integer") from None
        if c < 0:
            raise ConfigError(f"{path}:{n}: negative count")
        counts.append(c)
    missing = [k for k in TRACE_KEYS if k not in header]
    if missing:
        raise ConfigError(f"{path}: header lacks {', '.join(missing)}")
    _check_version(header["schema_version"], path)
    if header["channel"] not in CHANNELS:
        raise ConfigError(f"{path}: unknown channel {header['channel']!r}")
    try:
        seed = None if header["seed"] == "none" else int(header["seed"])
        return CountHistogram(
            counts=np.asarray(counts, dtype=np.int64),
            bin_width=float(header["bin_width_s"]),
            channel=header["channel"],
            integration_time=float(header["integration_time_s"]),
            seed=seed,
            repetition_rate=float(header["repetition_rate_hz"]),
            group_index=float(header["group_index"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: bad header value ({exc})") from exc


# ---------------------------------------------------------------- profiles and grids

PROFILE_HEADER = "bin_index,position_m,temperature_K,sigma_K,valid"


def _fmt(x, fmt) -> str:
    return "nan" if not math.isfinite(x) else format(x, fmt)


def profile_text(profile: TemperatureProfile) -> str:
    lines = [f"# schema_version={SCHEMA_VERSION}", f"# bin_length_m={_num(profile.bin_length)}",
             PROFILE_HEADER]
    for i, (x, T, s, v) in enumerate(zip(profile.positions(), profile.temperatures,
                                         profile.sigmas, profile.valid)):
        lines.append(f"{i},{x:.6f},{_fmt(T, '.6f')},{_fmt(s, '.6f')},{int(bool(v))}")
    return "\n".join(lines) + "\n"


def write_profile(path, profile: TemperatureProfile) -> Path:
    path = Path(path)
    path.write_text(profile_text(profile))
    return path


def read_profile(path) -> TemperatureProfile:
    path = Path(path)
    header, rows = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            header[k.strip()] = v.strip()
        elif line and line != PROFILE_HEADER:
            rows.append(line.split(","))
    _check_version(header.get("schema_version"), path)
    if not rows:
        raise ConfigError(f"{path}: empty profile")
    data = np.array([[float(c) for c in r[2:]] for r in rows])
    return TemperatureProfile(float(header["bin_length_m"]), data[:, 0], data[:, 1], data[:, 2] > 0)


def grid_text(grid: ThermogramGrid) -> str:
    """CSV matrix, one line per row of constant y, starting at the smallest y."""
    ny, nx = grid.shape
    lines = [
        f"# schema_version={SCHEMA_VERSION}",
        f"# resolution_m={_num(grid.resolution)}",
        f"# origin_m={_num(grid.origin[0])},{_num(grid.origin[1])}",
        f"# shape={ny},{nx}",
    ]
    lines.extend(",".join(f"{v:.4f}" for v in row) for row in grid.values)
    return "\n".join(lines) + "\n"


def write_grid(path, grid: ThermogramGrid) -> Path:
    path = Path(path)
    path.write_text(grid_text(grid))
    return path


def read_grid(path) -> ThermogramGrid:
    path = Path(path)
    text = path.read_text()
    header = {}
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            header[k.strip()] = v.strip()
    _check_version(header.get("schema_version"), path)
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    ox, oy = (float(v) for v in header["origin_m"].split(","))
    return ThermogramGrid(float(header["resolution_m"]), values, (ox, oy))


# ---------------------------------------------------------------- calibration constants

def constants_dict(cal: CalibrationConstants, dark_rate_s: float, noise_floor: float | None = None,
                   region: CalibrationRegion | None = None, report=None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "C1": cal.C1,
        "C2": cal.C2,
        "T0": cal.T0,
        "sigma_C1": cal.sigma_C1,
        "sigma_C2": cal.sigma_C2,
        "cov_C1_C2": cal.cov_C1_C2,
        "spectral_shift_hz": cal.raman.spectral_shift,
        "dark_rate_s": dark_rate_s,
    }
    if noise_floor is not None:
        out["noise_floor_counts"] = noise_floor
    if region is not None:
        out["region"] = [region.start, region.end]
    if report is not None:
        out["report"] = report
    return out


def read_constants(path) -> tuple[CalibrationConstants, float]:
    """Calibration constants and the S-channel dark rate they were fitted with."""
    d = read_json(path)
    _check_version(d.get("schema_version"), path)
    try:
        cal = CalibrationConstants(
            C1=float(d["C1"]), C2=float(d["C2"]), T0=float(d["T0"]),
            raman=RamanConstants(float(d["spectral_shift_hz"])),
            sigma_C1=float(d.get("sigma_C1", 0.0)), sigma_C2=float(d.get("sigma_C2", 0.0)),
            cov_C1_C2=float(d.get("cov_C1_C2", 0.0)),
        )
        return cal, float(d["dark_rate_s"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: incomplete calibration constants ({exc})") from exc


# ---------------------------------------------------------------- calibration manifest

MANIFEST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "T0", "dark_rate_s", "region", "reference", "runs"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "T0": {"type": "number", "exclusiveMinimum": 0},
        "spectral_shift_hz": {"type": "number", "exclusiveMinimum": 0},
        "dark_rate_s": {"type": "number", "minimum": 0},
        "region": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "reference": {"$ref": "#/$defs/pair"},
        "runs": {
            "type": "array",
            "items": {
                "allOf": [{"$ref": "#/$defs/pair"}],
                "required": ["T_cal"],
                "properties": {"T_cal": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
    },
    "$defs": {
        "pair": {
            "type": "object",
            "required": ["as", "s"],
            "properties": {
                "as": {"type": "string"},
                "s": {"type": "string"},
                "label": {"type": "string"},
                "T_cal": {},
            },
            "additionalProperties": False,
        },
    },
}


def manifest_dict(T0: float, dark_rate_s: float, region: CalibrationRegion, reference: tuple[str, str],
                  runs, spectral_shift: float | None = None) -> dict:
    """Manifest document; ``runs`` holds ``(label, T_cal, as_path, s_path)``."""
    out = {
        "schema_version": SCHEMA_VERSION,
        "T0": T0,
        "dark_rate_s": dark_rate_s,
        "region": [region.start, region.end],
        "reference": {"as": reference[0], "s": reference[1]},
        "runs": [{"label": lab, "T_cal": T, "as": a, "s": s} for lab, T, a, s in runs],
    }
    if spectral_shift is not None:
        out["spectral_shift_hz"] = spectral_shift
    return out


def read_manifest(path) -> dict:
    """Validated manifest with trace paths resolved against its directory."""
    import jsonschema

    path = Path(path)
    d = read_json(path)
    try:
        jsonschema.validate(d, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message} at /{'/'.join(map(str, exc.absolute_path))}") from exc
    base = path.parent
    d["reference"] = {k: base / v for k, v in d["reference"].items() if k in ("as", "s")}
    for run in d["runs"]:
        run["as"] = base / run["as"]
        run["s"] = base / run["s"]
    d["region"] = CalibrationRegion(*d["region"])
    return d


# ---------------------------------------------------------------- heat-model data

def read_current_rise_csv(path) -> list[tuple[float, float]]:
    """``(I, dT)`` pairs from a two-column CSV; a non-numeric first line is a header."""
    path = Path(path)
    points = []
    first = True
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        header_allowed, first = first, False
        cells = [c.strip() for c in line.split(",")]
        try:
            I, dT = float(cells[0]), float(cells[1])
        except (ValueError, IndexError):
            if header_allowed:
                continue
            raise ConfigError(f"{path}:{n}: expected two numbers, got {line!r}") from None
        points.append((I, dT))
    return points
