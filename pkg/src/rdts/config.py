"""Experiment configuration: JSON schema, validation and scenario construction.

A configuration document describes the board, fiber route, instrument,
calibration plan, heater states and reconstruction settings. Unknown keys are
rejected. Lengths are in metres, times in seconds, temperatures in kelvin.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from rdts.board import BoardModel, FiberLayout, Heater, pcb15_board, serpentine_layout
from rdts.calibration import CalibrationRegion
from rdts.errors import ConfigError
from rdts.heat import HeaterGeometry
from rdts.io import SCHEMA_VERSION, read_json
from rdts.otdr import InstrumentConfig, PolarizationModel, instrument_for
from rdts.pipeline import CalibrationPlan, HeaterState, ReconstructionSettings, Scenario

PRESET_AMBIENT = {"room": 296.0, "cryo": 77.0}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_xy = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "name"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "board": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["pcb15"]},
                "width": _pos,
                "height": _pos,
                "ambient": _pos,
                "heaters": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id", "center"],
                        "properties": {
                            "id": {"type": "string", "minLength": 1},
                            "center": _xy,
                            "footprint": _pos,
                        },
                    },
                },
            },
            "not": {"required": ["preset", "heaters"]},
        },
        "layout": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["serpentine"]},
                "lead_in": _nonneg,
                "total_length": _pos,
                "coil_length": _nonneg,
                "path": {"type": "array", "items": _xy, "minItems": 2},
            },
            "not": {"required": ["preset", "path"]},
        },
        "instrument": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["room", "cryo", "ambient"]},
                "amplitude_A": _nonneg,
                "amplitude_B": _nonneg,
                "repetition_rate": _pos,
                "pulse_fwhm": _pos,
                "jitter_fwhm": _nonneg,
                "bin_width": _pos,
                "integration_time": _nonneg,
                "group_index": _pos,
                "dark_rate_AS": _nonneg,
                "dark_rate_S": _nonneg,
                "spectral_shift": _pos,
                "polarization": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "modulation_depth": _nonneg,
                        "spatial_period": _pos,
                        "phase": _num,
                    },
                },
            },
        },
        "calibration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "heater": {"type": "string"},
                "rises": {"type": "array", "items": _nonneg, "minItems": 1},
                "region": {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2},
            },
        },
        "states": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "rises": {"type": "object", "additionalProperties": _nonneg},
                },
            },
        },
        "reconstruction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "spacing": _pos,
                "splat_fwhm": _pos,
                "filter_fwhm": _pos,
                "resolution": _pos,
                "color_scale": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "min_rise": _nonneg,
                "sigma_factor": _nonneg,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "ppm", "json"]}, "uniqueItems": True},
            },
        },
    },
}


def validate_config(doc) -> None:
    """Raise :class:`ConfigError` listing every schema violation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"/{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def bundled_scenarios() -> list[str]:
    root = resources.files("rdts") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(source) -> dict:
    """Read and validate a configuration from a path or a bundled scenario name."""
    path = Path(source)
    if not path.exists() and str(source) in bundled_scenarios():
        text = (resources.files("rdts") / "scenarios" / f"{source}.json").read_text()
        doc = json.loads(text)
    else:
        doc = read_json(path)
    validate_config(doc)
    return doc


def build_board(section: dict) -> BoardModel:
    ambient = float(section.get("ambient", 296.0))
    if "heaters" not in section:
        board = pcb15_board(ambient)
        if "width" in section or "height" in section:
            board = BoardModel(section.get("width", board.width), section.get("height", board.height),
                               board.heaters, ambient)
        return board
    heaters = tuple(
        Heater(h["id"], HeaterGeometry(tuple(h["center"]), h.get("footprint", 0.01)))
        for h in section["heaters"]
    )
    return BoardModel(section.get("width", 0.15), section.get("height", 0.06), heaters, ambient)


def build_layout(section: dict, board: BoardModel) -> FiberLayout:
    lead_in = section.get("lead_in", 2.0)
    total = section.get("total_length", 10.0)
    if "path" in section:
        return FiberLayout(lead_in, tuple(tuple(p) for p in section["path"]), total)
    return serpentine_layout(board, lead_in, total, section.get("coil_length", 0.14))


def build_instrument(section: dict, ambient: float) -> InstrumentConfig:
    section = dict(section)
    preset = section.pop("preset", "ambient")
    if "polarization" in section:
        section["polarization"] = PolarizationModel(**section["polarization"])
    return instrument_for(PRESET_AMBIENT.get(preset, ambient), **section)


def build_scenario(doc: dict, seed: int | None = None) -> Scenario:
    """Scenario from a validated document; ``seed`` overrides the document seed."""
    board = build_board(doc.get("board", {}))
    layout = build_layout(doc.get("layout", {}), board)
    instrument = build_instrument(doc.get("instrument", {}), board.ambient)
    cal = doc.get("calibration", {})
    default_plan = CalibrationPlan()
    plan = CalibrationPlan(
        heater=cal.get("heater", default_plan.heater),
        rises=tuple(float(r) for r in cal.get("rises", default_plan.rises)),
        region=CalibrationRegion(*cal["region"]) if "region" in cal else None,
    )
    states = tuple(HeaterState.of(s["name"], s.get("rises", {})) for s in doc.get("states", []))
    if len({s.name for s in states}) != len(states):
        raise ConfigError("state names must be unique")
    rec = dict(doc.get("reconstruction", {}))
    if "color_scale" in rec:
        rec["color_scale"] = tuple(rec["color_scale"])
    return Scenario(
        name=doc["name"], board=board, layout=layout, instrument=instrument,
        calibration=plan, states=states, recon=ReconstructionSettings(**rec),
        seed=int(doc.get("seed", 0) if seed is None else seed),
    )


def output_formats(doc: dict, override=None) -> set[str]:
    if override:
        return set(override)
    return set(doc.get("output", {}).get("formats", ["csv", "ppm", "json"]))

