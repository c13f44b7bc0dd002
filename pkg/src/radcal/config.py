"""Run configuration: a single JSON document drives every CLI command.

The schema rejects unknown keys at every level. ``default_config()`` returns
the bundled synthetic fixture, which is also shipped as
``radcal/data/default_config.json``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import SchemaViolationError
from .io import dumps_json, require_file, validate_schema
from .radiometry import BAND_ORDER, RadCalCoeffs, VignetteModel
from .regions import DEFAULT_CM_PER_PIXEL
from .sensor import ReflectanceScene, SensorProfile, TargetLayout, generate_target_scene

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_ratio = {"type": "number", "minimum": 0, "maximum": 1}
_band_enum = {"enum": list(BAND_ORDER)}


def _per_band(value_schema):
    return {"type": "object", "additionalProperties": False, "minProperties": 1,
            "propertyNames": _band_enum,
            "patternProperties": {".*": value_schema}}


def _obj(properties: dict, required=None):
    return {"type": "object", "additionalProperties": False, "properties": properties,
            "required": list(properties) if required is None else required}


_gradients = _obj({"B": _ratio, "G": _ratio, "W": _ratio})
_ascending = {"type": "array", "minItems": 1, "items": _pos}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj({
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "bands": {"type": "array", "minItems": 1, "uniqueItems": True, "items": _band_enum},
        "sensor": _obj({
            "a1": _per_band(_pos),
            "a2": _num,
            "a3": _num,
            "black_level": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            "vignette": _obj({
                "k": {"type": "array", "minItems": 6, "maxItems": 6, "items": _num},
                "cx": {"type": ["number", "null"]},
                "cy": {"type": ["number", "null"]},
            }),
            "noise_sigma": {"type": "number", "minimum": 0},
        }),
        "scene": _obj({
            "layout": _obj({
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
                "target_px": {"type": "integer", "minimum": 3},
                "gap_px": {"type": "integer", "minimum": 0},
                "roi_px": {"type": "integer", "minimum": 1},
            }),
            "cm_per_pixel": _pos,
            "targets": _per_band(_gradients),
            "background": _obj({"soil": _per_band(_ratio), "canopy": _per_band(_ratio)}),
        }),
        "irradiance": _per_band(_pos),
        "sweep": _obj({
            "gains": _ascending,
            "exposures_ms": _ascending,
            "crp_known": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "crp_reflectance": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        }),
        "analysis": _obj({
            "tolerance": _pos,
            "saturation_epsilon": _pos,
            "under_exposure_floor_dn": {"type": "number", "minimum": 0},
            "window_mode": {"enum": ["full_scale", "object_based"]},
        }),
        "calibrate": _obj({
            "gain": _pos,
            "exposures_ms": _per_band(_pos),
            "distortion": _obj({"slope": _pos, "offset": _num}),
            "fit": {"enum": ["object_based", "all_targets", "one_point"]},
        }),
        "vi": _obj({
            "kind": {"enum": ["NDVI", "NDRE", "TGI", "GNDVI", "CI_rededge", "CI_green", "RDVI"]},
            "n_plots": {"type": "integer", "minimum": 3},
            "plot_px": {"type": "integer", "minimum": 1},
            "reference_slope": _num,
            "reference_intercept": _num,
            "reference_noise_sigma": {"type": "number", "minimum": 0},
        }),
    }),
}


def _load_default() -> dict:
    text = resources.files("radcal").joinpath("data/default_config.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass
class RunConfig:
    """Validated configuration document with typed builders."""

    doc: dict

    def __post_init__(self):
        validate_schema(self.doc, RUN_CONFIG_SCHEMA, "run config")
        missing = [
            (section, band)
            for band in self.bands
            for section, table in (("sensor.a1", self.doc["sensor"]["a1"]),
                                   ("irradiance", self.doc["irradiance"]),
                                   ("scene.targets", self.doc["scene"]["targets"]),
                                   ("calibrate.exposures_ms", self.doc["calibrate"]["exposures_ms"]))
            if band not in table
        ]
        for bg in ("soil", "canopy"):
            missing += [(f"scene.background.{bg}", b) for b in self.bands
                        if b not in self.doc["scene"]["background"][bg]]
        if missing:
            section, band = missing[0]
            raise SchemaViolationError(f"run config: {section} has no entry for band {band!r}")
        exps = self.doc["sweep"]["exposures_ms"]
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise SchemaViolationError("run config: sweep.exposures_ms must be strictly increasing")

    @property
    def seed(self) -> int:
        return int(self.doc["seed"])

    @property
    def bands(self) -> list[str]:
        return list(self.doc["bands"])

    def section(self, name: str) -> dict:
        return self.doc[name]

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        doc = copy.deepcopy(self.doc)
        doc["seed"] = int(seed)
        return RunConfig(doc)

    def layout(self) -> TargetLayout:
        return TargetLayout(**self.doc["scene"]["layout"])

    def profile(self) -> SensorProfile:
        s = self.doc["sensor"]
        lay = self.layout()
        vig = s["vignette"]
        cx = lay.width / 2.0 if vig["cx"] is None else vig["cx"]
        cy = lay.height / 2.0 if vig["cy"] is None else vig["cy"]
        band_coeffs = {b: RadCalCoeffs(a1, s["a2"], s["a3"], s["black_level"])
                       for b, a1 in s["a1"].items()}
        base = band_coeffs[self.bands[0]]
        return SensorProfile(base, VignetteModel(tuple(vig["k"]), cx, cy),
                             band_coeffs=band_coeffs, noise_sigma=s["noise_sigma"], seed=self.seed)

    def scene(self) -> ReflectanceScene:
        sc = self.doc["scene"]
        return generate_target_scene(self.layout(), sc["targets"], sc["background"])

    def truths(self, band: str) -> dict[str, float]:
        return dict(self.doc["scene"]["targets"][band])

    @property
    def cm_per_pixel(self) -> float:
        return float(self.doc["scene"].get("cm_per_pixel", DEFAULT_CM_PER_PIXEL))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)


def default_config() -> RunConfig:
    return RunConfig(_load_default())


def load_run_config(path) -> RunConfig:
    path = require_file(path)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"{path}: invalid JSON: {exc}") from None
    return RunConfig(doc)


def write_run_config(config: RunConfig, path) -> None:
    Path(path).write_text(dumps_json(config.doc), encoding="utf-8")
