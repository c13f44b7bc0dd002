"""File formats: 16-bit PGM captures with JSON sidecars, spectrometer CSV,
report CSV/JSON.

All writers are deterministic: the same input always yields the same bytes.
Floats are written with ``repr`` so CSV and JSON roundtrips are lossless.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from jsonschema import Draft202012Validator

from .elm import ErrorMatrix
from .errors import (
    GapInCoverageError,
    MalformedPgmError,
    MissingInputError,
    MissingSidecarError,
    NonMonotonicWavelengthsError,
    SchemaViolationError,
)
from .radiometry import (
    FULL_SCALE_DN,
    OBJECT_CATEGORIES,
    BandSpec,
    CaptureMeta,
    ExposureSetting,
    RadCalCoeffs,
    RawImage,
    VignetteModel,
    get_band,
)
from .sensor import SweepPoint, SweepRecord

SIDECAR_SUFFIX = ".meta.json"
SPECTROMETER_HEADER = ("wavelength_nm", "reflectance")
SPECTROMETER_RANGE = (350.0, 2500.0)

_number = {"type": "number"}
SIDECAR_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["band", "exposure_ms", "gain", "irradiance_uw_cm2_nm", "a1", "a2", "a3",
                 "black_level", "vignette", "width", "height"],
    "properties": {
        "band": {"enum": ["blue", "green", "red", "rededge", "nir"]},
        "exposure_ms": {"type": "number", "exclusiveMinimum": 0},
        "gain": {"type": "number", "exclusiveMinimum": 0},
        "irradiance_uw_cm2_nm": {"type": "number", "exclusiveMinimum": 0},
        "a1": {"type": "number", "exclusiveMinimum": 0},
        "a2": _number,
        "a3": _number,
        "black_level": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "vignette": {
            "type": "object",
            "additionalProperties": False,
            "required": ["k0", "k1", "k2", "k3", "k4", "k5", "cx", "cy"],
            "properties": {k: _number for k in ("k0", "k1", "k2", "k3", "k4", "k5", "cx", "cy")},
        },
        "width": {"type": "integer", "minimum": 1},
        "height": {"type": "integer", "minimum": 1},
        "object_category": {"enum": list(OBJECT_CATEGORIES)},
    },
}


def validate_schema(instance: Any, schema: dict, what: str) -> None:
    errors = sorted(Draft202012Validator(schema).iter_errors(instance), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.path) or "<root>"
        raise SchemaViolationError(f"{what}: {where}: {first.message}")


# -- deterministic text output ------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, float):
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, (np.floating,)):
        return _jsonable(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(require_file(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaViolationError(f"{path}: empty CSV")
    return rows[0], rows[1:]


# -- raw captures ----------------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(str(path) + SIDECAR_SUFFIX)


def meta_to_sidecar(meta: CaptureMeta) -> dict:
    v = meta.vignette
    c = meta.coeffs
    return {
        "band": meta.band.name,
        "exposure_ms": meta.setting.exposure_time,
        "gain": meta.setting.gain,
        "irradiance_uw_cm2_nm": meta.irradiance,
        "a1": c.a1, "a2": c.a2, "a3": c.a3,
        "black_level": c.black_level,
        "vignette": {**{f"k{i}": k for i, k in enumerate(v.k)}, "cx": v.center_x, "cy": v.center_y},
        "width": meta.width,
        "height": meta.height,
        "object_category": meta.object_category,
    }


def sidecar_to_meta(doc: dict) -> CaptureMeta:
    validate_schema(doc, SIDECAR_SCHEMA, "sidecar")
    vig = doc["vignette"]
    return CaptureMeta(
        band=get_band(doc["band"]),
        setting=ExposureSetting(gain=float(doc["gain"]), exposure_time=float(doc["exposure_ms"])),
        irradiance=float(doc["irradiance_uw_cm2_nm"]),
        coeffs=RadCalCoeffs(float(doc["a1"]), float(doc["a2"]), float(doc["a3"]),
                            float(doc["black_level"])),
        width=int(doc["width"]),
        height=int(doc["height"]),
        vignette=VignetteModel(tuple(float(vig[f"k{i}"]) for i in range(6)),
                               float(vig["cx"]), float(vig["cy"])),
        object_category=doc.get("object_category", "mixed"),
    )


def encode_pgm(dn: np.ndarray) -> bytes:
    dn = np.asarray(dn)
    if dn.ndim != 2 or dn.size == 0:
        raise MalformedPgmError("PGM payload must be a non-empty 2-D array")
    if dn.min() < 0 or dn.max() > FULL_SCALE_DN:
        raise MalformedPgmError("DN values outside 0..65535")
    height, width = dn.shape
    header = f"P5\n{width} {height}\n{FULL_SCALE_DN}\n".encode("ascii")
    return header + dn.astype(">u2").tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse a binary 16-bit PGM (P5, maxval 65535, big-endian samples)."""
    pos = 0
    tokens: list[bytes] = []
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedPgmError("truncated PGM header")
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise MalformedPgmError("PGM header must end with a single whitespace byte")
    pos += 1
    if tokens[0] != b"P5":
        raise MalformedPgmError(f"expected P5 magic, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedPgmError("non-integer PGM header field") from None
    if maxval != FULL_SCALE_DN:
        raise MalformedPgmError(f"maxval must be {FULL_SCALE_DN}, got {maxval}")
    if width <= 0 or height <= 0:
        raise MalformedPgmError("PGM dimensions must be positive")
    expected = width * height * 2
    payload = data[pos:]
    if len(payload) != expected:
        raise MalformedPgmError(f"payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=">u2").reshape(height, width).astype(np.uint16)


def write_raw_image(image: RawImage, path) -> None:
    if image.pixels.size == 0:
        raise MalformedPgmError("cannot write an empty image")
    path = Path(path)
    path.write_bytes(encode_pgm(image.dn))
    write_json(meta_to_sidecar(image.meta), sidecar_path(path))


def read_raw_image(path) -> RawImage:
    path = require_file(path)
    side = sidecar_path(path)
    if not side.exists():
        raise MissingSidecarError(f"no sidecar {side}")
    dn = decode_pgm(path.read_bytes())
    try:
        doc = json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"sidecar {side}: {exc}") from None
    meta = sidecar_to_meta(doc)
    if dn.shape != (meta.height, meta.width):
        raise SchemaViolationError(
            f"sidecar says {meta.width}x{meta.height}, PGM is {dn.shape[1]}x{dn.shape[0]}"
        )
    return RawImage.from_dn(dn, meta)


# -- spectrometer curves ---------------------------------------------------------

@dataclass
class SpectralCurve:
    wavelengths: np.ndarray  # nm, strictly increasing
    reflectance: np.ndarray  # ratio

    def __post_init__(self):
        self.wavelengths = np.asarray(self.wavelengths, dtype=float)
        self.reflectance = np.asarray(self.reflectance, dtype=float)
        if self.wavelengths.shape != self.reflectance.shape or self.wavelengths.ndim != 1:
            raise SchemaViolationError("wavelength and reflectance columns differ in length")
        if self.wavelengths.size == 0:
            raise GapInCoverageError("empty spectral curve")
        if np.any(np.diff(self.wavelengths) <= 0):
            raise NonMonotonicWavelengthsError("wavelengths must be strictly increasing")
        if np.any(self.reflectance < 0) or np.any(self.reflectance > 1.5):
            raise SchemaViolationError("reflectance outside [0, 1.5]")

    def require_coverage(self, lo: float, hi: float, step: float = 1.0) -> None:
        w = self.wavelengths
        if w[0] > lo + 1e-9 or w[-1] < hi - 1e-9:
            raise GapInCoverageError(f"curve {w[0]:g}-{w[-1]:g} nm does not cover {lo:g}-{hi:g} nm")
        inside = w[(w >= lo - step) & (w <= hi + step)]
        if inside.size > 1 and np.max(np.diff(inside)) > step + 1e-9:
            raise GapInCoverageError(f"gap wider than {step:g} nm within {lo:g}-{hi:g} nm")

    @classmethod
    def flat(cls, value: float, lo: float = 350.0, hi: float = 2500.0) -> "SpectralCurve":
        w = np.arange(lo, hi + 1.0)
        return cls(w, np.full(w.shape, float(value)))


def load_spectrometer_csv(path) -> SpectralCurve:
    header, rows = read_csv(path)
    if tuple(h.strip() for h in header) != SPECTROMETER_HEADER:
        raise SchemaViolationError(f"{path}: header must be {','.join(SPECTROMETER_HEADER)}")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows], dtype=float)
    except ValueError:
        raise SchemaViolationError(f"{path}: rows must hold two numeric columns") from None
    if data.size == 0:
        raise GapInCoverageError(f"{path}: no samples")
    curve = SpectralCurve(data[:, 0], data[:, 1])
    curve.require_coverage(*SPECTROMETER_RANGE)
    return curve


def write_spectrometer_csv(curve: SpectralCurve, path) -> None:
    write_csv(path, SPECTROMETER_HEADER, zip(curve.wavelengths.tolist(), curve.reflectance.tolist()))


def band_average_reflectance(curve: SpectralCurve, band: BandSpec | str) -> float:
    """Mean of the samples inside ``[center - fwhm/2, center + fwhm/2]`` (closed)."""
    lo, hi = get_band(band).interval
    curve.require_coverage(lo, hi)
    w = curve.wavelengths
    mask = (w >= lo - 1e-9) & (w <= hi + 1e-9)
    return float(np.mean(curve.reflectance[mask]))


# -- reports -------------------------------------------------------------------------

MATRIX_CORNER = "reference\\target"


def write_error_matrix_csv(matrix: ErrorMatrix, path) -> None:
    header = [MATRIX_CORNER] + [s.label for s in matrix.target_axis]
    rows = ([ref.label] + [float(v) for v in matrix.cells[i]]
            for i, ref in enumerate(matrix.reference_axis))
    write_csv(path, header, rows)


def read_error_matrix_csv(path, band: BandSpec | str) -> ErrorMatrix:
    header, rows = read_csv(path)
    if header[0] != MATRIX_CORNER:
        raise SchemaViolationError(f"{path}: not an error-matrix CSV")
    targets = [ExposureSetting.from_label(h) for h in header[1:]]
    refs = [ExposureSetting.from_label(r[0]) for r in rows]
    cells = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float).reshape(len(refs), len(targets))
    return ErrorMatrix(get_band(band), refs, targets, cells)


def error_matrix_to_dict(matrix: ErrorMatrix) -> dict:
    axis = lambda ss: [{"gain": s.gain, "exposure_ms": s.exposure_time} for s in ss]  # noqa: E731
    return {
        "band": matrix.band.name,
        "units": "MAPE percent",
        "reference_axis": axis(matrix.reference_axis),
        "target_axis": axis(matrix.target_axis),
        "cells": matrix.cells,
    }


def error_matrix_from_dict(doc: dict) -> ErrorMatrix:
    axis = lambda items: [ExposureSetting(gain=float(d["gain"]),  # noqa: E731
                                          exposure_time=float(d["exposure_ms"])) for d in items]
    cells = np.array([[np.nan if v is None else v for v in row] for row in doc["cells"]], dtype=float)
    refs, tgts = axis(doc["reference_axis"]), axis(doc["target_axis"])
    return ErrorMatrix(get_band(doc["band"]), refs, tgts, cells.reshape(len(refs), len(tgts)))


def write_error_matrix_json(matrix: ErrorMatrix, path) -> None:
    write_json(error_matrix_to_dict(matrix), path)


SWEEP_HEADER = ("band", "gain", "exposure_ms", "region", "estimate",
                "clip_fraction", "mean_signal", "correction_factor", "crp_clip_fraction")


def sweep_rows(sweep: SweepRecord):
    for p in sweep.points:
        for region in p.estimates:
            yield (sweep.band.name, float(p.gain), float(p.exposure_time), region,
                   p.estimates[region], p.clip_fraction[region], p.mean_signal[region],
                   p.correction_factor, p.crp_clip_fraction)


def write_sweep_csv(sweep: SweepRecord, path) -> None:
    write_csv(path, SWEEP_HEADER, sweep_rows(sweep))


def read_sweep_csv(path, crp_known: float) -> SweepRecord:
    header, rows = read_csv(path)
    if tuple(header) != SWEEP_HEADER:
        raise SchemaViolationError(f"{path}: not a sweep CSV")
    grouped: dict[tuple[float, float], dict] = {}
    band = None
    for r in rows:
        band = band or r[0]
        key = (float(r[1]), float(r[2]))
        g = grouped.setdefault(key, {"est": {}, "clip": {}, "sig": {}, "F": float(r[7]),
                                     "crp": float(r[8])})
        g["est"][r[3]] = float(r[4])
        g["clip"][r[3]] = float(r[5])
        g["sig"][r[3]] = float(r[6])
    if band is None:
        raise SchemaViolationError(f"{path}: sweep CSV has no rows")
    points = [SweepPoint(gain, exp, g["est"], g["clip"], g["sig"], g["crp"], g["F"])
              for (gain, exp), g in grouped.items()]
    return SweepRecord(get_band(band), points, crp_known)


def write_plot_means_csv(rows: Iterable[tuple[str, str, float, int]], path) -> None:
    write_csv(path, ("plot_id", "vi_kind", "mean", "n_pixels"), rows)


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path


def require_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"file not found: {path}")
    return path
