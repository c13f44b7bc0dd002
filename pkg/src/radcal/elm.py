"""Empirical line fitting, regression metrics and cross-calibration matrices."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateFitError,
    EmptyRoiError,
    RadcalError,
    ZeroActualError,
    ZeroVarianceError,
)
from .radiometry import BandSpec, ExposureSetting, ReflectanceImage, get_band
from .regions import RegionSpec

GRADIENTS = ("B", "G", "W")

# Target subsets bounding canopy and soil reflectance in each band.
OBJECT_BASED_TARGETS: dict[str, frozenset[str]] = {
    "blue": frozenset({"B", "G"}),
    "green": frozenset({"B", "G"}),
    "red": frozenset({"B", "G"}),
    "rededge": frozenset({"B", "G", "W"}),
    "nir": frozenset({"G", "W"}),
}


@dataclass(frozen=True)
class CalibrationLine:
    slope: float
    intercept: float
    n_points: int
    residual_mape: float  # percent

    def __post_init__(self):
        if self.n_points < 1:
            raise RadcalError("a calibration line needs at least one point")

    @classmethod
    def identity(cls) -> "CalibrationLine":
        return cls(1.0, 0.0, 1, 0.0)

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "n_points": self.n_points, "residual_mape": self.residual_mape}


@dataclass(frozen=True)
class TargetObservation:
    gradient: str
    estimated: float
    known: float
    band: BandSpec

    def __post_init__(self):
        if self.gradient not in GRADIENTS:
            raise RadcalError(f"unknown gradient {self.gradient!r}")
        if not 0 < self.known <= 1:
            raise RadcalError("known reflectance must lie in (0, 1]")


@dataclass
class ErrorMatrix:
    """MAPE (percent) of applying the line fitted at each reference setting
    (rows) to each target setting (columns). Rows whose fit was degenerate
    hold NaN when the matrix was built with ``on_degenerate="nan"``."""

    band: BandSpec
    reference_axis: list[ExposureSetting]
    target_axis: list[ExposureSetting]
    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != (len(self.reference_axis), len(self.target_axis)):
            raise RadcalError("matrix shape does not match its axes")
        finite = self.cells[np.isfinite(self.cells)]
        if finite.size and finite.min() < 0:
            raise RadcalError("MAPE cells must be non-negative")

    def cell(self, reference: ExposureSetting, target: ExposureSetting) -> float:
        return float(self.cells[self.reference_axis.index(reference),
                                self.target_axis.index(target)])

    def diagonal(self) -> np.ndarray:
        return np.array([self.cell(s, s) for s in self.reference_axis if s in self.target_axis])


def extract_roi_mean(image: ReflectanceImage | np.ndarray, roi: RegionSpec) -> float:
    values = image.values if isinstance(image, ReflectanceImage) else image
    pixels = roi.take(values)
    if pixels.size == 0:
        raise EmptyRoiError(f"ROI {roi.label!r} is empty")
    return float(np.mean(pixels))


def select_targets_for_band(band: BandSpec | str) -> frozenset[str]:
    return OBJECT_BASED_TARGETS[get_band(band).name]


def fit_elm(observations: Sequence[TargetObservation], mode: str = "multi_point") -> CalibrationLine:
    """Regress known reflectance on estimated reflectance.

    ``one_point`` forces the line through the origin with
    ``slope = sum(known) / sum(estimated)``; ``multi_point`` is unweighted
    ordinary least squares.
    """
    if not observations:
        raise DegenerateFitError("no observations to fit")
    x = np.array([o.estimated for o in observations], dtype=float)
    y = np.array([o.known for o in observations], dtype=float)
    if mode == "one_point":
        total = x.sum()
        if total == 0:
            raise DegenerateFitError("estimated reflectance sums to zero")
        slope, intercept = float(y.sum() / total), 0.0
    elif mode == "multi_point":
        if len(observations) < 2 or np.all(x == x[0]):
            raise DegenerateFitError("multi-point ELM needs at least two distinct estimates")
        slope, intercept = ols(x, y)
    else:
        raise RadcalError(f"unknown ELM mode {mode!r}")
    residual = mape(slope * x + intercept, y)
    return CalibrationLine(slope, intercept, len(observations), residual)


def ols(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0:
        raise DegenerateFitError("regressor has zero variance")
    slope = float(dx @ (y - ym)) / sxx
    return slope, float(ym - slope * xm)


def apply_calibration(line: CalibrationLine, values):
    out = line.slope * np.asarray(values, dtype=float) + line.intercept
    return float(out) if out.ndim == 0 else out


def r_squared(predicted, actual) -> float:
    """Coefficient of determination of ``predicted`` against ``actual``."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or a.size < 2:
        raise RadcalError("r_squared needs equal-length vectors of at least two values")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0:
        raise ZeroVarianceError("actual values are constant")
    return 1.0 - float(np.sum((p - a) ** 2)) / ss_tot


def mape(predicted, actual) -> float:
    """Mean absolute percentage error, in percent."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or a.size < 1:
        raise RadcalError("mape needs equal-length non-empty vectors")
    if np.any(a == 0):
        raise ZeroActualError("actual contains zero")
    return float(np.mean(np.abs((p - a) / a)) * 100.0)


def _subset(obs: Sequence[TargetObservation], gradients) -> list[TargetObservation]:
    chosen = [o for o in obs if o.gradient in gradients]
    missing = set(gradients) - {o.gradient for o in chosen}
    if missing:
        raise RadcalError(f"observations lack gradients {sorted(missing)}")
    return chosen


def cross_calibration_matrix(
    reference_sets: Mapping[ExposureSetting, Sequence[TargetObservation]],
    target_sets: Mapping[ExposureSetting, Sequence[TargetObservation]],
    band: BandSpec | str,
    ground_truth: Mapping[str, float],
    *,
    on_degenerate: str = "raise",
    max_workers: int | None = None,
) -> ErrorMatrix:
    """Object-based ELM from each reference setting evaluated on each target setting.

    Only the band's object-based gradients are used, both to fit and to
    score. ``on_degenerate="nan"`` fills rows whose reference estimates are
    all equal (fully saturated captures) with NaN instead of raising.
    """
    band = get_band(band)
    gradients = sorted(select_targets_for_band(band))
    refs = list(reference_sets)
    tgts = list(target_sets)

    target_vals = []
    for s in tgts:
        chosen = _subset(target_sets[s], gradients)
        target_vals.append((np.array([o.estimated for o in chosen]),
                            np.array([ground_truth[o.gradient] for o in chosen])))

    def row(ref):
        chosen = _subset(reference_sets[ref], gradients)
        fit_obs = [TargetObservation(o.gradient, o.estimated, ground_truth[o.gradient], band)
                   for o in chosen]
        try:
            line = fit_elm(fit_obs, "multi_point")
        except DegenerateFitError:
            if on_degenerate == "nan":
                return np.full(len(tgts), np.nan)
            raise
        return np.array([mape(apply_calibration(line, est), known) for est, known in target_vals])

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(row, refs))
    else:
        rows = [row(r) for r in refs]
    return ErrorMatrix(band, refs, tgts, np.vstack(rows) if rows else np.empty((0, len(tgts))))


def observations_from_sweep(sweep, truths: Mapping[str, float]) -> dict[ExposureSetting, list[TargetObservation]]:
    """Per-setting target observations from a :class:`~radcal.sensor.SweepRecord`."""
    from .sensor import GRADIENT_LABELS

    out: dict[ExposureSetting, list[TargetObservation]] = {}
    for p in sweep.points:
        out[p.setting] = [
            TargetObservation(g, p.estimates[label], truths[g], sweep.band)
            for g, label in GRADIENT_LABELS.items() if label in p.estimates
        ]
    return out
