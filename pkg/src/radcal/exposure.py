"""Divergence and saturation onsets, ideal exposure windows, exposure histograms."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .elm import select_targets_for_band
from .errors import EmptyWindowError, RadcalError
from .radiometry import FULL_SCALE_DN, BandSpec, CaptureMeta
from .sensor import DEFAULT_EXPOSURE_GRID, GRADIENT_LABELS, SweepRecord

DEFAULT_TOLERANCE = 0.05
DEFAULT_SATURATION_EPSILON = 0.01
# At least 64 DN above black level, i.e. six effective bits of signal.
DEFAULT_UNDER_EXPOSURE_FLOOR = 64 / FULL_SCALE_DN
VISIBLE_BANDS = frozenset({"blue", "green", "red"})
MODES = ("full_scale", "object_based")


@dataclass(frozen=True)
class ExposureWindow:
    band: BandSpec
    gain: float
    mode: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.mode not in MODES:
            raise RadcalError(f"unknown window mode {self.mode!r}")
        if not 0 < self.lower <= self.upper:
            raise RadcalError("window needs 0 < lower <= upper")

    def contains(self, exposure_ms: float) -> bool:
        return self.lower <= exposure_ms <= self.upper

    def to_dict(self) -> dict:
        return {"band": self.band.name, "gain": self.gain, "mode": self.mode,
                "lower_ms": self.lower, "upper_ms": self.upper}


@dataclass
class OnsetReport:
    band: BandSpec
    # (region label, gain) -> (divergence onset ms, saturation onset ms)
    onsets: dict[tuple[str, float], tuple[float | None, float | None]] = field(default_factory=dict)

    def divergence(self, region: str, gain: float) -> float | None:
        return self.onsets[(region, gain)][0]

    def saturation(self, region: str, gain: float) -> float | None:
        return self.onsets[(region, gain)][1]

    def to_dict(self) -> dict:
        return {
            "band": self.band.name,
            "onsets": [
                {"region": region, "gain": gain,
                 "divergence_onset_ms": div, "saturation_onset_ms": sat}
                for (region, gain), (div, sat) in self.onsets.items()
            ],
        }


def _persistent_onset(flags: np.ndarray, exposures: np.ndarray) -> float | None:
    """First exposure from which ``flags`` stays true to the end of the series."""
    if flags.size == 0 or not flags[-1]:
        return None
    i = flags.size - 1
    while i > 0 and flags[i - 1]:
        i -= 1
    return float(exposures[i])


def _relative_error(sweep: SweepRecord, region: str, truth: float, gain: float) -> np.ndarray:
    if truth <= 0:
        raise RadcalError("truth reflectance must be positive")
    return np.abs(sweep.estimates(region, gain) - truth) / truth


def detect_divergence(sweep: SweepRecord, region: str, truth: float,
                      tolerance: float = DEFAULT_TOLERANCE, gain: float = 1.0) -> float | None:
    """Smallest exposure from which the relative error stays above ``tolerance``."""
    exposures = sweep.exposures(gain)
    if exposures.size == 0:
        raise RadcalError(f"sweep has no points at gain {gain:g}")
    return _persistent_onset(_relative_error(sweep, region, truth, gain) > tolerance, exposures)


def detect_saturation(sweep: SweepRecord, region: str, plateau: float | None = None,
                      epsilon: float = DEFAULT_SATURATION_EPSILON,
                      gain: float = 1.0) -> float | None:
    """Smallest exposure from which the estimate stays within ``epsilon`` of the plateau.

    The plateau defaults to the panel's known reflectance, the value every
    estimate collapses to once panel and scene are both clipped.
    """
    exposures = sweep.exposures(gain)
    if exposures.size == 0:
        raise RadcalError(f"sweep has no points at gain {gain:g}")
    plateau = sweep.crp_known if plateau is None else plateau
    near = np.abs(sweep.estimates(region, gain) - plateau) <= epsilon
    return _persistent_onset(near, exposures)


def onset_report(sweep: SweepRecord, truths: Mapping[str, float],
                 tolerance: float = DEFAULT_TOLERANCE, plateau: float | None = None,
                 epsilon: float = DEFAULT_SATURATION_EPSILON) -> OnsetReport:
    """Onsets for every gradient in ``truths`` (keyed "B"/"G"/"W") at every gain."""
    report = OnsetReport(sweep.band)
    for gain in sweep.gains():
        for gradient, truth in truths.items():
            label = GRADIENT_LABELS[gradient]
            report.onsets[(label, gain)] = (
                detect_divergence(sweep, label, truth, tolerance, gain),
                detect_saturation(sweep, label, plateau, epsilon, gain),
            )
    return report


def _rule(sweep, mode, truths, gain, tolerance, plateau, epsilon) -> np.ndarray:
    band = sweep.band.name

    def within(gradient):
        return _relative_error(sweep, GRADIENT_LABELS[gradient], truths[gradient], gain) <= tolerance

    if mode == "full_scale" or band not in VISIBLE_BANDS:
        ok = np.ones(sweep.exposures(gain).size, dtype=bool)
        for gradient in "BGW":
            ok &= within(gradient)
        return ok
    white = sweep.estimates(GRADIENT_LABELS["W"], gain)
    return within("G") & (np.abs(white - plateau) > epsilon)


def ideal_exposure_window(
    sweep: SweepRecord,
    mode: str,
    truths: Mapping[str, float],
    gain: float = 1.0,
    tolerance: float = DEFAULT_TOLERANCE,
    under_exposure_floor: float = DEFAULT_UNDER_EXPOSURE_FLOOR,
    plateau: float | None = None,
    epsilon: float = DEFAULT_SATURATION_EPSILON,
) -> ExposureWindow:
    """Exposure range whose captures keep the constrained targets accurate.

    ``full_scale``: black, gray and white all within ``tolerance``.
    ``object_based``: in visible bands the gray target within ``tolerance``
    and the white target not at the saturation plateau; in red edge and NIR
    all three targets within ``tolerance``.

    The lower bound is the first exposure where the darkest relevant target
    carries at least ``under_exposure_floor`` of mean signal above black
    level; the upper bound extends from there while the rule keeps holding.
    """
    if mode not in MODES:
        raise RadcalError(f"unknown window mode {mode!r}")
    exposures = sweep.exposures(gain)
    if exposures.size == 0:
        raise RadcalError(f"sweep has no points at gain {gain:g}")
    plateau = sweep.crp_known if plateau is None else plateau
    relevant = "BGW" if mode == "full_scale" else sorted(select_targets_for_band(sweep.band))
    darkest = GRADIENT_LABELS[min(relevant, key=lambda g: truths[g])]
    signal = np.array([p.mean_signal[darkest] for p in sweep.series(gain)])
    ok = _rule(sweep, mode, truths, gain, tolerance, plateau, epsilon)

    bright = np.flatnonzero(signal >= under_exposure_floor)
    if bright.size == 0 or not ok[bright[0]]:
        raise EmptyWindowError(
            f"no {mode} window for {sweep.band.name} at gain {gain:g}"
        )
    lo = hi = int(bright[0])
    while hi + 1 < exposures.size and ok[hi + 1]:
        hi += 1
    return ExposureWindow(sweep.band, gain, mode, float(exposures[lo]), float(exposures[hi]))


def snap_to_grid(exposure_ms: float, grid: Sequence[float]) -> float:
    grid = np.asarray(grid, dtype=float)
    return float(grid[int(np.argmin(np.abs(grid - exposure_ms)))])


def exposure_distribution_summary(
    metas: Iterable[CaptureMeta], grid: Sequence[float] | None = DEFAULT_EXPOSURE_GRID
) -> dict[tuple[str, str, float], dict[float, int]]:
    """Histogram of exposure times per (band, object category, gain).

    Exposures are snapped to the nearest ``grid`` value; pass ``grid=None``
    to bin on the raw values.
    """
    counts: dict[tuple[str, str, float], Counter] = {}
    for meta in metas:
        key = (meta.band.name, meta.object_category, meta.setting.gain)
        t = meta.setting.exposure_time
        counts.setdefault(key, Counter())[t if grid is None else snap_to_grid(t, grid)] += 1
    return {key: dict(sorted(c.items())) for key, c in sorted(counts.items())}
