"""Vegetation indices, plot-level aggregation and VI-vs-reference regression."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .elm import mape, ols, r_squared
from .errors import (
    DegenerateFitError,
    EmptyPlotError,
    MissingBandError,
    RadcalError,
    ZeroDenominatorError,
)
from .regions import RegionSpec


class VIKind(str, enum.Enum):
    NDVI = "NDVI"
    NDRE = "NDRE"
    TGI = "TGI"
    GNDVI = "GNDVI"
    CI_REDEDGE = "CI_rededge"
    CI_GREEN = "CI_green"
    RDVI = "RDVI"


REQUIRED_BANDS = {
    VIKind.NDVI: ("nir", "red"),
    VIKind.NDRE: ("nir", "rededge"),
    VIKind.TGI: ("blue", "green", "red"),
    VIKind.GNDVI: ("nir", "green"),
    VIKind.CI_REDEDGE: ("nir", "rededge"),
    VIKind.CI_GREEN: ("nir", "green"),
    VIKind.RDVI: ("nir", "red"),
}

# TGI uses reflectance ratios with the band-center wavelengths in nm, so its
# magnitude is only meaningful relative to other TGI values.
TGI_UNITS = "ratio*nm"


def _normalized_difference(a, b):
    return (a - b) / (a + b), a + b


def _evaluate(kind: VIKind, r: Mapping[str, np.ndarray]):
    """Return (value, denominator) for the index; denominator None if there is none."""
    if kind is VIKind.NDVI:
        return _normalized_difference(r["nir"], r["red"])
    if kind is VIKind.NDRE:
        return _normalized_difference(r["nir"], r["rededge"])
    if kind is VIKind.GNDVI:
        return _normalized_difference(r["nir"], r["green"])
    if kind is VIKind.CI_REDEDGE:
        return r["nir"] / r["rededge"] - 1.0, r["rededge"]
    if kind is VIKind.CI_GREEN:
        return r["nir"] / r["green"] - 1.0, r["green"]
    if kind is VIKind.RDVI:
        s = r["nir"] + r["red"]
        return (r["nir"] - r["red"]) / np.sqrt(s), s
    if kind is VIKind.TGI:
        value = -0.5 * ((668 - 475) * (r["red"] - r["green"]) - (668 - 560) * (r["red"] - r["blue"]))
        return value, None
    raise RadcalError(f"unsupported index {kind}")


def compute_vi(kind: VIKind | str, bands: Mapping[str, float | np.ndarray], *,
               on_zero: str = "raise"):
    """Evaluate an index on per-band reflectance ratios (scalars or arrays).

    With ``on_zero="nan"`` pixels whose denominator is zero (or negative
    under RDVI's square root) become NaN instead of raising.
    """
    kind = VIKind(kind)
    missing = [b for b in REQUIRED_BANDS[kind] if b not in bands]
    if missing:
        raise MissingBandError(f"{kind.value} needs bands {missing}")
    r = {b: np.asarray(bands[b], dtype=float) for b in REQUIRED_BANDS[kind]}
    with np.errstate(divide="ignore", invalid="ignore"):
        value, denom = _evaluate(kind, r)
    if denom is not None:
        bad = denom <= 0 if kind is VIKind.RDVI else denom == 0
        if np.any(bad):
            if on_zero != "nan":
                raise ZeroDenominatorError(f"{kind.value} denominator is zero")
            value = np.where(bad, np.nan, value)
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def vi_image(kind: VIKind | str, bands: Mapping[str, np.ndarray]) -> np.ndarray:
    return np.asarray(compute_vi(kind, bands, on_zero="nan"))


@dataclass(frozen=True)
class PlotMean:
    plot_id: str
    mean: float
    n_pixels: int
    n_excluded: int


def plot_level_aggregate(vi: np.ndarray, plots: Sequence[RegionSpec]) -> list[PlotMean]:
    """Mean index per plot; non-finite pixels are excluded and counted."""
    out = []
    for plot in plots:
        values = plot.take(vi)
        finite = np.isfinite(values)
        n = int(finite.sum())
        if n == 0:
            raise EmptyPlotError(f"plot {plot.label!r} has no finite pixels")
        out.append(PlotMean(plot.label, float(values[finite].mean()), n, int(values.size - n)))
    return out


@dataclass(frozen=True)
class PlotRegressionResult:
    slope: float
    intercept: float
    r_squared: float
    mape: float
    p_value: float
    slope_stderr: float
    n: int

    def slope_ci(self, level: float = 0.95) -> tuple[float, float]:
        half = stats.t.ppf(0.5 + level / 2.0, self.n - 2) * self.slope_stderr
        return (self.slope - half, self.slope + half)

    def to_dict(self) -> dict:
        lo, hi = self.slope_ci()
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "mape": self.mape, "p_value": self.p_value, "slope_stderr": self.slope_stderr,
                "slope_ci95": [lo, hi], "n": self.n}


def regress_vi_vs_reference(vi_means, reference) -> PlotRegressionResult:
    """OLS of the reference variable on plot-mean index values.

    The p-value is the two-sided Student-t test of zero slope with n-2
    degrees of freedom.
    """
    x = np.asarray(vi_means, dtype=float)
    y = np.asarray(reference, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise RadcalError("index means and reference must be equal-length vectors")
    n = x.size
    if n < 3:
        raise RadcalError("regression needs at least three plots")
    if np.all(x == x[0]):
        raise DegenerateFitError("index means are constant")
    slope, intercept = ols(x, y)
    predicted = slope * x + intercept
    err = mape(predicted, y)
    rss = float(np.sum((y - predicted) ** 2))
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = np.sqrt(rss / (n - 2) / sxx)
    if stderr == 0:
        p_value = 0.0
    else:
        p_value = float(2.0 * stats.t.sf(abs(slope / stderr), n - 2))
    r2 = r_squared(predicted, y)
    return PlotRegressionResult(slope, intercept, r2, err, min(max(p_value, 0.0), 1.0),
                                float(stderr), n)
