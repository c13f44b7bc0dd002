"""Camera model: vignette, DN to radiance, panel correction, reflectance.

Conventions used throughout the package:

* images are ``(rows, cols)`` arrays; pixel ``(x, y)`` is column ``x``, row ``y``
* pixel values are normalized, ``P = DN / 65535``
* exposure time is in milliseconds and is used in that unit inside the
  radiance model, so ``a2`` carries ms/row and ``a3`` 1/row
* reflectance is a ratio, never a percent
* radiance is expressed in units consistent with the irradiance it is paired
  with, so that ``reflectance = pi * L / E``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import (
    DenominatorNonPositiveError,
    EmptyRoiError,
    NonPositivePolynomialError,
    RadcalError,
    ZeroEstimatedReflectanceError,
    ZeroIrradianceError,
)
from .regions import RegionSpec

FULL_SCALE_DN = 65535
OBJECT_CATEGORIES = ("targets", "canopy", "soil", "crp", "mixed")


@dataclass(frozen=True)
class BandSpec:
    name: str
    center_wavelength: float  # nm
    fwhm: float  # nm

    def __post_init__(self):
        if self.fwhm <= 0:
            raise RadcalError(f"band {self.name}: fwhm must be positive")
        if not 350 <= self.center_wavelength <= 2500:
            raise RadcalError(f"band {self.name}: center outside 350-2500 nm")

    @property
    def interval(self) -> tuple[float, float]:
        half = self.fwhm / 2.0
        return (self.center_wavelength - half, self.center_wavelength + half)


# Five-band multispectral camera: center wavelength / FWHM in nm.
BANDS: dict[str, BandSpec] = {
    "blue": BandSpec("blue", 475.0, 20.0),
    "green": BandSpec("green", 560.0, 20.0),
    "red": BandSpec("red", 668.0, 10.0),
    "rededge": BandSpec("rededge", 717.0, 10.0),
    "nir": BandSpec("nir", 840.0, 40.0),
}
BAND_ORDER = tuple(BANDS)


def get_band(band: BandSpec | str) -> BandSpec:
    if isinstance(band, BandSpec):
        return band
    try:
        return BANDS[band]
    except KeyError:
        raise RadcalError(f"unknown band {band!r}; expected one of {BAND_ORDER}") from None


@dataclass(frozen=True, order=True)
class ExposureSetting:
    """Exposure time in ms and analog gain multiplier.

    Ordering sorts by gain first, then exposure, which is the axis order
    used for cross-calibration matrices.
    """

    gain: float
    exposure_time: float

    def __post_init__(self):
        if self.exposure_time <= 0:
            raise RadcalError("exposure_time must be positive")
        if self.gain <= 0:
            raise RadcalError("gain must be positive")

    @property
    def label(self) -> str:
        return f"{self.gain:g}x{self.exposure_time:g}"

    @classmethod
    def from_label(cls, label: str) -> "ExposureSetting":
        gain, _, exposure = label.partition("x")
        return cls(float(gain), float(exposure))


def setting(exposure_ms: float, gain: float = 1.0) -> ExposureSetting:
    return ExposureSetting(gain=float(gain), exposure_time=float(exposure_ms))


@dataclass(frozen=True)
class VignetteModel:
    """Radial falloff ``k(r) = 1 + k0 r + k1 r^2 + ... + k5 r^6``."""

    k: tuple[float, float, float, float, float, float] = (0.0,) * 6
    center_x: float = 0.0
    center_y: float = 0.0

    def __post_init__(self):
        if len(self.k) != 6:
            raise RadcalError("vignette needs exactly six coefficients k0..k5")
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))

    def polynomial(self, r):
        return np.polynomial.polynomial.polyval(r, (1.0,) + self.k)

    def falloff_map(self, width: int, height: int) -> np.ndarray:
        """``k(r)`` for every pixel; raises if it is not strictly positive."""
        yy, xx = np.mgrid[0:height, 0:width]
        k = self.polynomial(radial_distance((xx, yy), self))
        if not np.all(k > 0):
            raise NonPositivePolynomialError("vignette polynomial non-positive inside image")
        return k

    def factor_map(self, width: int, height: int) -> np.ndarray:
        return 1.0 / self.falloff_map(width, height)


@dataclass(frozen=True)
class RadCalCoeffs:
    a1: float
    a2: float = 0.0
    a3: float = 0.0
    black_level: float = 0.0  # normalized

    def __post_init__(self):
        if not self.a1 > 0:
            raise RadcalError("a1 must be positive")
        if not 0 <= self.black_level < 1:
            raise RadcalError("black_level must lie in [0, 1)")

    def denominator(self, exposure_ms, rows):
        return exposure_ms + self.a2 * rows - self.a3 * exposure_ms * rows

    def validate(self, height: int, exposures_ms: Iterable[float]) -> None:
        rows = np.arange(height, dtype=float)
        for t in exposures_ms:
            if not np.all(self.denominator(t, rows) > 0):
                raise DenominatorNonPositiveError(
                    f"t_e={t} ms gives a non-positive denominator within {height} rows"
                )


@dataclass(frozen=True)
class CaptureMeta:
    band: BandSpec
    setting: ExposureSetting
    irradiance: float  # µW/cm²/nm
    coeffs: RadCalCoeffs
    width: int
    height: int
    vignette: VignetteModel = field(default_factory=VignetteModel)
    object_category: str = "mixed"

    def __post_init__(self):
        if not self.irradiance > 0:
            raise ZeroIrradianceError("irradiance must be positive")
        if self.width <= 0 or self.height <= 0:
            raise RadcalError("image dimensions must be positive")
        if self.object_category not in OBJECT_CATEGORIES:
            raise RadcalError(f"unknown object category {self.object_category!r}")


@dataclass
class RawImage:
    pixels: np.ndarray  # normalized P in [0, 1]
    meta: CaptureMeta
    clipped: np.ndarray | None = None  # set by the simulator

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.shape != (self.meta.height, self.meta.width):
            raise RadcalError(
                f"pixel grid {self.pixels.shape} does not match "
                f"{self.meta.height}x{self.meta.width} metadata"
            )
        if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > 1):
            raise RadcalError("normalized pixels must lie in [0, 1]")

    @property
    def dn(self) -> np.ndarray:
        return np.rint(self.pixels * FULL_SCALE_DN).astype(np.uint16)

    @classmethod
    def from_dn(cls, dn: np.ndarray, meta: CaptureMeta) -> "RawImage":
        return cls(np.asarray(dn, dtype=np.float64) / FULL_SCALE_DN, meta)


@dataclass
class RadianceImage:
    values: np.ndarray
    meta: CaptureMeta
    clamped_count: int = 0


@dataclass
class ReflectanceImage:
    values: np.ndarray  # ratio; may exceed 1
    meta: CaptureMeta
    correction_factor: float | None = None


def radial_distance(pixel, model: VignetteModel):
    """Euclidean distance of ``pixel=(x, y)`` from the vignette center."""
    x, y = pixel
    return np.hypot(np.asarray(x, dtype=float) - model.center_x,
                    np.asarray(y, dtype=float) - model.center_y)


def vignette_factor(pixel, model: VignetteModel):
    """Correction factor ``V = 1 / k(r)`` at ``pixel=(x, y)``."""
    k = model.polynomial(radial_distance(pixel, model))
    if np.any(np.asarray(k) <= 0):
        raise NonPositivePolynomialError(f"k(r) = {k} is not positive at {pixel}")
    return 1.0 / k


def dn_to_radiance(image: RawImage) -> RadianceImage:
    """Convert normalized pixels to radiance.

    ``L = V(x, y) * (a1 / g) * (P - P_BL) / (t_e + a2 y - a3 t_e y)``.
    Negative radiance from below-black-level noise is clamped to zero and
    counted in ``clamped_count``.
    """
    meta = image.meta
    c = meta.coeffs
    t_e = meta.setting.exposure_time
    rows = np.arange(meta.height, dtype=float)[:, None]
    denom = c.denominator(t_e, rows)
    if not np.all(denom > 0):
        raise DenominatorNonPositiveError(
            f"denominator non-positive for t_e={t_e} ms, a2={c.a2}, a3={c.a3}"
        )
    v = meta.vignette.factor_map(meta.width, meta.height)
    radiance = v * (c.a1 / meta.setting.gain) * (image.pixels - c.black_level) / denom
    negative = radiance < 0
    clamped = int(np.count_nonzero(negative))
    if clamped:
        radiance = np.where(negative, 0.0, radiance)
    return RadianceImage(radiance, meta, clamped)


def crp_correction_factor(
    crp_image: RadianceImage, crp_roi: RegionSpec, known_reflectance: float
) -> float:
    """Panel correction ``F = (pi * mean(L_roi) / E_crp) / known``."""
    if not 0 < known_reflectance <= 1:
        raise RadcalError("known panel reflectance must lie in (0, 1]")
    pixels = crp_roi.take(crp_image.values)
    if pixels.size == 0:
        raise EmptyRoiError("panel ROI is empty")
    estimated = math.pi * float(np.mean(pixels)) / crp_image.meta.irradiance
    if not estimated > 0:
        raise ZeroEstimatedReflectanceError("panel ROI has zero estimated reflectance")
    return estimated / known_reflectance


def radiance_to_reflectance(image: RadianceImage, correction_factor: float = 1.0) -> ReflectanceImage:
    """``rho = pi * (L / E) / F``; values above 1 are kept."""
    if not image.meta.irradiance > 0:
        raise ZeroIrradianceError("irradiance must be positive")
    if not correction_factor > 0:
        raise RadcalError("correction factor must be positive")
    rho = math.pi * image.values / image.meta.irradiance / correction_factor
    return ReflectanceImage(rho, image.meta, correction_factor)


def reflectance_from_raw(raw: RawImage, crp_raw: RawImage | None = None,
                         crp_roi: RegionSpec | None = None,
                         known_reflectance: float | None = None) -> ReflectanceImage:
    """Full chain; without a panel capture the correction factor is 1."""
    factor = 1.0
    if crp_raw is not None:
        if crp_roi is None or known_reflectance is None:
            raise RadcalError("panel correction needs an ROI and a known reflectance")
        factor = crp_correction_factor(dn_to_radiance(crp_raw), crp_roi, known_reflectance)
    return radiance_to_reflectance(dn_to_radiance(raw), factor)


def with_setting(meta: CaptureMeta, new: ExposureSetting) -> CaptureMeta:
    return replace(meta, setting=new)
