"""Forward model of image formation and the synthetic exposure sweep.

``simulate_capture`` is the algebraic inverse of :func:`radcal.radiometry.dn_to_radiance`
followed by full-scale clipping, optional Gaussian read noise and 16-bit
round-to-nearest quantization::

    L_true = rho * E / pi
    P      = clip(P_BL + L_true * k(r) * g * (t_e + a2 y - a3 t_e y) / a1, P_BL, 1)

The default fixture (``default_profile``, ``default_scene``) is a small
five-band sensor whose saturation exposures sit inside the 15-point sweep
grid for both gains.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LayoutOverflowError, RadcalError, SceneCoverageError
from .radiometry import (
    BAND_ORDER,
    BANDS,
    FULL_SCALE_DN,
    BandSpec,
    CaptureMeta,
    ExposureSetting,
    RadCalCoeffs,
    RawImage,
    VignetteModel,
    crp_correction_factor,
    dn_to_radiance,
    get_band,
    radiance_to_reflectance,
)
from .regions import DEFAULT_CM_PER_PIXEL, RegionSpec

SCENE_LABELS = ("black_target", "gray_target", "white_target", "crp", "canopy", "soil")
GRADIENT_LABELS = {"B": "black_target", "G": "gray_target", "W": "white_target"}

# Reflectance ratios of the B/G/W field targets, per band.
TABLE1_2021 = {
    "blue": {"B": 0.08, "G": 0.28, "W": 0.53},
    "green": {"B": 0.08, "G": 0.26, "W": 0.50},
    "red": {"B": 0.08, "G": 0.23, "W": 0.46},
    "rededge": {"B": 0.09, "G": 0.23, "W": 0.45},
    "nir": {"B": 0.09, "G": 0.21, "W": 0.42},
}
TABLE1_2022 = {
    "blue": {"B": 0.08, "G": 0.33, "W": 0.86},
    "green": {"B": 0.08, "G": 0.31, "W": 0.86},
    "red": {"B": 0.08, "G": 0.28, "W": 0.84},
    "rededge": {"B": 0.08, "G": 0.27, "W": 0.82},
    "nir": {"B": 0.08, "G": 0.25, "W": 0.85},
}

# Typical early-season cotton canopy and bare soil.
DEFAULT_BACKGROUND = {
    "canopy": {"blue": 0.04, "green": 0.08, "red": 0.05, "rededge": 0.25, "nir": 0.45},
    "soil": {"blue": 0.10, "green": 0.14, "red": 0.18, "rededge": 0.22, "nir": 0.26},
}

# Exposure axis (ms) of the reference sweep, used for both gains.
DEFAULT_EXPOSURE_GRID = (
    0.068, 0.090, 0.135, 0.180, 0.248, 0.315, 0.428, 0.585,
    0.765, 0.990, 1.395, 1.890, 2.50, 3.289, 4.386,
)
DEFAULT_GAINS = (1.0, 2.0)

# Downwelling irradiance per band, µW/cm²/nm, clear sky near solar noon.
DEFAULT_IRRADIANCE = {"blue": 120.0, "green": 130.0, "red": 125.0, "rededge": 110.0, "nir": 95.0}

DEFAULT_BLACK_LEVEL = 4096 / FULL_SCALE_DN
# a1 per band puts full-scale clipping of the 2021 white target at roughly
# 0.45/0.40/0.46/0.54/0.54 ms (gain 1x) for blue/green/red/rededge/nir.
DEFAULT_A1 = {"blue": 9.72, "green": 8.83, "red": 9.0, "rededge": 9.1, "nir": 7.3}

# The synthetic reference panel is darker than the black target so that it
# saturates last in a sweep; see README "Synthetic fixture".
DEFAULT_CRP_REFLECTANCE = 0.02


@dataclass(frozen=True)
class SceneRegion:
    label: str
    rect: RegionSpec
    reflectance: Mapping[str, float]  # band name -> ratio

    def __post_init__(self):
        if self.label not in SCENE_LABELS:
            raise RadcalError(f"unknown scene label {self.label!r}")
        for band, value in self.reflectance.items():
            if not 0 <= value <= 1:
                raise RadcalError(f"{self.label} reflectance {value} in {band} outside [0, 1]")


@dataclass
class ReflectanceScene:
    width: int
    height: int
    regions: list[SceneRegion]
    rois: dict[str, RegionSpec] = field(default_factory=dict)

    def __post_init__(self):
        for i, reg in enumerate(self.regions):
            if not reg.rect.inside(self.width, self.height):
                raise LayoutOverflowError(f"region {reg.label} exceeds the scene bounds")
            for other in self.regions[:i]:
                if reg.rect.overlaps(other.rect):
                    raise RadcalError(f"regions {other.label} and {reg.label} overlap")
        for label, roi in self.rois.items():
            if not any(r.label == label and r.rect.contains(roi) for r in self.regions):
                raise RadcalError(f"ROI {label!r} is not strictly inside a {label} region")

    def rasterize(self, band: BandSpec | str) -> np.ndarray:
        name = get_band(band).name
        rho = np.full((self.height, self.width), np.nan)
        for reg in self.regions:
            if name not in reg.reflectance:
                raise RadcalError(f"region {reg.label} has no {name} reflectance")
            rho[reg.rect.slices()] = reg.reflectance[name]
        if np.isnan(rho).any():
            raise SceneCoverageError("scene regions do not cover the image")
        return rho

    def truth(self, label: str, band: BandSpec | str) -> float:
        name = get_band(band).name
        for reg in self.regions:
            if reg.label == label:
                return float(reg.reflectance[name])
        raise RadcalError(f"scene has no {label!r} region")


@dataclass(frozen=True)
class TargetLayout:
    """Geometry of a row of B/G/W targets on a soil/canopy background."""

    width: int = 132
    height: int = 72
    target_px: int = 29
    gap_px: int = 10
    roi_px: int = 17

    @classmethod
    def from_physical(cls, width: int, height: int, target_cm: float = 60.0,
                      roi_cm: float = 35.0, gap_cm: float = 20.0,
                      cm_per_pixel: float = DEFAULT_CM_PER_PIXEL) -> "TargetLayout":
        px = lambda cm: max(1, int(round(cm / cm_per_pixel)))  # noqa: E731
        return cls(width, height, px(target_cm), px(gap_cm), px(roi_cm))


@dataclass
class SensorProfile:
    coeffs: RadCalCoeffs
    vignette: VignetteModel = field(default_factory=VignetteModel)
    bands: tuple[BandSpec, ...] = tuple(BANDS.values())
    band_coeffs: Mapping[str, RadCalCoeffs] = field(default_factory=dict)
    noise_sigma: float = 0.0  # normalized DN units
    seed: int = 0
    bit_depth: int = 16

    def __post_init__(self):
        if self.bit_depth != 16:
            raise RadcalError("only 16-bit sensors are modeled")
        if self.noise_sigma < 0:
            raise RadcalError("noise sigma must be non-negative")

    def coeffs_for(self, band: BandSpec | str) -> RadCalCoeffs:
        return self.band_coeffs.get(get_band(band).name, self.coeffs)


@dataclass(frozen=True)
class SweepPoint:
    gain: float
    exposure_time: float
    estimates: Mapping[str, float]  # ROI label -> mean reflectance
    clip_fraction: Mapping[str, float]
    mean_signal: Mapping[str, float]  # mean (P - P_BL) over the ROI
    crp_clip_fraction: float
    correction_factor: float

    @property
    def setting(self) -> ExposureSetting:
        return ExposureSetting(gain=self.gain, exposure_time=self.exposure_time)


@dataclass
class SweepRecord:
    band: BandSpec
    points: list[SweepPoint]
    crp_known: float

    def __post_init__(self):
        for gain in self.gains():
            exps = [p.exposure_time for p in self.points if p.gain == gain]
            if any(b <= a for a, b in zip(exps, exps[1:])):
                raise RadcalError(f"exposures must be strictly increasing at gain {gain:g}")

    def gains(self) -> list[float]:
        return sorted({p.gain for p in self.points})

    def regions(self) -> list[str]:
        return list(self.points[0].estimates) if self.points else []

    def series(self, gain: float) -> list[SweepPoint]:
        return [p for p in self.points if p.gain == gain]

    def exposures(self, gain: float) -> np.ndarray:
        return np.array([p.exposure_time for p in self.series(gain)])

    def estimates(self, region: str, gain: float) -> np.ndarray:
        return np.array([p.estimates[region] for p in self.series(gain)])

    def clip_fractions(self, region: str, gain: float) -> np.ndarray:
        if region == "crp":
            return np.array([p.crp_clip_fraction for p in self.series(gain)])
        return np.array([p.clip_fraction[region] for p in self.series(gain)])

    def settings(self) -> list[ExposureSetting]:
        return [p.setting for p in self.points]


def _noise_rng(profile: SensorProfile, key: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([profile.seed, *key]))


def simulate_capture(
    scene: ReflectanceScene,
    band: BandSpec | str,
    irradiance: float,
    setting: ExposureSetting,
    profile: SensorProfile,
    *,
    object_category: str = "targets",
    rng_key: Sequence[int] = (),
) -> RawImage:
    """Render one raw capture of ``scene``.

    Noise, when enabled, is drawn from a generator seeded by
    ``(profile.seed, *rng_key)``, so identical inputs give identical images.
    """
    band = get_band(band)
    coeffs = profile.coeffs_for(band)
    meta = CaptureMeta(
        band=band, setting=setting, irradiance=float(irradiance), coeffs=coeffs,
        width=scene.width, height=scene.height, vignette=profile.vignette,
        object_category=object_category,
    )
    coeffs.validate(scene.height, [setting.exposure_time])
    radiance = scene.rasterize(band) * irradiance / math.pi
    falloff = profile.vignette.falloff_map(scene.width, scene.height)
    rows = np.arange(scene.height, dtype=float)[:, None]
    denom = coeffs.denominator(setting.exposure_time, rows)
    signal = radiance * falloff * setting.gain * denom / coeffs.a1
    p = np.clip(coeffs.black_level + signal, coeffs.black_level, 1.0)
    if profile.noise_sigma > 0:
        rng = _noise_rng(profile, rng_key)
        p = np.clip(p + rng.normal(0.0, profile.noise_sigma, p.shape), 0.0, 1.0)
    clipped = p >= 1.0
    dn = np.rint(p * FULL_SCALE_DN)
    image = RawImage(dn / FULL_SCALE_DN, meta)
    image.clipped = clipped
    return image


def generate_target_scene(
    layout: TargetLayout,
    target_reflectances: Mapping[str, Mapping[str, float]],
    background: Mapping[str, Mapping[str, float]] | None = None,
) -> ReflectanceScene:
    """Three targets in a row, soil above and around them, canopy below.

    ``target_reflectances`` maps band -> {"B", "G", "W"} -> ratio and
    ``background`` maps {"soil", "canopy"} -> band -> ratio.
    """
    background = background or DEFAULT_BACKGROUND
    w, h, t, g = layout.width, layout.height, layout.target_px, layout.gap_px
    row_width = 3 * t + 2 * g
    if row_width > w or t + 2 > h:
        raise LayoutOverflowError(f"target row {row_width}x{t} does not fit {w}x{h}")
    if not 0 < layout.roi_px <= t - 2:
        raise LayoutOverflowError("ROI must sit strictly inside the target")
    x0 = (w - row_width) // 2
    y0 = (h - t) // 2

    def per_band(gradient):
        return {band: float(v[gradient]) for band, v in target_reflectances.items()}

    soil = dict(background["soil"])
    canopy = dict(background["canopy"])
    regions: list[SceneRegion] = []
    if y0 > 0:
        regions.append(SceneRegion("soil", RegionSpec("soil", 0, 0, w, y0), soil))
    if y0 + t < h:
        regions.append(SceneRegion("canopy", RegionSpec("canopy", 0, y0 + t, w, h - y0 - t), canopy))
    rois = {}
    x = x0
    if x0 > 0:
        regions.append(SceneRegion("soil", RegionSpec("soil", 0, y0, x0, t), soil))
    for i, gradient in enumerate("BGW"):
        label = GRADIENT_LABELS[gradient]
        rect = RegionSpec(label, x, y0, t, t)
        regions.append(SceneRegion(label, rect, per_band(gradient)))
        rois[label] = rect.shrink(layout.roi_px)
        x += t
        if i < 2:
            regions.append(SceneRegion("soil", RegionSpec("soil", x, y0, g, t), soil))
            x += g
    if x < w:
        regions.append(SceneRegion("soil", RegionSpec("soil", x, y0, w - x, t), soil))
    return ReflectanceScene(w, h, regions, rois)


def panel_scene(width: int, height: int, reflectance: float,
                roi_px: int | None = None) -> ReflectanceScene:
    """Frame-filling reference panel with a centred square ROI."""
    refl = {name: float(reflectance) for name in BAND_ORDER}
    rect = RegionSpec("crp", 0, 0, width, height)
    side = roi_px or max(1, min(width, height) // 2)
    return ReflectanceScene(width, height, [SceneRegion("crp", rect, refl)],
                            {"crp": rect.shrink(side)})


def run_exposure_sweep(
    scene: ReflectanceScene,
    band: BandSpec | str,
    irradiance: float,
    gain_values: Iterable[float],
    exposure_values: Sequence[float],
    profile: SensorProfile,
    crp_known: float,
    *,
    crp_reflectance: float | None = None,
    max_workers: int | None = None,
) -> SweepRecord:
    """Panel and scene captures at each (gain, exposure), run through the full chain.

    ``crp_reflectance`` is the panel's true reflectance and defaults to
    ``crp_known``; setting it differently injects a panel distortion.
    """
    band = get_band(band)
    exposures = [float(e) for e in exposure_values]
    if any(b <= a for a, b in zip(exposures, exposures[1:])):
        raise RadcalError("exposure list must be strictly increasing")
    panel = panel_scene(scene.width, scene.height,
                        crp_known if crp_reflectance is None else crp_reflectance)
    crp_roi = panel.rois["crp"]
    band_index = BAND_ORDER.index(band.name) if band.name in BAND_ORDER else 99
    jobs = [(gi, ei, float(g), e) for gi, g in enumerate(gain_values) for ei, e in enumerate(exposures)]

    def one(job):
        gi, ei, gain, exposure = job
        st = ExposureSetting(gain=gain, exposure_time=exposure)
        crp_raw = simulate_capture(panel, band, irradiance, st, profile,
                                   object_category="crp", rng_key=(band_index, gi, ei, 0))
        raw = simulate_capture(scene, band, irradiance, st, profile,
                               rng_key=(band_index, gi, ei, 1))
        factor = crp_correction_factor(dn_to_radiance(crp_raw), crp_roi, crp_known)
        rho = radiance_to_reflectance(dn_to_radiance(raw), factor).values
        black = raw.meta.coeffs.black_level
        est, clip, sig = {}, {}, {}
        for label, roi in scene.rois.items():
            est[label] = float(np.mean(roi.take(rho)))
            clip[label] = float(np.mean(roi.take(raw.clipped)))
            sig[label] = float(np.mean(roi.take(raw.pixels)) - black)
        return SweepPoint(gain, exposure, est, clip, sig,
                          float(np.mean(crp_roi.take(crp_raw.clipped))), factor)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            points = list(pool.map(one, jobs))
    else:
        points = [one(j) for j in jobs]
    return SweepRecord(band, points, crp_known)


def default_profile(noise_sigma: float = 0.0, seed: int = 0,
                    layout: TargetLayout | None = None) -> SensorProfile:
    layout = layout or TargetLayout()
    base = RadCalCoeffs(a1=10.0, a2=2e-5, a3=5e-5, black_level=DEFAULT_BLACK_LEVEL)
    band_coeffs = {
        name: RadCalCoeffs(a1=a1, a2=base.a2, a3=base.a3, black_level=base.black_level)
        for name, a1 in DEFAULT_A1.items()
    }
    vignette = VignetteModel(k=(0.0, -2e-5, 0.0, 0.0, 0.0, 0.0),
                             center_x=layout.width / 2.0, center_y=layout.height / 2.0)
    return SensorProfile(base, vignette, tuple(BANDS.values()), band_coeffs,
                         noise_sigma=noise_sigma, seed=seed)


def default_scene(table: Mapping[str, Mapping[str, float]] = TABLE1_2021,
                  layout: TargetLayout | None = None) -> ReflectanceScene:
    return generate_target_scene(layout or TargetLayout(), table)


def default_sweep(band: BandSpec | str, *, profile: SensorProfile | None = None,
                  scene: ReflectanceScene | None = None,
                  exposures: Sequence[float] = DEFAULT_EXPOSURE_GRID,
                  gains: Sequence[float] = DEFAULT_GAINS,
                  crp_known: float = DEFAULT_CRP_REFLECTANCE,
                  max_workers: int | None = None) -> SweepRecord:
    band = get_band(band)
    return run_exposure_sweep(
        scene or default_scene(), band, DEFAULT_IRRADIANCE[band.name], gains,
        exposures, profile or default_profile(), crp_known, max_workers=max_workers,
    )
