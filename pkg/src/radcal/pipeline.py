"""End-to-end experiments on a :class:`~radcal.config.RunConfig`.

Each ``compute_*`` function is pure given the config and returns in-memory
results; each ``write_*`` function serializes them under an output
directory. The CLI is a thin layer over these pairs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .elm import (
    GRADIENTS,
    CalibrationLine,
    ErrorMatrix,
    TargetObservation,
    apply_calibration,
    cross_calibration_matrix,
    extract_roi_mean,
    fit_elm,
    mape,
    observations_from_sweep,
    r_squared,
    select_targets_for_band,
)
from .errors import EmptyWindowError
from .exposure import ExposureWindow, OnsetReport, ideal_exposure_window, onset_report
from .io import (
    dumps_json,
    ensure_dir,
    error_matrix_to_dict,
    write_csv,
    write_error_matrix_csv,
    write_json,
    write_plot_means_csv,
    write_raw_image,
    write_sweep_csv,
)
from .radiometry import (
    BAND_ORDER,
    FULL_SCALE_DN,
    ExposureSetting,
    crp_correction_factor,
    dn_to_radiance,
    get_band,
    radiance_to_reflectance,
)
from .regions import RegionSpec
from .sensor import (
    GRADIENT_LABELS,
    ReflectanceScene,
    SceneRegion,
    SweepRecord,
    panel_scene,
    run_exposure_sweep,
    simulate_capture,
)
from .vi import REQUIRED_BANDS, TGI_UNITS, PlotMean, PlotRegressionResult, VIKind, \
    plot_level_aggregate, regress_vi_vs_reference, vi_image

THREADS_ENV = "RADCAL_THREADS"


def worker_count() -> int:
    """Thread count: ``RADCAL_THREADS`` if set, else the CPU count (at most 8)."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def _band_index(band: str) -> int:
    return BAND_ORDER.index(band)


# -- simulate ---------------------------------------------------------------------------

def write_simulation(config: RunConfig, out) -> dict:
    """Scene and panel captures for every band and sweep setting."""
    out = ensure_dir(out)
    scene, profile = config.scene(), config.profile()
    sw = config.section("sweep")
    panel = panel_scene(scene.width, scene.height,
                        sw["crp_known"] if sw["crp_reflectance"] is None else sw["crp_reflectance"])
    files = []
    for band in config.bands:
        bdir = ensure_dir(out / "raw" / band)
        irradiance = config.section("irradiance")[band]
        for gi, gain in enumerate(sw["gains"]):
            for ei, exposure in enumerate(sw["exposures_ms"]):
                st = ExposureSetting(gain=float(gain), exposure_time=float(exposure))
                key = (_band_index(band), gi, ei)
                for kind, sc, cat in (("crp", panel, "crp"), ("scene", scene, "targets")):
                    raw = simulate_capture(sc, band, irradiance, st, profile, object_category=cat,
                                           rng_key=(*key, 0 if kind == "crp" else 1))
                    name = f"{st.label}_{kind}.pgm"
                    write_raw_image(raw, bdir / name)
                    files.append(f"raw/{band}/{name}")
    rois = {label: roi.to_dict() for label, roi in sorted(scene.rois.items())}
    rois["crp"] = panel.rois["crp"].to_dict()
    manifest = {"files": files, "rois": rois,
                "truths": {b: config.truths(b) for b in config.bands},
                "crp_known": sw["crp_known"], "seed": config.seed}
    write_json(manifest, out / "manifest.json")
    return manifest


# -- sweep --------------------------------------------------------------------------------

@dataclass
class BandSweepResult:
    sweep: SweepRecord
    onsets: OnsetReport
    windows: list[ExposureWindow]
    window_errors: list[dict] = field(default_factory=list)

    def window(self, gain: float, mode: str) -> ExposureWindow | None:
        for w in self.windows:
            if w.gain == gain and w.mode == mode:
                return w
        return None


def compute_sweep(config: RunConfig, band: str) -> BandSweepResult:
    sw, an = config.section("sweep"), config.section("analysis")
    sweep = run_exposure_sweep(
        config.scene(), band, config.section("irradiance")[band], sw["gains"], sw["exposures_ms"],
        config.profile(), sw["crp_known"], crp_reflectance=sw["crp_reflectance"],
        max_workers=worker_count(),
    )
    truths = config.truths(band)
    onsets = onset_report(sweep, truths, an["tolerance"], epsilon=an["saturation_epsilon"])
    windows, failures = [], []
    for gain in sweep.gains():
        for mode in ("full_scale", "object_based"):
            try:
                windows.append(ideal_exposure_window(
                    sweep, mode, truths, gain, an["tolerance"],
                    an["under_exposure_floor_dn"] / FULL_SCALE_DN, epsilon=an["saturation_epsilon"],
                ))
            except EmptyWindowError as exc:
                failures.append({"band": band, "gain": gain, "mode": mode, "error": str(exc)})
    return BandSweepResult(sweep, onsets, windows, failures)


def write_sweep(results: dict[str, BandSweepResult], out) -> None:
    out = ensure_dir(out)
    windows = []
    for band, res in results.items():
        write_sweep_csv(res.sweep, out / f"sweep_{band}.csv")
        write_json(res.onsets.to_dict(), out / f"onsets_{band}.json")
        windows += [w.to_dict() for w in res.windows] + res.window_errors
    write_json({"windows": windows}, out / "windows.json")


# -- cross-calibration matrices ------------------------------------------------------

@dataclass
class CrossmatResult:
    matrix: ErrorMatrix
    sweep: BandSweepResult
    in_window_max: float | None  # largest MAPE over cells with both settings in window


def in_window_cells(matrix: ErrorMatrix, sweep: BandSweepResult, mode: str) -> np.ndarray:
    """Boolean mask of cells whose reference and target settings both sit in their gain's window."""
    def inside(s: ExposureSetting) -> bool:
        w = sweep.window(s.gain, mode)
        return w is not None and w.contains(s.exposure_time)

    rows = np.array([inside(s) for s in matrix.reference_axis])
    cols = np.array([inside(s) for s in matrix.target_axis])
    return rows[:, None] & cols[None, :]


def compute_crossmat(config: RunConfig, band: str, sweep: BandSweepResult | None = None) -> CrossmatResult:
    sweep = sweep or compute_sweep(config, band)
    truths = config.truths(band)
    obs = observations_from_sweep(sweep.sweep, truths)
    matrix = cross_calibration_matrix(obs, obs, band, truths, on_degenerate="nan",
                                      max_workers=worker_count())
    mask = in_window_cells(matrix, sweep, config.section("analysis")["window_mode"])
    worst = float(np.nanmax(matrix.cells[mask])) if mask.any() else None
    return CrossmatResult(matrix, sweep, worst)


def plotdata_rows(results):
    """Long-format rows for sweeps (series = region) and matrices (series = target setting)."""
    for item in results:
        if isinstance(item, SweepRecord):
            for p in item.points:
                for region, est in p.estimates.items():
                    yield ("sweep", item.band.name, float(p.gain), float(p.exposure_time), region,
                           float(est))
        elif isinstance(item, ErrorMatrix):
            for i, ref in enumerate(item.reference_axis):
                for j, tgt in enumerate(item.target_axis):
                    yield ("matrix", item.band.name, ref.gain, ref.exposure_time, tgt.label,
                           float(item.cells[i, j]))
        else:
            raise TypeError(f"cannot emit plot data for {type(item).__name__}")


PLOTDATA_HEADER = ("kind", "band", "gain", "exposure_ms", "series", "value")


def emit_plotdata(results, path) -> None:
    write_csv(path, PLOTDATA_HEADER, plotdata_rows(results))


def write_crossmat(results: dict[str, CrossmatResult], out) -> None:
    out = ensure_dir(out)
    summary = {}
    for band, res in results.items():
        write_error_matrix_csv(res.matrix, out / f"matrix_{band}.csv")
        write_json(error_matrix_to_dict(res.matrix), out / f"matrix_{band}.json")
        summary[band] = {"in_window_max_mape": res.in_window_max}
    emit_plotdata([r.sweep.sweep for r in results.values()] + [r.matrix for r in results.values()],
                  out / "plotdata.csv")
    write_json(summary, out / "crossmat_summary.json")


# -- calibrate -----------------------------------------------------------------------------

@dataclass
class BandCalibration:
    band: str
    setting: ExposureSetting
    line: CalibrationLine
    fitted_gradients: list[str]
    reflectance: np.ndarray  # calibrated image
    roi_before: dict[str, float]
    roi_after: dict[str, float]
    truths: dict[str, float]

    def metrics(self, gradients=GRADIENTS) -> dict:
        after = np.array([self.roi_after[g] for g in gradients])
        truth = np.array([self.truths[g] for g in gradients])
        return {"mape": mape(after, truth), "r_squared": r_squared(after, truth)}

    def recovered_distortion(self) -> dict:
        """The affine map undone by the line, i.e. its inverse."""
        return {"slope": 1.0 / self.line.slope, "offset": -self.line.intercept / self.line.slope}

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "gain": self.setting.gain,
            "exposure_ms": self.setting.exposure_time,
            "fit": self.fitted_gradients,
            "line": self.line.to_dict(),
            "recovered_distortion": self.recovered_distortion(),
            "roi_before": self.roi_before,
            "roi_after": self.roi_after,
            "truths": self.truths,
            "fitted_targets": self.metrics(self.fitted_gradients),
            "all_targets": self.metrics(),
        }


def capture_reflectance(config: RunConfig, scene: ReflectanceScene, band: str,
                        setting: ExposureSetting, rng_offset: int = 0) -> np.ndarray:
    """Panel-corrected reflectance image of ``scene`` at one setting."""
    sw = config.section("sweep")
    profile = config.profile()
    irradiance = config.section("irradiance")[band]
    panel = panel_scene(scene.width, scene.height,
                        sw["crp_known"] if sw["crp_reflectance"] is None else sw["crp_reflectance"])
    key = (_band_index(band), 100 + rng_offset)
    crp_raw = simulate_capture(panel, band, irradiance, setting, profile, object_category="crp",
                               rng_key=(*key, 0))
    raw = simulate_capture(scene, band, irradiance, setting, profile, rng_key=(*key, 1))
    factor = crp_correction_factor(dn_to_radiance(crp_raw), panel.rois["crp"], sw["crp_known"])
    return radiance_to_reflectance(dn_to_radiance(raw), factor).values


def calibrate_image(distorted: np.ndarray, scene: ReflectanceScene, band: str,
                    truths: dict[str, float], fit: str = "object_based"):
    """Fit an ELM on the target ROIs of ``distorted`` and apply it to the whole image."""
    gradients = sorted(select_targets_for_band(band)) if fit != "all_targets" else list(GRADIENTS)
    before = {g: extract_roi_mean(distorted, scene.rois[GRADIENT_LABELS[g]]) for g in GRADIENTS}
    obs = [TargetObservation(g, before[g], truths[g], get_band(band)) for g in gradients]
    line = fit_elm(obs, "one_point" if fit == "one_point" else "multi_point")
    calibrated = apply_calibration(line, distorted)
    after = {g: extract_roi_mean(calibrated, scene.rois[GRADIENT_LABELS[g]]) for g in GRADIENTS}
    return line, gradients, calibrated, before, after


def compute_calibration(config: RunConfig, band: str) -> BandCalibration:
    cal = config.section("calibrate")
    scene = config.scene()
    setting = ExposureSetting(gain=float(cal["gain"]), exposure_time=float(cal["exposures_ms"][band]))
    rho = capture_reflectance(config, scene, band, setting)
    distorted = cal["distortion"]["slope"] * rho + cal["distortion"]["offset"]
    truths = config.truths(band)
    line, gradients, calibrated, before, after = calibrate_image(distorted, scene, band, truths,
                                                                 cal["fit"])
    return BandCalibration(band, setting, line, gradients, calibrated, before, after, truths)


def write_calibration(results: dict[str, BandCalibration], out) -> None:
    out = ensure_dir(out)
    for band, res in results.items():
        np.save(out / f"reflectance_{band}.npy", res.reflectance, allow_pickle=False)
    write_json({band: res.to_dict() for band, res in results.items()}, out / "calibration.json")


# -- vegetation indices ------------------------------------------------------------------

# Canopy reflectance at zero and full vigor; plots interpolate between them.
_CANOPY_LOW = {"blue": 0.06, "green": 0.10, "red": 0.08, "rededge": 0.25, "nir": 0.30}
_CANOPY_HIGH = {"blue": 0.04, "green": 0.07, "red": 0.04, "rededge": 0.20, "nir": 0.60}


def plot_field(n_plots: int, plot_px: int, vigor: np.ndarray) -> tuple[ReflectanceScene, list[RegionSpec]]:
    """Plots tiled edge to edge on a near-square grid, each with uniform canopy."""
    cols = math.ceil(math.sqrt(n_plots))
    rows = math.ceil(n_plots / cols)
    regions, plots = [], []
    for i in range(rows * cols):
        rect = RegionSpec(f"plot{i:03d}", (i % cols) * plot_px, (i // cols) * plot_px, plot_px, plot_px)
        v = float(vigor[i]) if i < n_plots else 0.0
        refl = {b: _CANOPY_LOW[b] + v * (_CANOPY_HIGH[b] - _CANOPY_LOW[b]) for b in BAND_ORDER}
        regions.append(SceneRegion("canopy", rect, refl))
        if i < n_plots:
            plots.append(rect)
    return ReflectanceScene(cols * plot_px, rows * plot_px, regions), plots


@dataclass
class VIResult:
    kind: VIKind
    plot_means: list[PlotMean]
    reference: np.ndarray
    regression: PlotRegressionResult

    def to_dict(self) -> dict:
        units = TGI_UNITS if self.kind is VIKind.TGI else "ratio"
        return {"vi_kind": self.kind.value, "vi_units": units, **self.regression.to_dict()}


def compute_vi_experiment(config: RunConfig, seed: int | None = None) -> VIResult:
    """Plot-level index from simulated captures regressed on a synthetic reference.

    The reference is ``reference_slope * index + reference_intercept`` plus
    Gaussian noise, all drawn from ``seed`` (the config seed by default).
    """
    v = config.section("vi")
    cal = config.section("calibrate")
    kind = VIKind(v["kind"])
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    vigor = rng.uniform(0.0, 1.0, v["n_plots"])
    scene, plots = plot_field(v["n_plots"], v["plot_px"], vigor)
    cfg = config.with_seed(seed)
    bands = {}
    for band in REQUIRED_BANDS[kind]:
        st = ExposureSetting(gain=float(cal["gain"]), exposure_time=float(cal["exposures_ms"][band]))
        bands[band] = capture_reflectance(cfg, scene, band, st, rng_offset=1)
    means = plot_level_aggregate(vi_image(kind, bands), plots)
    x = np.array([m.mean for m in means])
    reference = (v["reference_slope"] * x + v["reference_intercept"]
                 + rng.normal(0.0, v["reference_noise_sigma"], x.size))
    return VIResult(kind, means, reference, regress_vi_vs_reference(x, reference))


def write_vi(result: VIResult, out) -> None:
    out = ensure_dir(out)
    write_plot_means_csv([(m.plot_id, result.kind.value, m.mean, m.n_pixels) for m in result.plot_means],
                         out / f"plots_{result.kind.value}.csv")
    write_json(result.to_dict(), out / "vi_regression.json")


# -- consolidated report ---------------------------------------------------------------

def compute_report(config: RunConfig) -> dict:
    bands = {}
    for band in config.bands:
        sweep = compute_sweep(config, band)
        cross = compute_crossmat(config, band, sweep)
        calib = compute_calibration(config, band)
        bands[band] = {
            "onsets": sweep.onsets.to_dict()["onsets"],
            "windows": [w.to_dict() for w in sweep.windows] + sweep.window_errors,
            "in_window_max_mape": cross.in_window_max,
            "calibration": {k: calib.to_dict()[k] for k in ("line", "recovered_distortion",
                                                           "fitted_targets", "all_targets")},
        }
    kind = VIKind(config.section("vi")["kind"])
    missing = [b for b in REQUIRED_BANDS[kind] if b not in config.bands]
    if missing:
        vi = {"skipped": f"{kind.value} needs bands {missing} that the config does not select"}
    else:
        vi = compute_vi_experiment(config).to_dict()
    return {"seed": config.seed, "bands": bands, "vi": vi}


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps_json(report), encoding="utf-8")
