import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from radcal.errors import LayoutOverflowError, RadcalError, SceneCoverageError
from radcal.radiometry import FULL_SCALE_DN, RadCalCoeffs, VignetteModel, dn_to_radiance, setting
from radcal.regions import RegionSpec
from radcal.sensor import (
    DEFAULT_CRP_REFLECTANCE,
    DEFAULT_EXPOSURE_GRID,
    DEFAULT_IRRADIANCE,
    GRADIENT_LABELS,
    TABLE1_2021,
    ReflectanceScene,
    SceneRegion,
    SensorProfile,
    TargetLayout,
    default_profile,
    default_scene,
    generate_target_scene,
    panel_scene,
    run_exposure_sweep,
    simulate_capture,
)


def flat_profile(a1=10.0, bl=0.0625, sigma=0.0, seed=0):
    return SensorProfile(RadCalCoeffs(a1, 0.0, 0.0, bl), noise_sigma=sigma, seed=seed)


def quantization_bound(raw):
    """Radiance error from half a DN of rounding, per pixel."""
    m = raw.meta
    c = m.coeffs
    rows = np.arange(m.height, dtype=float)[:, None]
    v = m.vignette.factor_map(m.width, m.height)
    return v * c.a1 / m.setting.gain * (0.5 / FULL_SCALE_DN) / c.denominator(m.setting.exposure_time, rows)


class TestSimulateCapture:
    def test_long_exposure_clips_to_full_scale(self):
        scene = default_scene()
        raw = simulate_capture(scene, "blue", 120.0, setting(500.0), default_profile())
        assert np.all(raw.pixels == 1.0)
        assert raw.clipped.all()

    def test_zero_reflectance_sits_at_black_level(self):
        scene = panel_scene(10, 8, 0.0)
        raw = simulate_capture(scene, "nir", 95.0, setting(1.0), flat_profile(bl=4096 / 65535))
        assert np.all(raw.dn == 4096)

    def test_pixels_are_16_bit_grid_values(self):
        raw = simulate_capture(default_scene(), "red", 125.0, setting(0.2), default_profile())
        np.testing.assert_array_equal(raw.pixels * FULL_SCALE_DN, np.rint(raw.pixels * FULL_SCALE_DN))

    def test_roundtrip_within_one_quantization_step(self):
        scene = default_scene()
        profile = default_profile()
        for band in ("blue", "nir"):
            E = DEFAULT_IRRADIANCE[band]
            raw = simulate_capture(scene, band, E, setting(0.18), profile)
            assert not raw.clipped.any()
            L = dn_to_radiance(raw).values
            truth = scene.rasterize(band) * E / math.pi
            assert np.all(np.abs(L - truth) <= quantization_bound(raw) + 1e-9)

    def test_deterministic_given_seed(self):
        scene = default_scene()
        a = simulate_capture(scene, "green", 130.0, setting(0.3), default_profile(1e-3, seed=7), rng_key=(1, 2))
        b = simulate_capture(scene, "green", 130.0, setting(0.3), default_profile(1e-3, seed=7), rng_key=(1, 2))
        c = simulate_capture(scene, "green", 130.0, setting(0.3), default_profile(1e-3, seed=8), rng_key=(1, 2))
        np.testing.assert_array_equal(a.pixels, b.pixels)
        assert not np.array_equal(a.pixels, c.pixels)

    def test_noise_scale(self):
        scene = panel_scene(200, 200, 0.3)
        clean = simulate_capture(scene, "green", 130.0, setting(0.2), flat_profile())
        noisy = simulate_capture(scene, "green", 130.0, setting(0.2), flat_profile(sigma=2e-3, seed=3))
        assert np.std(noisy.pixels - clean.pixels) == pytest.approx(2e-3, rel=0.05)

    def test_invalid_noise(self):
        with pytest.raises(RadcalError):
            flat_profile(sigma=-1.0)

    @given(st.floats(0.0, 1.0), st.floats(0.05, 3.0), st.sampled_from([1.0, 2.0]))
    def test_roundtrip_property(self, rho, t, gain):
        scene = panel_scene(6, 4, rho)
        profile = flat_profile(a1=40.0)
        raw = simulate_capture(scene, "red", 50.0, setting(t, gain), profile)
        L = dn_to_radiance(raw).values
        truth = rho * 50.0 / math.pi
        ok = ~raw.clipped
        assert np.all(np.abs(L - truth)[ok] <= quantization_bound(raw)[ok] + 1e-9)


class TestScenes:
    def test_default_layout_regions_and_rois(self):
        scene = default_scene()
        assert set(scene.rois) == set(GRADIENT_LABELS.values())
        for roi in scene.rois.values():
            assert roi.width == roi.height == 17
        for gradient, label in GRADIENT_LABELS.items():
            assert scene.truth(label, "blue") == TABLE1_2021["blue"][gradient]

    def test_rasterize_covers_every_pixel(self):
        rho = default_scene().rasterize("nir")
        assert rho.shape == (72, 132) and np.isfinite(rho).all()

    def test_layout_overflow(self):
        with pytest.raises(LayoutOverflowError):
            generate_target_scene(TargetLayout(width=80), TABLE1_2021)
        with pytest.raises(LayoutOverflowError):
            generate_target_scene(TargetLayout(roi_px=28), TABLE1_2021)

    def test_coverage_gap(self):
        r = SceneRegion("soil", RegionSpec("soil", 0, 0, 4, 4), {"red": 0.1})
        with pytest.raises(SceneCoverageError):
            ReflectanceScene(5, 4, [r]).rasterize("red")

    def test_roi_must_be_inside_its_region(self):
        r = SceneRegion("crp", RegionSpec("crp", 0, 0, 4, 4), {"red": 0.1})
        with pytest.raises(RadcalError):
            ReflectanceScene(4, 4, [r], {"crp": RegionSpec("crp", 2, 2, 3, 3)})

    def test_overlap_rejected(self):
        a = SceneRegion("soil", RegionSpec("soil", 0, 0, 4, 4), {"red": 0.1})
        b = SceneRegion("canopy", RegionSpec("canopy", 3, 3, 2, 2), {"red": 0.1})
        with pytest.raises(RadcalError):
            ReflectanceScene(6, 6, [a, b])

    def test_physical_layout(self):
        lay = TargetLayout.from_physical(132, 72)
        assert (lay.target_px, lay.roi_px, lay.gap_px) == (29, 17, 10)


class TestSweep:
    def test_shape_and_order(self, sweeps):
        sw = sweeps["green"]
        assert sw.gains() == [1.0, 2.0]
        np.testing.assert_array_equal(sw.exposures(1.0), DEFAULT_EXPOSURE_GRID)
        assert sw.crp_known == DEFAULT_CRP_REFLECTANCE

    def test_accurate_at_short_exposure(self, sweeps):
        for band, sw in sweeps.items():
            for gradient, label in GRADIENT_LABELS.items():
                est = sw.estimates(label, 1.0)[0]
                assert est == pytest.approx(TABLE1_2021[band][gradient], rel=0.01)

    def test_clip_fraction_monotone(self, sweeps):
        for sw in sweeps.values():
            for gain in sw.gains():
                for region in list(sw.regions()) + ["crp"]:
                    assert np.all(np.diff(sw.clip_fractions(region, gain)) >= 0)

    def test_default_panel_never_clips(self, sweeps):
        for sw in sweeps.values():
            for gain in sw.gains():
                assert np.all(sw.clip_fractions("crp", gain) == 0)

    def test_plateau_when_everything_clips(self):
        profile = flat_profile(a1=9.0)
        sw = run_exposure_sweep(default_scene(), "blue", 120.0, [1.0, 2.0], [50.0, 80.0], profile, 0.5)
        for gain in sw.gains():
            for region in sw.regions():
                np.testing.assert_allclose(sw.estimates(region, gain), 0.5, atol=1e-12)
                assert np.all(sw.clip_fractions(region, gain) == 1.0)

    def test_parallel_matches_serial(self):
        args = (default_scene(), "red", 125.0, [1.0, 2.0], DEFAULT_EXPOSURE_GRID[:6],
                default_profile(1e-3, seed=5), 0.02)
        a = run_exposure_sweep(*args)
        b = run_exposure_sweep(*args, max_workers=4)
        assert a.points == b.points

    def test_exposures_must_increase(self):
        with pytest.raises(RadcalError):
            run_exposure_sweep(default_scene(), "red", 125.0, [1.0], [0.2, 0.1], default_profile(), 0.02)

    def test_panel_distortion_scales_estimates(self):
        # a panel that is truly 10% brighter than its stated value lowers every estimate by 1/1.1
        args = (default_scene(), "green", 130.0, [1.0], [0.09], default_profile(), 0.02)
        base = run_exposure_sweep(*args)
        off = run_exposure_sweep(*args, crp_reflectance=0.022)
        for region in base.regions():
            ratio = off.estimates(region, 1.0)[0] / base.estimates(region, 1.0)[0]
            assert ratio == pytest.approx(1 / 1.1, rel=2e-3)
