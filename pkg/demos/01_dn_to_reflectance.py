"""From raw digital numbers to reflectance on one synthetic capture.

A panel capture and a scene capture are simulated at the same setting and
irradiance. The panel fixes the correction factor F, and the scene ROI means
are then compared with the reflectances that generated them.

    python demos/01_dn_to_reflectance.py
"""

from radcal.radiometry import crp_correction_factor, dn_to_radiance, radiance_to_reflectance, setting
from radcal.sensor import DEFAULT_CRP_REFLECTANCE, DEFAULT_IRRADIANCE, default_profile, default_scene, panel_scene
from radcal.sensor import simulate_capture

BAND = "red"

scene = default_scene()
panel = panel_scene(scene.width, scene.height, DEFAULT_CRP_REFLECTANCE)
profile = default_profile()
st = setting(0.315, 1.0)
E = DEFAULT_IRRADIANCE[BAND]

crp_raw = simulate_capture(panel, BAND, E, st, profile, object_category="crp")
raw = simulate_capture(scene, BAND, E, st, profile)
print(f"{BAND} at {st.label}: DN range {raw.dn.min()}..{raw.dn.max()}, clipped pixels {int(raw.clipped.sum())}")

factor = crp_correction_factor(dn_to_radiance(crp_raw), panel.rois["crp"], DEFAULT_CRP_REFLECTANCE)
rho = radiance_to_reflectance(dn_to_radiance(raw), factor).values
print(f"panel correction factor F = {factor:.6f} (1 means the irradiance model is exact)")

truth = scene.rasterize(BAND)
for name, roi in sorted(scene.rois.items()):
    if name == "crp":
        continue
    est, ref = roi.take(rho).mean(), roi.take(truth).mean()
    print(f"  {name:<10s} estimated {est:.5f}  true {ref:.5f}  error {100 * (est - ref) / ref:+.3f}%")
