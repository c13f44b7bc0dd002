"""Exposure sweep: where each target stops tracking its true reflectance.

The default sweep covers 15 exposure times at gains 1x and 2x. Brighter
targets diverge first, and 2x diverges before 1x. The ideal window is the
span where every fitted target stays within tolerance.

    python demos/02_exposure_sweep.py [band]
"""

import sys

from radcal.exposure import ideal_exposure_window, onset_report
from radcal.sensor import GRADIENT_LABELS, TABLE1_2021, default_sweep

band = sys.argv[1] if len(sys.argv) > 1 else "green"
sweep = default_sweep(band)
truths = TABLE1_2021[band]

print(f"{band}: estimated reflectance per region")
regions = [GRADIENT_LABELS[g] for g in "BGW"]
print(f"{'setting':>10s} " + " ".join(f"{r:>10s}" for r in regions))
for p in sweep.points:
    print(f"{p.setting.label:>10s} " + " ".join(f"{p.estimates[r]:10.4f}" for r in regions))

report = onset_report(sweep, truths)
for gain in (1.0, 2.0):
    onsets = {g: report.divergence(GRADIENT_LABELS[g], gain) for g in "WGB"}
    print(f"gain {gain:g}x divergence onsets (ms): " + ", ".join(f"{g}={t}" for g, t in onsets.items()))
    for mode in ("full_scale", "object_based"):
        w = ideal_exposure_window(sweep, mode, truths, gain)
        print(f"  {mode:<12s} window {w.lower:.3f} .. {w.upper:.3f} ms")
