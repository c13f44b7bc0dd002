"""Cross-calibration: calibrate one setting's image with another setting's line.

Each cell is the MAPE obtained when the ELM line fitted at the reference
setting (row) is applied to the target setting (column). Inside the ideal
window errors stay small; past its upper limit they climb steadily.

    python demos/03_cross_calibration.py [band]
"""

import sys

import numpy as np

from radcal.elm import cross_calibration_matrix, observations_from_sweep
from radcal.exposure import ideal_exposure_window
from radcal.sensor import TABLE1_2021, default_sweep

band = sys.argv[1] if len(sys.argv) > 1 else "blue"
sweep = default_sweep(band)
truths = TABLE1_2021[band]
obs = observations_from_sweep(sweep, truths)
m = cross_calibration_matrix(obs, obs, band, truths, on_degenerate="nan")
window = ideal_exposure_window(sweep, "object_based", truths, 1.0)

cols = [j for j, s in enumerate(m.target_axis) if s.gain == 1.0]
print(f"{band} gain 1x, object-based window {window.lower:.3f}..{window.upper:.3f} ms; MAPE (%)")
print(f"{'ref/tgt':>8s} " + " ".join(f"{m.target_axis[j].exposure_time:7.3f}" for j in cols))
for i, ref in enumerate(m.reference_axis):
    if ref.gain != 1.0:
        continue
    mark = "*" if window.contains(ref.exposure_time) else " "
    print(f"{ref.exposure_time:7.3f}{mark} " + " ".join(f"{m.cells[i, j]:7.2f}" for j in cols))

inside = [j for j in cols if window.contains(m.target_axis[j].exposure_time)]
rows = [i for i in cols if window.contains(m.reference_axis[i].exposure_time)]
print(f"largest in-window cell: {np.nanmax(m.cells[np.ix_(rows, inside)]):.3f}%  (* marks in-window rows)")
