"""Plot-level NDRE against a synthetic ground reference.

A field of 48 plots with random vigor is captured in red edge and NIR, NDRE
is averaged per plot, and a reference variable built as 3 * NDRE plus noise
is regressed on it.

    python demos/05_vegetation_index.py [seed]
"""

import sys

from radcal.config import default_config
from radcal.pipeline import compute_vi_experiment

seed = int(sys.argv[1]) if len(sys.argv) > 1 else None
res = compute_vi_experiment(default_config(), seed=seed)
reg = res.regression
for m in res.plot_means[:5]:
    print(f"  {m.plot_id}: NDRE {m.mean:.4f} over {m.n_pixels} px")
print(f"  ... {len(res.plot_means)} plots")
lo, hi = reg.slope_ci(0.95)
print(f"reference = {reg.slope:.3f} * NDRE + {reg.intercept:.3f}   R2 {reg.r_squared:.3f}   p {reg.p_value:.2e}")
print(f"95% CI for the slope: {lo:.3f} .. {hi:.3f}")
