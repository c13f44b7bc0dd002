"""Radiometric calibration of multispectral UAV imagery.

DN-to-reflectance conversion, a forward sensor simulator, empirical line
calibration, exposure-setting analysis and vegetation indices.
"""

from .elm import (
    CalibrationLine,
    ErrorMatrix,
    TargetObservation,
    apply_calibration,
    cross_calibration_matrix,
    extract_roi_mean,
    fit_elm,
    mape,
    r_squared,
    select_targets_for_band,
)
from .errors import RadcalError
from .exposure import (
    ExposureWindow,
    OnsetReport,
    detect_divergence,
    detect_saturation,
    exposure_distribution_summary,
    ideal_exposure_window,
)
from .radiometry import (
    BANDS,
    BandSpec,
    CaptureMeta,
    ExposureSetting,
    RadCalCoeffs,
    RadianceImage,
    RawImage,
    ReflectanceImage,
    VignetteModel,
    crp_correction_factor,
    dn_to_radiance,
    radiance_to_reflectance,
    vignette_factor,
)
from .regions import RegionSpec
from .sensor import (
    ReflectanceScene,
    SensorProfile,
    SweepRecord,
    generate_target_scene,
    run_exposure_sweep,
    simulate_capture,
)
from .vi import VIKind, compute_vi, plot_level_aggregate, regress_vi_vs_reference

__version__ = "0.1.0"
