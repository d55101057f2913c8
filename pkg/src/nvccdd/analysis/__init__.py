from nvccdd.analysis.calibration import (
    GAMMA_E,
    CalibrationResult,
    FieldEstimate,
    calibrate,
    field_to_rabi,
    signal_to_field,
)
from nvccdd.analysis.fit import (
    MODELS,
    FitModel,
    FitResult,
    biexp_saturation,
    damped_sinusoid,
    fit,
    fit_trace,
    get_model,
    linear,
    lorentzian_triplet,
    stretched_exp,
    two_tone_ccdd,
)
from nvccdd.analysis.spectra import dominant_frequency, psd, spectral_peaks
from nvccdd.analysis.stability import (
    SemScaling,
    SensitivityEstimate,
    allan_deviation,
    estimate_sensitivity,
    sem_scaling,
)

__all__ = [
    "GAMMA_E", "CalibrationResult", "FieldEstimate", "calibrate", "field_to_rabi",
    "signal_to_field", "MODELS", "FitModel", "FitResult", "biexp_saturation",
    "damped_sinusoid", "fit", "fit_trace", "get_model", "linear", "lorentzian_triplet",
    "stretched_exp", "two_tone_ccdd", "dominant_frequency", "psd", "spectral_peaks", "SemScaling",
    "SensitivityEstimate", "allan_deviation", "estimate_sensitivity", "sem_scaling",
]
