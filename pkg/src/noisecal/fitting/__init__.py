"""Noise-curve containers, the least-squares engine and the fit procedures."""

from .curves import NoiseCurve, read_curves_csv, write_curves_csv
from .lsq import LsqResult, least_squares
from .procedures import (MODEL_KINDS, FitModel, FitResult, fit_asymptotes, fit_curve, fit_full,
                         fit_saturation_corrected, fit_window_sweep, lag1_autocorrelation,
                         model_jacobian, model_output)

__all__ = [
    "MODEL_KINDS", "FitModel", "FitResult", "LsqResult", "NoiseCurve", "fit_asymptotes",
    "fit_curve", "fit_full", "fit_saturation_corrected", "fit_window_sweep",
    "lag1_autocorrelation", "least_squares", "model_jacobian", "model_output",
    "read_curves_csv", "write_curves_csv",
]
