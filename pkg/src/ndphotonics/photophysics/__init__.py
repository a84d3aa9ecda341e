"""Photophysics models, fits and the HBT photon-stream generator."""
from .fitting import (
    DataError,
    G2Fit,
    SaturationFit,
    SpectrumFit,
    classify,
    fit_g2,
    fit_lorentzian,
    fit_saturation,
    wavelength_to_ghz,
)
from .hbt import HBTHistogram, PhotonStreamSpec, StreamOverflowError, simulate_hbt, write_histogram_csv
from .io import format_report, read_columns, write_report
from .models import (
    G2Params,
    SaturationParams,
    bin_average_exp,
    correct_g2_background,
    eval_lorentzian,
    eval_saturation,
    g2_model,
    mix_g2,
)
from ..lm import FitConvergenceError

__all__ = [
    "DataError",
    "FitConvergenceError",
    "G2Fit",
    "G2Params",
    "HBTHistogram",
    "PhotonStreamSpec",
    "SaturationFit",
    "SaturationParams",
    "SpectrumFit",
    "StreamOverflowError",
    "bin_average_exp",
    "classify",
    "correct_g2_background",
    "eval_lorentzian",
    "eval_saturation",
    "fit_g2",
    "fit_lorentzian",
    "fit_saturation",
    "format_report",
    "g2_model",
    "mix_g2",
    "read_columns",
    "simulate_hbt",
    "wavelength_to_ghz",
    "write_histogram_csv",
    "write_report",
]
