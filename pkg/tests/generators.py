"""Synthetic-data generators shared by the unit and acceptance tests."""
from __future__ import annotations

import numpy as np

from ndphotonics.photophysics import PhotonStreamSpec, SaturationParams, eval_lorentzian, eval_saturation

# the two measured operating points: (R counts/s, P_sat mW)
PAPER_SATURATION = (SaturationParams(86e3, 1.0, 5e3, 300.0), SaturationParams(24e3, 4.0, 2e3, 300.0))


def saturation_powers(p_sat: float, count: int = 12) -> np.ndarray:
    """Dark point plus a geometric ladder from 0.05 to 10 P_sat."""
    return np.concatenate([[0.0], np.geomspace(0.05, 10.0, count - 1) * p_sat])


def saturation_data(params: SaturationParams, count: int = 12, noise: float = 0.0, seed: int = 0) -> np.ndarray:
    P = saturation_powers(params.P_sat, count)
    I = eval_saturation(params, P)
    if noise:
        I = I * (1 + noise * np.random.default_rng(seed).standard_normal(P.size))
    return np.column_stack([P, I])


def lorentzian_data(center, fwhm, amplitude, baseline, half_span=None, count=401):
    half_span = half_span or max(10 * fwhm, 300.0)
    x = np.linspace(center - half_span, center + half_span, count)
    return np.column_stack([x, eval_lorentzian(x, center, fwhm, amplitude, baseline)])


def two_emitter_weights(g2_zero: float) -> tuple:
    """Light fractions ``(w, 1 - w)`` with ``1 - w**2 - (1 - w)**2 = g2_zero``."""
    if g2_zero == 0:
        return (1.0,)
    w = 0.5 * (1 - np.sqrt(1 - 2 * g2_zero))
    return (w, 1 - w)


def hbt_spec(g2_zero: float, rho: float = 1.0, *, total_rate: float = 2e6, duration_s: float = 2.0,
             seed: int = 0, bin_width_ns: float = 2.0) -> PhotonStreamSpec:
    """Stream with generator ``g2(0)``; ``g2_zero == 1`` means background light only."""
    if g2_zero >= 1:
        signal, background = 0.0, total_rate
    else:
        signal, background = rho * total_rate, (1 - rho) * total_rate
    return PhotonStreamSpec(
        excitation_rate=0.01, decay_rate=0.04, signal_rate=signal, background_rate=background,
        duration_s=duration_s, bin_width_ns=bin_width_ns, window_ns=300.0, seed=seed,
        emitter_weights=two_emitter_weights(min(g2_zero, 0.5)) if g2_zero < 1 else (1.0,),
    )
