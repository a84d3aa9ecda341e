"""Closed-form photophysics models: saturation, Lorentzian line, g2(tau)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "G2Params",
    "SaturationParams",
    "bin_average_exp",
    "correct_g2_background",
    "eval_lorentzian",
    "eval_saturation",
    "g2_model",
    "mix_g2",
]


@dataclass(frozen=True)
class SaturationParams:
    """Count rate ``I(P) = R P / (P_sat + P) + n P + m``.

    Units: ``R`` and ``m`` in counts/s, ``P_sat`` in mW, ``n`` in counts/s per mW.
    """

    R: float
    P_sat: float
    n: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if not (self.R > 0 and self.P_sat > 0):
            raise ValueError("R and P_sat must be positive")
        if self.n < 0 or self.m < 0:
            raise ValueError("n and m must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.P_sat, self.n, self.m])


def eval_saturation(params: SaturationParams, P):
    P = np.asarray(P, dtype=float)
    if np.any(P < 0):
        raise ValueError("excitation power must be >= 0")
    out = params.R * P / (params.P_sat + P) + params.n * P + params.m
    return out[()] if out.ndim == 0 else out


def eval_lorentzian(x, center: float, fwhm: float, amplitude: float, baseline: float = 0.0):
    """``A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + b``; peak height ``A`` above ``b``."""
    x = np.asarray(x, dtype=float)
    h2 = (0.5 * fwhm) ** 2
    out = amplitude * h2 / ((x - center) ** 2 + h2) + baseline
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class G2Params:
    """Intensity autocorrelation ``g2(tau)``.

    ``g2(tau) = 1 - (1 - g2_zero + a) exp(-|tau|/tau1) + a exp(-|tau|/tau2)``,
    so ``g2(0) == g2_zero`` and ``a = 0`` is the two-level form.
    """

    g2_zero: float
    tau1_ns: float
    a: float = 0.0
    tau2_ns: float | None = None

    def __post_init__(self):
        if self.g2_zero < 0:
            raise ValueError("g2_zero must be >= 0")
        if not self.tau1_ns > 0:
            raise ValueError("tau1_ns must be > 0")
        if self.a < 0:
            raise ValueError("bunching amplitude a must be >= 0")
        if self.a > 0 and (self.tau2_ns is None or not self.tau2_ns > self.tau1_ns):
            raise ValueError("bunching needs tau2_ns > tau1_ns")


def g2_model(params, tau_ns):
    """Evaluate ``g2`` at delays ``tau_ns``; accepts :class:`G2Params` or a fit result."""
    tau = np.abs(np.asarray(tau_ns, dtype=float))
    g0, t1 = params.g2_zero, params.tau1_ns
    a = getattr(params, "a", 0.0) or 0.0
    out = 1 - (1 - g0 + a) * np.exp(-tau / t1)
    if a:
        out = out + a * np.exp(-tau / params.tau2_ns)
    return out[()] if out.ndim == 0 else out


def _signed_primitive(t, tau, deriv=False):
    """``int_0^t f(|s|) ds`` for ``f = exp(-s/tau)`` (or its ``tau`` derivative)."""
    a = np.abs(t)
    e = np.exp(-a / tau)
    if deriv:
        p = 1 - (1 + a / tau) * e
    else:
        p = tau * (1 - e)
    return np.sign(t) * p


def bin_average_exp(lo, hi, tau, deriv=False):
    """Mean of ``exp(-|t|/tau)`` over ``[lo, hi]``; ``deriv`` gives ``d/dtau`` of it."""
    w = hi - lo
    return (_signed_primitive(hi, tau, deriv) - _signed_primitive(lo, tau, deriv)) / w


def mix_g2(g2_true, rho):
    """Measured ``g2`` when a fraction ``rho`` of the light is signal and the rest Poissonian."""
    return 1 - rho**2 * (1 - np.asarray(g2_true, dtype=float))


def correct_g2_background(g2_measured, rho: float, *, return_flag: bool = False):
    """Remove uncorrelated background: ``(g2 - (1 - rho^2)) / rho^2``, clipped at 0.

    With ``return_flag`` also returns whether clipping was applied.

    Raises
    ------
    ValueError
        If ``rho`` is outside ``(0, 1]``.
    """
    if not 0 < rho <= 1:
        raise ValueError(f"signal fraction rho must lie in (0, 1], got {rho}")
    g = np.asarray(g2_measured, dtype=float)
    corr = (g - (1 - rho**2)) / rho**2
    clipped = corr < 0
    corr = np.where(clipped, 0.0, corr)
    corr = corr[()] if corr.ndim == 0 else corr
    if return_flag:
        return corr, bool(np.any(clipped))
    return corr
