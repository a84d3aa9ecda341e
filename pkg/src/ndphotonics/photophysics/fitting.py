"""Least-squares fits of the saturation, Lorentzian and g2 models.

All three use :func:`ndphotonics.lm.levenberg_marquardt` with analytic
Jacobians.  Uncertainties are one standard deviation from the SVD of the
Jacobian in the physical parameters; ``inf`` marks a parameter the data
cannot determine.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..lm import covariance, levenberg_marquardt
from .models import SaturationParams, bin_average_exp, correct_g2_background

__all__ = [
    "DataError",
    "G2Fit",
    "SaturationFit",
    "SpectrumFit",
    "classify",
    "fit_g2",
    "fit_lorentzian",
    "fit_saturation",
    "wavelength_to_ghz",
]

RESOLUTION_FLOOR_GHZ = 30.0
SPEED_OF_LIGHT_NM_GHZ = 299792458.0  # c in nm * GHz


class DataError(ValueError):
    """Input data cannot support the requested fit."""


def _xy(points, names):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError(f"expected rows of ({names[0]}, {names[1]})")
    if not np.all(np.isfinite(arr)):
        raise DataError("data contain non-finite values")
    return arr[:, 0].copy(), arr[:, 1].copy()


# -- saturation ----------------------------------------------------------------

@dataclass
class SaturationFit:
    params: SaturationParams
    uncertainty: dict
    residual_norm: float
    iterations: int
    message: str
    span_ok: bool

    @property
    def identifiable(self) -> bool:
        return all(np.isfinite(v) and v < abs(getattr(self.params, k)) for k, v in self.uncertainty.items()
                   if k in ("R", "P_sat"))

    def report(self) -> dict:
        p = self.params
        out = {"model": "saturation"}
        for k in ("R", "P_sat", "n", "m"):
            out[k] = getattr(p, k)
            out[f"{k}_err"] = self.uncertainty[k]
        out.update(residual_norm=self.residual_norm, iterations=self.iterations,
                   span_ok=self.span_ok, identifiable=self.identifiable, message=self.message)
        return out


def _nnls_small(A, y):
    """Exact non-negative least squares by enumerating active sets (few columns)."""
    best, best_cost = np.zeros(A.shape[1]), float(y @ y)
    for k in range(1, A.shape[1] + 1):
        for cols in itertools.combinations(range(A.shape[1]), k):
            sol = np.linalg.lstsq(A[:, cols], y, rcond=None)[0]
            if np.any(sol < 0):
                continue
            x = np.zeros(A.shape[1])
            x[list(cols)] = sol
            r = A @ x - y
            c = float(r @ r)
            if c < best_cost:
                best, best_cost = x, c
    return best, best_cost


def _saturation_start(P, I, w):
    """Variable projection: for fixed ``P_sat`` the model is linear in ``R, n, m``.

    The non-negative linear solve gives a profile cost in ``log P_sat``; a
    log-spaced scan brackets its minimum and a golden-section search refines
    it, so the iteration starts at (or next to) the optimum.
    """
    pmax = P.max()
    pmin = P[P > 0].min()
    y = I / w

    def solve(log_ps):
        ps = np.exp(log_ps)
        A = np.column_stack([P / (ps + P), P, np.ones_like(P)]) / w[:, None]
        return _nnls_small(A, y)

    grid = np.log(np.geomspace(pmin / 10, pmax * 100, 241))
    costs = np.full(grid.size, np.inf)
    for i, g in enumerate(grid):
        x, c = solve(g)
        if x[0] > 0:
            costs[i] = c
    if not np.any(np.isfinite(costs)):
        # no saturating component at all; start from a weak one
        x, _ = _nnls_small(np.column_stack([P, np.ones_like(P)]) / w[:, None], y)
        return 1e-3 * max(I.max(), 1.0), pmax, x[0], x[1]
    k = int(np.argmin(costs))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    golden = 0.5 * (np.sqrt(5) - 1)
    c, d = b - golden * (b - a), a + golden * (b - a)
    fc, fd = solve(c)[1], solve(d)[1]
    while b - a > 1e-12:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - golden * (b - a)
            fc = solve(c)[1]
        else:
            a, c, fc = c, d, fd
            d = a + golden * (b - a)
            fd = solve(d)[1]
    best = 0.5 * (a + b)
    x, cost = solve(best)
    if not (x[0] > 0 and cost <= costs[k]):
        best = grid[k]
        x, _ = solve(best)
    return x[0], float(np.exp(best)), x[1], x[2]


NOISE_MODELS = ("absolute", "relative", "poisson")


def _weights(y, noise):
    """Per-point standard deviation up to a common factor."""
    if noise == "absolute":
        return np.full(y.shape, max(np.max(np.abs(y)), 1e-300))
    if noise == "relative":
        if np.any(y <= 0):
            raise DataError("relative noise weighting needs positive counts")
        return np.abs(y)
    if noise == "poisson":
        return np.sqrt(np.maximum(y, 1.0))
    raise ValueError(f"noise must be one of {NOISE_MODELS}, got {noise!r}")


def fit_saturation(points, *, noise: str = "absolute", xtol: float = 1e-10, gtol: float = 1e-12,
                   max_iter: int = 500) -> SaturationFit:
    """Fit ``I(P) = R P/(P_sat + P) + n P + m`` to ``(P_mW, counts_per_s)`` rows.

    ``R`` and ``P_sat`` are fitted as logarithms and ``n``, ``m`` as square
    roots, which keeps all four non-negative.  The start point minimises the
    profile cost over ``P_sat`` with the other three solved by non-negative
    linear least squares.  ``span_ok`` is False when the powers do not cover
    ``[0.2, 3] * P_sat``.

    ``noise`` selects the weighting: ``"absolute"`` (equal weights),
    ``"relative"`` (standard deviation proportional to the counts, for
    multiplicative noise) or ``"poisson"`` (``sqrt(counts)``).  The
    uncertainties rescale the weights by the residual variance.

    Raises
    ------
    DataError
        Fewer than 6 points, negative power or all powers equal.
    FitConvergenceError
        If the iteration limit is reached.
    """
    P, I = _xy(points, ("power_mw", "counts_per_s"))
    if P.size < 6:
        raise DataError(f"saturation fit needs at least 6 points, got {P.size}")
    if np.any(P < 0):
        raise DataError("excitation powers must be >= 0")
    if np.ptp(P) == 0:
        raise DataError("rank-deficient data: all excitation powers are equal")
    w = _weights(I, noise)
    R0, ps0, n0, m0 = _saturation_start(P, I, w)
    top = max(np.max(np.abs(I)), 1e-300)
    nfloor = 1e-6 * top / P.max()
    mfloor = 1e-6 * top

    def unpack(t):
        return np.exp(t[0]), np.exp(t[1]), t[2] ** 2, t[3] ** 2

    def model_parts(t):
        R, ps, n, m = unpack(t)
        den = ps + P
        return R, ps, n, m, den

    def residual(t):
        R, ps, n, m, den = model_parts(t)
        return (R * P / den + n * P + m - I) / w

    def jac(t):
        R, ps, n, m, den = model_parts(t)
        return np.column_stack([
            R * P / den,
            -R * P * ps / den**2,
            2 * t[2] * P,
            2 * t[3] * np.ones_like(P),
        ]) / w[:, None]

    t0 = np.array([np.log(R0), np.log(ps0), np.sqrt(max(n0, nfloor)), np.sqrt(max(m0, mfloor))])
    res = levenberg_marquardt(residual, jac, t0, xtol=xtol, gtol=gtol, max_iter=max_iter)
    R, ps, n, m = unpack(res.x)

    # uncertainties in the physical parameters
    Jn = np.column_stack([P / (ps + P), -R * P / (ps + P) ** 2, P, np.ones_like(P)]) / w[:, None]
    dof = P.size - 4
    resid = res.residual * w
    sigma2 = float(res.residual @ res.residual) / dof if dof > 0 else np.inf
    cov = covariance(Jn, sigma2)
    err = np.sqrt(np.abs(np.diag(cov)))
    params = SaturationParams(R, ps, n, m)
    span_ok = bool(P.min() <= 0.2 * ps and P.max() >= 3 * ps)
    return SaturationFit(
        params,
        dict(zip(("R", "P_sat", "n", "m"), map(float, err))),
        float(np.linalg.norm(resid)),
        res.iterations,
        res.message,
        span_ok,
    )


# -- Lorentzian ------------------------------------------------------------------

@dataclass
class SpectrumFit:
    """Single Lorentzian line; ``fwhm`` in the units of ``x`` (GHz by convention)."""

    center: float
    fwhm_ghz: float
    amplitude: float
    baseline: float
    uncertainty: dict
    residual_norm: float
    resolution_floor_ghz: float
    has_peak: bool
    iterations: int = 0

    @property
    def resolution_limited(self) -> bool:
        return bool(self.has_peak and self.fwhm_ghz < self.resolution_floor_ghz)

    def report(self) -> dict:
        out = {"model": "lorentzian"}
        for k in ("center", "fwhm_ghz", "amplitude", "baseline"):
            out[k] = getattr(self, k)
            out[f"{k}_err"] = self.uncertainty[k]
        out.update(residual_norm=self.residual_norm, has_peak=self.has_peak,
                   resolution_floor_ghz=self.resolution_floor_ghz,
                   resolution_limited=self.resolution_limited, iterations=self.iterations)
        return out


def wavelength_to_ghz(wavelength_nm, center_nm: float):
    """Optical frequency offset ``c (1/lambda - 1/lambda0)`` in GHz."""
    wl = np.asarray(wavelength_nm, dtype=float)
    return SPEED_OF_LIGHT_NM_GHZ * (1 / wl - 1 / center_nm)


def _lorentz_start(x, y):
    order = np.argsort(x)
    x, y = x[order], y[order]
    k = max(1, x.size // 5)
    b = float(np.mean(np.sort(y)[:k]))
    i = int(np.argmax(y))
    A = float(y[i] - b)
    above = np.nonzero(y - b >= 0.5 * A)[0] if A > 0 else np.array([i])
    width = x[above.max()] - x[above.min()] if above.size > 1 else 0.0
    step = np.min(np.diff(x))
    return float(x[i]), max(width, step), A, b


def fit_lorentzian(points, *, resolution_floor_ghz: float = RESOLUTION_FLOOR_GHZ, xtol: float = 1e-10,
                   gtol: float = 1e-12, max_iter: int = 500) -> SpectrumFit:
    """Fit ``A (G/2)^2/((x - x0)^2 + (G/2)^2) + b`` to ``(x, counts)`` rows.

    ``has_peak`` is False when the amplitude is not positive, not at least
    three times its uncertainty, the width is undetermined, or the centre
    falls outside the data.  ``resolution_limited`` is set when the fitted
    FWHM is below ``resolution_floor_ghz``.
    """
    x, y = _xy(points, ("x", "counts"))
    if x.size < 7:
        raise DataError(f"Lorentzian fit needs at least 7 points, got {x.size}")
    if np.ptp(x) == 0:
        raise DataError("all x values are equal")
    x0, G0, A0, b0 = _lorentz_start(x, y)
    ys = max(np.max(np.abs(y)), 1e-300)

    def parts(p):
        c, G, A, b = p
        h = 0.5 * G
        dx = x - c
        D = dx * dx + h * h
        return c, G, A, b, h, dx, D

    def residual(p):
        c, G, A, b, h, dx, D = parts(p)
        return (A * h * h / D + b - y) / ys

    def jac(p):
        c, G, A, b, h, dx, D = parts(p)
        return np.column_stack([
            2 * A * h * h * dx / D**2,
            A * h * dx * dx / D**2,
            h * h / D,
            np.ones_like(x),
        ]) / ys

    res = levenberg_marquardt(residual, jac, [x0, G0, A0, b0], xtol=xtol, gtol=gtol, max_iter=max_iter)
    c, G, A, b = res.x
    G = abs(G)
    dof = x.size - 4
    resid = res.residual * ys
    sigma2 = float(resid @ resid) / dof
    cov = covariance(res.jac * ys, sigma2)
    err = dict(zip(("center", "fwhm_ghz", "amplitude", "baseline"), map(float, np.sqrt(np.abs(np.diag(cov))))))
    has_peak = bool(
        A > 0
        and A >= 3 * err["amplitude"]
        and np.isfinite(err["center"])
        and err["fwhm_ghz"] < G
        and x.min() <= c <= x.max()
        and G > 0
    )
    return SpectrumFit(float(c), float(G), float(A), float(b), err, float(np.linalg.norm(resid)),
                       float(resolution_floor_ghz), has_peak, res.iterations)


# -- g2 ------------------------------------------------------------------------------

CLASSES = ("single_emitter", "not_single", "inconclusive")


@dataclass
class G2Fit:
    """Background-corrected antibunching fit.

    ``g2_zero`` is the corrected intercept (clipped at 0), ``g2_zero_raw`` the
    fitted intercept of the measured histogram.
    """

    g2_zero: float
    g2_zero_err: float
    tau1_ns: float
    tau1_err: float
    rho: float
    g2_zero_raw: float
    g2_zero_raw_err: float
    plateau: float
    classification: str
    a: float = 0.0
    tau2_ns: float | None = None
    clipped: bool = False
    plateau_identified: bool = True
    chi2_reduced: float = float("nan")
    iterations: int = 0
    notes: list = field(default_factory=list)

    def report(self) -> dict:
        return {
            "model": "g2",
            "g2_zero": self.g2_zero,
            "g2_zero_err": self.g2_zero_err,
            "g2_zero_raw": self.g2_zero_raw,
            "g2_zero_raw_err": self.g2_zero_raw_err,
            "tau1_ns": self.tau1_ns,
            "tau1_err": self.tau1_err,
            "a": self.a,
            "tau2_ns": self.tau2_ns,
            "rho": self.rho,
            "plateau": self.plateau,
            "clipped": self.clipped,
            "plateau_identified": self.plateau_identified,
            "chi2_reduced": self.chi2_reduced,
            "classification": self.classification,
            "iterations": self.iterations,
        }


def classify(g2_zero: float, sigma: float, plateau_identified: bool = True) -> str:
    """``single_emitter`` iff ``g2_zero + sigma < 0.5``; ``not_single`` iff ``g2_zero - sigma >= 0.5``."""
    if not plateau_identified or not np.isfinite(sigma):
        return "inconclusive"
    if g2_zero + sigma < 0.5:
        return "single_emitter"
    if g2_zero - sigma >= 0.5:
        return "not_single"
    return "inconclusive"


def _bin_edges(tau, width):
    return tau - 0.5 * width, tau + 0.5 * width


def _g2_start(tau, y, width):
    outer = np.abs(tau) >= 0.5 * np.abs(tau).max()
    plateau = float(np.mean(y[outer])) if np.any(outer) else float(np.mean(y))
    if plateau <= 0:
        return plateau, 1.0, width
    g = y / plateau
    centre = np.argsort(np.abs(tau))[:3]
    g0 = float(np.mean(g[centre]))
    depth = 1 - g0
    if depth <= 0.02:
        return plateau, g0, 4 * width
    area = float(np.sum((1 - g)[~outer]) * width)
    t1 = area / (2 * depth)
    return plateau, g0, float(np.clip(t1, width, 0.25 * np.abs(tau).max()))


def fit_g2(histogram, rho: float = 1.0, *, bin_width_ns: float | None = None, bunching: bool = False,
           normalized: bool = False, xtol: float = 1e-10, gtol: float = 1e-12, max_iter: int = 500) -> G2Fit:
    """Fit a coincidence histogram and classify the source.

    The model is averaged over each bin (width from the ``tau`` spacing
    unless given), scaled by a fitted plateau, and fitted with Poisson
    weights computed from the model (two reweighting passes).  The intercept
    is then corrected for the signal fraction ``rho``.  If fewer than four
    bins lie beyond ``10 tau1`` the plateau is not identifiable and the
    classification is ``inconclusive``.

    Parameters
    ----------
    histogram : array_like, shape (N, 2)
        ``(tau_ns, coincidences)`` rows, ``N >= 20``.
    normalized : bool
        Histogram already divided by its plateau; the plateau is then fixed
        to 1 and weights assume the raw counts are unknown (unit variance).
    """
    tau, y = _xy(histogram, ("tau_ns", "coincidences"))
    if tau.size < 20:
        raise DataError(f"g2 fit needs at least 20 bins, got {tau.size}")
    order = np.argsort(tau)
    tau, y = tau[order], y[order]
    if np.any(np.diff(tau) <= 0):
        raise DataError("duplicate delay values")
    if not 0 < rho <= 1:
        raise ValueError(f"signal fraction rho must lie in (0, 1], got {rho}")
    width = float(bin_width_ns) if bin_width_ns else float(np.median(np.diff(tau)))
    lo, hi = _bin_edges(tau, width)
    notes = []

    C0, g00, t10 = _g2_start(tau, y, width)
    if C0 <= 0:
        return G2Fit(np.nan, np.inf, np.nan, np.inf, rho, np.nan, np.inf, C0, "inconclusive",
                     plateau_identified=False, notes=["empty histogram"])
    if normalized:
        C0 = 1.0

    def unpack(p):
        C = 1.0 if normalized else np.exp(p[0])
        g0, t1 = p[1], np.exp(p[2])
        if bunching:
            a, t2 = p[3] ** 2, t1 + np.exp(p[4])
        else:
            a, t2 = 0.0, None
        return C, g0, t1, a, t2

    def model_and_jac(p):
        C, g0, t1, a, t2 = unpack(p)
        E1 = bin_average_exp(lo, hi, t1)
        dE1 = bin_average_exp(lo, hi, t1, deriv=True)
        shape = 1 - (1 - g0 + a) * E1
        cols = [None, C * E1, -C * (1 - g0 + a) * dE1 * t1]
        if bunching:
            E2 = bin_average_exp(lo, hi, t2)
            dE2 = bin_average_exp(lo, hi, t2, deriv=True)
            shape = shape + a * E2
            cols[2] = cols[2] + C * a * dE2 * t1
            cols += [C * (E2 - E1) * 2 * p[3], C * a * dE2 * (t2 - t1)]
        m = C * shape
        cols[0] = m if not normalized else np.zeros_like(m)
        return m, np.column_stack(cols)

    p = [np.log(C0), g00, np.log(t10)]
    if bunching:
        p += [np.sqrt(0.1), np.log(9 * t10)]
    p = np.array(p, dtype=float)

    if normalized:
        var = np.ones_like(y)
    else:
        var = np.maximum(y, 1.0)
    res = None
    for _ in range(3):
        sig = np.sqrt(var)
        res = levenberg_marquardt(lambda q: (model_and_jac(q)[0] - y) / sig,
                                  lambda q: model_and_jac(q)[1] / sig[:, None], p, xtol=xtol, gtol=gtol,
                                  max_iter=max_iter)
        p = res.x
        if normalized:
            break
        var = np.maximum(model_and_jac(p)[0], 1.0)
    m, J = model_and_jac(p)
    resid = (m - y) / np.sqrt(var)
    npar = p.size - (1 if normalized else 0)
    dof = max(tau.size - npar, 1)
    chi2_red = float(resid @ resid) / dof
    Jw = J / np.sqrt(var)[:, None]
    if normalized:
        Jw = Jw[:, 1:]
    # Poisson variances are absolute; a normalized histogram has unknown scale
    cov = covariance(Jw, chi2_red if normalized else 1.0)
    err = np.sqrt(np.abs(np.diag(cov)))
    if normalized:
        err = np.concatenate([[0.0], err])
    C, g0, t1, a, t2 = unpack(p)
    g0_err = float(err[1])
    t1_err = float(err[2] * t1)

    plateau_ok = bool(np.sum(np.abs(tau) > 10 * t1) >= 4) or abs(1 - g0) < 2 * g0_err
    if not plateau_ok:
        notes.append(f"fewer than 4 bins beyond 10*tau1 = {10 * t1:.3g} ns")
    corrected, clipped = correct_g2_background(g0, rho, return_flag=True)
    corrected_err = g0_err / rho**2
    if clipped:
        notes.append("background correction overshoots; clipped at 0")
    return G2Fit(
        g2_zero=float(corrected),
        g2_zero_err=float(corrected_err),
        tau1_ns=float(t1),
        tau1_err=t1_err,
        rho=float(rho),
        g2_zero_raw=float(g0),
        g2_zero_raw_err=g0_err,
        plateau=float(C),
        classification=classify(float(corrected), corrected_err, plateau_ok),
        a=float(a),
        tau2_ns=None if t2 is None else float(t2),
        clipped=clipped,
        plateau_identified=plateau_ok,
        chi2_reduced=chi2_red,
        iterations=res.iterations,
        notes=notes,
    )
