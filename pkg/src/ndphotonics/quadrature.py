"""Vectorised adaptive Gauss-Legendre quadrature.

Each panel is integrated twice: once with an ``order``-point Gauss rule over
the whole panel and once over its two halves.  The difference is the panel
error estimate; panels whose estimate exceeds their share of the tolerance are
bisected.  Panels narrower than ``MIN_SHARE`` of the interval get a fixed
share instead, which bounds the work near integrable singularities.  All
panels refined in one pass are evaluated in a single call of the integrand,
so the integrand must accept a 1-D array of abscissae.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["QuadratureError", "QuadResult", "adaptive_quad"]


class QuadratureError(RuntimeError):
    """Raised when refinement stops before the tolerance is met."""

    def __init__(self, message: str, estimate, error: float):
        self.estimate = estimate
        self.error = error
        super().__init__(f"{message} (estimate {estimate!r}, error bound {error:.3g})")


MIN_SHARE = 1e-6


@dataclass(frozen=True)
class QuadResult:
    value: complex | float
    error: float
    panels: int
    evaluations: int


@lru_cache(maxsize=8)
def _rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel_sums(func, a, b, order):
    """Gauss sums over panels ``[a_i, b_i]`` with one vectorised call."""
    x, w = _rule(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(func(pts.ravel())).reshape(pts.shape)
    return half * (vals @ w)


def adaptive_quad(
    func,
    a: float,
    b: float,
    *,
    atol: float = 1e-12,
    rtol: float = 1e-9,
    order: int = 15,
    breakpoints=(),
    max_panels: int = 20000,
) -> QuadResult:
    """Integrate ``func`` over ``[a, b]``.

    Parameters
    ----------
    func : callable
        Vectorised integrand; real or complex valued.
    breakpoints : iterable of float
        Interior points where the integrand has kinks; panels start split there.

    Returns
    -------
    QuadResult
        ``error`` is the sum of the accepted panels' error estimates.

    Raises
    ------
    QuadratureError
        If ``max_panels`` is reached before convergence.
    """
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    edges = np.unique(np.concatenate(([a], [p for p in breakpoints if a < p < b], [b])))
    lo, hi = edges[:-1].astype(float), edges[1:].astype(float)
    length = float(b - a)

    coarse = _panel_sums(func, lo, hi, order)
    evals = lo.size * order
    done_val, done_err, done_n = [], [], 0
    while lo.size:
        mid = 0.5 * (lo + hi)
        both = _panel_sums(func, np.concatenate((lo, mid)), np.concatenate((mid, hi)), order)
        evals += 2 * lo.size * order
        left, right = both[: lo.size], both[lo.size:]
        fine = left + right
        err = np.abs(fine - coarse)

        known = np.sum(fine) + (np.sum(done_val) if done_val else 0.0)
        tol = max(atol, rtol * abs(known))
        # error share proportional to width, floored so that panels shrinking onto an
        # endpoint singularity (error ~ h**1.5) are accepted before h ~ tol**2
        ok = err <= tol * np.maximum((hi - lo) / length, MIN_SHARE)
        # panels at floating-point resolution cannot be split further
        ok |= (hi - lo) <= 64 * np.finfo(float).eps * max(abs(a), abs(b), 1.0)
        done_val.extend(fine[ok])
        done_err.extend(err[ok])
        done_n += int(ok.sum())

        keep = ~ok
        if done_n + 2 * int(keep.sum()) > max_panels:
            estimate = np.sum(done_val) + np.sum(fine[keep])
            bound = float(np.sum(done_err) + np.sum(err[keep]))
            raise QuadratureError("adaptive quadrature did not converge", estimate, bound)
        lo, hi, mid = lo[keep], hi[keep], mid[keep]
        coarse = np.concatenate((left[keep], right[keep]))
        lo, hi = np.concatenate((lo, mid)), np.concatenate((mid, hi))

    vals = np.asarray(done_val)
    value = vals.sum() if vals.size else 0.0
    value = complex(value) if np.iscomplexobj(vals) else float(value)
    return QuadResult(value, float(np.sum(done_err)), done_n, evals)
