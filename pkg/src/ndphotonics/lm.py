"""Small Levenberg-Marquardt least-squares engine.

Minimises ``0.5 * sum(residual(p)**2)`` given an analytic Jacobian.  Each
step solves the damped normal equations as an augmented linear least-squares
problem (``[J; sqrt(lam) D] dp = [-r; 0]``), which stays well conditioned
when ``J`` is nearly rank deficient.  ``D`` is Marquardt's scaling, the
current Jacobian column norms, so a parameter driven onto a transform's
boundary (e.g. ``x = t**2`` with ``t -> 0``) is not over-damped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["FitConvergenceError", "LMResult", "covariance", "levenberg_marquardt"]


class FitConvergenceError(RuntimeError):
    """Raised when the iteration limit is hit; ``trace`` holds (iter, cost, lam) rows."""

    def __init__(self, message: str, trace):
        self.trace = list(trace)
        tail = "\n".join(f"  iter {i:4d}  cost {c:.6e}  lambda {lam:.2e}" for i, c, lam in self.trace[-8:])
        super().__init__(f"{message}\nlast iterations:\n{tail}")


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    residual: np.ndarray
    jac: np.ndarray
    iterations: int
    message: str
    trace: list = field(default_factory=list)


def levenberg_marquardt(residual, jacobian, p0, *, xtol: float = 1e-10, gtol: float = 1e-12,
                        ftol: float = 1e-10, max_iter: int = 500, lam0: float = 1e-3) -> LMResult:
    """Minimise the sum of squared residuals starting from ``p0``.

    Converged when the relative step ``|dp| / (|p| + xtol)`` drops below
    ``xtol``, when the scaled gradient ``max |J^T r| / (|r| |J_j|)`` drops
    below ``gtol``, when an accepted step lowers the cost by less than
    ``ftol`` relative (a flat valley, e.g. a width running off to infinity),
    or when no damping produces a decrease (the cost is at its
    floating-point floor).

    Raises
    ------
    FitConvergenceError
        After ``max_iter`` iterations without meeting a criterion.
    """
    p = np.array(p0, dtype=float)
    r = np.asarray(residual(p), dtype=float)
    J = np.asarray(jacobian(p), dtype=float)
    cost = 0.5 * float(r @ r)
    lam = lam0
    trace = [(0, cost, lam)]
    npar = p.size

    for it in range(1, max_iter + 1):
        scale = np.linalg.norm(J, axis=0)
        d = np.where(scale > 1e-12 * scale.max(), scale, max(1e-12 * scale.max(), 1e-300))
        g = J.T @ r
        rnorm = np.sqrt(2 * cost)
        if rnorm == 0 or np.max(np.abs(g) / (d * rnorm)) < gtol:
            return LMResult(p, cost, r, J, it - 1, "gradient below tolerance", trace)

        while True:
            A = np.vstack([J, np.sqrt(lam) * np.diag(d)])
            b = np.concatenate([-r, np.zeros(npar)])
            dp = np.linalg.lstsq(A, b, rcond=None)[0]
            p_new = p + dp
            with np.errstate(over="ignore", invalid="ignore"):
                # wild trial steps may overflow; they are simply rejected
                r_new = np.asarray(residual(p_new), dtype=float)
                cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                lam = max(lam / 3, 1e-15)
                break
            lam *= 4
            if lam > 1e16:
                return LMResult(p, cost, r, J, it, "no further decrease possible", trace)

        step = np.linalg.norm(dp * d)
        size = np.linalg.norm(p * d)
        reduction = (cost - cost_new) / cost
        p, r, cost = p_new, r_new, cost_new
        J = np.asarray(jacobian(p), dtype=float)
        trace.append((it, cost, lam))
        if step <= xtol * (size + xtol):
            return LMResult(p, cost, r, J, it, "relative step below tolerance", trace)
        if reduction <= ftol:
            return LMResult(p, cost, r, J, it, "relative cost reduction below tolerance", trace)

    raise FitConvergenceError(f"no convergence after {max_iter} iterations", trace)


def covariance(J: np.ndarray, sigma2: float = 1.0, rcond: float = 1e-10) -> np.ndarray:
    """``sigma2 * (J^T J)^+`` via SVD; unidentifiable directions give infinite variance.

    A singular value below ``rcond * s_max`` marks a parameter combination
    the data cannot constrain; every parameter with a non-negligible loading
    on such a direction is assigned an infinite variance.
    """
    J = np.asarray(J, dtype=float)
    # column scaling keeps the rank test independent of parameter units
    norms = np.linalg.norm(J, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    _, s, vt = np.linalg.svd(J / safe, full_matrices=False)
    keep = s > rcond * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep] ** 2
    cov = (vt.T * inv) @ vt
    cov = cov / np.outer(safe, safe) * sigma2
    dead = (~keep[:, None] & (np.abs(vt) > 1e-6)).any(axis=0) | (norms == 0)
    cov[dead, :] = np.inf
    cov[:, dead] = np.inf
    return cov
