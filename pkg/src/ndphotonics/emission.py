"""Electric-dipole emission inside a planar stack.

The dipole sits in a lossless finite layer (the host) at distance ``z_up``
below its upper boundary and ``z_down`` above its lower boundary.  Its field
is expanded in plane waves with in-plane wavevector ``u * k1`` (``k1`` the
host wavenumber, ``l = sqrt(1 - u**2)``), and each channel is dressed with
the generalised reflections ``r+`` / ``r-`` of the sub-stacks above and below.

All powers are normalised to the same dipole in an unbounded host, so a
dipole in a uniform medium has ``purcell_total == 1`` and ``power_up == 0.5``.

``total_power`` integrates the complex channel density along a half-ellipse
in the lower half of the complex ``u`` plane (then along the real axis past
all branch points and surface-plasmon poles).  Bound-mode poles of passive
stacks lie above the real axis, so the deformed path gives the real-axis
integral while staying clear of near-lossless guided-mode poles that a
real-axis rule cannot resolve.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from . import materials as mat
from .quadrature import QuadResult, adaptive_quad
from .stratified import LayerStack, SubStack, flux_factor, normal_wavevector

__all__ = [
    "DegenerateCavityError",
    "DipoleEnvironment",
    "DipoleSource",
    "EmissionResult",
    "IdealReflector",
    "NumericalAperture",
    "QuadratureSettings",
    "UnsupportedConfigurationError",
    "collection_efficiency",
    "environment",
    "far_field",
    "far_field_table",
    "power_split",
    "radiated_power",
    "solve",
    "spectral_density",
    "total_power",
    "write_far_field_csv",
]

Orientation = Literal["vertical", "horizontal", "isotropic"]
ORIENTATIONS = ("vertical", "horizontal", "isotropic")
_ALIASES = {"isotropic_average": "isotropic", "perpendicular": "vertical", "parallel": "horizontal"}


class DegenerateCavityError(ArithmeticError):
    """Fabry-Perot denominator ``1 - r+ r- a+ a-`` vanishes."""


class UnsupportedConfigurationError(ValueError):
    pass


def _orientation(name) -> str:
    name = _ALIASES.get(name, name)
    if name not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {name!r}")
    return name


@dataclass(frozen=True)
class DipoleSource:
    """Emitter position and orientation.

    ``layer_index`` counts finite layers of the stack from the top (0-based).
    ``z_up_nm + z_down_nm`` must equal that layer's thickness.
    """

    layer_index: int
    z_up_nm: float
    z_down_nm: float
    wavelength_nm: float = 637.0
    orientation: str = "isotropic"

    def __post_init__(self):
        object.__setattr__(self, "orientation", _orientation(self.orientation))
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be > 0")
        if not (self.z_up_nm > 0 and self.z_down_nm > 0):
            raise ValueError("z_up_nm and z_down_nm must both be > 0")

    @classmethod
    def centered(cls, stack: LayerStack, layer_index: int, **kw) -> DipoleSource:
        d = stack.layers[layer_index].thickness_nm
        return cls(layer_index, d / 2, d / 2, **kw)

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength_nm


@dataclass(frozen=True)
class NumericalAperture:
    na: float
    n_superstrate: float = 1.0

    def __post_init__(self):
        if not self.na > 0:
            raise ValueError(f"NA must be positive, got {self.na}")
        if self.na > self.n_superstrate:
            raise ValueError(f"NA {self.na} exceeds the superstrate index {self.n_superstrate}")

    @property
    def half_angle(self) -> float:
        return float(np.arcsin(self.na / self.n_superstrate))


@dataclass(frozen=True)
class QuadratureSettings:
    """Knobs of the emission integrals.

    ``rtol`` / ``atol`` drive the adaptive panels, ``u_max`` is the initial
    truncation of the evanescent tail (doubled until the tail bound is below
    ``atol + rtol*|total|``, at most ``u_limit``), ``depth`` is the excursion
    of the deformed path below the real axis as a fraction of its span.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    order: int = 15
    u_max: float = 8.0
    u_limit: float = 1024.0
    depth: float = 0.1
    max_panels: int = 20000


DEFAULT_QUADRATURE = QuadratureSettings()


@dataclass(frozen=True)
class IdealReflector:
    """Dispersionless side with fixed ``r_s``, ``r_p`` and no transmission.

    ``IdealReflector(-1, 1)`` is a perfect electric conductor.
    """

    r_s: complex = 0.0
    r_p: complex = 0.0

    def rt(self, q, k0, pol):
        r = self.r_s if pol == "s" else self.r_p
        shape = np.shape(q)
        return np.full(shape, complex(r)), np.zeros(shape, dtype=complex)


@dataclass(frozen=True)
class DipoleEnvironment:
    """Host layer plus what the dipole sees above and below it.

    ``upper`` / ``lower`` are objects with ``rt(q, k0, pol)`` returning the
    generalised amplitudes seen from the host (``q`` = in-plane wavevector /
    k0); ``eps_top`` / ``eps_bottom`` are the half-spaces where radiated power
    is collected (``None`` when the side does not radiate).
    """

    eps_host: float
    z_up_nm: float
    z_down_nm: float
    wavelength_nm: float
    upper: object
    lower: object
    eps_top: complex | None
    eps_bottom: complex | None
    branch_indices: tuple = ()

    @property
    def n_host(self) -> float:
        return float(np.sqrt(self.eps_host))

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength_nm

    def flipped(self) -> DipoleEnvironment:
        return replace(
            self,
            z_up_nm=self.z_down_nm,
            z_down_nm=self.z_up_nm,
            upper=self.lower,
            lower=self.upper,
            eps_top=self.eps_bottom,
            eps_bottom=self.eps_top,
        )

    @classmethod
    def uniform(cls, n: float = 1.0, wavelength_nm: float = 637.0, z_nm: float = 100.0) -> DipoleEnvironment:
        eps = float(n) ** 2
        side = SubStack((eps, eps))
        return cls(eps, z_nm, z_nm, wavelength_nm, side, side, eps, eps, (float(n),))

    @classmethod
    def above_mirror(cls, height_nm: float, mirror: IdealReflector = IdealReflector(-1.0, 1.0),
                     n: float = 1.0, wavelength_nm: float = 637.0) -> DipoleEnvironment:
        """Dipole at ``height_nm`` above an ideal reflector, open half-space above."""
        eps = float(n) ** 2
        return cls(eps, height_nm, height_nm, wavelength_nm, SubStack((eps, eps)), mirror,
                   eps, None, (float(n),))


def environment(stack, dipole: DipoleSource) -> DipoleEnvironment:
    """Resolve a stack and dipole into a :class:`DipoleEnvironment`."""
    if isinstance(stack, DipoleEnvironment):
        return stack
    if not 0 <= dipole.layer_index < len(stack.layers):
        raise ValueError(
            f"dipole layer_index {dipole.layer_index} does not name a finite layer "
            f"(stack has {len(stack.layers)})"
        )
    host = stack.layers[dipole.layer_index]
    d = host.thickness_nm
    if abs(dipole.z_up_nm + dipole.z_down_nm - d) > 1e-9 * d:
        raise ValueError(
            f"z_up_nm + z_down_nm = {dipole.z_up_nm + dipole.z_down_nm} nm but host layer "
            f"{host.material.name!r} is {d} nm thick"
        )
    wl = dipole.wavelength_nm
    nk = mat.refractive_index(host.material, wl)
    if nk.imag != 0:
        raise ValueError(
            f"host layer {host.material.name!r} absorbs at {wl} nm (k={nk.imag:g}); "
            "the emitted power is unbounded in a lossy host"
        )
    eps = stack.permittivities(wl)
    # metal/dielectric neighbours: surface-plasmon index sets how far the path must reach
    indices = [abs(np.sqrt(e)) for e in eps]
    for a, b in zip(eps[:-1], eps[1:]):
        if (a.real < 0) != (b.real < 0) and abs(a + b) > 0:
            indices.append(abs(np.sqrt(a * b / (a + b))))
    return DipoleEnvironment(
        eps_host=float(nk.real**2),
        z_up_nm=float(dipole.z_up_nm),
        z_down_nm=float(dipole.z_down_nm),
        wavelength_nm=float(wl),
        upper=stack.substack(wl, "from_below", dipole.layer_index),
        lower=stack.substack(wl, "from_above", dipole.layer_index),
        eps_top=complex(eps[0]),
        eps_bottom=complex(eps[-1]),
        branch_indices=tuple(float(x) for x in indices),
    )


# -- channel densities -------------------------------------------------------

def _channels(env: DipoleEnvironment, u):
    """Complex ``(f_vertical, f_horizontal)`` per unit ``u``; real part is dF/du."""
    u = np.asarray(u, dtype=complex)
    n1, k0 = env.n_host, env.k0
    q = u * n1
    l = normal_wavevector(1.0, u)
    kz1 = n1 * l
    ap = np.exp(2j * k0 * kz1 * env.z_up_nm)
    am = np.exp(2j * k0 * kz1 * env.z_down_nm)
    rs_p, _ = env.upper.rt(q, k0, "s")
    rs_m, _ = env.lower.rt(q, k0, "s")
    rp_p, _ = env.upper.rt(q, k0, "p")
    rp_m, _ = env.lower.rt(q, k0, "p")
    ds = 1 - rs_p * rs_m * ap * am
    dp = 1 - rp_p * rp_m * ap * am
    with np.errstate(divide="ignore", invalid="ignore"):
        fv = 1.5 * (u**3 / l) * (1 + rp_p * ap) * (1 + rp_m * am) / dp
        fh = 0.75 * (u / l) * (
            (1 + rs_p * ap) * (1 + rs_m * am) / ds
            + (1 - u**2) * (1 - rp_p * ap) * (1 - rp_m * am) / dp
        )
    return fv, fh, ds, dp


def _combine(fv, fh, orientation):
    if orientation == "vertical":
        return fv
    if orientation == "horizontal":
        return fh
    return (fv + 2 * fh) / 3


def spectral_density(stack, dipole: DipoleSource, u, orientation: str | None = None):
    """Real power density ``dF/du`` at real ``u >= 0``.

    Raises
    ------
    DegenerateCavityError
        If ``|1 - r+ r- a+ a-| < 1e-14`` at some ``u``.
    """
    env = environment(stack, dipole)
    orientation = _orientation(orientation or dipole.orientation)
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0):
        raise ValueError("u must be >= 0")
    fv, fh, ds, dp = _channels(env, u_arr)
    bad = (np.abs(ds) < 1e-14) | (np.abs(dp) < 1e-14)
    if np.any(bad):
        raise DegenerateCavityError(f"degenerate cavity denominator at u={u_arr[bad].ravel()[0]!r}")
    out = np.real(_combine(fv, fh, orientation))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PowerIntegral:
    value: float
    error: float
    tail_bound: float
    u_max: float
    evaluations: int


def _path_end(env: DipoleEnvironment) -> float:
    top = max(env.branch_indices + (env.n_host,)) / env.n_host
    return 1.2 * max(top, 1.0) + 0.2


def _tail_bound(env, f, u_max):
    # channel density decays like exp(-2 k1 z u) beyond the last branch point
    zmin = min(env.z_up_nm, env.z_down_nm)
    rate = 2 * env.k0 * env.n_host * zmin - 3.0 / u_max
    val = abs(float(np.real(f(np.array([u_max]))[0])))
    return val / rate if rate > 0 else np.inf


def _integrate_total(env, orientation, settings: QuadratureSettings) -> PowerIntegral:
    def f(u):
        fv, fh, _, _ = _channels(env, u)
        return _combine(fv, fh, orientation)

    uc = _path_end(env)
    h = settings.depth * uc

    def on_path(t):
        u = 0.5 * uc * (1 - np.cos(t)) - 1j * h * np.sin(t)
        du = 0.5 * uc * np.sin(t) - 1j * h * np.cos(t)
        return f(u) * du

    kw = dict(atol=settings.atol, rtol=settings.rtol, order=settings.order, max_panels=settings.max_panels)
    first: QuadResult = adaptive_quad(on_path, 0.0, np.pi, **kw)
    value = first.value.real
    error = first.error
    evals = first.evaluations

    u_lo, u_max = uc, max(settings.u_max, 2 * uc)
    while True:
        seg = adaptive_quad(lambda x: np.real(f(x)), u_lo, u_max, **{**kw, "atol": settings.atol / 4})
        value += seg.value
        error += seg.error
        evals += seg.evaluations
        tail = _tail_bound(env, f, u_max)
        if tail <= settings.atol + settings.rtol * abs(value) or u_max >= settings.u_limit:
            break
        u_lo, u_max = u_max, 2 * u_max
    return PowerIntegral(float(value), float(error + tail), float(tail), float(u_max), evals)


def total_power(stack, dipole: DipoleSource, orientation: str | None = None,
                settings: QuadratureSettings = DEFAULT_QUADRATURE, full_output: bool = False):
    """Total emitted power normalised to the unbounded host (Purcell factor).

    With ``full_output`` returns a :class:`PowerIntegral` carrying the error
    bound (panel estimates plus tail bound) and the truncation used.
    """
    env = environment(stack, dipole)
    res = _integrate_total(env, _orientation(orientation or dipole.orientation), settings)
    return res if full_output else res.value


# -- radiation into the half-spaces ------------------------------------------

def _reduced_radiation(env: DipoleEnvironment, u, direction: str):
    """Power radiated per unit ``u`` into a half-space, divided by ``u``.

    Returns ``(vertical, horizontal)`` arrays for real ``u``.
    """
    if direction == "up":
        ex, eps_out = env, env.eps_top
    else:
        ex, eps_out = env.flipped(), env.eps_bottom
    u = np.asarray(u, dtype=float)
    # exact grazing in the host is a removable 0/0 (|t|**2 / |l|**2); step just inside
    u = np.where(u == 1.0, np.nextafter(1.0, 0.0), u)
    n1, k0 = ex.n_host, ex.k0
    q = u * n1
    l = normal_wavevector(1.0, u)
    kz1 = n1 * l
    ap = np.exp(2j * k0 * kz1 * ex.z_up_nm)
    am = np.exp(2j * k0 * kz1 * ex.z_down_nm)
    kz_out = normal_wavevector(eps_out, q)
    rs_p, ts_p = ex.upper.rt(q, k0, "s")
    rs_m, _ = ex.lower.rt(q, k0, "s")
    rp_p, tp_p = ex.upper.rt(q, k0, "p")
    rp_m, _ = ex.lower.rt(q, k0, "p")
    ds = 1 - rs_p * rs_m * ap * am
    dp = 1 - rp_p * rp_m * ap * am
    prop = np.abs(ap)  # |exp(i kz1 z_up)|**2
    fs = prop * np.abs(ts_p) ** 2 * flux_factor(eps_out, kz_out, "s") / n1
    fp = prop * np.abs(tp_p) ** 2 * flux_factor(eps_out, kz_out, "p") * n1
    l2 = np.abs(l) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        vert = 0.75 * u**2 / l2 * np.abs(1 + rp_m * am) ** 2 / np.abs(dp) ** 2 * fp
        hs = 0.375 / l2 * np.abs(1 + rs_m * am) ** 2 / np.abs(ds) ** 2 * fs
    hp = 0.375 * np.abs(1 - rp_m * am) ** 2 / np.abs(dp) ** 2 * fp
    return vert, hs + hp


def _outer_index(env, direction):
    eps = env.eps_top if direction == "up" else env.eps_bottom
    if eps is None:
        return None
    n = np.sqrt(complex(eps))
    return n


def _check_radiating(env, direction):
    n = _outer_index(env, direction)
    if n is None:
        raise UnsupportedConfigurationError(f"the {direction}ward side of this environment does not radiate")
    if n.imag != 0:
        raise UnsupportedConfigurationError(
            f"far field needs a lossless {'superstrate' if direction == 'up' else 'substrate'}"
        )
    return float(n.real)


def _pattern(env, theta, orientation, direction):
    n_out = _check_radiating(env, direction)
    ratio = n_out / env.n_host
    theta = np.asarray(theta, dtype=float)
    u = ratio * np.sin(theta)
    v, h = _reduced_radiation(env, u, direction)
    g = _combine(v, h, orientation)
    return g * ratio**2 * np.cos(theta) / (2 * np.pi)


def far_field(stack, dipole: DipoleSource, theta, orientation: str | None = None, direction: str = "up"):
    """Azimuth-averaged ``dP/dOmega`` at polar angles ``theta`` (radians).

    Angles are measured from the outward normal in the superstrate
    (``direction="up"``) or substrate (``"down"``).  Integrating over the
    hemisphere gives :func:`radiated_power`.

    Raises
    ------
    UnsupportedConfigurationError
        If the collecting half-space absorbs.
    """
    env = environment(stack, dipole)
    theta = np.asarray(theta, dtype=float)
    if np.any((theta < 0) | (theta >= np.pi / 2)):
        raise ValueError("theta must lie in [0, pi/2)")
    out = _pattern(env, theta, _orientation(orientation or dipole.orientation), direction)
    return out[()] if np.ndim(out) == 0 else out


def _cone_power(env, orientation, theta_max, direction, settings):
    n_out = _check_radiating(env, direction)
    ratio = n_out / env.n_host
    # kinks where the channel turns evanescent in the host or a half-space
    kinks = []
    for n in env.branch_indices + (env.n_host,):
        s = (n / env.n_host) / ratio
        if 0 < s < 1:
            kinks.append(float(np.arcsin(s)))

    def integrand(t):
        return _pattern(env, t, orientation, direction) * 2 * np.pi * np.sin(t)

    res = adaptive_quad(integrand, 0.0, theta_max, atol=settings.atol, rtol=settings.rtol,
                        order=settings.order, breakpoints=kinks, max_panels=settings.max_panels)
    return res.value


def radiated_power(stack, dipole: DipoleSource, direction: str = "up", orientation: str | None = None,
                   settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    """Power radiated into the superstrate (``"up"``) or substrate (``"down"``)."""
    env = environment(stack, dipole)
    return _cone_power(env, _orientation(orientation or dipole.orientation), np.pi / 2, direction, settings)


def power_split(stack, dipole: DipoleSource, orientation: str | None = None,
                settings: QuadratureSettings = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """``(power_up, total - power_up)``; the remainder is downward plus absorbed."""
    env = environment(stack, dipole)
    o = _orientation(orientation or dipole.orientation)
    total = _integrate_total(env, o, settings).value
    up = _cone_power(env, o, np.pi / 2, "up", settings)
    return up, total - up


def _na(na, env) -> NumericalAperture:
    n_sup = _check_radiating(env, "up")
    if isinstance(na, NumericalAperture):
        if abs(na.n_superstrate - n_sup) > 1e-12:
            na = NumericalAperture(na.na, n_sup)
        return na
    return NumericalAperture(float(na), n_sup)


def collection_efficiency(stack, dipole: DipoleSource, na, orientation: str | None = None,
                          settings: QuadratureSettings = DEFAULT_QUADRATURE, total: float | None = None) -> float:
    """Fraction of the total emitted power inside the objective's cone."""
    env = environment(stack, dipole)
    o = _orientation(orientation or dipole.orientation)
    aperture = _na(na, env)
    if total is None:
        total = _integrate_total(env, o, settings).value
    return _cone_power(env, o, aperture.half_angle, "up", settings) / total


# -- one-shot solve ------------------------------------------------------------

@dataclass
class EmissionResult:
    """Everything the solver reports for one stack, dipole and orientation."""

    orientation: str
    purcell_total: float
    power_up: float
    power_down_or_absorbed: float
    eta_na: float
    na: float
    theta_rad: np.ndarray
    farfield: np.ndarray
    total_error: float = 0.0
    u_max: float = 0.0
    power_down_radiated: float | None = None
    by_orientation: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "orientation": self.orientation,
            "purcell_total": self.purcell_total,
            "power_up": self.power_up,
            "power_down_or_absorbed": self.power_down_or_absorbed,
            "power_down_radiated": self.power_down_radiated,
            "eta_na": self.eta_na,
            "na": self.na,
            "total_error_bound": self.total_error,
            "u_max": self.u_max,
        }
        if self.by_orientation:
            out["by_orientation"] = self.by_orientation
        return out


def solve(stack, dipole: DipoleSource, na=0.7, theta=None,
          settings: QuadratureSettings = DEFAULT_QUADRATURE) -> EmissionResult:
    """Total power, up/down split, far field and NA collection for the dipole.

    All three orientations are evaluated; the headline numbers use
    ``dipole.orientation`` and the others are kept in ``by_orientation``.
    """
    env = environment(stack, dipole)
    aperture = _na(na, env)
    if theta is None:
        theta = np.deg2rad(np.arange(0.0, 90.0, 0.5))
    theta = np.asarray(theta, dtype=float)
    bottom_lossless = env.eps_bottom is not None and np.sqrt(complex(env.eps_bottom)).imag == 0

    rows = {}
    for o in ORIENTATIONS:
        tot = _integrate_total(env, o, settings)
        up = _cone_power(env, o, np.pi / 2, "up", settings)
        cone = _cone_power(env, o, aperture.half_angle, "up", settings)
        down = _cone_power(env, o, np.pi / 2, "down", settings) if bottom_lossless else None
        rows[o] = dict(purcell_total=tot.value, power_up=up, power_down_or_absorbed=tot.value - up,
                       power_down_radiated=down, eta_na=cone / tot.value,
                       total_error_bound=tot.error, u_max=tot.u_max)
    main = rows[dipole.orientation]
    return EmissionResult(
        orientation=dipole.orientation,
        purcell_total=main["purcell_total"],
        power_up=main["power_up"],
        power_down_or_absorbed=main["power_down_or_absorbed"],
        eta_na=main["eta_na"],
        na=aperture.na,
        theta_rad=theta,
        farfield=_pattern(env, theta, dipole.orientation, "up"),
        total_error=main["total_error_bound"],
        u_max=main["u_max"],
        power_down_radiated=main["power_down_radiated"],
        by_orientation=rows,
    )


def far_field_table(stack, dipole: DipoleSource, theta) -> dict[str, np.ndarray]:
    env = environment(stack, dipole)
    theta = np.asarray(theta, dtype=float)
    return {o: _pattern(env, theta, o, "up") for o in ORIENTATIONS}


def write_far_field_csv(path, theta, table: dict[str, np.ndarray]) -> Path:
    """Columns ``theta_deg, dP_dOmega_vertical, dP_dOmega_horizontal, dP_dOmega_avg``."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_deg", "dP_dOmega_vertical", "dP_dOmega_horizontal", "dP_dOmega_avg"])
        for i, t in enumerate(np.rad2deg(theta)):
            w.writerow([f"{t:.6g}"] + [f"{table[o][i]:.6g}" for o in ORIENTATIONS])
    return path
