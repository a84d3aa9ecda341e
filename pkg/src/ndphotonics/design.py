"""Spacer-thickness and wavelength sweeps on top of the emission solver.

Typical use::

    stack = paper_stack("Ag")
    spec = SweepSpec(stack, swept_layer=1, dipole=DipoleSource.centered(stack, 0))
    curve = thickness_sweep(spec)
    report = find_peaks(curve)

Sweep points are independent; with ``threads > 1`` they are evaluated in a
thread pool and reassembled in grid order, so results do not depend on the
thread count.
"""
from __future__ import annotations

import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import emission as em
from . import materials as mat
from .emission import DEFAULT_QUADRATURE, DipoleSource, QuadratureSettings
from .stratified import Layer, LayerStack

__all__ = [
    "InvalidReferenceError",
    "Metric",
    "Peak",
    "PeakReport",
    "SweepCurve",
    "SweepError",
    "SweepSpec",
    "enhancement",
    "enhancement_curve",
    "evaluate_metric",
    "find_peaks",
    "half_wave_period",
    "paper_dipole",
    "paper_stack",
    "refinement_bound",
    "stack_metal",
    "thickness_sweep",
    "wavelength_sweep",
    "write_peak_report",
    "write_sweep_csv",
]

PAPER_WAVELENGTH_NM = 637.0
METALS = ("Ag", "Au", "Al")


class SweepError(RuntimeError):
    """A solver failure at one sweep point; the original error is ``__cause__``."""

    def __init__(self, axis: str, value: float, cause: Exception):
        self.axis = axis
        self.value = value
        super().__init__(f"at {axis} = {value:g}: {type(cause).__name__}: {cause}")


class InvalidReferenceError(ValueError):
    pass


# -- metrics -------------------------------------------------------------------

_ETA = re.compile(r"^eta_na(?:\(\s*([0-9.eE+-]+)\s*\))?$")


@dataclass(frozen=True)
class Metric:
    """``power_up``, ``purcell_total`` or ``eta_na`` at numerical aperture ``na``."""

    name: str
    na: float | None = None

    def __post_init__(self):
        if self.name not in ("power_up", "purcell_total", "eta_na"):
            raise ValueError(f"unknown metric {self.name!r}; expected power_up, purcell_total or eta_na(NA)")
        if self.name == "eta_na":
            na = 0.7 if self.na is None else float(self.na)
            if not na > 0:
                raise ValueError(f"eta_na needs a positive NA, got {na}")
            object.__setattr__(self, "na", na)
        elif self.na is not None:
            raise ValueError(f"metric {self.name!r} takes no NA")

    @classmethod
    def parse(cls, text) -> Metric:
        if isinstance(text, Metric):
            return text
        text = str(text).strip()
        m = _ETA.match(text)
        if m:
            return cls("eta_na", float(m.group(1)) if m.group(1) else None)
        return cls(text)

    @property
    def label(self) -> str:
        return f"eta_na({self.na:g})" if self.name == "eta_na" else self.name


def evaluate_metric(stack, dipole: DipoleSource, metric, settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    metric = Metric.parse(metric)
    if metric.name == "purcell_total":
        return em.total_power(stack, dipole, settings=settings)
    if metric.name == "power_up":
        return em.radiated_power(stack, dipole, "up", settings=settings)
    return em.collection_efficiency(stack, dipole, metric.na, settings=settings)


# -- the reference device --------------------------------------------------------

def paper_stack(metal: str | None = "Ag", spacer_nm: float | None = 65.0, *, diamond_nm: float = 100.0,
                metal_nm: float = 200.0, buffer_nm: float = 2000.0, substrate: str = "wafer") -> LayerStack:
    """Diamond slab on SiO2 spacer on metal on a SiO2-coated Si wafer.

    Layers top to bottom: ``diamond | SiO2 spacer | metal | SiO2 buffer`` on Si,
    under air.  ``metal=None`` drops the reflector; ``spacer_nm=None`` (only
    allowed without metal) drops the spacer too, leaving the bare wafer.
    ``substrate="silica"`` replaces buffer and Si by a SiO2 half-space.
    """
    g = mat.get
    layers = [Layer(g("diamond"), diamond_nm)]
    if spacer_nm is not None:
        layers.append(Layer(g("SiO2"), spacer_nm))
    elif metal is not None:
        raise ValueError("a metal reflector needs a spacer thickness")
    if metal is not None:
        if metal not in METALS:
            raise ValueError(f"metal must be one of {METALS} or None, got {metal!r}")
        layers.append(Layer(g(metal), metal_nm))
    if substrate == "wafer":
        layers.append(Layer(g("SiO2"), buffer_nm))
        bottom = g("Si")
    elif substrate == "silica":
        bottom = g("SiO2")
    else:
        raise ValueError(f"substrate must be 'wafer' or 'silica', got {substrate!r}")
    return LayerStack(g("air"), tuple(layers), bottom)


def paper_dipole(stack: LayerStack, orientation: str = "isotropic",
                 wavelength_nm: float = PAPER_WAVELENGTH_NM) -> DipoleSource:
    """Dipole centred in the top (diamond) layer."""
    return DipoleSource.centered(stack, 0, wavelength_nm=wavelength_nm, orientation=orientation)


def stack_metal(stack: LayerStack) -> str:
    """Name of the first metal layer, or ``"none"``."""
    for layer in stack.layers:
        if layer.material.kind == "metal":
            return layer.material.name
    return "none"


def half_wave_period(wavelength_nm: float = PAPER_WAVELENGTH_NM, material: str = "SiO2") -> float:
    """Spacer increment ``lambda / (2 n)`` between successive interference orders."""
    n = mat.refractive_index(mat.get(material), wavelength_nm).real
    return wavelength_nm / (2 * n)


# -- sweeps ------------------------------------------------------------------------

def _grid(start, stop, step) -> np.ndarray:
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count, dtype=float)


@dataclass(frozen=True)
class SweepSpec:
    """Spacer sweep of ``base_stack`` layer ``swept_layer``.

    Defaults follow the reference study: 10 to 400 nm in 5 nm steps,
    upward radiated power.
    """

    base_stack: LayerStack
    swept_layer: int
    dipole: DipoleSource
    start_nm: float = 10.0
    stop_nm: float = 400.0
    step_nm: float = 5.0
    metric: Metric = Metric("power_up")
    settings: QuadratureSettings = DEFAULT_QUADRATURE
    metal: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        if not self.start_nm < self.stop_nm:
            raise ValueError(f"start_nm ({self.start_nm}) must be < stop_nm ({self.stop_nm})")
        if not self.step_nm > 0:
            raise ValueError("step_nm must be > 0")
        if self.step_nm > (self.stop_nm - self.start_nm) / 2:
            raise ValueError("step_nm must be at most half the sweep span")
        if self.start_nm <= 0:
            raise ValueError("start_nm must be > 0 (layer thickness)")
        if not 0 <= self.swept_layer < len(self.base_stack.layers):
            raise ValueError(
                f"swept_layer {self.swept_layer} out of range (stack has {len(self.base_stack.layers)} layers)"
            )
        if self.swept_layer == self.dipole.layer_index:
            raise ValueError("the swept layer cannot host the dipole")
        if self.metal is None:
            object.__setattr__(self, "metal", stack_metal(self.base_stack))

    @property
    def grid(self) -> np.ndarray:
        return _grid(self.start_nm, self.stop_nm, self.step_nm)


@dataclass
class SweepCurve:
    """Metric values on a strictly increasing thickness or wavelength grid."""

    axis_nm: np.ndarray
    values: np.ndarray
    metal: str
    metric: str
    axis: str = "thickness_nm"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis_nm = np.asarray(self.axis_nm, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis_nm.shape != self.values.shape or self.axis_nm.ndim != 1:
            raise ValueError("axis and values must be 1-D of equal length")
        if np.any(np.diff(self.axis_nm) <= 0):
            raise ValueError("sweep axis must be strictly increasing")

    @property
    def thickness_nm(self) -> np.ndarray:
        return self.axis_nm

    def __len__(self):
        return self.axis_nm.size

    def value_at(self, x: float) -> float:
        """Linear interpolation; exact at grid points."""
        if not self.axis_nm[0] <= x <= self.axis_nm[-1]:
            raise ValueError(f"{x} outside the sweep range [{self.axis_nm[0]}, {self.axis_nm[-1]}]")
        return float(np.interp(x, self.axis_nm, self.values))

    def scaled(self, factor: float) -> SweepCurve:
        return replace(self, values=self.values * factor)


def _evaluate(points, fn, axis, threads):
    def one(x):
        try:
            return fn(x)
        except Exception as exc:
            raise SweepError(axis, float(x), exc) from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return np.array(list(pool.map(one, points)), dtype=float)
    return np.array([one(x) for x in points], dtype=float)


def thickness_sweep(spec: SweepSpec, threads: int = 1) -> SweepCurve:
    """Evaluate ``spec.metric`` for each spacer thickness on ``spec.grid``.

    Raises
    ------
    SweepError
        Wrapping the solver error, with the failing thickness in the message.
    """
    grid = spec.grid
    idx = spec.swept_layer
    stack0, dip0 = spec.base_stack, spec.dipole

    def point(t):
        return evaluate_metric(stack0.with_thickness(idx, float(t)), dip0, spec.metric, spec.settings)

    values = _evaluate(grid, point, "thickness_nm", threads)
    meta = {
        "wavelength_nm": dip0.wavelength_nm,
        "orientation": dip0.orientation,
        "dipole_layer": dip0.layer_index,
        "z_up_nm": dip0.z_up_nm,
        "z_down_nm": dip0.z_down_nm,
        "na": spec.metric.na,
        "stack": str(stack0),
    }
    return SweepCurve(grid, values, spec.metal, spec.metric.label, "thickness_nm", meta)


def wavelength_sweep(stack: LayerStack, dipole: DipoleSource, start_nm: float, stop_nm: float, step_nm: float,
                     metric="power_up", settings: QuadratureSettings = DEFAULT_QUADRATURE,
                     threads: int = 1, metal: str | None = None) -> SweepCurve:
    """Metric against emission wavelength at fixed geometry.

    Raises
    ------
    WavelengthRangeError
        Before any computation, naming the first wavelength some material
        does not cover.
    """
    metric = Metric.parse(metric)
    if not (start_nm < stop_nm and step_nm > 0):
        raise ValueError("need start_nm < stop_nm and step_nm > 0")
    grid = _grid(start_nm, stop_nm, step_nm)
    for wl in grid:
        for m in stack.media:
            if not m.covers(wl):
                raise mat.WavelengthRangeError(m.name, float(wl), m.span)

    def point(wl):
        return evaluate_metric(stack, replace(dipole, wavelength_nm=float(wl)), metric, settings)

    values = _evaluate(grid, point, "wavelength_nm", threads)
    meta = {"orientation": dipole.orientation, "na": metric.na, "stack": str(stack),
            "z_up_nm": dipole.z_up_nm, "z_down_nm": dipole.z_down_nm}
    return SweepCurve(grid, values, metal or stack_metal(stack), metric.label, "wavelength_nm", meta)


# -- peaks ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Peak:
    position_nm: float
    value: float
    order: int
    prominence: float
    sample_index: int


@dataclass
class PeakReport:
    """Interior maxima ordered by position, labelled 1, 2, ... ."""

    peaks: list[Peak]
    metal: str = ""
    metric: str = ""
    min_prominence: float = 0.0
    enhancement_vs_reference: float | None = None

    def __post_init__(self):
        pos = [p.position_nm for p in self.peaks]
        if pos != sorted(pos):
            raise ValueError("peaks must be sorted by position")
        if [p.order for p in self.peaks] != list(range(1, len(self.peaks) + 1)):
            raise ValueError("order labels must run 1, 2, ... without gaps")

    @property
    def positions(self) -> list[float]:
        return [p.position_nm for p in self.peaks]

    def to_text(self) -> str:
        lines = [f"metal = {self.metal}", f"metric = {self.metric}",
                 f"min_prominence = {self.min_prominence:.6g}", f"n_peaks = {len(self.peaks)}"]
        for p in self.peaks:
            lines += [f"peak.{p.order}.thickness_nm = {p.position_nm:.6g}",
                      f"peak.{p.order}.value = {p.value:.6g}",
                      f"peak.{p.order}.prominence = {p.prominence:.6g}"]
        if self.enhancement_vs_reference is not None:
            lines.append(f"enhancement_vs_reference = {self.enhancement_vs_reference:.6g}")
        return "\n".join(lines) + "\n"


def _prominence(y, i) -> float:
    top = y[i]
    j = i
    left = top
    while j > 0 and y[j - 1] <= top:
        j -= 1
        left = min(left, y[j])
    j = i
    right = top
    while j < y.size - 1 and y[j + 1] <= top:
        j += 1
        right = min(right, y[j])
    return float(top - max(left, right))


def _vertex(x, y):
    """Vertex of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    a, b = x1 - x0, x1 - x2
    fa, fb = y1 - y2, y1 - y0
    den = a * fa - b * fb
    if den == 0:
        return float(x1), float(y1)
    xv = x1 - 0.5 * (a * a * fa - b * b * fb) / den
    c = np.polyfit(np.array(x) - x1, np.array(y), 2)
    yv = np.polyval(c, xv - x1)
    return float(xv), float(yv)


def find_peaks(curve: SweepCurve, min_prominence: float | None = None, relative: float = 0.02) -> PeakReport:
    """Interior local maxima whose prominence reaches the threshold.

    Each peak is refined by the parabola through its sample and the two
    neighbours.  For a smooth curve with ``f''`` and ``f'''`` near the peak and
    uniform step ``h`` the refined location is off by at most
    ``h**2 |f'''| / (6 (|f''| - h |f'''| / 2))`` (see :func:`refinement_bound`).

    ``min_prominence`` defaults to ``relative * max(curve)``.
    """
    y = curve.values
    x = curve.axis_nm
    if y.size < 5:
        raise ValueError("find_peaks needs at least 5 samples")
    if min_prominence is None:
        min_prominence = relative * float(np.max(np.abs(y)))
    found = []
    for i in range(1, y.size - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1]:
            prom = _prominence(y, i)
            if prom >= min_prominence and prom > 0:
                xv, yv = _vertex(x[i - 1:i + 2], y[i - 1:i + 2])
                found.append((xv, yv, prom, i))
    peaks = [Peak(xv, yv, k + 1, prom, i) for k, (xv, yv, prom, i) in enumerate(found)]
    return PeakReport(peaks, curve.metal, curve.metric, float(min_prominence))


def refinement_bound(step: float, f2: float, f3: float) -> float:
    """Worst-case parabolic-refinement error for curvature ``f2`` and third derivative ``f3``."""
    den = abs(f2) - abs(f3) * step / 2
    return np.inf if den <= 0 else step**2 * abs(f3) / (6 * den)


# -- enhancement ----------------------------------------------------------------------

def enhancement(curve: SweepCurve, reference: SweepCurve) -> float:
    """``max(curve)`` over the reference value at the same grid position.

    Raises
    ------
    InvalidReferenceError
        If the reference is not positive there.
    """
    i = int(np.argmax(curve.values))
    x = curve.axis_nm[i]
    ref = reference.value_at(x)
    if not ref > 0:
        raise InvalidReferenceError(f"reference value {ref!r} at {curve.axis} = {x:g} is not positive")
    return float(curve.values[i] / ref)


def enhancement_curve(curve: SweepCurve, reference: SweepCurve) -> np.ndarray:
    """Pointwise ratio on ``curve``'s grid."""
    ref = np.array([reference.value_at(x) for x in curve.axis_nm])
    if np.any(ref <= 0):
        raise InvalidReferenceError("reference has non-positive values")
    return curve.values / ref


# -- output ---------------------------------------------------------------------------

def write_sweep_csv(path, curves) -> Path:
    """Long-format CSV: ``<axis>, metric, metal, metric_name``; one row per sample."""
    curves = [curves] if isinstance(curves, SweepCurve) else list(curves)
    axes = {c.axis for c in curves}
    if len(axes) != 1:
        raise ValueError("curves mix thickness and wavelength axes")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([axes.pop(), "metric", "metal", "metric_name"])
        for c in curves:
            for x, v in zip(c.axis_nm, c.values):
                w.writerow([f"{x:.10g}", f"{v:.10g}", c.metal, c.metric])
    return path


def write_peak_report(path, reports) -> Path:
    reports = [reports] if isinstance(reports, PeakReport) else list(reports)
    path = Path(path)
    path.write_text("\n".join(r.to_text() for r in reports), encoding="utf-8")
    return path
