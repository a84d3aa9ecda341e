"""Optical materials with tabulated complex refractive index.

Every material is a table of ``(wavelength_nm, n, k)`` rows, linearly
interpolated in ``n`` and ``k`` separately.  Values outside the tabulated span
raise :class:`WavelengthRangeError`; nothing is extrapolated.

Bundled tables (``data/materials``):

========  ==============  =============================================
name      kind            source
========  ==============  =============================================
Ag, Au    metal           Johnson & Christy (1972)
Al        metal           Rakic (1995)
SiO2      dielectric      Malitson (1965) Sellmeier, sampled every 2 nm
Si        semiconductor   Aspnes & Studna (1983)
diamond   dielectric      constant n = 2.41, 500-800 nm
air       vacuum          exactly 1 at every wavelength
========  ==============  =============================================

Table file format (UTF-8)::

    # <name> <kind>
    # optional further comment lines
    <wavelength_nm> <n> <k>
    ...
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "KINDS",
    "MaterialFormatError",
    "OpticalMaterial",
    "WavelengthRangeError",
    "available",
    "constant",
    "get",
    "load_table",
    "parse_table",
    "permittivity",
    "refractive_index",
    "vacuum",
]

KINDS = ("metal", "dielectric", "semiconductor", "vacuum")

_CONSTANT_SPAN_NM = (1.0, 1.0e7)


class WavelengthRangeError(ValueError):
    """Wavelength outside a material's tabulated span."""

    def __init__(self, name: str, wavelength_nm, span: tuple[float, float]):
        self.material = name
        self.wavelength_nm = wavelength_nm
        self.span = span
        super().__init__(
            f"wavelength {wavelength_nm} nm outside the valid range of material "
            f"{name!r}: [{span[0]:g}, {span[1]:g}] nm"
        )


class MaterialFormatError(ValueError):
    """Malformed dispersion table."""


@dataclass(frozen=True, eq=False)
class OpticalMaterial:
    """Dispersive, passive optical material.

    Parameters
    ----------
    name : str
        Identifier used in stack files and error messages.
    wavelength_nm, n, k : array_like
        Table columns; wavelengths strictly increasing, ``k >= 0``.
    kind : str
        One of ``metal``, ``dielectric``, ``semiconductor``, ``vacuum``.
    """

    name: str
    wavelength_nm: np.ndarray
    n: np.ndarray
    k: np.ndarray
    kind: str = "dielectric"

    def __post_init__(self):
        wl = np.array(self.wavelength_nm, dtype=float).ravel()
        n = np.array(self.n, dtype=float).ravel()
        k = np.array(self.k, dtype=float).ravel()
        if self.kind not in KINDS:
            raise ValueError(f"unknown material kind {self.kind!r}; expected one of {KINDS}")
        if wl.size == 0:
            raise ValueError(f"material {self.name!r} has no samples")
        if not (wl.shape == n.shape == k.shape):
            raise ValueError(f"material {self.name!r}: column lengths differ")
        if np.any(~np.isfinite(wl)) or np.any(wl <= 0):
            raise ValueError(f"material {self.name!r}: wavelengths must be finite and > 0")
        if np.any(np.diff(wl) <= 0):
            raise ValueError(f"material {self.name!r}: wavelengths must be strictly increasing")
        if np.any(k < 0):
            raise ValueError(f"material {self.name!r}: k < 0 (gain media are not supported)")
        for arr in (wl, n, k):
            arr.setflags(write=False)
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)

    @property
    def span(self) -> tuple[float, float]:
        if self.kind == "vacuum":
            return (0.0, np.inf)
        return float(self.wavelength_nm[0]), float(self.wavelength_nm[-1])

    def covers(self, wavelength_nm) -> bool:
        lo, hi = self.span
        w = np.asarray(wavelength_nm, dtype=float)
        return bool(np.all((w >= lo) & (w <= hi)))

    def index(self, wavelength_nm):
        return refractive_index(self, wavelength_nm)

    def epsilon(self, wavelength_nm):
        return permittivity(self, wavelength_nm)

    def is_lossless(self, wavelength_nm) -> bool:
        return bool(np.all(np.imag(refractive_index(self, wavelength_nm)) == 0.0))

    def __repr__(self):
        lo, hi = self.span
        return f"OpticalMaterial({self.name!r}, kind={self.kind!r}, span=[{lo:g}, {hi:g}] nm)"


def refractive_index(material: OpticalMaterial, wavelength_nm):
    """Complex index ``n + i k`` at ``wavelength_nm`` (scalar or array).

    Piecewise-linear in ``n`` and ``k`` independently; exact at table nodes.
    """
    w = np.asarray(wavelength_nm, dtype=float)
    if material.kind == "vacuum":
        out = np.ones(w.shape, dtype=complex)
        return out[()] if out.ndim == 0 else out
    lo, hi = material.span
    bad = ~((w >= lo) & (w <= hi))
    if np.any(bad):
        first = w[bad].flat[0] if w.ndim else float(w)
        raise WavelengthRangeError(material.name, float(first), (lo, hi))
    wl = material.wavelength_nm
    if wl.size == 1:
        out = np.full(w.shape, material.n[0] + 1j * material.k[0])
    else:
        out = np.interp(w, wl, material.n) + 1j * np.interp(w, wl, material.k)
    return out[()] if np.ndim(out) == 0 else out


def permittivity(material: OpticalMaterial, wavelength_nm):
    """Relative permittivity ``(n + i k)**2``."""
    nk = refractive_index(material, wavelength_nm)
    return nk * nk


def constant(n: complex | float, name: str | None = None, kind: str = "dielectric") -> OpticalMaterial:
    """Non-dispersive material; two identical nodes spanning 1 nm to 1 cm."""
    n = complex(n)
    lo, hi = _CONSTANT_SPAN_NM
    return OpticalMaterial(
        name or f"n={n.real:g}{n.imag:+g}i",
        [lo, hi],
        [n.real, n.real],
        [n.imag, n.imag],
        kind,
    )


def vacuum(name: str = "air") -> OpticalMaterial:
    return OpticalMaterial(name, [_CONSTANT_SPAN_NM[0]], [1.0], [0.0], "vacuum")


def parse_table(text: str, source: str = "<string>") -> OpticalMaterial:
    """Parse a dispersion table; errors carry ``source:line``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise MaterialFormatError(f"{source}:1: expected header '# name kind'")
    header = lines[0][1:].split()
    if len(header) != 2:
        raise MaterialFormatError(f"{source}:1: expected header '# name kind', got {lines[0]!r}")
    name, kind = header
    if kind not in KINDS:
        raise MaterialFormatError(f"{source}:1: unknown kind {kind!r}; expected one of {KINDS}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise MaterialFormatError(
                f"{source}:{lineno}: expected 3 columns 'wavelength_nm n k', got {len(parts)}"
            )
        try:
            row = tuple(float(p) for p in parts)
        except ValueError:
            raise MaterialFormatError(f"{source}:{lineno}: non-numeric value in {stripped!r}") from None
        if not all(np.isfinite(row)):
            raise MaterialFormatError(f"{source}:{lineno}: non-finite value in {stripped!r}")
        if row[0] <= 0:
            raise MaterialFormatError(f"{source}:{lineno}: wavelength must be > 0")
        if row[2] < 0:
            raise MaterialFormatError(f"{source}:{lineno}: k must be >= 0")
        if rows and row[0] <= rows[-1][0]:
            raise MaterialFormatError(f"{source}:{lineno}: wavelengths must be strictly ascending")
        rows.append(row)
    if kind == "vacuum":
        return vacuum(name)
    if not rows:
        raise MaterialFormatError(f"{source}: no data rows")
    wl, n, k = (np.array(c) for c in zip(*rows))
    return OpticalMaterial(name, wl, n, k, kind)


def load_table(path) -> OpticalMaterial:
    path = Path(path)
    return parse_table(path.read_text(encoding="utf-8"), source=str(path))


def _data_dir():
    return resources.files("ndphotonics") / "data" / "materials"


def available() -> list[str]:
    names = [p.name[:-4] for p in _data_dir().iterdir() if p.name.endswith(".txt")]
    return sorted(names + ["air"])


@lru_cache(maxsize=None)
def get(name: str) -> OpticalMaterial:
    """Bundled material by name (case-sensitive, e.g. ``"Ag"``, ``"SiO2"``)."""
    if name in ("air", "vacuum"):
        return vacuum(name)
    res = _data_dir() / f"{name}.txt"
    if not res.is_file():
        raise KeyError(f"unknown material {name!r}; bundled: {', '.join(available())}")
    return parse_table(res.read_text(encoding="utf-8"), source=f"ndphotonics/data/materials/{name}.txt")
