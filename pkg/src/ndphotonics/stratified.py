"""Planar multilayer stacks and their reflection/transmission amplitudes.

Conventions
-----------
* Time dependence ``exp(-i w t)``; normal wavevectors take the branch with
  ``Im kz >= 0`` (and ``Re kz >= 0`` when ``Im kz == 0``).
* s amplitudes refer to the transverse electric field, p amplitudes to the
  transverse magnetic field, so ``t = 1 + r`` for both and, at normal
  incidence, ``r_p = -r_s``.
* Generalised amplitudes of a sub-stack are referenced to its first
  interface (reflection) and to its last interface (transmission).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from . import materials as mat
from .materials import OpticalMaterial

__all__ = [
    "DegenerateInterfaceError",
    "Layer",
    "LayerStack",
    "StackFormatError",
    "SubStack",
    "TransverseMode",
    "flux_factor",
    "fresnel",
    "normal_wavevector",
    "stack_reflection",
    "stack_transmission",
]

Polarization = Literal["s", "p"]
Side = Literal["from_above", "from_below"]

OPAQUE_MIRROR_NM = 200.0


class DegenerateInterfaceError(ArithmeticError):
    """Fresnel denominator vanishes (e.g. both normal wavevectors zero)."""


class StackFormatError(ValueError):
    """Invalid stack description."""


def normal_wavevector(eps, kpar, k0=1.0):
    """``kz = sqrt(eps k0**2 - kpar**2)`` on the decaying branch.

    Accepts arrays and complex ``kpar`` (used on deformed integration paths).
    """
    kz = np.sqrt(np.asarray(eps * k0**2 - np.asarray(kpar) ** 2, dtype=complex))
    flip = (kz.imag < 0) | ((kz.imag == 0) & (kz.real < 0))
    kz = np.where(flip, -kz, kz)
    return kz[()] if kz.ndim == 0 else kz


def _interface(kzi, kzj, epsi, epsj, pol):
    if pol == "s":
        num, den = kzi - kzj, kzi + kzj
    elif pol == "p":
        num, den = epsj * kzi - epsi * kzj, epsj * kzi + epsi * kzj
    else:
        raise ValueError(f"polarization must be 's' or 'p', got {pol!r}")
    return num, den


def _ratio(num, den):
    """``num / den`` with the identical-media limit ``0/0 -> 0`` (both kz vanish at grazing)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where((num == 0) & (den == 0), 0.0, out)


def fresnel(eps_i, eps_j, kpar, k0, pol: Polarization):
    """Single-interface amplitudes ``(r, t)`` for incidence from medium ``i``.

    ``r_s = (kzi - kzj)/(kzi + kzj)``,
    ``r_p = (eps_j kzi - eps_i kzj)/(eps_j kzi + eps_i kzj)``, ``t = 1 + r``.

    Raises
    ------
    DegenerateInterfaceError
        If the denominator is exactly zero.
    """
    kzi = normal_wavevector(eps_i, kpar, k0)
    kzj = normal_wavevector(eps_j, kpar, k0)
    num, den = _interface(kzi, kzj, eps_i, eps_j, pol)
    if np.any(den == 0):
        raise DegenerateInterfaceError(
            f"degenerate {pol}-interface at kpar={kpar!r}: kz_i={kzi!r}, kz_j={kzj!r}"
        )
    r = num / den
    return r, 1 + r


def flux_factor(eps, kz, pol: Polarization):
    """Quantity whose ratio between two media converts ``|t|**2`` to power."""
    return np.real(kz) if pol == "s" else np.real(kz / eps)


@dataclass(frozen=True)
class SubStack:
    """Permittivities and thicknesses seen from an incidence medium.

    ``eps[0]`` is the incidence medium, ``eps[-1]`` the exit half-space and
    ``thickness_nm[i]`` belongs to ``eps[i + 1]``.
    """

    eps: tuple
    thickness_nm: tuple = ()

    def __post_init__(self):
        if len(self.eps) < 2 or len(self.thickness_nm) != len(self.eps) - 2:
            raise ValueError("SubStack needs len(thickness_nm) == len(eps) - 2 >= 0")

    def rt(self, q, k0: float, pol: Polarization):
        """Generalised ``(R, T)`` at in-plane wavevector ``q*k0``.

        ``q`` is the in-plane wavevector divided by ``k0`` (may be complex).
        """
        eps = self.eps
        kz = [normal_wavevector(e, q, 1.0) for e in eps]
        num, den = _interface(kz[-2], kz[-1], eps[-2], eps[-1], pol)
        R = _ratio(num, den)
        T = 1 + R
        for i in range(len(eps) - 3, -1, -1):
            ph = np.exp(1j * k0 * kz[i + 1] * self.thickness_nm[i])
            num, den = _interface(kz[i], kz[i + 1], eps[i], eps[i + 1], pol)
            r = _ratio(num, den)
            rph = R * ph * ph
            denom = 1 + r * rph
            T = (1 + r) * ph * T / denom
            R = (r + rph) / denom
        return R, T


@dataclass(frozen=True)
class Layer:
    material: OpticalMaterial
    thickness_nm: float

    def __post_init__(self):
        t = float(self.thickness_nm)
        if not np.isfinite(t) or t <= 0:
            raise StackFormatError(
                f"layer {self.material.name!r}: thickness_nm must be positive and finite, got {self.thickness_nm!r}"
            )
        object.__setattr__(self, "thickness_nm", t)


@dataclass(frozen=True)
class TransverseMode:
    """In-plane wavevector ``u * k_ref`` at a vacuum wavelength.

    ``k_ref`` is ``ref_index * k0``; when ``ref_index`` is None the incidence
    medium's real index is used.
    """

    wavelength_nm: float
    u: float
    ref_index: float | None = None

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be > 0")
        if not self.u >= 0:
            raise ValueError("u must be >= 0")

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength_nm


@dataclass(frozen=True)
class LayerStack:
    """Semi-infinite superstrate, finite layers listed top to bottom, substrate."""

    superstrate: OpticalMaterial
    layers: tuple[Layer, ...] = field(default_factory=tuple)
    substrate: OpticalMaterial = None

    def __post_init__(self):
        layers = tuple(
            l if isinstance(l, Layer) else Layer(*l) for l in self.layers
        )
        object.__setattr__(self, "layers", layers)
        if self.substrate is None:
            object.__setattr__(self, "substrate", self.superstrate)

    @property
    def media(self) -> list[OpticalMaterial]:
        return [self.superstrate, *(l.material for l in self.layers), self.substrate]

    @property
    def thicknesses(self) -> np.ndarray:
        return np.array([l.thickness_nm for l in self.layers])

    def permittivities(self, wavelength_nm: float) -> np.ndarray:
        return np.array([mat.permittivity(m, wavelength_nm) for m in self.media], dtype=complex)

    def flipped(self) -> LayerStack:
        return LayerStack(self.substrate, tuple(reversed(self.layers)), self.superstrate)

    def with_thickness(self, index: int, thickness_nm: float) -> LayerStack:
        layers = list(self.layers)
        layers[index] = Layer(layers[index].material, thickness_nm)
        return LayerStack(self.superstrate, tuple(layers), self.substrate)

    def without_layers(self, indices: Sequence[int]) -> LayerStack:
        drop = {i % len(self.layers) for i in indices}
        kept = tuple(l for i, l in enumerate(self.layers) if i not in drop)
        return LayerStack(self.superstrate, kept, self.substrate)

    def substack(self, wavelength_nm: float, side: Side, start: int | None = None) -> SubStack:
        """Sub-stack seen from inside layer ``start`` (or a half-space)."""
        eps = self.permittivities(wavelength_nm)
        d = self.thicknesses
        n = len(eps)
        if side == "from_above":
            i0 = 0 if start is None else start + 1
            return SubStack(tuple(eps[i0:]), tuple(d[i0:]))
        if side == "from_below":
            i0 = n - 1 if start is None else start + 1
            return SubStack(tuple(eps[i0::-1]), tuple(d[: i0 - 1][::-1]))
        raise ValueError(f"side must be 'from_above' or 'from_below', got {side!r}")

    # -- serialisation -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "superstrate": self.superstrate.name,
            "layers": [{"material": l.material.name, "thickness_nm": l.thickness_nm} for l in self.layers],
            "substrate": self.substrate.name,
        }

    @classmethod
    def from_dict(cls, data, lookup=None, where: str = "stack") -> LayerStack:
        """Build from ``{"superstrate", "layers": [{"material", "thickness_nm"}], "substrate"}``.

        Material names resolve through ``lookup`` (default: bundled tables).
        Errors name the offending field path.
        """
        lookup = lookup or mat.get
        if not isinstance(data, dict):
            raise StackFormatError(f"{where}: expected an object, got {type(data).__name__}")
        unknown = set(data) - {"superstrate", "layers", "substrate"}
        if unknown:
            raise StackFormatError(f"{where}: unknown field(s) {sorted(unknown)}")

        def material(key, value):
            if not isinstance(value, str):
                raise StackFormatError(f"{key}: material name must be a string")
            try:
                return lookup(value)
            except KeyError as exc:
                raise StackFormatError(f"{key}: {exc.args[0]}") from None

        for key in ("superstrate", "substrate"):
            if key not in data:
                raise StackFormatError(f"{where}.{key}: required field missing")
        layers_in = data.get("layers", [])
        if not isinstance(layers_in, list):
            raise StackFormatError(f"{where}.layers: expected a list")
        layers = []
        for i, entry in enumerate(layers_in):
            key = f"{where}.layers[{i}]"
            if not isinstance(entry, dict):
                raise StackFormatError(f"{key}: expected an object")
            extra = set(entry) - {"material", "thickness_nm"}
            if extra:
                raise StackFormatError(f"{key}: unknown field(s) {sorted(extra)}")
            if "material" not in entry or "thickness_nm" not in entry:
                raise StackFormatError(f"{key}: needs 'material' and 'thickness_nm'")
            t = entry["thickness_nm"]
            if isinstance(t, bool) or not isinstance(t, (int, float)) or not np.isfinite(t) or t <= 0:
                raise StackFormatError(f"{key}.thickness_nm: must be a positive finite number, got {t!r}")
            layers.append(Layer(material(f"{key}.material", entry["material"]), float(t)))
        return cls(
            material(f"{where}.superstrate", data["superstrate"]),
            tuple(layers),
            material(f"{where}.substrate", data["substrate"]),
        )

    @classmethod
    def load(cls, path, lookup=None) -> LayerStack:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StackFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        return cls.from_dict(data, lookup, where=str(path))

    def __str__(self):
        parts = [self.superstrate.name]
        parts += [f"{l.material.name}({l.thickness_nm:g})" for l in self.layers]
        parts.append(self.substrate.name)
        return " | ".join(parts)


def _kpar(stack: LayerStack, side: Side, mode: TransverseMode):
    inc = stack.superstrate if side == "from_above" else stack.substrate
    ref = mode.ref_index
    if ref is None:
        ref = float(np.real(mat.refractive_index(inc, mode.wavelength_nm)))
    return mode.u * ref


def stack_reflection(stack: LayerStack, side: Side, mode: TransverseMode, pol: Polarization) -> complex:
    """Generalised reflection amplitude of the whole stack seen from ``side``."""
    sub = stack.substack(mode.wavelength_nm, side)
    R, _ = sub.rt(_kpar(stack, side, mode), mode.k0, pol)
    return complex(R)


def stack_transmission(stack: LayerStack, side: Side, mode: TransverseMode, pol: Polarization) -> complex:
    """Generalised transmission amplitude into the opposite half-space."""
    sub = stack.substack(mode.wavelength_nm, side)
    _, T = sub.rt(_kpar(stack, side, mode), mode.k0, pol)
    return complex(T)


def opaque_mirror(metal: OpticalMaterial | str, above: OpticalMaterial | str = "air",
                  below: OpticalMaterial | str = "SiO2", thickness_nm: float = OPAQUE_MIRROR_NM) -> LayerStack:
    """``above | metal(200 nm) | below``; 200 nm is many skin depths in the visible."""
    get = lambda m: mat.get(m) if isinstance(m, str) else m  # noqa: E731
    return LayerStack(get(above), (Layer(get(metal), thickness_nm),), get(below))
