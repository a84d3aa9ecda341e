"""JSON run configurations for the command line.

Every config is validated completely before anything is computed.  Unknown
keys are rejected and errors name the offending field path (JSON syntax
errors name line and column).  The ``resolve_*`` functions return the
config with every default filled in; that dictionary is what the run
manifest records, and feeding it back reproduces the run.
"""
from __future__ import annotations

import json
from dataclasses import fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import materials as mat
from .design import Metric
from .emission import DEFAULT_QUADRATURE, DipoleSource, QuadratureSettings
from .photophysics.hbt import PhotonStreamSpec
from .stratified import LayerStack, StackFormatError

__all__ = ["ConfigError", "load_json", "load_preset", "presets", "resolve"]

_REQUIRED = object()
COMMANDS = ("solve", "sweep", "fit", "synth")


class ConfigError(ValueError):
    pass


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def presets() -> list[str]:
    root = resources.files("ndphotonics") / "data" / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    res = resources.files("ndphotonics") / "data" / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(presets())}")
    return json.loads(res.read_text(encoding="utf-8"))


class _Fields:
    """Consume keys of one JSON object, remembering which were used."""

    def __init__(self, data, where: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
        self.data = data
        self.where = where
        self.used = set()

    def path(self, key):
        return f"{self.where}.{key}" if self.where else key

    def get(self, key, kind, default=_REQUIRED):
        self.used.add(key)
        if key not in self.data or (self.data[key] is None and default is None):
            if default is _REQUIRED:
                raise ConfigError(f"{self.path(key)}: required field missing")
            return default
        value = self.data[key]
        where = self.path(key)
        if kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
                raise ConfigError(f"{where}: expected a finite number, got {value!r}")
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}: expected an integer, got {value!r}")
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise ConfigError(f"{where}: expected a string, got {value!r}")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"{where}: expected true or false, got {value!r}")
            return value
        if kind == "object":
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected an object")
            return value
        if kind == "list":
            if not isinstance(value, list):
                raise ConfigError(f"{where}: expected a list")
            return value
        return value

    def done(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"{self.where or 'config'}: unknown field(s) {extra}")


def _positive(value, where):
    if not value > 0:
        raise ConfigError(f"{where}: must be > 0, got {value}")
    return value


# -- shared pieces -----------------------------------------------------------------

def _stack(value, where, base_dir: Path) -> tuple[dict, LayerStack]:
    if isinstance(value, str):
        path = (base_dir / value).resolve()
        try:
            stack = LayerStack.load(path)
        except (OSError, StackFormatError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
    else:
        try:
            stack = LayerStack.from_dict(value, where=where)
        except StackFormatError as exc:
            raise ConfigError(str(exc)) from None
    return stack.to_dict(), stack


def _quadrature(data, where, tol_override) -> tuple[dict, QuadratureSettings]:
    f = _Fields(data or {}, where)
    kw = {}
    for fld in fields(QuadratureSettings):
        kind = "int" if fld.name in ("order", "max_panels") else "number"
        kw[fld.name] = f.get(fld.name, kind, getattr(DEFAULT_QUADRATURE, fld.name))
    f.done()
    if tol_override is not None:
        kw["rtol"] = float(tol_override)
    for k, v in kw.items():
        _positive(v, f.path(k))
    if kw["u_max"] >= kw["u_limit"]:
        raise ConfigError(f"{where}.u_limit: must exceed u_max")
    return kw, QuadratureSettings(**kw)


def _dipole(data, where, stack: LayerStack) -> tuple[dict, DipoleSource]:
    f = _Fields(data or {}, where)
    idx = f.get("layer_index", "int", 0)
    if not 0 <= idx < len(stack.layers):
        raise ConfigError(f"{where}.layer_index: {idx} is not a finite layer of the stack "
                          f"({len(stack.layers)} layers)")
    d = stack.layers[idx].thickness_nm
    z_up = f.get("z_up_nm", "number", None)
    z_down = f.get("z_down_nm", "number", None)
    if z_up is None and z_down is None:
        z_up = z_down = d / 2
    elif z_up is None:
        z_up = d - z_down
    elif z_down is None:
        z_down = d - z_up
    wl = _positive(f.get("wavelength_nm", "number", 637.0), f.path("wavelength_nm"))
    orient = f.get("orientation", "str", "isotropic")
    f.done()
    if not (z_up > 0 and z_down > 0) or abs(z_up + z_down - d) > 1e-9 * d:
        raise ConfigError(f"{where}: z_up_nm + z_down_nm must split the {d:g} nm host layer into two positive parts")
    try:
        dip = DipoleSource(idx, z_up, z_down, wl, orient)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    for m in stack.media:
        if not m.covers(wl):
            raise ConfigError(f"{where}.wavelength_nm: {wl:g} nm outside the range of material {m.name!r} "
                              f"[{m.span[0]:g}, {m.span[1]:g}] nm")
    resolved = {"layer_index": idx, "z_up_nm": z_up, "z_down_nm": z_down, "wavelength_nm": wl,
                "orientation": dip.orientation}
    return resolved, dip


# -- per command -------------------------------------------------------------------

def _solve(f: _Fields, base_dir, opts):
    stack_d, stack = _stack(f.get("stack", None), f.path("stack"), base_dir)
    dip_d, dip = _dipole(f.get("dipole", "object", {}), f.path("dipole"), stack)
    na = _positive(f.get("na", "number", 0.7), f.path("na"))
    n_sup = float(np.real(mat.refractive_index(stack.superstrate, dip.wavelength_nm)))
    if na > n_sup:
        raise ConfigError(f"{f.path('na')}: NA {na} exceeds the superstrate index {n_sup:g}")
    step = _positive(f.get("theta_step_deg", "number", 0.5), f.path("theta_step_deg"))
    q_d, q = _quadrature(f.get("quadrature", "object", {}), f.path("quadrature"), opts.get("quadrature_tol"))
    resolved = {"command": "solve", "stack": stack_d, "dipole": dip_d, "na": na, "theta_step_deg": step,
                "quadrature": q_d}
    job = {"stack": stack, "dipole": dip, "na": na, "theta": np.deg2rad(np.arange(0.0, 90.0, step)),
           "settings": q}
    return resolved, job


def _sweep(f: _Fields, base_dir, opts):
    kind = f.get("kind", "str", "thickness")
    if kind not in ("thickness", "wavelength"):
        raise ConfigError(f"{f.path('kind')}: expected 'thickness' or 'wavelength', got {kind!r}")
    stacks_in = f.get("stacks", "object")
    if not stacks_in:
        raise ConfigError(f"{f.path('stacks')}: at least one stack is required")
    stacks, stacks_d = {}, {}
    for label, value in stacks_in.items():
        stacks_d[label], stacks[label] = _stack(value, f"{f.path('stacks')}.{label}", base_dir)
    first = next(iter(stacks.values()))
    dip_raw = f.get("dipole", "object", {})
    dipoles, dip_d = {}, None
    for label, st in stacks.items():
        dip_d, dipoles[label] = _dipole(dip_raw, f.path("dipole"), st)
    metrics_in = f.get("metrics", "list", ["power_up"])
    metrics = []
    for i, m in enumerate(metrics_in):
        try:
            metrics.append(Metric.parse(m))
        except ValueError as exc:
            raise ConfigError(f"{f.path('metrics')}[{i}]: {exc}") from None
    if not metrics:
        raise ConfigError(f"{f.path('metrics')}: at least one metric is required")
    default_ref = "none" if "none" in stacks else None
    reference = f.get("reference", "str", default_ref)
    if reference is not None and reference not in stacks:
        raise ConfigError(f"{f.path('reference')}: {reference!r} is not one of the stack labels {list(stacks)}")
    rel = f.get("min_prominence_rel", "number", 0.02)
    if not 0 <= rel < 1:
        raise ConfigError(f"{f.path('min_prominence_rel')}: must lie in [0, 1)")
    grid_key = kind
    g = _Fields(f.get(grid_key, "object", {}), f.path(grid_key))
    if kind == "thickness":
        swept = g.get("swept_layer", "int", 1)
        start = g.get("start_nm", "number", 10.0)
        stop = g.get("stop_nm", "number", 400.0)
        step = g.get("step_nm", "number", 5.0)
        g.done()
        for label, st in stacks.items():
            if not 0 <= swept < len(st.layers):
                raise ConfigError(f"{g.path('swept_layer')}: layer {swept} does not exist in stack {label!r}")
            if swept == dipoles[label].layer_index:
                raise ConfigError(f"{g.path('swept_layer')}: the swept layer hosts the dipole")
        grid_d = {"swept_layer": swept, "start_nm": start, "stop_nm": stop, "step_nm": step}
    else:
        start = g.get("start_nm", "number", 600.0)
        stop = g.get("stop_nm", "number", 750.0)
        step = g.get("step_nm", "number", 10.0)
        g.done()
        for label, st in stacks.items():
            for m in st.media:
                if not (m.covers(start) and m.covers(stop)):
                    raise ConfigError(f"{f.path(grid_key)}: [{start:g}, {stop:g}] nm is outside the range of "
                                      f"{m.name!r} [{m.span[0]:g}, {m.span[1]:g}] nm (stack {label!r})")
        grid_d = {"start_nm": start, "stop_nm": stop, "step_nm": step}
    if not start > 0:
        raise ConfigError(f"{g.path('start_nm')}: must be > 0")
    if not start < stop:
        raise ConfigError(f"{g.path('stop_nm')}: must exceed start_nm")
    if not 0 < step <= (stop - start) / 2:
        raise ConfigError(f"{g.path('step_nm')}: must lie in (0, (stop_nm - start_nm)/2]")
    q_d, q = _quadrature(f.get("quadrature", "object", {}), f.path("quadrature"), opts.get("quadrature_tol"))
    resolved = {"command": "sweep", "kind": kind, "stacks": stacks_d, "reference": reference, "dipole": dip_d,
                "metrics": [m.label for m in metrics], grid_key: grid_d, "min_prominence_rel": rel,
                "quadrature": q_d}
    job = {"kind": kind, "stacks": stacks, "dipoles": dipoles, "metrics": metrics, "reference": reference,
           "grid": grid_d, "min_prominence_rel": rel, "settings": q}
    return resolved, job


def _fit(f: _Fields, base_dir, opts):
    kind = f.get("kind", "str")
    if kind not in ("saturation", "spectrum", "g2"):
        raise ConfigError(f"{f.path('kind')}: expected saturation, spectrum or g2, got {kind!r}")
    data = f.get("data", "str")
    if data.startswith("bundled:"):
        name = data[8:].removesuffix(".csv")
        res = resources.files("ndphotonics") / "data" / "synthetic" / f"{name}.csv"
        if not res.is_file():
            raise ConfigError(f"{f.path('data')}: no bundled dataset {name!r}")
        path = Path(str(res))
    else:
        path = (base_dir / data).resolve()
    resolved = {"command": "fit", "kind": kind, "data": str(path)}
    if kind == "saturation":
        noise = f.get("noise", "str", "absolute")
        if noise not in ("absolute", "relative", "poisson"):
            raise ConfigError(f"{f.path('noise')}: expected absolute, relative or poisson")
        resolved["noise"] = noise
    elif kind == "spectrum":
        resolved["resolution_floor_ghz"] = _positive(f.get("resolution_floor_ghz", "number", 30.0),
                                                     f.path("resolution_floor_ghz"))
    else:
        rho = f.get("rho", "number", None)
        bg = f.get("background", "object", None)
        if rho is not None and bg is not None:
            raise ConfigError(f"{f.path('rho')}: give either rho or background, not both")
        if bg is not None:
            b = _Fields(bg, f.path("background"))
            total = _positive(b.get("total_rate", "number"), b.path("total_rate"))
            back = b.get("background_rate", "number")
            b.done()
            if not 0 <= back < total:
                raise ConfigError(f"{b.path('background_rate')}: must lie in [0, total_rate)")
            rho = 1 - back / total
        rho = 1.0 if rho is None else rho
        if not 0 < rho <= 1:
            raise ConfigError(f"{f.path('rho')}: must lie in (0, 1], got {rho}")
        resolved["rho"] = rho
        resolved["bunching"] = f.get("bunching", "bool", False)
    return resolved, dict(resolved)


def _synth(f: _Fields, base_dir, opts):
    s = _Fields(f.get("stream", "object"), f.path("stream"))
    kw = {}
    for fld in fields(PhotonStreamSpec):
        default = fld.default
        if fld.name == "seed":
            kw["seed"] = s.get("seed", "int", default)
        elif fld.name == "emitter_weights":
            kw["emitter_weights"] = tuple(s.get("emitter_weights", "list", list(default)))
        else:
            kw[fld.name] = s.get(fld.name, "number", default)
    s.done()
    if opts.get("seed") is not None:
        kw["seed"] = int(opts["seed"])
    try:
        spec = PhotonStreamSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{s.where}: {exc}") from None
    resolved = {"command": "synth", "stream": spec.to_dict()}
    return resolved, {"spec": spec}


_RESOLVERS = {"solve": _solve, "sweep": _sweep, "fit": _fit, "synth": _synth}


def resolve(command: str, raw: dict, base_dir=".", opts: dict | None = None) -> tuple[dict, dict]:
    """Validate ``raw`` for ``command``; returns ``(resolved_config, job)``.

    ``raw`` may be a plain config or a manifest written by an earlier run
    (then its ``config`` entry is used and the command must match).
    """
    opts = opts or {}
    if "manifest_version" in raw:
        if raw.get("command") != command:
            raise ConfigError(f"manifest was written by {raw.get('command')!r}, not {command!r}")
        raw = raw.get("config", {})
    raw = dict(raw)
    declared = raw.pop("command", command)
    if declared != command:
        raise ConfigError(f"command: config is for {declared!r}, not {command!r}")
    f = _Fields(raw, "")
    resolved, job = _RESOLVERS[command](f, Path(base_dir), opts)
    f.done()
    return resolved, job
