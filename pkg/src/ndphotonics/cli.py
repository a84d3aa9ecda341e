"""``ndphotonics`` command line.

Subcommands::

    solve      emission summary and far field for one stack
    sweep      spacer-thickness or wavelength sweep, peaks, SVG plot
    fit        saturation | spectrum | g2 fit of a CSV file
    synth      simulated HBT coincidence histogram
    materials  list | show bundled optical constants

Every run writes ``manifest.json`` next to its outputs.  Passing that file
back with ``--config`` repeats the run; data outputs are byte-identical
(only the manifest's timestamp differs).

Exit codes: 0 success, 2 input error, 3 solver error, 4 fit did not converge.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, design
from . import emission as em
from . import materials as mat
from .config import ConfigError, load_json, load_preset, presets, resolve
from .lm import FitConvergenceError
from .photophysics import fitting, hbt, io as pio
from .stratified import StackFormatError

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_FIT = 0, 2, 3, 4

_INPUT_ERRORS = (ConfigError, StackFormatError, mat.MaterialFormatError, mat.WavelengthRangeError,
                 fitting.DataError, hbt.StreamOverflowError, em.UnsupportedConfigurationError)


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


# -- helpers ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, str)) or v is None:
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def _kv(d: dict, prefix: str = "") -> str:
    out = []
    for k, v in d.items():
        if isinstance(v, dict):
            out.append(_kv(v, f"{prefix}{k}."))
        else:
            out.append(f"{prefix}{k} = {_fmt(v)}\n")
    return "".join(out)


def _write_manifest(out: Path, command: str, resolved: dict, outputs: list[str], options: dict):
    manifest = {
        "manifest_version": 1,
        "command": command,
        "tool": {"name": "ndphotonics", "version": __version__},
        "config": resolved,
        "options": options,
        "outputs": outputs,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _raw_config(args, command) -> tuple[dict, Path]:
    if args.config and getattr(args, "preset", None):
        raise ConfigError("give either --config or --preset, not both")
    if getattr(args, "preset", None):
        return load_preset(args.preset), Path.cwd()
    if not args.config:
        raise ConfigError(f"{command} needs --config PATH" + (" or --preset NAME" if command != "synth" else ""))
    path = Path(args.config)
    return load_json(path), path.resolve().parent


def _options(args) -> dict:
    return {"seed": args.seed, "quadrature_tol": args.quadrature_tol}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands ----------------------------------------------------------------------------

def cmd_solve(args) -> int:
    raw, base = _raw_config(args, "solve")
    resolved, job = resolve("solve", raw, base, _options(args))
    out = _out_dir(args)
    res = em.solve(job["stack"], job["dipole"], job["na"], job["theta"], job["settings"])
    summary = res.summary()
    summary = {"stack": str(job["stack"]), **summary}
    (out / "summary.txt").write_text(_kv(summary), encoding="utf-8")
    table = em.far_field_table(job["stack"], job["dipole"], job["theta"])
    em.write_far_field_csv(out / "farfield.csv", job["theta"], table)
    _write_manifest(out, "solve", resolved, ["summary.txt", "farfield.csv"], {"threads": args.threads})
    print(f"purcell_total = {res.purcell_total:.6g}  power_up = {res.power_up:.6g}  "
          f"eta_na({res.na:g}) = {res.eta_na:.6g}  [{res.orientation}]")
    return EXIT_OK


def _plot_sweep(path: Path, curves, reports, kind):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "ndphotonics"
    matplotlib.rcParams["svg.fonttype"] = "none"
    metrics = list(dict.fromkeys(c.metric for c in curves))
    fig, axes = plt.subplots(len(metrics), 1, figsize=(6.4, 3.2 * len(metrics)), squeeze=False)
    for ax, metric in zip(axes[:, 0], metrics):
        for c, r in zip(curves, reports):
            if c.metric != metric:
                continue
            (line,) = ax.plot(c.axis_nm, c.values, label=c.metal)
            for p in r.peaks:
                ax.plot([p.position_nm], [p.value], "o", color=line.get_color(), ms=4)
                ax.annotate(f"{p.order}", (p.position_nm, p.value), textcoords="offset points",
                            xytext=(0, 5), ha="center", fontsize=8)
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
    axes[-1, 0].set_xlabel("spacer thickness (nm)" if kind == "thickness" else "wavelength (nm)")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_sweep(args) -> int:
    raw, base = _raw_config(args, "sweep")
    resolved, job = resolve("sweep", raw, base, _options(args))
    out = _out_dir(args)
    grid, settings = job["grid"], job["settings"]
    curves = {}
    for metric in job["metrics"]:
        for label, stack in job["stacks"].items():
            dip = job["dipoles"][label]
            if job["kind"] == "thickness":
                spec = design.SweepSpec(stack, grid["swept_layer"], dip, grid["start_nm"], grid["stop_nm"],
                                        grid["step_nm"], metric, settings, metal=label)
                curve = design.thickness_sweep(spec, threads=args.threads)
            else:
                curve = design.wavelength_sweep(stack, dip, grid["start_nm"], grid["stop_nm"], grid["step_nm"],
                                                metric, settings, threads=args.threads, metal=label)
            curves[(metric.label, label)] = curve
    reports = []
    for (metric, label), curve in curves.items():
        rep = design.find_peaks(curve, relative=job["min_prominence_rel"])
        ref = job["reference"]
        if ref is not None and label != ref:
            rep.enhancement_vs_reference = design.enhancement(curve, curves[(metric, ref)])
        reports.append(rep)
    ordered = list(curves.values())
    design.write_sweep_csv(out / "sweep.csv", ordered)
    design.write_peak_report(out / "peaks.txt", reports)
    _plot_sweep(out / "sweep.svg", ordered, reports, job["kind"])
    _write_manifest(out, "sweep", resolved, ["sweep.csv", "peaks.txt", "sweep.svg"], {"threads": args.threads})
    for rep in reports:
        pos = ", ".join(f"{p:.1f}" for p in rep.positions) or "none"
        enh = "" if rep.enhancement_vs_reference is None else f"  enhancement {rep.enhancement_vs_reference:.3g}"
        print(f"{rep.metal:>6} {rep.metric:<12} peaks [{pos}]{enh}")
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.config:
        if args.kind or args.data:
            raise ConfigError("give either --config or KIND DATA, not both")
        raw, base = load_json(args.config), Path(args.config).resolve().parent
    else:
        if not (args.kind and args.data):
            raise ConfigError("fit needs KIND and DATA (or --config)")
        raw = {"kind": args.kind, "data": args.data}
        if args.noise is not None:
            raw["noise"] = args.noise
        if args.rho is not None:
            raw["rho"] = args.rho
        if args.resolution_floor is not None:
            raw["resolution_floor_ghz"] = args.resolution_floor
        if args.bunching:
            raw["bunching"] = True
        base = Path.cwd()
    resolved, job = resolve("fit", raw, base, _options(args))
    data = pio.read_columns(job["data"], job["kind"])
    out = _out_dir(args)
    if job["kind"] == "saturation":
        fit = fitting.fit_saturation(data, noise=job["noise"])
    elif job["kind"] == "spectrum":
        fit = fitting.fit_lorentzian(data, resolution_floor_ghz=job["resolution_floor_ghz"])
    else:
        fit = fitting.fit_g2(data, job["rho"], bunching=job["bunching"])
    report = fit.report()
    pio.write_report(out / "fit_report.txt", report)
    _write_manifest(out, "fit", resolved, ["fit_report.txt"], {})
    sys.stdout.write(pio.format_report(report))
    return EXIT_OK


def cmd_synth(args) -> int:
    raw, base = _raw_config(args, "synth")
    resolved, job = resolve("synth", raw, base, _options(args))
    out = _out_dir(args)
    hist = hbt.simulate_hbt(job["spec"])
    hbt.write_histogram_csv(out / "histogram.csv", hist)
    _write_manifest(out, "synth", resolved, ["histogram.csv"], {})
    print(f"{hist.coincidences} coincidences in {hist.tau_ns.size} bins "
          f"(start {hist.n_start}, stop {hist.n_stop} photons, seed {job['spec'].seed})")
    return EXIT_OK


def cmd_materials(args) -> int:
    if args.action == "list":
        for name in mat.available():
            m = mat.get(name)
            lo, hi = m.span
            print(f"{name:<10} {m.kind:<14} {lo:g}-{hi:g} nm")
        return EXIT_OK
    if not args.name:
        raise ConfigError("materials show needs a material name")
    try:
        m = mat.get(args.name)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    if args.wavelength is not None:
        nk = mat.refractive_index(m, args.wavelength)
        eps = nk * nk
        print(f"{m.name} at {args.wavelength:g} nm: n = {nk.real:.6g}, k = {nk.imag:.6g}, "
              f"eps = {eps.real:.6g}{eps.imag:+.6g}i")
        return EXIT_OK
    print(f"# {m.name} {m.kind}")
    for row in zip(m.wavelength_nm, m.n, m.k):
        print(" ".join(f"{v:.6g}" for v in row))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="JSON config, or a manifest.json from an earlier run")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, metavar="N", help="random seed (synth)")
    p.add_argument("--quadrature-tol", type=float, metavar="X", help="relative tolerance of the emission integrals")
    p.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads for sweeps")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ndphotonics", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ndphotonics {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="emission summary and far field")
    p.add_argument("--preset", choices=presets(), help="bundled config")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="thickness or wavelength sweep")
    p.add_argument("--preset", choices=presets(), help="bundled config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", parents=[common], help="fit a saturation, spectrum or g2 CSV")
    p.add_argument("kind", nargs="?", choices=("saturation", "spectrum", "g2"))
    p.add_argument("data", nargs="?", help="CSV file")
    p.add_argument("--noise", choices=("absolute", "relative", "poisson"), help="saturation weighting")
    p.add_argument("--rho", type=float, help="signal fraction S/(S+B) for g2")
    p.add_argument("--resolution-floor", type=float, metavar="GHZ", help="spectrometer resolution")
    p.add_argument("--bunching", action="store_true", help="fit the g2 bunching term")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", parents=[common], help="simulate an HBT histogram")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("materials", help="bundled optical constants")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.add_argument("--wavelength", type=float, metavar="NM")
    p.set_defaults(func=cmd_materials)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"ndphotonics: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitConvergenceError as exc:
        print(f"ndphotonics: fit did not converge: {exc}", file=sys.stderr)
        return EXIT_FIT
    except design.SweepError as exc:
        code = EXIT_INPUT if isinstance(exc.__cause__, _INPUT_ERRORS) else EXIT_SOLVER
        print(f"ndphotonics: {'input' if code == EXIT_INPUT else 'solver'} error: {exc}", file=sys.stderr)
        return code
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"ndphotonics: solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
