import json
import subprocess
import sys

import pytest

from ndphotonics import cli
from ndphotonics import emission as em
from ndphotonics.lm import FitConvergenceError
from ndphotonics.photophysics import fitting

FREE_SPACE = {
    "command": "solve",
    "stack": {"superstrate": "air", "layers": [{"material": "air", "thickness_nm": 300.0}], "substrate": "air"},
    "dipole": {"layer_index": 0, "wavelength_nm": 637.0, "orientation": "isotropic"},
    "na": 0.7,
}

CONSTANT_SWEEP = {
    "command": "sweep",
    "kind": "thickness",
    "stacks": {
        "none": {
            "superstrate": "air",
            "layers": [{"material": "air", "thickness_nm": 200.0}, {"material": "air", "thickness_nm": 50.0}],
            "substrate": "air",
        }
    },
    "dipole": {"layer_index": 0, "wavelength_nm": 637.0},
    "metrics": ["power_up"],
    "thickness": {"swept_layer": 1, "start_nm": 10.0, "stop_nm": 100.0, "step_nm": 10.0},
}

SYNTH = {"command": "synth", "stream": {"signal_rate": 30e3, "background_rate": 3e3, "duration_s": 2.0,
                                          "bin_width_ns": 2.0, "window_ns": 200.0, "seed": 4}}


def write_json(path, data):
    path.write_text(json.dumps(data, indent=1))
    return path


def summary(path):
    return dict(line.split(" = ", 1) for line in path.read_text().splitlines())


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_solve_free_space(tmp_path):
    cfg = write_json(tmp_path / "free.json", FREE_SPACE)
    assert run("solve", "--config", cfg, "--out", tmp_path / "out") == 0
    values = summary(tmp_path / "out" / "summary.txt")
    assert float(values["purcell_total"]) == pytest.approx(1.0, abs=1e-6)
    assert float(values["power_up"]) == pytest.approx(0.5, abs=1e-6)
    header = (tmp_path / "out" / "farfield.csv").read_text().splitlines()[0]
    assert header == "theta_deg,dP_dOmega_vertical,dP_dOmega_horizontal,dP_dOmega_avg"


def test_negative_thickness_is_an_input_error(tmp_path, capsys):
    bad = json.loads(json.dumps(FREE_SPACE))
    bad["stack"]["layers"][0]["thickness_nm"] = -5.0
    assert run("solve", "--config", write_json(tmp_path / "bad.json", bad), "--out", tmp_path) == 2
    assert "stack.layers[0].thickness_nm" in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{"command": "solve",\n  "stack": }')
    assert run("solve", "--config", cfg) == 2
    assert "broken.json:2:" in capsys.readouterr().err


def test_missing_config_is_an_input_error(capsys):
    assert run("solve") == 2
    assert run("bogus-command") == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise em.DegenerateCavityError("degenerate cavity denominator at u=0.5")

    monkeypatch.setattr(em, "solve", broken)
    assert run("solve", "--config", write_json(tmp_path / "free.json", FREE_SPACE), "--out", tmp_path) == 3


def test_fit_non_convergence_exit_code(tmp_path, monkeypatch, capsys):
    def stuck(*args, **kwargs):
        raise FitConvergenceError("no convergence after 500 iterations", [(1, 2.0, 1e-3)])

    monkeypatch.setattr(fitting, "fit_saturation", stuck)
    assert run("fit", "saturation", "bundled:saturation_1mw.csv", "--out", tmp_path) == 4
    assert "iter" in capsys.readouterr().err


def test_fit_empty_file(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run("fit", "saturation", empty, "--out", tmp_path) == 2


def test_fit_bundled_saturation(tmp_path):
    assert run("fit", "saturation", "bundled:saturation_1mw.csv", "--noise", "relative", "--out", tmp_path) == 0
    values = summary(tmp_path / "fit_report.txt")
    assert float(values["P_sat"]) == pytest.approx(1.0, rel=0.05)
    assert float(values["R"]) == pytest.approx(86e3, rel=0.05)


def test_fit_bundled_g2(tmp_path):
    assert run("fit", "g2", "bundled:g2_031.csv", "--rho", 0.9, "--out", tmp_path) == 0
    values = summary(tmp_path / "fit_report.txt")
    assert values["classification"] == "single_emitter"
    assert float(values["g2_zero"]) == pytest.approx(0.31, abs=0.05)


def test_fit_bundled_spectrum(tmp_path):
    assert run("fit", "spectrum", "bundled:spectrum_65ghz.csv", "--out", tmp_path) == 0
    values = summary(tmp_path / "fit_report.txt")
    assert float(values["fwhm_ghz"]) == pytest.approx(65.0, rel=0.05)


def test_constant_sweep_gives_empty_peak_report(tmp_path):
    cfg = write_json(tmp_path / "flat.json", CONSTANT_SWEEP)
    assert run("sweep", "--config", cfg, "--out", tmp_path / "out") == 0
    assert "n_peaks = 0" in (tmp_path / "out" / "peaks.txt").read_text()


def test_synth_seed_reproducible(tmp_path):
    cfg = write_json(tmp_path / "synth.json", SYNTH)
    assert run("synth", "--config", cfg, "--out", tmp_path / "a") == 0
    assert run("synth", "--config", cfg, "--out", tmp_path / "b") == 0
    assert run("synth", "--config", cfg, "--seed", 5, "--out", tmp_path / "c") == 0
    a, b, c = ((tmp_path / d / "histogram.csv").read_bytes() for d in "abc")
    assert a == b and a != c
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert manifest["config"]["stream"]["seed"] == 5


def test_synth_output_feeds_fit(tmp_path):
    cfg = write_json(tmp_path / "synth.json", SYNTH)
    assert run("synth", "--config", cfg, "--out", tmp_path) == 0
    rho = 30e3 / 33e3
    assert run("fit", "g2", tmp_path / "histogram.csv", "--rho", rho, "--out", tmp_path / "fit") == 0
    values = summary(tmp_path / "fit" / "fit_report.txt")
    assert float(values["g2_zero"]) < 0.5


@pytest.mark.parametrize(
    "argv, outputs",
    [
        (["solve", "--preset", "paper_65nm"], ["summary.txt", "farfield.csv"]),
        (["fit", "saturation", "bundled:saturation_4mw.csv", "--noise", "relative"], ["fit_report.txt"]),
        (["synth", "--config", "SYNTH"], ["histogram.csv"]),
        (["sweep", "--config", "SWEEP"], ["sweep.csv", "peaks.txt", "sweep.svg"]),
    ],
    ids=["solve", "fit", "synth", "sweep"],
)
def test_manifest_rerun_is_byte_identical(tmp_path, argv, outputs):
    files = {"SYNTH": write_json(tmp_path / "synth.json", SYNTH),
             "SWEEP": write_json(tmp_path / "sweep.json", CONSTANT_SWEEP)}
    argv = [str(files.get(a, a)) for a in argv]
    assert run(*argv, "--out", tmp_path / "first") == 0
    command = argv[0]
    assert run(command, "--config", tmp_path / "first" / "manifest.json", "--out", tmp_path / "second") == 0
    for name in outputs:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_manifest_for_wrong_command_rejected(tmp_path):
    assert run("synth", "--config", write_json(tmp_path / "s.json", SYNTH), "--out", tmp_path / "a") == 0
    assert run("solve", "--config", tmp_path / "a" / "manifest.json") == 2


def test_materials_commands(capsys):
    assert run("materials", "list") == 0
    listing = capsys.readouterr().out
    assert "Ag" in listing and "SiO2" in listing
    assert run("materials", "show", "SiO2", "--wavelength", 637) == 0
    shown = capsys.readouterr().out
    assert float(shown.split("n = ")[1].split(",")[0]) == pytest.approx(1.457, abs=5e-4)
    assert run("materials", "show", "Ag", "--wavelength", 100) == 2
    assert run("materials", "show", "unobtainium") == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ndphotonics", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "ndphotonics" in proc.stdout
