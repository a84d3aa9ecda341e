"""Write the bundled synthetic datasets used by the fit examples.

Run from the repository root:  python tools/make_synthetic.py
"""
import csv
from pathlib import Path

import numpy as np

from ndphotonics.photophysics import (PhotonStreamSpec, SaturationParams, eval_lorentzian, eval_saturation,
                                      simulate_hbt, write_histogram_csv)

OUT = Path(__file__).resolve().parents[1] / "src" / "ndphotonics" / "data" / "synthetic"


def write(name, header, rows):
    with (OUT / name).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.8g}" for v in row])
    print("wrote", name)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240607)
    for name, p in [("saturation_1mw.csv", SaturationParams(86e3, 1.0, 5e3, 300.0)),
                    ("saturation_4mw.csv", SaturationParams(24e3, 4.0, 2e3, 300.0))]:
        P = np.concatenate([[0.0], p.P_sat * np.geomspace(0.02, 30, 40)])
        I = eval_saturation(p, P) * (1 + 0.02 * rng.standard_normal(P.size))
        write(name, ("power_mw", "counts_per_s"), zip(P, I))
    for name, fwhm in [("spectrum_65ghz.csv", 65.0), ("spectrum_325ghz.csv", 325.0)]:
        x = np.linspace(-1500.0, 1500.0, 301)
        y = rng.poisson(eval_lorentzian(x, 20.0, fwhm, 1000.0, 50.0))
        write(name, ("x_ghz", "counts"), zip(x, y))
    # g2(0) = 0.31 from two emitters with light fractions 0.1918 / 0.8082, rho = 0.9
    spec = PhotonStreamSpec(excitation_rate=0.01, decay_rate=0.04, signal_rate=1.8e6, background_rate=2e5,
                            duration_s=2.0, bin_width_ns=2.0, window_ns=300.0, seed=31,
                            emitter_weights=(0.19182, 0.80818))
    write_histogram_csv(OUT / "g2_031.csv", simulate_hbt(spec))
    print("wrote g2_031.csv")


if __name__ == "__main__":
    main()
