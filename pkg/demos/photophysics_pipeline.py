"""Demo: synthetic NV photophysics through the three fits.

Generates a saturation curve, a zero-phonon-line spectrum and an HBT
coincidence histogram with known parameters, fits each and prints the
recovered values next to the generator values.
"""
import numpy as np

from ndphotonics.photophysics import (
    PhotonStreamSpec,
    SaturationParams,
    eval_lorentzian,
    eval_saturation,
    fit_g2,
    fit_lorentzian,
    fit_saturation,
    simulate_hbt,
)


def main():
    rng = np.random.default_rng(7)
    print("Demo: saturation, spectrum and g2 fits on synthetic data")
    print("=" * 60)

    truth = SaturationParams(R=86e3, P_sat=1.0, n=5e3, m=300.0)
    P = np.concatenate([[0.0], np.geomspace(0.05, 10.0, 200)])
    I = eval_saturation(truth, P) * (1 + 0.02 * rng.standard_normal(P.size))
    fit = fit_saturation(np.column_stack([P, I]), noise="relative")
    print(f"saturation: R = {fit.params.R:.4g} (86000), P_sat = {fit.params.P_sat:.3f} mW (1.000)")

    x = np.linspace(-650.0, 650.0, 401)
    y = eval_lorentzian(x, 0.0, 65.0, 1000.0, 50.0)
    y = rng.poisson(y).astype(float)
    line = fit_lorentzian(np.column_stack([x, y]))
    print(f"spectrum:   FWHM = {line.fwhm_ghz:.1f} +- {line.uncertainty['fwhm_ghz']:.1f} GHz (65), "
          f"resolution limited: {line.resolution_limited}")

    spec = PhotonStreamSpec(signal_rate=1.8e6, background_rate=2e5, duration_s=2.0, bin_width_ns=2.0,
                            seed=11, emitter_weights=(0.8, 0.2))
    hist = simulate_hbt(spec)
    g2 = fit_g2(hist.as_rows(), rho=spec.rho)
    print(f"g2:         {hist.coincidences} coincidences, g2(0) raw {g2.g2_zero_raw:.3f}, "
          f"corrected {g2.g2_zero:.3f} +- {g2.g2_zero_err:.3f} ({spec.g2_zero_emitters:.3f}), {g2.classification}")


if __name__ == "__main__":
    main()
