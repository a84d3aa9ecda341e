"""Demo: choosing the SiO2 spacer under a nanodiamond on a metal mirror.

Sweeps the spacer from 10 to 400 nm for Ag, Au, Al and no mirror at 637 nm,
prints the peaks and the enhancement of each mirror over the bare stack, then
compares NA 0.7 collection for three fixed designs.
"""
from ndphotonics import design
from ndphotonics import emission as em


def sweep(metal, metric):
    stack = design.paper_stack(metal, 65.0)
    spec = design.SweepSpec(stack, 1, design.paper_dipole(stack), 10.0, 400.0, 5.0, metric)
    return design.thickness_sweep(spec, threads=4)


def main():
    print("Demo: spacer design on metal mirrors at 637 nm")
    print("=" * 60)
    for metric in ("power_up", "eta_na(0.7)"):
        curves = {m or "none": sweep(m, metric) for m in ("Ag", "Au", "Al", None)}
        print(f"\nmetric {metric}")
        for name in ("Ag", "Au", "Al"):
            peaks = design.find_peaks(curves[name]).positions
            gain = design.enhancement(curves[name], curves["none"])
            print(f"  {name}: peaks at {', '.join(f'{p:.1f}' for p in peaks)} nm, enhancement {gain:.2f}")
    print(f"\nhalf-wave period in SiO2: {design.half_wave_period():.1f} nm")

    print("\nNA 0.7 collection efficiency")
    for label, metal, spacer in (("no mirror", None, None), ("Ag, 65 nm", "Ag", 65.0), ("Ag, 265 nm", "Ag", 265.0)):
        stack = design.paper_stack(metal, spacer)
        result = em.solve(stack, design.paper_dipole(stack))
        print(f"  {label:11s} eta = {result.eta_na:.4f}  Purcell = {result.purcell_total:.3f}")


if __name__ == "__main__":
    main()
