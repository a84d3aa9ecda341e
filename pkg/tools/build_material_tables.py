"""Regenerate the bundled dispersion tables in src/ndphotonics/data/materials.

Needs the ``refidx`` package (a packaged copy of the refractiveindex.info
database); it is not a runtime dependency of ndphotonics.

    pip install refidx
    python tools/build_material_tables.py
"""
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "ndphotonics" / "data" / "materials"


def _tabulated(shelf, book, page, lo_nm, hi_nm):
    import refidx

    db = refidx.core.database[shelf][book][page]["DATA"]
    wl = np.asarray(db["wavelengths"]) * 1e3
    idx = np.asarray(db["index"], dtype=complex)
    keep = (wl >= lo_nm) & (wl <= hi_nm)
    return wl[keep], idx[keep].real, idx[keep].imag


def malitson(wl_nm):
    lam2 = (np.asarray(wl_nm) / 1e3) ** 2
    n2 = 1.0
    for b, c in ((0.6961663, 0.0684043), (0.4079426, 0.1162414), (0.8974794, 9.896161)):
        n2 = n2 + b * lam2 / (lam2 - c**2)
    return np.sqrt(n2)


def write(name, kind, wl, n, k, source):
    path = OUT / f"{name}.txt"
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# {name} {kind}\n")
        fh.write(f"# source: {source}\n")
        for w, nn, kk in zip(wl, n, k):
            fh.write(f"{w:.4f} {nn:.6g} {kk:.6g}\n")
    print(path, len(wl))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write("Ag", "metal", *_tabulated("main", "Ag", "Johnson", 180, 2000),
          "P. B. Johnson and R. W. Christy, Phys. Rev. B 6, 4370 (1972)")
    write("Au", "metal", *_tabulated("main", "Au", "Johnson", 180, 2000),
          "P. B. Johnson and R. W. Christy, Phys. Rev. B 6, 4370 (1972)")
    write("Al", "metal", *_tabulated("main", "Al", "Rakic", 200, 2000),
          "A. D. Rakic, Appl. Opt. 34, 4755 (1995)")
    write("Si", "semiconductor", *_tabulated("main", "Si", "Aspnes", 200, 900),
          "D. E. Aspnes and A. A. Studna, Phys. Rev. B 27, 985 (1983)")
    wl = np.arange(210.0, 2000.0 + 1e-9, 2.0)
    write("SiO2", "dielectric", wl, malitson(wl), np.zeros_like(wl),
          "I. H. Malitson, J. Opt. Soc. Am. 55, 1205 (1965), Sellmeier formula sampled every 2 nm")
    wl = np.array([500.0, 800.0])
    write("diamond", "dielectric", wl, np.full(2, 2.41), np.zeros(2),
          "constant n = 2.41 over 500-800 nm")


if __name__ == "__main__":
    main()
