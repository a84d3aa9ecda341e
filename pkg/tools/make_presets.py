"""Write the bundled JSON presets from the reference-device builder.

Run from the repository root:  python tools/make_presets.py
"""
import json
from pathlib import Path

from ndphotonics.design import paper_stack

OUT = Path(__file__).resolve().parents[1] / "src" / "ndphotonics" / "data" / "presets"
DIPOLE = {"layer_index": 0, "wavelength_nm": 637.0, "orientation": "isotropic"}


def solve(stack):
    return {"command": "solve", "stack": stack.to_dict(), "dipole": DIPOLE, "na": 0.7}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    presets = {
        "paper_65nm": solve(paper_stack("Ag", 65.0)),
        "paper_265nm": solve(paper_stack("Ag", 265.0)),
        "paper_nometal": solve(paper_stack(None, None)),
        "paper_fig1c": {
            "command": "sweep",
            "kind": "thickness",
            "stacks": {m or "none": paper_stack(m, 65.0).to_dict() for m in ("Ag", "Au", "Al", None)},
            "reference": "none",
            "dipole": DIPOLE,
            "metrics": ["power_up", "eta_na(0.7)"],
            "thickness": {"swept_layer": 1, "start_nm": 10.0, "stop_nm": 400.0, "step_nm": 5.0},
        },
        "paper_broadband": {
            "command": "sweep",
            "kind": "wavelength",
            "stacks": {"Ag": paper_stack("Ag", 65.0).to_dict(), "none": paper_stack(None, 65.0).to_dict()},
            "reference": "none",
            "dipole": DIPOLE,
            "metrics": ["power_up", "eta_na(0.7)"],
            "wavelength": {"start_nm": 600.0, "stop_nm": 750.0, "step_nm": 10.0},
        },
    }
    for name, cfg in presets.items():
        (OUT / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
        print("wrote", name)


if __name__ == "__main__":
    main()
