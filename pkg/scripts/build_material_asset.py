#!/usr/bin/env python3
"""Regenerate src/chansim6g/data/materials.json.

The shipped reflection sample grids are reconstructed from the rough-surface
Fresnel model with seeded measurement-like scatter (no public machine-readable
measurement data exists for these curves); the frequency-angle fits are then
regenerated from those grids. Both are flagged approximate in the asset notes.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from chansim6g.thz import MaterialEm, fit_fa, rough_reflection  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "src" / "chansim6g" / "data" / "materials.json"

# Approximate sub-THz electromagnetic properties (refractive index,
# absorption 1/m, roughness std m) for the four shipped materials.
MATERIALS = {
    "glass": dict(n=2.55, alpha_abs=2500.0, sigma_h=0.02e-3),
    "tile": dict(n=2.20, alpha_abs=1000.0, sigma_h=0.05e-3),
    "board": dict(n=1.65, alpha_abs=800.0, sigma_h=0.15e-3),
    "plasterboard": dict(n=1.50, alpha_abs=400.0, sigma_h=0.12e-3),
}

F_GHZ = np.arange(220.0, 321.0, 20.0)
THETA_DEG = np.arange(10.0, 81.0, 10.0)
NOISE_STD = 0.08
SEED = 20240917


def main():
    rng = np.random.default_rng(SEED)
    asset = {
        "version": 1,
        "notes": ("Approximate material EM properties and frequency-angle "
                  "reflection fits for the 220-320 GHz band. Sample grids are "
                  f"model-reconstructed with seeded scatter (seed {SEED}); "
                  "regenerate with scripts/build_material_asset.py."),
        "materials": {},
    }
    theta_rad = np.radians(THETA_DEG)
    for name, props in MATERIALS.items():
        mat = MaterialEm(name=name, **props)
        clean = np.array([[abs(rough_reflection(mat, fq * 1e9, th, "V"))
                           for th in theta_rad] for fq in F_GHZ])
        noisy = np.clip(clean + rng.normal(0.0, NOISE_STD, clean.shape), 0.0, 1.0)
        fit = fit_fa(F_GHZ, theta_rad, noisy)
        rms = float(np.sqrt(np.mean((np.array(
            [[abs(__import__('chansim6g.thz', fromlist=['reflection_fa'])
              .reflection_fa(fit, fq * 1e9, th).gamma)
              for th in theta_rad] for fq in F_GHZ]) - noisy) ** 2)))
        print(f"{name:13s} fit a={fit.a:+.3f} b={fit.b:+.3f} c={fit.c:+.3f} "
              f"d={fit.d:+.2e}  rms={rms:.3f}")
        asset["materials"][name] = {
            **props,
            "fa_fit": {"a": fit.a, "b": fit.b, "c": fit.c, "d": fit.d,
                       "band_ghz": [220.0, 320.0], "fit_rms": rms},
            "sample_grid": {
                "f_ghz": F_GHZ.tolist(),
                "theta_deg": THETA_DEG.tolist(),
                "gamma_abs": [[round(float(v), 6) for v in row] for row in noisy],
            },
        }
    OUT.write_text(json.dumps(asset, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
