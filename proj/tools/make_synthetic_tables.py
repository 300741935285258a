#!/usr/bin/env python3
"""Regenerate the synthetic default tables in data/.

The emission table is a synthetic stand-in: it only encodes the qualitative
features of a silicon APD breakdown-flash spectrum (support 700-1000 nm, main
maximum at 860 nm, sharp edges at 872 nm and 913 nm, weaker maxima at 900 nm
and 980 nm once weighted by the detection efficiency). Relative heights are
invented.
"""
import numpy as np
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def photoelectron_generation(lam):
    lam = np.asarray(lam, float)
    p = np.where(lam < 800, 0.70 - 0.15 * ((800 - lam) / 100) ** 2,
                 0.08 + 0.62 * (1 - ((lam - 800) / 200) ** 2))
    return np.where(lam > 1000, 0.08 - 0.06 * (lam - 1000) / 50, p)


def emission(lam):
    lam = np.asarray(lam, float)
    main = (np.exp(-0.5 * ((lam - 866) / 36) ** 2) * (lam <= 866)
            + (lam > 866) * (1 - 0.1 * (lam - 866) / 6))
    main = main * (1 - 0.75 * smoothstep((lam - 870) / 4))
    main = np.where(lam > 874, 0.0, main)
    shelf = np.where((lam >= 870) & (lam <= 915),
                     0.25 + 0.35 * np.exp(-0.5 * ((lam - 900) / 7) ** 2), 0.0)
    shelf = shelf * (1 - smoothstep((lam - 911) / 4))
    hump = 0.62 * np.exp(-0.5 * ((lam - 980) / 9) ** 2)
    floor = np.where((lam > 911) & (lam < 1000), 0.09, 0.0)
    s = np.maximum(main, 0) + shelf + hump + floor
    s = s * (1 - smoothstep((lam - 993) / 7))
    s[-1] = 0.0
    return s / s.max()


def write(path, header, lam, val, comment):
    with open(path, "w") as f:
        for line in comment:
            f.write(f"# {line}\n")
        f.write(header + "\n")
        for l, v in zip(lam, val):
            f.write(f"{l:.1f},{v:.6f}\n")


if __name__ == "__main__":
    lam = np.arange(700.0, 1000.0 + 0.5, 1.0)
    write(DATA / "synthetic_emission_spectrum.csv", "wavelength_nm,value", lam, emission(lam),
          ["SYNTHETIC breakdown-flash emission spectrum (relative photons per nm, peak = 1).",
           "Encodes feature positions only; relative heights are invented.",
           "Generated by tools/make_synthetic_tables.py"])
    lam = np.arange(700.0, 1050.0 + 0.5, 5.0)
    write(DATA / "photoelectron_generation.csv", "wavelength_nm,value", lam,
          photoelectron_generation(lam),
          ["SYNTHETIC photoelectron generation probability p_gen(lambda) of a Si APD.",
           "Smooth drop from 0.70 at 800 nm to 0.08 at 1000 nm; detection efficiency = 0.55 * p_gen.",
           "Generated by tools/make_synthetic_tables.py"])
