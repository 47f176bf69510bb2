"""Gauss-Hermite accuracy against the closed-form jitter average.

The coupled reflection has one pole at distance ~Gamma_t/2 from the real axis,
so a Gauss-Hermite rule converges slowly once sigma exceeds that distance.
"""
import argparse
from pathlib import Path

import numpy as np

from qdkerr.config import load_config
from qdkerr.ensemble import JitterSpec, averaged_counts

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "paper.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(DEFAULT_CONFIG))
    args = ap.parse_args()

    model = load_config(args.config).model()
    omega = model.dipole.omega_x + np.linspace(-8, 8, 81)
    orders = (16, 32, 64, 128, 256, 512, 1024)
    print("max relative error of Gauss-Hermite counts vs closed form")
    print(f"{'sigma':>7} " + " ".join(f"{n:>9d}" for n in orders))
    for sigma in (0.1, 0.2, 0.5, 1.0, model.jitter.sigma, 3.0):
        exact = averaged_counts(omega, model.cavity, model.dipole, JitterSpec(sigma), model.spins).as_array()
        errs = []
        for n in orders:
            gh = averaged_counts(omega, model.cavity, model.dipole, JitterSpec(sigma, n), model.spins,
                                 method="gauss-hermite").as_array()
            errs.append(np.max(np.abs(gh - exact) / np.abs(exact)))
        print(f"{sigma:7.3f} " + " ".join(f"{e:9.1e}" for e in errs))


if __name__ == "__main__":
    main()
