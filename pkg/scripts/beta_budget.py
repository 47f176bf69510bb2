"""Rate budget across the cavity resonance.

Prints the cavity-mediated rate Gamma(w), the lifetime and beta at the studied
dot and at the cavity, both for a constant leaky rate and for a side-loss
curve scaled by T1_hom. Also lists the two sidewall escape estimates.
"""
import argparse
from pathlib import Path

import numpy as np

from qdkerr.config import load_config
from qdkerr.qed import (
    HBAR_UEV_NS,
    beta_factor,
    lifetime_from_linewidth,
    purcell_rate,
    solid_angle_fraction,
)

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "paper.yaml"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(DEFAULT_CONFIG))
    ap.add_argument("--leaky-fraction", type=float, default=0.15,
                    help="share of the total emission lost to side modes at the cavity resonance")
    ap.add_argument("--index", type=float, default=3.5, help="refractive index for the escape-cone estimate")
    args = ap.parse_args()

    cfg = load_config(args.config)
    cav = cfg.cavity_spec()
    dip = cfg.dipole_spec()
    Gamma_x = float(purcell_rate(dip.omega_x, cav, dip.g))
    Gamma_c = float(purcell_rate(cav.omega_c, cav, dip.g))
    print(f"kappa = {cav.kappa:.0f} ueV (Q = {cav.q_factor:.0f}), g = {dip.g:.3f} ueV")
    print(f"dispersive suppression Gamma(w_x)/Gamma(w_c) = {Gamma_x / Gamma_c:.5f}")

    total_x = Gamma_x + dip.gamma
    print(f"\nat the dot:    Gamma = {Gamma_x:.4f}, gamma = {dip.gamma:.4f}, "
          f"T1 = {lifetime_from_linewidth(total_x):.4f} ns, beta = {beta_factor(Gamma_x, dip.gamma):.4f}")
    gamma_c = args.leaky_fraction / (1 - args.leaky_fraction) * Gamma_c
    print(f"at the cavity: Gamma = {Gamma_c:.4f}, gamma = {gamma_c:.4f}, "
          f"T1 = {lifetime_from_linewidth(Gamma_c + gamma_c):.4f} ns, beta = {beta_factor(Gamma_c, gamma_c):.4f}")
    if cfg.t1_hom_ns:
        gamma_hom = HBAR_UEV_NS / cfg.t1_hom_ns
        print(f"gamma_hom = hbar / {cfg.t1_hom_ns} ns = {gamma_hom:.4f} ueV; "
              f"leaky ratio at the dot = {dip.gamma / gamma_hom:.3f}, at the cavity = {gamma_c / gamma_hom:.3f}")

    print(f"\n{'det (meV)':>9} {'Gamma':>8} {'beta':>7}   (constant gamma = {dip.gamma} ueV)")
    for det in np.linspace(cfg.sweep.start_meV, cfg.sweep.stop_meV, 9):
        G = float(purcell_rate(cav.omega_c + det * 1000, cav, dip.g))
        print(f"{det:9.2f} {G:8.4f} {beta_factor(G, dip.gamma):7.4f}")

    print(f"\nsidewall escape fraction of 4 pi (n = {args.index}):")
    for geometry in ("equatorial_band", "double_cone_product"):
        print(f"  {geometry:<20} {solid_angle_fraction(args.index, geometry):.4f}")


if __name__ == "__main__":
    main()
