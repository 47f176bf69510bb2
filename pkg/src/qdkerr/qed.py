"""Single-mode cavity / dipole reflection model and derived rates.

Units: every spectroscopic quantity (frequencies, linewidths, couplings) is an
energy in ueV, and every rate is a FWHM. Half-widths appear only inside the
reflection denominators. Lifetimes are in ns.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, UndefinedInputError

HBAR_UEV_NS = 0.6582119  # ueV * ns

UEV_PER_MEV = 1000.0

PASSIVITY_SLACK = 1e-9


@dataclass(frozen=True)
class CavitySpec:
    """Fundamental pillar mode.

    omega_c: resonance (ueV). kappa: total energy FWHM (ueV).
    eta_top: fraction of the cavity decay leaving through the addressed top mirror.
    """

    omega_c: float
    kappa: float
    eta_top: float = 0.9

    def __post_init__(self):
        if not np.isfinite(self.omega_c):
            raise DomainError("omega_c must be finite")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be > 0, got {self.kappa}")
        if not 0.0 <= self.eta_top <= 1.0:
            raise DomainError(f"eta_top must lie in [0, 1], got {self.eta_top}")

    @property
    def q_factor(self) -> float:
        # display only; kappa is the primary quantity
        return self.omega_c / self.kappa


@dataclass(frozen=True)
class DipoleSpec:
    """Charged-dot trion transitions.

    omega_x is the centre of the Zeeman doublet; the two circular branches sit at
    omega_x +/- delta_z/2. ``zeeman_sign`` picks which spin owns the lower branch:
    +1 puts the spin-down (sigma-) transition at omega_x - delta_z/2.
    """

    omega_x: float
    delta_z: float
    g: float
    gamma: float
    gamma_star: float = 0.0
    zeeman_sign: int = 1

    def __post_init__(self):
        if not np.isfinite(self.omega_x):
            raise DomainError("omega_x must be finite")
        for name in ("delta_z", "g", "gamma", "gamma_star"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value}")
        if self.zeeman_sign not in (1, -1):
            raise DomainError("zeeman_sign must be +1 or -1")

    @property
    def omega_down(self) -> float:
        """Energy of the sigma- transition (driven when the spin is down)."""
        return self.omega_x - self.zeeman_sign * self.delta_z / 2

    @property
    def omega_up(self) -> float:
        """Energy of the sigma+ transition (driven when the spin is up)."""
        return self.omega_x + self.zeeman_sign * self.delta_z / 2


def cold_reflection(omega, cavity: CavitySpec):
    """Empty-cavity field reflection r0 = 1 - eta*kappa / (i(wc - w) + kappa/2)."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 - cavity.eta_top * cavity.kappa / (1j * (cavity.omega_c - omega) + cavity.kappa / 2)


def coupled_reflection(omega, cavity: CavitySpec, branch_energy, dipole: DipoleSpec):
    """Reflection seen by the circular component that drives a transition at ``branch_energy``.

    r = 1 - eta*kappa*(i(wt - w) + g_perp) / [(i(wt - w) + g_perp)(i(wc - w) + kappa/2) + g^2]
    with g_perp = gamma/2 + gamma_star the dipole coherence decay.
    """
    omega = np.asarray(omega, dtype=float)
    if dipole.g == 0:
        # also avoids 0/0 for a lossless dipole probed exactly on resonance
        return cold_reflection(omega, cavity) + 0.0 * np.asarray(branch_energy, dtype=float)
    u = 1j * (np.asarray(branch_energy, dtype=float) - omega) + dipole.gamma / 2 + dipole.gamma_star
    c = 1j * (cavity.omega_c - omega) + cavity.kappa / 2
    return 1.0 - cavity.eta_top * cavity.kappa * u / (u * c + dipole.g**2)


def reflection_pole(omega, cavity: CavitySpec, dipole: DipoleSpec, branch_energy):
    """Split the coupled reflection into ``r0 - i*A / (delta - z)``.

    ``delta`` is a rigid shift of the transition energy (spectral jitter). Returns
    ``(r0, A, z)`` with Im z > 0 whenever g > 0 or the dipole decays, which is what
    makes the Gaussian average expressible through the Faddeeva function.
    """
    omega = np.asarray(omega, dtype=float)
    c = 1j * (cavity.omega_c - omega) + cavity.kappa / 2
    r0 = 1.0 - cavity.eta_top * cavity.kappa / c
    b = dipole.g**2 / c
    amp = cavity.eta_top * cavity.kappa * dipole.g**2 / c**2
    z = (omega - branch_energy) + 1j * (dipole.gamma / 2 + dipole.gamma_star + b)
    return r0, amp, z


def purcell_rate(omega, cavity: CavitySpec, g):
    """Cavity-mediated emission rate Gamma(w) = 4 g^2 / (kappa (1 + (2(wc - w)/kappa)^2))."""
    omega = np.asarray(omega, dtype=float)
    x = 2.0 * (cavity.omega_c - omega) / cavity.kappa
    return 4.0 * np.asarray(g, dtype=float) ** 2 / (cavity.kappa * (1.0 + x * x))


def coupling_from_rate(rate, omega, cavity: CavitySpec):
    """Inverse of :func:`purcell_rate`: the g that gives ``rate`` at ``omega``."""
    if np.any(np.asarray(rate) < 0):
        raise DomainError("rate must be >= 0")
    x = 2.0 * (cavity.omega_c - np.asarray(omega, dtype=float)) / cavity.kappa
    return np.sqrt(np.asarray(rate, dtype=float) * cavity.kappa * (1.0 + x * x) / 4.0)


def beta_factor(Gamma, gamma, gamma_star=0.0):
    """Fraction of the dipole's interaction rate that goes into the cavity mode."""
    total = Gamma + gamma + gamma_star
    if np.any(np.asarray(total) <= 0):
        raise UndefinedInputError("beta factor needs Gamma + gamma + gamma_star > 0")
    return Gamma / total


def linewidth_from_lifetime(t1_ns):
    """Transform-limited FWHM (ueV) of a transition with lifetime ``t1_ns``."""
    t1 = np.asarray(t1_ns, dtype=float)
    if np.any(~(t1 > 0)):
        raise DomainError("lifetime must be > 0")
    out = HBAR_UEV_NS / t1
    return float(out) if out.ndim == 0 else out


def lifetime_from_linewidth(fwhm_uev):
    w = np.asarray(fwhm_uev, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("linewidth must be > 0")
    out = HBAR_UEV_NS / w
    return float(out) if out.ndim == 0 else out


class SideGeometry(str, Enum):
    EQUATORIAL_BAND = "equatorial_band"
    DOUBLE_CONE_PRODUCT = "double_cone_product"


def solid_angle_fraction(n_index: float, geometry="equatorial_band") -> float:
    """Fraction of 4 pi sr that leaves through the pillar sidewall below the critical angle.

    equatorial_band: on-axis emitter in a cylinder; every horizontal ray meets the
    wall at normal incidence, so escape needs |elevation| < theta_c, giving sin(theta_c).

    double_cone_product: escape windows treated as independent elevation and azimuth
    limits |el|, |az| < theta_c on two opposite facets, giving 2 theta_c sin(theta_c) / pi.
    """
    if not n_index >= 1:
        raise DomainError(f"refractive index must be >= 1, got {n_index}")
    geometry = SideGeometry(geometry)
    theta_c = np.arcsin(1.0 / n_index)
    if geometry is SideGeometry.EQUATORIAL_BAND:
        return float(np.sin(theta_c))
    return float(2.0 * theta_c * np.sin(theta_c) / np.pi)
