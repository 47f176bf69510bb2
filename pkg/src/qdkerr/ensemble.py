"""Averaging over quasi-static Gaussian spectral jitter and the thermal electron spin.

Jitter shifts both Zeeman branches rigidly by the same offset delta ~ N(0, sigma).
Spin down drives sigma- at ``dipole.omega_down`` while sigma+ sees the cold
cavity; spin up is the mirror image.

Three evaluators of the jitter average are provided:

* ``"faddeeva"`` (default): the coupled reflection has a single pole in delta,
  so the Gaussian average of every count reduces to the Faddeeva function w(z).
  Closed form, no truncation error.
* ``"gauss-hermite"``: Gauss-Hermite rule of ``jitter.quadrature_order`` nodes.
  Converges slowly when sigma is large compared with the homogeneous linewidth.
* :func:`averaged_counts_mc`: seeded Monte Carlo, used as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermite, voigt_profile, wofz

from .errors import DomainError, InfeasibleError
from .polarization import (
    JonesVector,
    PolarizationCounts,
    counts_from_jones,
    phase_from_counts_array,
    scatter_linear_v,
)
from .qed import CavitySpec, DipoleSpec, cold_reflection, coupled_reflection, reflection_pole

GAUSS_FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))  # 2.35482

AVERAGING_METHODS = ("faddeeva", "gauss-hermite")

# below this (ueV) the jitter correction, O(sigma^2 / linewidth^2), is far under
# double precision and the Faddeeva argument z / sigma would overflow
NEGLIGIBLE_SIGMA = 1e-12


@dataclass(frozen=True)
class JitterSpec:
    sigma: float
    quadrature_order: int = 64
    mc_samples: int = 100_000
    seed: int = 0
    method: str = "faddeeva"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        if self.quadrature_order < 1:
            raise DomainError("quadrature_order must be >= 1")
        if self.mc_samples < 1:
            raise DomainError("mc_samples must be >= 1")
        if self.method not in AVERAGING_METHODS:
            raise DomainError(f"method must be one of {AVERAGING_METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class SpinEnsemble:
    p_up: float = 0.5
    p_down: float = field(default=None)

    def __post_init__(self):
        if self.p_down is None:
            object.__setattr__(self, "p_down", 1.0 - self.p_up)
        if not (0 <= self.p_up <= 1 and 0 <= self.p_down <= 1):
            raise DomainError("spin probabilities must lie in [0, 1]")
        if abs(self.p_up + self.p_down - 1.0) > 1e-12:
            raise DomainError("p_up + p_down must equal 1")

    def swapped(self) -> "SpinEnsemble":
        return SpinEnsemble(self.p_down, self.p_up)


@dataclass(frozen=True)
class ScanGrid:
    start: float
    stop: float
    points: int

    def __post_init__(self):
        if not self.stop > self.start:
            raise DomainError("scan stop must exceed start")
        if self.points < 2:
            raise DomainError("scan needs at least 2 points")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class PhaseModel:
    """Everything needed to predict averaged counts at a laser energy."""

    cavity: CavitySpec
    dipole: DipoleSpec
    jitter: JitterSpec
    spins: SpinEnsemble = SpinEnsemble()

    def with_dipole(self, **changes) -> "PhaseModel":
        return replace(self, dipole=replace(self.dipole, **changes))


# -- Voigt calibration -------------------------------------------------------------


def _profile_fwhm(profile, scale: float) -> float:
    peak = profile(0.0)
    half = 0.5 * peak
    hi = scale
    while profile(hi) > half:
        hi *= 2.0
    return 2.0 * brentq(lambda x: profile(x) - half, 0.0, hi, xtol=1e-13, rtol=1e-14)


def voigt_fwhm(lorentzian_fwhm: float, sigma: float) -> float:
    """FWHM of a Lorentzian (given FWHM) convolved with a Gaussian of std ``sigma``.

    The half-maximum point is root-found on the exact convolution integral.
    """
    if lorentzian_fwhm < 0 or sigma < 0:
        raise DomainError("widths must be >= 0")
    if sigma == 0:
        return float(lorentzian_fwhm)
    if lorentzian_fwhm == 0:
        return float(GAUSS_FWHM_PER_SIGMA * sigma)
    gamma_hw = lorentzian_fwhm / 2
    return _profile_fwhm(lambda x: voigt_profile(x, sigma, gamma_hw), lorentzian_fwhm + 3 * sigma)


def calibrate_jitter(lorentzian_fwhm: float, target_voigt_fwhm: float) -> float:
    """Gaussian std that broadens ``lorentzian_fwhm`` to ``target_voigt_fwhm``."""
    if lorentzian_fwhm < 0:
        raise DomainError("lorentzian_fwhm must be >= 0")
    if target_voigt_fwhm < lorentzian_fwhm:
        raise InfeasibleError(
            f"target FWHM {target_voigt_fwhm} is below the Lorentzian FWHM {lorentzian_fwhm}"
        )
    if target_voigt_fwhm == lorentzian_fwhm:
        return 0.0
    if lorentzian_fwhm == 0:
        return target_voigt_fwhm / GAUSS_FWHM_PER_SIGMA
    # the Voigt FWHM is always >= the Gaussian FWHM, which brackets the root
    upper = target_voigt_fwhm / GAUSS_FWHM_PER_SIGMA
    return brentq(
        lambda s: voigt_fwhm(lorentzian_fwhm, s) - target_voigt_fwhm, 0.0, upper, xtol=1e-12, rtol=1e-13
    )


# -- spin / jitter averaging -----------------------------------------------------


def _branches(dipole: DipoleSpec, spins: SpinEnsemble):
    """(probability, branch energy, Jones response to a unit sigma+- amplitude)."""
    out = []
    if spins.p_down > 0:
        out.append((spins.p_down, dipole.omega_down, scatter_linear_v(0.0, 1.0)))
    if spins.p_up > 0:
        out.append((spins.p_up, dipole.omega_up, scatter_linear_v(1.0, 0.0)))
    return out


def _analyser_amplitudes(j: JonesVector):
    return (j.a_h, j.a_v, (j.a_h + j.a_v) / np.sqrt(2), (j.a_h - j.a_v) / np.sqrt(2))


def _single_branch_counts(omega, cavity, dipole, branch, unit_jones, delta):
    """Counts for one spin with the transition shifted by ``delta`` (broadcasts)."""
    r0 = cold_reflection(omega, cavity)
    r_c = coupled_reflection(omega, cavity, branch + delta, dipole)
    return counts_from_jones(scatter_linear_v(r0, r0) + unit_jones * (r_c - r0))


def _faddeeva_branch(omega, cavity, dipole, branch, unit_jones, sigma):
    r0, amp, z = reflection_pole(omega, cavity, dipole, branch)
    base = scatter_linear_v(r0, r0)
    if dipole.g == 0:
        return counts_from_jones(base)
    scale = np.sqrt(2.0) * sigma
    # E[1/(delta - z)] for delta ~ N(0, sigma), Im z > 0
    e_inv = 1j * np.sqrt(np.pi) * wofz(z / scale) / scale
    mean_l = -1j * amp * e_inv
    mean_l2 = np.abs(amp) ** 2 * e_inv.imag / z.imag
    channels = []
    for a0, b in zip(_analyser_amplitudes(base), _analyser_amplitudes(unit_jones)):
        channels.append(np.abs(a0) ** 2 + 2 * np.real(np.conj(a0) * b * mean_l) + np.abs(b) ** 2 * mean_l2)
    return PolarizationCounts(*channels)


def _gauss_hermite_branch(omega, cavity, dipole, branch, unit_jones, sigma, order):
    nodes, weights = roots_hermite(order)
    delta = np.sqrt(2.0) * sigma * nodes
    weights = weights / np.sqrt(np.pi)
    c = _single_branch_counts(omega[:, None], cavity, dipole, branch, unit_jones, delta[None, :])
    return PolarizationCounts(*(np.asarray(ch) @ weights for ch in (c.h, c.v, c.d, c.a)))


def _squeeze(counts: PolarizationCounts, scalar: bool) -> PolarizationCounts:
    if not scalar:
        return counts
    return PolarizationCounts(*(float(np.asarray(x).reshape(-1)[0]) for x in (counts.h, counts.v, counts.d, counts.a)))


def averaged_counts(omega_laser, cavity: CavitySpec, dipole: DipoleSpec, jitter: JitterSpec,
                    spins: SpinEnsemble, method: str | None = None) -> PolarizationCounts:
    """Jitter- and spin-averaged H/V/D/A counts for |V> input at ``omega_laser``."""
    method = method or jitter.method
    if method not in AVERAGING_METHODS:
        raise DomainError(f"unknown averaging method {method!r}")
    scalar = np.ndim(omega_laser) == 0
    omega = np.atleast_1d(np.asarray(omega_laser, dtype=float))
    total = PolarizationCounts(*(np.zeros_like(omega) for _ in range(4)))
    for prob, branch, unit in _branches(dipole, spins):
        if jitter.sigma <= NEGLIGIBLE_SIGMA:
            part = _single_branch_counts(omega, cavity, dipole, branch, unit, 0.0)
        elif method == "faddeeva":
            part = _faddeeva_branch(omega, cavity, dipole, branch, unit, jitter.sigma)
        else:
            part = _gauss_hermite_branch(omega, cavity, dipole, branch, unit, jitter.sigma,
                                         jitter.quadrature_order)
        total = total + part.scale(prob)
    return _squeeze(total, scalar)


def averaged_counts_mc(omega_laser, cavity: CavitySpec, dipole: DipoleSpec, jitter: JitterSpec,
                       spins: SpinEnsemble, with_stderr: bool = False, point_offset: int = 0):
    """Monte Carlo estimate of :func:`averaged_counts`.

    Grid point ``i`` draws from its own stream seeded by ``(jitter.seed, point_offset + i)``,
    so any slice of a scan reproduces the full-scan values bit for bit.
    """
    scalar = np.ndim(omega_laser) == 0
    omega = np.atleast_1d(np.asarray(omega_laser, dtype=float))
    n = jitter.mc_samples
    means = np.empty((4, omega.size))
    errs = np.empty((4, omega.size))
    r0_all = cold_reflection(omega, cavity)
    for i, w in enumerate(omega):
        rng = np.random.default_rng(np.random.SeedSequence([jitter.seed, point_offset + i]))
        up = rng.random(n) < spins.p_up
        delta = jitter.sigma * rng.standard_normal(n)
        branch = np.where(up, dipole.omega_up, dipole.omega_down)
        r0 = r0_all[i]
        r_c = coupled_reflection(w, cavity, branch + delta, dipole)
        r_plus = np.where(up, r_c, r0)
        r_minus = np.where(up, r0, r_c)
        c = counts_from_jones(scatter_linear_v(r_plus, r_minus))
        samples = np.vstack([c.h, c.v, c.d, c.a])
        means[:, i] = samples.mean(axis=1)
        errs[:, i] = samples.std(axis=1, ddof=1) / np.sqrt(n) if n > 1 else np.inf
    counts = _squeeze(PolarizationCounts(*means), scalar)
    if with_stderr:
        return counts, _squeeze(PolarizationCounts(*errs), scalar)
    return counts


# -- scans ----------------------------------------------------------------------------


def _grid_values(grid) -> np.ndarray:
    return grid.values() if isinstance(grid, ScanGrid) else np.asarray(grid, dtype=float)


def model_counts(omega, model: PhaseModel, use_mc: bool = False) -> PolarizationCounts:
    if use_mc:
        return averaged_counts_mc(omega, model.cavity, model.dipole, model.jitter, model.spins)
    return averaged_counts(omega, model.cavity, model.dipole, model.jitter, model.spins)


def rs_lineshape(grid, model: PhaseModel, use_mc: bool = False):
    """Cross-polarised (H-detected) resonant-scattering intensity. Returns (omega, h)."""
    omega = _grid_values(grid)
    return omega, np.asarray(model_counts(omega, model, use_mc).h, dtype=float)


@dataclass(frozen=True)
class PhaseScan:
    omega: np.ndarray
    phi: np.ndarray
    saturated: np.ndarray
    defined: np.ndarray
    counts: PolarizationCounts

    @property
    def phi_r(self) -> np.ndarray:
        return self.phi / 2

    def max_abs_phi(self) -> float:
        return float(np.nanmax(np.abs(self.phi)))


def phase_scan(grid, model: PhaseModel, use_mc: bool = False) -> PhaseScan:
    """Apply the H/V/D/A phase estimator to the averaged counts across a grid.

    Grid points where the estimator is undefined carry phi = nan, defined = False.
    Points with no scattered light at all (H = 0 and D = A, e.g. g = 0) have
    nothing rotated and are reported as phi = 0.
    """
    omega = _grid_values(grid)
    counts = model_counts(omega, model, use_mc)
    phi, saturated, defined = phase_from_counts_array(counts)
    dark = (np.atleast_1d(counts.h) == 0) & (np.atleast_1d(counts.d) == np.atleast_1d(counts.a))
    phi = np.where(dark, 0.0, phi)
    defined = defined | dark
    return PhaseScan(omega, phi, saturated, defined, counts)


def envelope_fwhm(x, y) -> float:
    """Full width between the outermost half-maximum crossings, linearly interpolated."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    peak = y.max()
    if not peak > 0:
        return float("nan")
    above = np.flatnonzero(y >= peak / 2)
    lo, hi = above[0], above[-1]
    if lo == 0 or hi == len(y) - 1:
        return float("nan")  # feature not contained in the grid

    def cross(i0, i1):
        return x[i0] + (peak / 2 - y[i0]) * (x[i1] - x[i0]) / (y[i1] - y[i0])

    return float(cross(hi, hi + 1) - cross(lo - 1, lo))
