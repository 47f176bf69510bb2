"""Jones-vector scattering off the spin-selective circular channels and H/V/D/A analysis.

Basis conventions (all sign-sensitive outputs follow from these):

    |sigma+-> = (|H> +- i|V>) / sqrt(2)
    |D>, |A>  = (|H> +- |V>) / sqrt(2)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EstimatorUndefinedError,
    InconsistentCountsError,
    UndefinedOrientationError,
)

SATURATION_SLACK = 1e-6
# |sin(phi)| this close to 1 counts as pinned (pure states land at 1 - O(eps))
PINNED = 1.0 - 1e-12


@dataclass(frozen=True)
class JonesVector:
    """Field amplitudes in the H/V basis. Components may be numpy arrays."""

    a_h: complex
    a_v: complex

    def __mul__(self, scalar):
        return JonesVector(self.a_h * scalar, self.a_v * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "JonesVector"):
        return JonesVector(self.a_h + other.a_h, self.a_v + other.a_v)

    @property
    def intensity(self):
        return np.abs(self.a_h) ** 2 + np.abs(self.a_v) ** 2


@dataclass(frozen=True)
class PolarizationCounts:
    """Detected intensities behind H, V, D and A analysers (scalars or arrays)."""

    h: float
    v: float
    d: float
    a: float

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.v, self.d, self.a], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "PolarizationCounts":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], arr[1], arr[2], arr[3])

    def __add__(self, other: "PolarizationCounts"):
        return PolarizationCounts(self.h + other.h, self.v + other.v, self.d + other.d, self.a + other.a)

    def scale(self, factor) -> "PolarizationCounts":
        return PolarizationCounts(self.h * factor, self.v * factor, self.d * factor, self.a * factor)


@dataclass(frozen=True)
class PhaseResult:
    phi: float
    phi_r: float
    saturated: bool


def scatter_linear_v(r_plus, r_minus) -> JonesVector:
    """Reflect unit |V> when sigma+ sees ``r_plus`` and sigma- sees ``r_minus``.

    |V> = i(|sigma-> - |sigma+>)/sqrt(2), so the output is
    a_h = i(r_minus - r_plus)/2, a_v = (r_minus + r_plus)/2.
    """
    r_plus = np.asarray(r_plus, dtype=complex)
    r_minus = np.asarray(r_minus, dtype=complex)
    return JonesVector(0.5j * (r_minus - r_plus), 0.5 * (r_minus + r_plus))


def counts_from_jones(j: JonesVector) -> PolarizationCounts:
    h = np.abs(j.a_h) ** 2
    v = np.abs(j.a_v) ** 2
    d = np.abs(j.a_h + j.a_v) ** 2 / 2
    a = np.abs(j.a_h - j.a_v) ** 2 / 2
    return PolarizationCounts(h, v, d, a)


def _sin_phi(c: PolarizationCounts):
    h, v = np.asarray(c.h, dtype=float), np.asarray(c.v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (np.asarray(c.d, dtype=float) - np.asarray(c.a, dtype=float)) / (2.0 * np.sqrt(h * v))


def phase_from_counts(c: PolarizationCounts) -> PhaseResult:
    """Relative phase from sin(phi) = (D - A) / (2 sqrt(H V)), principal branch.

    Ratios up to 1e-6 beyond +-1 are clamped. ``saturated`` flags |ratio| at 1 (to
    within 1e-12), which is what any pure two-component state gives: the estimator
    reads the H/V relative phase and is meant for ensemble-averaged counts.
    """
    if not (c.h > 0 and c.v > 0):
        raise EstimatorUndefinedError(f"need H > 0 and V > 0, got H={c.h}, V={c.v}")
    ratio = float(_sin_phi(c))
    if abs(ratio) > 1.0 + SATURATION_SLACK:
        raise InconsistentCountsError(f"|sin(phi)| = {abs(ratio):.9g} exceeds 1")
    saturated = abs(ratio) >= PINNED
    phi = float(np.arcsin(np.clip(ratio, -1.0, 1.0)))
    return PhaseResult(phi=phi, phi_r=phi / 2, saturated=bool(saturated))


def phase_from_counts_array(c: PolarizationCounts):
    """Vectorised estimator for scans.

    Returns ``(phi, saturated, defined)``. Points where H or V vanishes, or the
    counts are inconsistent, get phi = nan and defined = False instead of raising.
    """
    h = np.atleast_1d(np.asarray(c.h, dtype=float))
    v = np.atleast_1d(np.asarray(c.v, dtype=float))
    ratio = np.atleast_1d(_sin_phi(c))
    defined = (h > 0) & (v > 0) & np.isfinite(ratio) & (np.abs(ratio) <= 1.0 + SATURATION_SLACK)
    saturated = defined & (np.abs(ratio) >= PINNED)
    phi = np.where(defined, np.arcsin(np.clip(np.nan_to_num(ratio), -1.0, 1.0)), np.nan)
    return phi, saturated, defined


def rotation_angle(c: PolarizationCounts) -> float:
    """Major-axis orientation psi = atan2(D - A, H - V) / 2, measured from H."""
    s1 = c.h - c.v
    s2 = c.d - c.a
    if s1 == 0 and s2 == 0:
        raise UndefinedOrientationError("no linear polarization component")
    return float(0.5 * np.arctan2(s2, s1))
