"""Rotating control field, polar decomposition and adiabaticity checks.

The control field traces a cone of half-angle ``theta0`` about the z
axis at constant modulus ``b0``:

    B(t) = b0 * (sin(theta0) cos(omega t), sin(theta0) sin(omega t), cos(theta0))

with ``omega = 2*pi*n_cycles / t_total`` so that the path closes after
``n_cycles`` full turns on ``[0, t_total]``.  The total field seen by
the spin is B(t) + K(t) with K a noise path from :mod:`berrysim.noise`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError
from .noise import NoiseModel

__all__ = [
    "PrecessionSpec",
    "SphericalAngles",
    "FieldSample",
    "AdiabaticityReport",
    "control_field",
    "polar_angles",
    "field_sample",
    "first_order_cos_theta",
    "adiabaticity_report",
]


@dataclass(frozen=True)
class PrecessionSpec:
    """Geometry and schedule of the rotating control field.

    Parameters
    ----------
    b0:
        Field modulus, strictly positive.
    theta0:
        Cone half-angle in radians, within [0, pi].
    t_total:
        Duration of the schedule, strictly positive.
    n_cycles:
        Number of full turns completed over ``t_total``; positive integer.
    """

    b0: float
    theta0: float
    t_total: float
    n_cycles: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.b0) and self.b0 > 0.0):
            raise ValueError(f"b0 must be finite and positive, got {self.b0}")
        if not (math.isfinite(self.theta0) and 0.0 <= self.theta0 <= math.pi):
            raise ValueError(f"theta0 must lie in [0, pi], got {self.theta0}")
        if not (math.isfinite(self.t_total) and self.t_total > 0.0):
            raise ValueError(f"t_total must be finite and positive, got {self.t_total}")
        if not isinstance(self.n_cycles, (int, np.integer)) or self.n_cycles < 1:
            raise ValueError(f"n_cycles must be a positive integer, got {self.n_cycles}")
        object.__setattr__(self, "n_cycles", int(self.n_cycles))

    @property
    def omega(self) -> float:
        """Angular drive frequency 2*pi*n_cycles / t_total."""
        return 2.0 * math.pi * self.n_cycles / self.t_total


@dataclass(frozen=True)
class SphericalAngles:
    """Polar decomposition (theta, phi) of a nonzero vector.

    ``theta`` is the polar angle in [0, pi], ``phi`` the azimuth in
    (-pi, pi].  Vectors on the z axis carry ``phi = 0`` by convention.
    """

    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and 0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not (math.isfinite(self.phi) and -math.pi <= self.phi <= math.pi):
            raise ValueError(f"phi must lie in [-pi, pi], got {self.phi}")


@dataclass(frozen=True)
class FieldSample:
    """Control, noise and total field at one instant."""

    t: float
    b_control: np.ndarray
    k_noise: np.ndarray
    b_total: np.ndarray


def _check_times(t: np.ndarray, t_total: float) -> None:
    tol = 1e-9 * max(1.0, t_total)
    if np.any(t < -tol) or np.any(t > t_total + tol):
        raise ValueError(f"t must lie within [0, {t_total}]")


def control_field(spec: PrecessionSpec, t: float | np.ndarray) -> np.ndarray:
    """Control field at time(s) ``t``; shape ``(3,)`` or ``t.shape + (3,)``.

    Raises ``ValueError`` when any time lies outside ``[0, t_total]``.
    """
    t = np.asarray(t, dtype=float)
    _check_times(t, spec.t_total)
    phase = spec.omega * t
    s = math.sin(spec.theta0)
    c = math.cos(spec.theta0)
    return spec.b0 * np.stack(
        [s * np.cos(phase), s * np.sin(phase), np.full_like(phase, c)], axis=-1
    )


def polar_angles(vector: np.ndarray) -> SphericalAngles:
    """Polar angles of a single nonzero 3-vector.

    Raises :class:`DegeneracyError` for the zero vector, whose direction
    is undefined.
    """
    v = np.asarray(vector, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise DegeneracyError("zero field vector has no polar decomposition")
    theta = math.acos(min(1.0, max(-1.0, v[2] / r)))
    # atan2(0, 0) = 0 realizes the phi = 0 convention on the z axis; adding
    # 0.0 squashes negative zeros, for which atan2 would report +/-pi.
    phi = math.atan2(v[1] + 0.0, v[0] + 0.0)
    return SphericalAngles(theta=theta, phi=phi)


def field_sample(spec: PrecessionSpec, k_noise: np.ndarray, t: float) -> FieldSample:
    """Bundle control, noise and total field at one instant."""
    k = np.asarray(k_noise, dtype=float)
    if k.shape != (3,):
        raise ValueError(f"k_noise must be a 3-vector, got shape {k.shape}")
    b = control_field(spec, float(t))
    return FieldSample(t=float(t), b_control=b, k_noise=k, b_total=b + k)


def first_order_cos_theta(spec: PrecessionSpec, k_noise: np.ndarray, t: float) -> float:
    """cos(theta) of the total field, expanded to first order in the noise.

    The exact polar angle of B(t) + K satisfies

        cos(theta) = (B3 + K3) / |B + K|

    whose first-order expansion in K/b0 is

        cos(theta0) + K3/b0 - (B3 / b0**3) * (B . K).

    The neglected remainder is quadratic in |K|/b0.
    """
    k = np.asarray(k_noise, dtype=float)
    if k.shape != (3,):
        raise ValueError(f"k_noise must be a 3-vector, got shape {k.shape}")
    b = control_field(spec, float(t))
    b0 = spec.b0
    return float(b[2] / b0 + k[2] / b0 - (b[2] / b0**3) * np.dot(b, k))


@dataclass(frozen=True)
class AdiabaticityReport:
    """Dimensionless slowness/weakness ratios with pass flags.

    ``ratios`` holds each ratio, ``flags`` is True where the ratio is at
    or below its threshold, ``passed`` is the conjunction of all flags.
    """

    ratios: dict
    flags: dict
    thresholds: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "ratios": dict(self.ratios),
            "flags": dict(self.flags),
            "thresholds": dict(self.thresholds),
            "passed": self.passed,
        }


def adiabaticity_report(
    spec: PrecessionSpec,
    model: NoiseModel,
    *,
    omega_threshold: float = 0.1,
    bandwidth_threshold: float = 0.2,
    amplitude_threshold: float = 0.2,
) -> AdiabaticityReport:
    """Check the scale separations the perturbative results rely on.

    The drive must be slow (omega/b0 small), the noise slow
    (gamma/b0 small) and weak (sigma/b0 moderate); the default
    thresholds are 0.1, 0.2 and 0.2.  They are calibrated so the
    reference working point (omega/b0 = 0.063, gamma/b0 = 0.1,
    sigma/b0 = 0.05), where the first-order statistics are verified
    against exact evolution, sits inside the passing region.
    """
    for name, value in (
        ("omega_threshold", omega_threshold),
        ("bandwidth_threshold", bandwidth_threshold),
        ("amplitude_threshold", amplitude_threshold),
    ):
        if not (math.isfinite(value) and value > 0.0):
            raise ValueError(f"{name} must be finite and positive, got {value}")
    b0 = spec.b0
    ratios = {
        "omega_over_b0": spec.omega / b0,
        "gamma12_over_b0": model.transverse.gamma / b0,
        "gamma3_over_b0": model.longitudinal.gamma / b0,
        "sigma12_over_b0": model.transverse.sigma / b0,
        "sigma3_over_b0": model.longitudinal.sigma / b0,
    }
    thresholds = {
        "omega_over_b0": omega_threshold,
        "gamma12_over_b0": bandwidth_threshold,
        "gamma3_over_b0": bandwidth_threshold,
        "sigma12_over_b0": amplitude_threshold,
        "sigma3_over_b0": amplitude_threshold,
    }
    flags = {key: ratios[key] <= thresholds[key] for key in ratios}
    return AdiabaticityReport(
        ratios=ratios, flags=flags, thresholds=thresholds, passed=all(flags.values())
    )
