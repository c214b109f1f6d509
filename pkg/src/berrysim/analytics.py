"""Closed-form phase statistics and an independent quadrature oracle.

First-order response of the cyclic phases to weak field noise
--------------------------------------------------------------
Over one schedule the upper adiabatic branch accumulates a geometric
phase ``pi*cos(theta0)`` per turn (folded to a single turn, see
:mod:`berrysim.evolve`) and the field-modulus integral ``b0*t_total``.
Weak noise K(t) perturbs both.  To first order the deviations are
linear functionals

    d_gamma = integral w_gamma(t) . K(t) dt
    d_delta = integral w_delta(t) . K(t) dt

with weights (s = sin(theta0), c = cos(theta0), B = b0, T = t_total)

    w_gamma(t) = (pi / (T*B)) * (-c*s*cos(omega t), -c*s*sin(omega t), s**2)
    w_delta(t) = (s*cos(omega t), s*sin(omega t), c)

``delta`` here is the accumulated field-modulus integral, which equals
the relative dynamical phase between the two adiabatic branches;
``alpha = gamma + delta`` is the combined phase whose variance controls
dephasing through ``exp(-2*var(alpha))``.

For stationary OU noise the variances of these Gaussian functionals
close in terms of two brackets (u = gamma*T, valid when the drive
closes, omega*T = 2*pi*n_cycles):

    J(gamma, omega, T) = gamma*T/(gamma**2 + omega**2)
                         + expm1(-gamma*T) * (gamma**2 - omega**2)
                           / (gamma**2 + omega**2)**2
    L(gamma, T)        = (gamma*T + expm1(-gamma*T)) / gamma**2

The quadrature routines integrate the same double integrals directly
from the weights and the OU kernel, with no reference to the closed
forms, and serve as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import lfilter

from .errors import AccuracyError, DegeneracyError
from .field import PrecessionSpec, control_field
from .noise import NoiseModel, NoisePath

__all__ = [
    "WeightFunction",
    "geometric_weight",
    "dynamical_weight",
    "constant_weight",
    "berry_connection_phi",
    "noiseless_berry_phase",
    "VarianceBreakdown",
    "berry_phase_variance",
    "dynamical_phase_variance",
    "phase_covariance",
    "total_phase_variance",
    "PhaseVarianceSubterms",
    "total_phase_subterms",
    "berry_phase_variance_narrowband",
    "berry_phase_variance_broadband",
    "QuadratureEstimate",
    "variance_by_quadrature",
    "covariance_by_quadrature",
    "dephasing_factor",
    "density_matrix_after",
    "PhaseMoments",
    "phase_moments",
    "noncyclic_connection_term",
]


# --------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightFunction:
    """A vector-valued weight w(t) on [0, t_total].

    ``components`` maps an array of times to an array of shape
    ``t.shape + (3,)``.  Weights are first-class values so the closed
    forms, the quadrature oracle and the Monte Carlo pipeline all
    consume the same object.
    """

    t_total: float
    components: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_total) and self.t_total > 0.0):
            raise ValueError(f"t_total must be finite and positive, got {self.t_total}")

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        tol = 1e-9 * max(1.0, self.t_total)
        if np.any(t < -tol) or np.any(t > self.t_total + tol):
            raise ValueError(f"t must lie within [0, {self.t_total}]")
        return np.asarray(self.components(t), dtype=float)

    def __add__(self, other: "WeightFunction") -> "WeightFunction":
        if not isinstance(other, WeightFunction):
            return NotImplemented
        if not math.isclose(self.t_total, other.t_total, rel_tol=1e-12):
            raise ValueError("cannot add weights with different domains")
        first, second = self.components, other.components
        label = f"{self.label}+{other.label}" if self.label and other.label else ""
        return WeightFunction(
            t_total=self.t_total,
            components=lambda t: np.asarray(first(t)) + np.asarray(second(t)),
            label=label,
        )


def geometric_weight(spec: PrecessionSpec) -> WeightFunction:
    """First-order response weight of the geometric phase."""
    s = math.sin(spec.theta0)
    c = math.cos(spec.theta0)
    amp = math.pi / (spec.t_total * spec.b0)
    omega = spec.omega

    def components(t: np.ndarray) -> np.ndarray:
        phase = omega * t
        return np.stack(
            [
                -amp * c * s * np.cos(phase),
                -amp * c * s * np.sin(phase),
                np.full_like(phase, amp * s * s),
            ],
            axis=-1,
        )

    return WeightFunction(t_total=spec.t_total, components=components, label="geometric")


def dynamical_weight(spec: PrecessionSpec) -> WeightFunction:
    """First-order response weight of the field-modulus integral.

    This is the unit direction of the control field, since
    d|B + K| = B_hat . dK at K = 0.
    """
    s = math.sin(spec.theta0)
    c = math.cos(spec.theta0)
    omega = spec.omega

    def components(t: np.ndarray) -> np.ndarray:
        phase = omega * t
        return np.stack(
            [s * np.cos(phase), s * np.sin(phase), np.full_like(phase, c)], axis=-1
        )

    return WeightFunction(t_total=spec.t_total, components=components, label="dynamical")


def constant_weight(t_total: float, vector) -> WeightFunction:
    """A time-independent weight, mostly useful for testing the oracle."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"vector must be a 3-vector, got shape {v.shape}")
    return WeightFunction(
        t_total=t_total,
        components=lambda t: np.broadcast_to(v, np.shape(t) + (3,)).copy(),
        label="constant",
    )


# --------------------------------------------------------------------------
# noiseless geometry


def berry_connection_phi(theta: float | np.ndarray) -> float | np.ndarray:
    """Azimuthal connection component of the upper branch, cos(theta)/2."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > math.pi):
        raise ValueError("theta must lie in [0, pi]")
    out = 0.5 * np.cos(theta)
    return float(out) if out.ndim == 0 else out


def noiseless_berry_phase(theta0: float) -> float:
    """Geometric phase per turn of the upper branch, pi*cos(theta0)."""
    if not (math.isfinite(theta0) and 0.0 <= theta0 <= math.pi):
        raise ValueError(f"theta0 must lie in [0, pi], got {theta0}")
    return math.pi * math.cos(theta0)


# --------------------------------------------------------------------------
# closed-form variances


def _transverse_bracket(gamma: float, omega: float, t_total: float) -> float:
    """J bracket of the transverse pair; exact when omega*t_total = 2*pi*n."""
    denom = gamma * gamma + omega * omega
    return (
        gamma * t_total / denom
        + math.expm1(-gamma * t_total) * (gamma * gamma - omega * omega) / denom**2
    )


def _longitudinal_bracket(gamma: float, t_total: float) -> float:
    """L bracket of the longitudinal component, (u + expm1(-u))/gamma**2."""
    u = gamma * t_total
    if u < 1e-4:
        # Series of (u + expm1(-u))/u**2; the direct form cancels badly here.
        poly = 0.5 - u / 6.0 + u * u / 24.0 - u**3 / 120.0
        return t_total * t_total * poly
    return (u + math.expm1(-u)) / (gamma * gamma)


@dataclass(frozen=True)
class VarianceBreakdown:
    """A variance split into transverse and longitudinal noise contributions."""

    transverse_term: float
    longitudinal_term: float

    @property
    def total(self) -> float:
        return self.transverse_term + self.longitudinal_term


def _angle_factors(spec: PrecessionSpec) -> tuple[float, float, float, float]:
    s = math.sin(spec.theta0)
    c = math.cos(spec.theta0)
    # Transverse / longitudinal amplitudes of the geometric weight.
    a = math.pi * c * s / (spec.t_total * spec.b0)
    b = math.pi * s * s / (spec.t_total * spec.b0)
    return s, c, a, b


def berry_phase_variance(spec: PrecessionSpec, model: NoiseModel) -> VarianceBreakdown:
    """Closed-form variance of the first-order geometric-phase deviation."""
    _, _, a, b = _angle_factors(spec)
    tr = model.transverse
    lo = model.longitudinal
    j = _transverse_bracket(tr.gamma, spec.omega, spec.t_total)
    ell = _longitudinal_bracket(lo.gamma, spec.t_total)
    return VarianceBreakdown(
        transverse_term=2.0 * tr.sigma**2 * a * a * j,
        longitudinal_term=2.0 * lo.sigma**2 * b * b * ell,
    )


def dynamical_phase_variance(spec: PrecessionSpec, model: NoiseModel) -> VarianceBreakdown:
    """Closed-form variance of the first-order field-modulus deviation."""
    s, c, _, _ = _angle_factors(spec)
    tr = model.transverse
    lo = model.longitudinal
    j = _transverse_bracket(tr.gamma, spec.omega, spec.t_total)
    ell = _longitudinal_bracket(lo.gamma, spec.t_total)
    return VarianceBreakdown(
        transverse_term=2.0 * tr.sigma**2 * s * s * j,
        longitudinal_term=2.0 * lo.sigma**2 * c * c * ell,
    )


def phase_covariance(spec: PrecessionSpec, model: NoiseModel) -> VarianceBreakdown:
    """Closed-form covariance between the two first-order deviations.

    The transverse part is negative whenever cos(theta0) > 0: a noise
    kick that raises the field modulus tilts the cone so as to lower
    the subtended solid angle.
    """
    s, c, a, b = _angle_factors(spec)
    tr = model.transverse
    lo = model.longitudinal
    j = _transverse_bracket(tr.gamma, spec.omega, spec.t_total)
    ell = _longitudinal_bracket(lo.gamma, spec.t_total)
    return VarianceBreakdown(
        transverse_term=-2.0 * tr.sigma**2 * a * s * j,
        longitudinal_term=2.0 * lo.sigma**2 * b * c * ell,
    )


def total_phase_variance(spec: PrecessionSpec, model: NoiseModel) -> VarianceBreakdown:
    """Closed-form variance of the combined deviation alpha = gamma + delta."""
    s, c, _, _ = _angle_factors(spec)
    b0 = spec.b0
    t_total = spec.t_total
    tr = model.transverse
    lo = model.longitudinal
    j = _transverse_bracket(tr.gamma, spec.omega, t_total)
    ell = _longitudinal_bracket(lo.gamma, t_total)
    trans_amp = b0 * s - math.pi * c * s / t_total
    long_amp = math.pi * s * s / t_total + b0 * c
    return VarianceBreakdown(
        transverse_term=2.0 * (tr.sigma / b0) ** 2 * trans_amp**2 * j,
        longitudinal_term=2.0 * (lo.sigma / b0) ** 2 * long_amp**2 * ell,
    )


@dataclass(frozen=True)
class PhaseVarianceSubterms:
    """var(alpha) split by origin: geometric, dynamical and cross terms.

    ``geometric`` equals the geometric-phase variance, ``dynamical`` the
    field-modulus variance and ``cross`` twice their covariance, so that
    ``geometric.total + dynamical.total + cross.total`` reproduces
    ``total_phase_variance(...).total``.
    """

    geometric: VarianceBreakdown
    dynamical: VarianceBreakdown
    cross: VarianceBreakdown

    @property
    def total(self) -> float:
        return self.geometric.total + self.dynamical.total + self.cross.total


def total_phase_subterms(spec: PrecessionSpec, model: NoiseModel) -> PhaseVarianceSubterms:
    cov = phase_covariance(spec, model)
    return PhaseVarianceSubterms(
        geometric=berry_phase_variance(spec, model),
        dynamical=dynamical_phase_variance(spec, model),
        cross=VarianceBreakdown(
            transverse_term=2.0 * cov.transverse_term,
            longitudinal_term=2.0 * cov.longitudinal_term,
        ),
    )


def berry_phase_variance_narrowband(spec: PrecessionSpec, model: NoiseModel) -> float:
    """Slow-noise limit of the geometric-phase variance.

    Valid when both bandwidths are small against the drive,
    gamma12 << omega and gamma3*t_total << 1.  The transverse part grows
    linearly with gamma12*t_total; the longitudinal part saturates at
    half the squared weight amplitude.
    """
    s, c, _, _ = _angle_factors(spec)
    b0 = spec.b0
    t_total = spec.t_total
    tr = model.transverse
    lo = model.longitudinal
    omega_t = spec.omega * t_total
    trans = (
        4.0
        * tr.sigma**2
        * (math.pi * c * s / b0) ** 2
        * tr.gamma
        * t_total
        / omega_t**2
    )
    longi = (
        2.0
        * lo.sigma**2
        * (math.pi * s * s / b0) ** 2
        * (0.5 - lo.gamma * t_total / 6.0)
    )
    return trans + longi


def berry_phase_variance_broadband(spec: PrecessionSpec, model: NoiseModel) -> float:
    """Fast-noise limit of the geometric-phase variance.

    Valid when both bandwidths dominate, gamma12 >> omega and
    gamma*t_total >> 1.  Both contributions fall off as
    1/(gamma*t_total): rapid fluctuations self-average over the loop.
    """
    s, c, _, _ = _angle_factors(spec)
    b0 = spec.b0
    t_total = spec.t_total
    tr = model.transverse
    lo = model.longitudinal
    trans = 2.0 * tr.sigma**2 * (math.pi * c * s / b0) ** 2 / (tr.gamma * t_total)
    longi = 2.0 * lo.sigma**2 * (math.pi * s * s / b0) ** 2 / (lo.gamma * t_total)
    return trans + longi


# --------------------------------------------------------------------------
# quadrature oracle


class QuadratureEstimate(NamedTuple):
    """Converged quadrature value with an error estimate and node count."""

    value: float
    error: float
    nodes: int


def _filtered_kernel(w: np.ndarray, gamma: float, h: float) -> np.ndarray:
    """y[k] = integral_0^{t_k} w(t') exp(-gamma*(t_k - t')) dt'.

    Exact for piecewise-linear w, so the only discretization error in the
    outer integral is the O(h**2) trapezoid remainder.
    """
    u = gamma * h
    i0 = -math.expm1(-u) / gamma
    if u < 1e-4:
        i1 = h * (0.5 - u / 6.0 + u * u / 24.0 - u**3 / 120.0)
    else:
        i1 = (u + math.expm1(-u)) / (u * gamma)
    decay = math.exp(-u)
    out, _ = lfilter(
        [i1, i0 - i1], [1.0, -decay], w, zi=np.array([-i1 * w[0]])
    )
    return out


def _quadrature_pass(
    weight_a: WeightFunction,
    weight_b: WeightFunction,
    model: NoiseModel,
    n_nodes: int,
) -> float:
    t_total = weight_a.t_total
    t = np.linspace(0.0, t_total, n_nodes + 1)
    h = t_total / n_nodes
    wa = weight_a(t)
    wb = wa if weight_b is weight_a else weight_b(t)
    total = 0.0
    for i in range(3):
        params = model.params_for(i)
        if params.sigma == 0.0:
            continue
        yb = _filtered_kernel(wb[:, i], params.gamma, h)
        if weight_b is weight_a:
            total += 2.0 * params.sigma**2 * np.trapezoid(wa[:, i] * yb, dx=h)
        else:
            ya = _filtered_kernel(wa[:, i], params.gamma, h)
            total += params.sigma**2 * (
                np.trapezoid(wa[:, i] * yb, dx=h) + np.trapezoid(wb[:, i] * ya, dx=h)
            )
    return float(total)


def covariance_by_quadrature(
    weight_a: WeightFunction,
    weight_b: WeightFunction,
    model: NoiseModel,
    n_nodes: int = 4096,
    *,
    rtol: float = 1e-9,
    atol: float = 0.0,
    max_nodes: int = 2**21,
) -> QuadratureEstimate:
    """Covariance of two first-order functionals by direct quadrature.

    Evaluates the OU double integral with the exact exponential kernel
    between nodes and Richardson-extrapolates over grid doublings until
    the step-doubling error estimate meets ``rtol``/``atol``.  Choose
    ``n_nodes`` to resolve the fastest weight oscillation (at least ~32
    nodes per drive cycle); raises :class:`AccuracyError` when the
    tolerance is not reached by ``max_nodes``.
    """
    if not isinstance(n_nodes, (int, np.integer)) or n_nodes < 64:
        raise ValueError(f"n_nodes must be an integer >= 64, got {n_nodes}")
    if not math.isclose(weight_a.t_total, weight_b.t_total, rel_tol=1e-12):
        raise ValueError("weights must share the same domain")
    if max_nodes < 2 * n_nodes:
        raise ValueError("max_nodes must allow at least one grid doubling")
    n = int(n_nodes)
    prev = _quadrature_pass(weight_a, weight_b, model, n)
    while 2 * n <= max_nodes:
        n *= 2
        cur = _quadrature_pass(weight_a, weight_b, model, n)
        err = abs(cur - prev) / 3.0
        extrap = cur + (cur - prev) / 3.0
        if err <= rtol * abs(extrap) + atol:
            return QuadratureEstimate(value=extrap, error=err, nodes=n)
        prev = cur
    raise AccuracyError(
        f"quadrature did not reach rtol={rtol} within {max_nodes} nodes "
        f"(last error estimate {err:.3e})"
    )


def variance_by_quadrature(
    weight: WeightFunction,
    model: NoiseModel,
    n_nodes: int = 4096,
    *,
    rtol: float = 1e-9,
    atol: float = 0.0,
    max_nodes: int = 2**21,
) -> QuadratureEstimate:
    """Variance of one first-order functional by direct quadrature."""
    return covariance_by_quadrature(
        weight, weight, model, n_nodes, rtol=rtol, atol=atol, max_nodes=max_nodes
    )


# --------------------------------------------------------------------------
# dephasing


def dephasing_factor(var_alpha: float) -> float:
    """Ensemble coherence magnitude exp(-2*var(alpha)) for Gaussian alpha."""
    if not (math.isfinite(var_alpha) and var_alpha >= 0.0):
        raise ValueError(f"var_alpha must be finite and nonnegative, got {var_alpha}")
    return math.exp(-2.0 * var_alpha)


def density_matrix_after(
    amp_up: complex, amp_down: complex, mean_alpha: float, var_alpha: float
) -> np.ndarray:
    """Ensemble-averaged density matrix after one noisy schedule.

    The initial superposition ``amp_up |up> + amp_down |down>`` picks up
    a relative phase 2*alpha between the branches; averaging the Gaussian
    alpha damps the coherence by ``exp(-2*var_alpha)`` and rotates it by
    ``2*mean_alpha``.  Populations are untouched at this order.
    """
    a = complex(amp_up)
    b = complex(amp_down)
    norm = abs(a) ** 2 + abs(b) ** 2
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"amplitudes must be normalized, got |a|^2 + |b|^2 = {norm}")
    if not (math.isfinite(mean_alpha) and math.isfinite(var_alpha)) or var_alpha < 0.0:
        raise ValueError("mean_alpha must be finite and var_alpha nonnegative")
    coherence = a * b.conjugate() * np.exp(2.0j * mean_alpha - 2.0 * var_alpha)
    return np.array(
        [[abs(a) ** 2, coherence], [coherence.conjugate(), abs(b) ** 2]],
        dtype=complex,
    )


@dataclass(frozen=True)
class PhaseMoments:
    """First and second moments of the three phase-like quantities.

    Means are the noiseless values: ``pi*cos(theta0)`` for the geometric
    phase, ``b0*t_total`` for the field-modulus integral, and their sum
    for alpha.  Variances and the covariance come from the closed forms
    and satisfy var_alpha = var_gamma + var_delta + 2*cov exactly.
    """

    mean_gamma: float
    var_gamma: float
    mean_delta: float
    var_delta: float
    cov_gamma_delta: float
    mean_alpha: float
    var_alpha: float


def phase_moments(spec: PrecessionSpec, model: NoiseModel) -> PhaseMoments:
    mean_gamma = noiseless_berry_phase(spec.theta0)
    mean_delta = spec.b0 * spec.t_total
    return PhaseMoments(
        mean_gamma=mean_gamma,
        var_gamma=berry_phase_variance(spec, model).total,
        mean_delta=mean_delta,
        var_delta=dynamical_phase_variance(spec, model).total,
        cov_gamma_delta=phase_covariance(spec, model).total,
        mean_alpha=mean_gamma + mean_delta,
        var_alpha=total_phase_variance(spec, model).total,
    )


# --------------------------------------------------------------------------
# diagnostics


def noncyclic_connection_term(spec: PrecessionSpec, path: NoisePath) -> float:
    """Size of the boundary term dropped by the cyclic approximation.

    The first-order result treats the noisy loop as closed.  The actual
    total field ends at an azimuth shifted by the final noise sample, and
    the neglected connection contribution is A_phi(theta0) times the
    difference of the azimuth deviations at the two endpoints.
    """
    if math.sin(spec.theta0) < 1e-12:
        raise DegeneracyError("control field on the z axis has no reference azimuth")
    deviations = []
    for t, k in ((path.times[0], path.samples[0]), (path.times[-1], path.samples[-1])):
        b = control_field(spec, float(t))
        total = b + k
        d = math.atan2(total[1], total[0]) - math.atan2(b[1], b[0])
        deviations.append(math.remainder(d, 2.0 * math.pi))
    return berry_connection_phi(spec.theta0) * (deviations[1] - deviations[0])
