"""Exact two-level evolution and geometric-phase extraction.

The spin evolves under H(t) = (1/2) B_T(t) . sigma with B_T the sum of
the control field and a sampled noise path.  Each step applies the exact
propagator of the field frozen at the step midpoint,

    U = cos(|b| dt / 2) I - i sin(|b| dt / 2) (b_hat . sigma),

so the only discretization error is the O(dt**2) commutator remainder.

Phase conventions
-----------------
``total_phase`` is the accumulated (unwrapped) phase of the overlap with
the initial state.  ``dynamical_phase`` integrates the adiabatic branch
eigenvalue, -/+ (1/2) integral |B_T| dt for the upper/lower branch.
Their difference still carries the half-turn of the spinor per winding
of the field azimuth, so the reported ``geometric_phase`` is

    wrap(total_phase - dynamical_phase + pi * winding)

folded to (-pi, pi], where ``winding`` counts full turns of the
transverse total field.  For a clean loop at cone angle theta0 this
reproduces pi*cos(theta0) per turn, and 0 when the field sits on the z
axis and never winds.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ResolutionError
from .field import PrecessionSpec, SphericalAngles, control_field, polar_angles
from .noise import NoisePath

__all__ = [
    "SpinState",
    "IntegratorConfig",
    "PhaseExtraction",
    "TrajectoryTrace",
    "eigenstate_up",
    "eigenstate_down",
    "bloch_vector",
    "propagate_step",
    "evolve_and_extract",
    "connection_phase_discrete",
]

_TINY_FIELD = 1e-300


def _wrap_pm_pi(x: float) -> float:
    """Fold an angle to (-pi, pi]."""
    w = math.remainder(x, math.tau)
    if w <= -math.pi:
        w += math.tau
    return w


@dataclass(frozen=True)
class SpinState:
    """A pure spin-1/2 state with amplitudes on the z basis."""

    amp_up: complex
    amp_down: complex

    @property
    def norm(self) -> float:
        return math.sqrt(abs(self.amp_up) ** 2 + abs(self.amp_down) ** 2)

    def normalized(self) -> "SpinState":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize the zero state")
        return SpinState(self.amp_up / n, self.amp_down / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.amp_up, self.amp_down], dtype=complex)


def eigenstate_up(angles: SphericalAngles) -> SpinState:
    """Upper eigenstate of b_hat . sigma in the half-angle gauge."""
    half = 0.5 * angles.theta
    return SpinState(
        cmath.exp(-0.5j * angles.phi) * math.cos(half),
        cmath.exp(0.5j * angles.phi) * math.sin(half),
    )


def eigenstate_down(angles: SphericalAngles) -> SpinState:
    """Lower eigenstate, orthogonal to :func:`eigenstate_up`."""
    half = 0.5 * angles.theta
    return SpinState(
        cmath.exp(-0.5j * angles.phi) * math.sin(half),
        -cmath.exp(0.5j * angles.phi) * math.cos(half),
    )


def _eigenvector_chain(theta: np.ndarray, phi: np.ndarray, branch: str) -> np.ndarray:
    """Stack of branch eigenvectors for arrays of angles, shape (n, 2).

    ``phi`` may be unwrapped; the half-angle gauge is continuous in it.
    """
    half = 0.5 * np.asarray(theta, dtype=float)
    ephi = np.exp(-0.5j * np.asarray(phi, dtype=float))
    if branch == "up":
        return np.stack([ephi * np.cos(half), np.conj(ephi) * np.sin(half)], axis=-1)
    return np.stack([ephi * np.sin(half), -np.conj(ephi) * np.cos(half)], axis=-1)


def bloch_vector(state: SpinState) -> np.ndarray:
    """Expectation values of the Pauli operators."""
    u = complex(state.amp_up)
    d = complex(state.amp_down)
    if abs(u) == 0.0 and abs(d) == 0.0:
        raise ValueError("the zero state has no Bloch vector")
    cross = u.conjugate() * d
    return np.array(
        [2.0 * cross.real, 2.0 * cross.imag, abs(u) ** 2 - abs(d) ** 2]
    )


def propagate_step(state: SpinState, b_total: np.ndarray, dt: float) -> SpinState:
    """Apply the exact propagator of a constant field over one step."""
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and positive, got {dt}")
    bx, by, bz = (float(v) for v in np.asarray(b_total, dtype=float))
    nb = math.sqrt(bx * bx + by * by + bz * bz)
    if nb < _TINY_FIELD:
        return state
    half = 0.5 * nb * dt
    co = math.cos(half)
    si = math.sin(half) / nb
    u = complex(state.amp_up)
    d = complex(state.amp_down)
    p = bz * u + (bx - 1j * by) * d
    q = (bx + 1j * by) * u - bz * d
    return SpinState(co * u - 1j * si * p, co * d - 1j * si * q)


@dataclass(frozen=True)
class IntegratorConfig:
    """Resolution and diagnostics thresholds for the evolution loop."""

    steps_per_cycle: int = 4096
    leakage_warn_threshold: float = 1e-3

    def __post_init__(self) -> None:
        if not isinstance(self.steps_per_cycle, (int, np.integer)) or self.steps_per_cycle < 16:
            raise ValueError(
                f"steps_per_cycle must be an integer >= 16, got {self.steps_per_cycle}"
            )
        if not (
            math.isfinite(self.leakage_warn_threshold)
            and self.leakage_warn_threshold > 0.0
        ):
            raise ValueError("leakage_warn_threshold must be finite and positive")
        object.__setattr__(self, "steps_per_cycle", int(self.steps_per_cycle))


@dataclass(frozen=True)
class PhaseExtraction:
    """Phases and diagnostics extracted from one evolution.

    ``geometric_phase`` is folded to (-pi, pi] as described in the module
    docstring; ``geometric_phase_raw`` is the unfolded difference
    ``total_phase - dynamical_phase``.  ``mean_energy_integral`` is the
    integral of <psi|H|psi>, kept as a diagnostic; it differs from the
    eigenvalue integral at second order in the non-adiabaticity.
    """

    total_phase: float
    dynamical_phase: float
    geometric_phase: float
    leakage: float
    field_modulus_integral: float
    mean_energy_integral: float
    winding: int
    degenerate_steps: int
    non_adiabatic: bool
    branch: str

    @property
    def geometric_phase_raw(self) -> float:
        return self.total_phase - self.dynamical_phase


@dataclass(frozen=True)
class TrajectoryTrace:
    """Per-node amplitudes, instantaneous energy and accumulated phases."""

    times: np.ndarray
    amp_up: np.ndarray
    amp_down: np.ndarray
    energy: np.ndarray
    total_phase: np.ndarray
    dynamical_phase: np.ndarray


def _winding_number(b_nodes: np.ndarray) -> tuple[int, np.ndarray]:
    """Turns of the transverse field, from the unwrapped node azimuths.

    Adding 0.0 squashes IEEE negative zeros, which would otherwise make
    atan2 report +/-pi on an identically zero transverse component.
    """
    azimuth = np.unwrap(np.arctan2(b_nodes[:, 1] + 0.0, b_nodes[:, 0] + 0.0))
    return int(round((azimuth[-1] - azimuth[0]) / math.tau)), azimuth


def _check_path_grid(path: NoisePath, spec: PrecessionSpec, n_steps: int) -> None:
    if path.n_steps != n_steps:
        raise ValueError(
            f"path has {path.n_steps} steps but the integrator needs {n_steps}; "
            "sample the path on the integration grid"
        )
    tol = 1e-9 * max(1.0, spec.t_total)
    if abs(path.times[0]) > tol or abs(path.times[-1] - spec.t_total) > tol:
        raise ValueError("path grid must span [0, t_total]")


def evolve_and_extract(
    spec: PrecessionSpec,
    path: NoisePath | None = None,
    config: IntegratorConfig | None = None,
    *,
    branch: str = "up",
    return_trace: bool = False,
) -> PhaseExtraction | tuple[PhaseExtraction, TrajectoryTrace]:
    """Evolve from the initial branch eigenstate and extract the phases.

    The state starts in the chosen eigenstate of the total field at t=0
    (control plus the first noise sample).  ``path``, when given, must be
    sampled on the integration grid: ``steps_per_cycle * n_cycles`` steps
    spanning ``[0, t_total]``.  Noise is averaged over step endpoints,
    the control field is evaluated at step midpoints.
    """
    if branch not in ("up", "down"):
        raise ValueError(f"branch must be 'up' or 'down', got {branch!r}")
    config = config if config is not None else IntegratorConfig()
    n_steps = config.steps_per_cycle * spec.n_cycles
    dt = spec.t_total / n_steps
    if spec.b0 * dt >= 0.25 * math.pi:
        raise ResolutionError(
            f"b0*dt = {spec.b0 * dt:.3g} exceeds pi/4; increase steps_per_cycle"
        )
    times = np.arange(n_steps + 1) * dt
    if path is None:
        k_nodes = np.zeros((n_steps + 1, 3))
    else:
        _check_path_grid(path, spec, n_steps)
        k_nodes = path.samples
    b_nodes = control_field(spec, np.minimum(times, spec.t_total)) + k_nodes
    winding, _ = _winding_number(b_nodes)

    t_mid = (np.arange(n_steps) + 0.5) * dt
    b_mid = control_field(spec, t_mid) + 0.5 * (k_nodes[:-1] + k_nodes[1:])
    nb = np.linalg.norm(b_mid, axis=1)
    degenerate_steps = int(np.count_nonzero(nb < _TINY_FIELD))
    half = 0.5 * nb * dt
    cos_half = np.cos(half)
    sin_scaled = np.where(nb >= _TINY_FIELD, np.sin(half) / np.maximum(nb, _TINY_FIELD), 0.0)
    field_modulus_integral = float(nb.sum() * dt)

    sign = 1.0 if branch == "up" else -1.0
    start = polar_angles(b_nodes[0])
    state0 = eigenstate_up(start) if branch == "up" else eigenstate_down(start)
    u = complex(state0.amp_up)
    d = complex(state0.amp_down)
    u0c = u.conjugate()
    d0c = d.conjugate()

    bxs = b_mid[:, 0].tolist()
    bys = b_mid[:, 1].tolist()
    bzs = b_mid[:, 2].tolist()
    cos_list = cos_half.tolist()
    sin_list = sin_scaled.tolist()

    total = 0.0
    mean_energy = 0.0
    f_prev = complex(1.0)
    if return_trace:
        trace_u = [u]
        trace_d = [d]
        trace_total = [0.0]
    for k in range(n_steps):
        bx = bxs[k]
        by = bys[k]
        bz = bzs[k]
        p = bz * u + (bx - 1j * by) * d
        q = (bx + 1j * by) * u - bz * d
        mean_energy += (u.conjugate() * p + d.conjugate() * q).real
        co = cos_list[k]
        si = sin_list[k]
        u = co * u - 1j * si * p
        d = co * d - 1j * si * q
        f = u0c * u + d0c * d
        total += cmath.phase(f * f_prev.conjugate())
        f_prev = f
        if return_trace:
            trace_u.append(u)
            trace_d.append(d)
            trace_total.append(total)
    mean_energy *= 0.5 * dt

    end = polar_angles(b_nodes[-1])
    ref = eigenstate_up(end) if branch == "up" else eigenstate_down(end)
    overlap = ref.amp_up.conjugate() * u + ref.amp_down.conjugate() * d
    leakage = max(0.0, 1.0 - abs(overlap) ** 2)

    dynamical = -sign * 0.5 * field_modulus_integral
    extraction = PhaseExtraction(
        total_phase=total,
        dynamical_phase=dynamical,
        geometric_phase=_wrap_pm_pi(total - dynamical + math.pi * winding),
        leakage=leakage,
        field_modulus_integral=field_modulus_integral,
        mean_energy_integral=mean_energy,
        winding=winding,
        degenerate_steps=degenerate_steps,
        non_adiabatic=leakage > config.leakage_warn_threshold,
        branch=branch,
    )
    if not return_trace:
        return extraction
    amp_up = np.array(trace_u, dtype=complex)
    amp_down = np.array(trace_d, dtype=complex)
    cross = np.conj(amp_up) * amp_down
    sx = 2.0 * cross.real
    sy = 2.0 * cross.imag
    sz = np.abs(amp_up) ** 2 - np.abs(amp_down) ** 2
    energy = 0.5 * (b_nodes[:, 0] * sx + b_nodes[:, 1] * sy + b_nodes[:, 2] * sz)
    dyn_prefix = np.concatenate([[0.0], -sign * 0.5 * np.cumsum(nb * dt)])
    trace = TrajectoryTrace(
        times=times,
        amp_up=amp_up,
        amp_down=amp_down,
        energy=energy,
        total_phase=np.array(trace_total),
        dynamical_phase=dyn_prefix,
    )
    return extraction, trace


def connection_phase_discrete(
    spec: PrecessionSpec,
    path: NoisePath | None = None,
    n_points: int | None = None,
    *,
    branch: str = "up",
) -> float:
    """Geometric phase from a discrete eigenstate chain.

    Builds branch eigenstates along the (noisy) field direction, forms
    the Pancharatnam product of successive overlaps and closes the chain
    onto the starting eigenstate continued through the field's winding.
    This never integrates the dynamical phase, so it cross-checks the
    evolution-based extraction through an independent route.  The result
    is folded into (-pi, pi], matching :func:`evolve_and_extract`.

    ``n_points`` defaults to the path resolution (or 64 per cycle for the
    noiseless chain) and must divide the path step count.  Raises
    :class:`ResolutionError` when a chain link or the closing overlap is
    too small to resolve the phase.
    """
    if branch not in ("up", "down"):
        raise ValueError(f"branch must be 'up' or 'down', got {branch!r}")
    if path is None:
        if n_points is None:
            n_points = max(256, 64 * spec.n_cycles)
        _check_n_points(n_points)
        full_times = np.linspace(0.0, spec.t_total, int(n_points) + 1)
        b_full = control_field(spec, full_times)
        idx = np.arange(int(n_points) + 1)
    else:
        if n_points is None:
            n_points = path.n_steps
        _check_n_points(n_points)
        if path.n_steps % int(n_points):
            raise ValueError(
                f"n_points = {n_points} must divide the path step count {path.n_steps}"
            )
        _check_path_grid(path, spec, path.n_steps)
        b_full = control_field(spec, np.minimum(path.times, spec.t_total)) + path.samples
        idx = np.arange(0, path.n_steps + 1, path.n_steps // int(n_points))

    r_full = np.linalg.norm(b_full, axis=1)
    if np.any(r_full < _TINY_FIELD):
        raise DegeneracyError("total field vanishes along the path")
    winding, azimuth = _winding_number(b_full)

    b_chain = b_full[idx]
    r_chain = r_full[idx]
    theta = np.arccos(np.clip(b_chain[:, 2] / r_chain, -1.0, 1.0))
    phi = azimuth[idx]
    vecs = _eigenvector_chain(theta, phi, branch)
    links = np.sum(np.conj(vecs[:-1]) * vecs[1:], axis=1)
    if np.min(np.abs(links)) < 0.5:
        raise ResolutionError(
            "chain link overlap below 0.5; increase n_points to resolve the path"
        )
    closing_ref = _eigenvector_chain(
        theta[:1], phi[:1] + math.tau * winding, branch
    )[0]
    closing = np.sum(np.conj(vecs[-1]) * closing_ref)
    if abs(closing) < 0.5:
        raise ResolutionError(
            "closing overlap below 0.5; endpoint strays too far from the start"
        )
    return _wrap_pm_pi(float(-(np.sum(np.angle(links)) + np.angle(closing))))


def _check_n_points(n_points) -> None:
    if not isinstance(n_points, (int, np.integer)) or n_points < 64:
        raise ValueError(f"n_points must be an integer >= 64, got {n_points}")
