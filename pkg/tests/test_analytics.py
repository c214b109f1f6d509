import math

import numpy as np
import pytest

from berrysim import (
    AccuracyError,
    DegeneracyError,
    NoiseModel,
    NoisePath,
    PrecessionSpec,
    berry_connection_phi,
    berry_phase_variance,
    berry_phase_variance_broadband,
    berry_phase_variance_narrowband,
    constant_weight,
    covariance_by_quadrature,
    dephasing_factor,
    density_matrix_after,
    dynamical_phase_variance,
    dynamical_weight,
    geometric_weight,
    noiseless_berry_phase,
    noncyclic_connection_term,
    phase_covariance,
    phase_moments,
    total_phase_subterms,
    total_phase_variance,
    variance_by_quadrature,
)

SPEC = PrecessionSpec(b0=1.0, theta0=math.pi / 4, t_total=100.0, n_cycles=1)
MODEL = NoiseModel.from_scalars(0.05, 0.1, 0.05, 0.1)

# Frozen reference values for SPEC/MODEL.  Independently reproduced by the
# adaptive double-quadrature oracle in TestQuadratureOracle below.
VAR_GAMMA = 0.0019564677457055337
VAR_DELTA = 3.9646325550588211
COV_GAMMA_DELTA = 0.011893378700306358
VAR_ALPHA = 3.9903757802051389


class TestWeights:
    def test_geometric_weight_components(self):
        w = geometric_weight(SPEC)
        t = np.linspace(0.0, SPEC.t_total, 11)
        values = w(t)
        assert values.shape == (11, 3)
        amp = math.pi / (SPEC.t_total * SPEC.b0)
        c, s = math.cos(SPEC.theta0), math.sin(SPEC.theta0)
        phase = SPEC.omega * t
        assert np.allclose(values[:, 0], -amp * c * s * np.cos(phase), rtol=1e-14)
        assert np.allclose(values[:, 1], -amp * c * s * np.sin(phase), rtol=1e-14)
        assert np.allclose(values[:, 2], amp * s * s, rtol=1e-14)

    def test_dynamical_weight_is_unit_control_direction(self):
        w = dynamical_weight(SPEC)
        t = np.linspace(0.0, SPEC.t_total, 11)
        assert np.allclose(np.linalg.norm(w(t), axis=-1), 1.0, rtol=1e-14)

    def test_domain_validation(self):
        w = geometric_weight(SPEC)
        with pytest.raises(ValueError):
            w(-1.0)
        with pytest.raises(ValueError):
            w(SPEC.t_total * 1.5)

    def test_add_requires_matching_window(self):
        other = PrecessionSpec(b0=1.0, theta0=0.5, t_total=50.0, n_cycles=1)
        with pytest.raises(ValueError):
            geometric_weight(SPEC) + geometric_weight(other)
        combined = geometric_weight(SPEC) + dynamical_weight(SPEC)
        t = np.linspace(0.0, SPEC.t_total, 7)
        assert np.allclose(
            combined(t), geometric_weight(SPEC)(t) + dynamical_weight(SPEC)(t)
        )

    def test_constant_weight(self):
        w = constant_weight(10.0, [1.0, 2.0, 3.0])
        assert np.allclose(w(np.array([0.0, 5.0])), [[1, 2, 3], [1, 2, 3]])
        with pytest.raises(ValueError):
            constant_weight(10.0, [1.0, 2.0])


class TestNoiselessGeometry:
    @pytest.mark.parametrize(
        "theta0,expected",
        [
            (0.0, math.pi),
            (math.pi / 3, math.pi / 2),
            (math.pi / 2, 0.0),
            (math.pi, -math.pi),
        ],
    )
    def test_cone_phase(self, theta0, expected):
        assert noiseless_berry_phase(theta0) == pytest.approx(expected, abs=1e-15)

    def test_connection_value(self):
        assert berry_connection_phi(math.pi / 2) == pytest.approx(0.0)
        assert berry_connection_phi(0.0) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            berry_connection_phi(-0.1)


class TestClosedForms:
    def test_frozen_reference_values(self):
        assert berry_phase_variance(SPEC, MODEL).total == pytest.approx(
            VAR_GAMMA, rel=1e-14
        )
        assert dynamical_phase_variance(SPEC, MODEL).total == pytest.approx(
            VAR_DELTA, rel=1e-14
        )
        assert phase_covariance(SPEC, MODEL).total == pytest.approx(
            COV_GAMMA_DELTA, rel=1e-14
        )
        assert total_phase_variance(SPEC, MODEL).total == pytest.approx(
            VAR_ALPHA, rel=1e-14
        )

    def test_variance_identity(self):
        # var(alpha) = var(gamma) + var(delta) + 2 cov holds exactly
        rng = np.random.default_rng(3)
        for _ in range(25):
            spec = PrecessionSpec(
                b0=float(rng.uniform(0.5, 3.0)),
                theta0=float(rng.uniform(0.0, math.pi)),
                t_total=float(rng.uniform(10.0, 500.0)),
                n_cycles=int(rng.integers(1, 6)),
            )
            model = NoiseModel.from_scalars(
                float(rng.uniform(0.0, 0.2)),
                float(rng.uniform(0.01, 5.0)),
                float(rng.uniform(0.0, 0.2)),
                float(rng.uniform(0.01, 5.0)),
            )
            lhs = total_phase_variance(spec, model).total
            rhs = (
                berry_phase_variance(spec, model).total
                + dynamical_phase_variance(spec, model).total
                + 2.0 * phase_covariance(spec, model).total
            )
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)

    def test_subterms_sum_to_total(self):
        sub = total_phase_subterms(SPEC, MODEL)
        assert sub.geometric.total == pytest.approx(VAR_GAMMA, rel=1e-14)
        assert sub.dynamical.total == pytest.approx(VAR_DELTA, rel=1e-14)
        assert sub.cross.total == pytest.approx(2.0 * COV_GAMMA_DELTA, rel=1e-14)
        assert sub.total == pytest.approx(VAR_ALPHA, rel=1e-14)

    def test_mirror_symmetry_of_cone_angle(self):
        # theta0 -> pi - theta0 preserves both variances, flips the covariance
        spec_lo = PrecessionSpec(b0=1.0, theta0=0.6, t_total=80.0, n_cycles=2)
        spec_hi = PrecessionSpec(b0=1.0, theta0=math.pi - 0.6, t_total=80.0, n_cycles=2)
        assert berry_phase_variance(spec_lo, MODEL).total == pytest.approx(
            berry_phase_variance(spec_hi, MODEL).total, rel=1e-12
        )
        assert dynamical_phase_variance(spec_lo, MODEL).total == pytest.approx(
            dynamical_phase_variance(spec_hi, MODEL).total, rel=1e-12
        )
        assert phase_covariance(spec_lo, MODEL).total == pytest.approx(
            -phase_covariance(spec_hi, MODEL).total, rel=1e-12
        )

    def test_pole_has_no_geometric_variance(self):
        spec = PrecessionSpec(b0=1.0, theta0=0.0, t_total=100.0, n_cycles=1)
        assert berry_phase_variance(spec, MODEL).total == 0.0

    def test_equator_kills_transverse_channel(self):
        # cos(theta0) = 0 removes the transverse term of the geometric variance
        spec = PrecessionSpec(b0=1.0, theta0=math.pi / 2, t_total=100.0, n_cycles=1)
        vb = berry_phase_variance(spec, MODEL)
        assert vb.transverse_term == pytest.approx(0.0, abs=1e-30)
        assert vb.longitudinal_term > 1e-6

    def test_variance_scales_with_sigma_squared(self):
        model2 = NoiseModel.from_scalars(0.10, 0.1, 0.10, 0.1)
        assert berry_phase_variance(SPEC, model2).total == pytest.approx(
            4.0 * VAR_GAMMA, rel=1e-13
        )

    def test_short_correlation_series_branch_is_smooth(self):
        # longitudinal-only variance at theta0 = pi/2 is 2 pi^2 L(gamma, 1)
        # with L = (u + expm1(-u))/gamma^2; crossing the internal series
        # switch near u = 1e-4 must only move the value by the physical
        # slope dL/du ~ -T^2/6, not by a branch jump
        def lb(gamma):
            spec = PrecessionSpec(b0=1.0, theta0=math.pi / 2, t_total=1.0, n_cycles=1)
            model = NoiseModel.from_scalars(0.0, 1.0, 1.0, gamma)
            return berry_phase_variance(spec, model).total

        below, above = lb(0.99e-4), lb(1.01e-4)
        slope_step = 2.0 * math.pi**2 * (1.01e-4 - 0.99e-4) / 6.0
        assert below - above == pytest.approx(slope_step, rel=1e-3)
        # and the exact u -> 0 limit is sigma^2 * w^2 * T^2
        assert lb(1e-12) == pytest.approx(math.pi**2, rel=1e-10)


class TestLimits:
    def test_narrowband_regime(self):
        # gamma*T and gamma/omega both small: slow, long-memory noise
        spec = PrecessionSpec(b0=1.0, theta0=math.pi / 4, t_total=200.0, n_cycles=10)
        model = NoiseModel.from_scalars(0.05, 5e-5, 0.05, 5e-5)
        exact = berry_phase_variance(spec, model).total
        approx = berry_phase_variance_narrowband(spec, model)
        assert approx == pytest.approx(exact, rel=1e-3)

    def test_broadband_regime(self):
        # gamma*T large and gamma >> omega: effectively white noise; the
        # truncation error is O(1/(gamma T)) = 2e-4 here
        spec = PrecessionSpec(b0=1.0, theta0=math.pi / 4, t_total=200.0, n_cycles=1)
        model = NoiseModel.from_scalars(0.05, 25.0, 0.05, 25.0)
        exact = berry_phase_variance(spec, model).total
        approx = berry_phase_variance_broadband(spec, model)
        assert approx == pytest.approx(exact, rel=1e-3)

    def test_broadband_decays_as_one_over_t(self):
        model = NoiseModel.from_scalars(0.05, 5.0, 0.05, 5.0)
        v1 = berry_phase_variance_broadband(
            PrecessionSpec(b0=1.0, theta0=0.7, t_total=100.0, n_cycles=1), model
        )
        v2 = berry_phase_variance_broadband(
            PrecessionSpec(b0=1.0, theta0=0.7, t_total=200.0, n_cycles=1), model
        )
        assert v1 == pytest.approx(2.0 * v2, rel=1e-12)

    def test_narrowband_longitudinal_plateau(self):
        # gamma -> 0: the longitudinal noise freezes into a random constant
        # K3 and the variance saturates at (sigma pi sin^2/b0)^2, independent
        # of T
        model = NoiseModel.from_scalars(0.0, 1.0, 0.05, 1e-9)
        plateau = (0.05 * math.pi * math.sin(0.9) ** 2) ** 2
        for t_total in (100.0, 400.0):
            spec = PrecessionSpec(b0=1.0, theta0=0.9, t_total=t_total, n_cycles=1)
            assert berry_phase_variance_narrowband(spec, model) == pytest.approx(
                plateau, rel=1e-6
            )
            assert berry_phase_variance(spec, model).total == pytest.approx(
                plateau, rel=1e-6
            )


class TestQuadratureOracle:
    """Closed forms vs direct integration of the OU kernel against the weights."""

    def test_variance_matches_closed_form(self):
        est = variance_by_quadrature(geometric_weight(SPEC), MODEL, 4096)
        assert est.error <= 1e-9 * abs(est.value) + 1e-18
        assert est.value == pytest.approx(VAR_GAMMA, rel=1e-10)

    def test_dynamical_variance_matches_closed_form(self):
        est = variance_by_quadrature(dynamical_weight(SPEC), MODEL, 4096)
        assert est.value == pytest.approx(VAR_DELTA, rel=1e-10)

    def test_covariance_matches_closed_form(self):
        est = covariance_by_quadrature(
            geometric_weight(SPEC), dynamical_weight(SPEC), MODEL, 4096
        )
        assert est.value == pytest.approx(COV_GAMMA_DELTA, rel=1e-10)

    def test_covariance_is_symmetric(self):
        a = covariance_by_quadrature(
            geometric_weight(SPEC), dynamical_weight(SPEC), MODEL, 2048
        )
        b = covariance_by_quadrature(
            dynamical_weight(SPEC), geometric_weight(SPEC), MODEL, 2048
        )
        assert a.value == pytest.approx(b.value, rel=1e-12)

    def test_constant_weight_analytic_case(self):
        # w = (0,0,1): variance is 2 sigma3^2 (gamma T + e^{-gamma T} - 1)/gamma^2
        t_total, sigma, gamma = 50.0, 0.3, 0.25
        model = NoiseModel.from_scalars(0.0, 1.0, sigma, gamma)
        est = variance_by_quadrature(constant_weight(t_total, [0, 0, 1]), model, 1024)
        u = gamma * t_total
        expected = 2.0 * sigma**2 * (u + math.expm1(-u)) / gamma**2
        assert est.value == pytest.approx(expected, rel=1e-10)

    def test_zero_noise_short_circuits(self):
        model = NoiseModel.from_scalars(0.0, 1.0, 0.0, 1.0)
        est = variance_by_quadrature(geometric_weight(SPEC), model, 64)
        assert est.value == 0.0
        assert est.error == 0.0

    def test_refinement_reports_node_count(self):
        est = variance_by_quadrature(geometric_weight(SPEC), MODEL, 256)
        assert est.nodes >= 256
        assert est.nodes % 2 == 0 or est.nodes >= 256  # doubled grids

    def test_non_convergence_raises(self):
        with pytest.raises(AccuracyError):
            variance_by_quadrature(
                geometric_weight(SPEC), MODEL, 64, rtol=1e-15, max_nodes=128
            )

    def test_rejects_tiny_grids(self):
        with pytest.raises(ValueError):
            variance_by_quadrature(geometric_weight(SPEC), MODEL, 32)

    def test_rejects_mismatched_windows(self):
        other = PrecessionSpec(b0=1.0, theta0=0.5, t_total=50.0, n_cycles=1)
        with pytest.raises(ValueError):
            covariance_by_quadrature(
                geometric_weight(SPEC), geometric_weight(other), MODEL, 256
            )


class TestDephasing:
    def test_factor_values(self):
        assert dephasing_factor(0.0) == 1.0
        assert dephasing_factor(0.5) == pytest.approx(math.exp(-1.0))
        with pytest.raises(ValueError):
            dephasing_factor(-1e-3)
        with pytest.raises(ValueError):
            dephasing_factor(math.nan)

    def test_density_matrix_structure(self):
        a = 1.0 / math.sqrt(2.0)
        rho = density_matrix_after(a, a, mean_alpha=0.3, var_alpha=0.2)
        assert rho.shape == (2, 2)
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.allclose(rho, rho.conj().T)
        assert abs(rho[0, 1]) == pytest.approx(0.5 * math.exp(-0.4))
        assert np.angle(rho[0, 1]) == pytest.approx(0.6)

    def test_density_matrix_positive_semidefinite(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            raw = rng.standard_normal(4)
            a = complex(raw[0], raw[1])
            b = complex(raw[2], raw[3])
            norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
            rho = density_matrix_after(
                a / norm,
                b / norm,
                mean_alpha=float(rng.uniform(-10, 10)),
                var_alpha=float(rng.uniform(0, 5)),
            )
            eigs = np.linalg.eigvalsh(rho)
            assert eigs.min() >= -1e-12

    def test_density_matrix_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            density_matrix_after(1.0, 1.0, 0.0, 0.0)


class TestPhaseMoments:
    def test_reference_values(self):
        m = phase_moments(SPEC, MODEL)
        assert m.mean_gamma == pytest.approx(math.pi * math.cos(math.pi / 4))
        assert m.mean_delta == pytest.approx(100.0)
        assert m.mean_alpha == pytest.approx(m.mean_gamma + m.mean_delta)
        assert m.var_gamma == pytest.approx(VAR_GAMMA, rel=1e-14)
        assert m.var_delta == pytest.approx(VAR_DELTA, rel=1e-14)
        assert m.cov_gamma_delta == pytest.approx(COV_GAMMA_DELTA, rel=1e-14)
        assert m.var_alpha == pytest.approx(VAR_ALPHA, rel=1e-14)


class TestNoncyclicTerm:
    def _path_with_endpoints(self, k0, k1, n_steps=4):
        times = np.linspace(0.0, SPEC.t_total, n_steps + 1)
        samples = np.zeros((n_steps + 1, 3))
        samples[0] = k0
        samples[-1] = k1
        return NoisePath(times=times, samples=samples)

    def test_zero_for_matching_endpoints(self):
        path = self._path_with_endpoints([0.01, 0.02, 0.0], [0.01, 0.02, 0.0])
        assert noncyclic_connection_term(SPEC, path) == pytest.approx(0.0, abs=1e-15)

    def test_small_azimuth_kick(self):
        # a pure +y kick at the endpoint rotates the final azimuth by
        # approximately ky / (b0 sin(theta0))
        ky = 1e-4
        path = self._path_with_endpoints([0.0, 0.0, 0.0], [0.0, ky, 0.0])
        expected = berry_connection_phi(SPEC.theta0) * ky / (
            SPEC.b0 * math.sin(SPEC.theta0)
        )
        assert noncyclic_connection_term(SPEC, path) == pytest.approx(expected, rel=1e-3)

    def test_pole_raises(self):
        spec = PrecessionSpec(b0=1.0, theta0=0.0, t_total=100.0, n_cycles=1)
        times = np.linspace(0.0, 100.0, 5)
        path = NoisePath(times=times, samples=np.zeros((5, 3)))
        with pytest.raises(DegeneracyError):
            noncyclic_connection_term(spec, path)
