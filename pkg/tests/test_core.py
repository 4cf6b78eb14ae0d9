"""
Tests for causal_var.core.

Tests cover:
- VarModel and StructuralVarModel validation
- companion_matrix layout and check_stability
- ma_coefficients recursion and the long-run identity
- process_mean, stationary_covariance and svar_to_var
"""

import math

import numpy as np
import pytest

from causal_var import (
    DomainError,
    ModelValidationError,
    StructuralVarModel,
    VarModel,
    check_stability,
    companion_matrix,
    long_run_matrix,
    long_run_report,
    ma_coefficients,
    process_mean,
    stationary_covariance,
    svar_to_var,
)

from .helpers import random_stable_model

PENDULUM_B = math.sqrt(2.0) * np.array([[0.0, 0.5], [-0.5, 1.0]])


class TestVarModelValidation:
    """Tests for the VarModel invariants."""

    def test_scalar_builder(self):
        """VarModel.scalar should build a 1-d AR(p) with the given coefficients."""
        model = VarModel.scalar(0.2, 0.3, intercept=1.0, variance=2.0)
        assert model.dim == 1
        assert model.lag == 2
        assert model.coeffs[:, 0, 0].tolist() == [0.2, 0.3]
        assert model.intercept.tolist() == [1.0]
        assert model.noise_cov.tolist() == [[2.0]]

    def test_two_dimensional_coeffs_mean_lag_one(self):
        """A single d x d matrix should be accepted as a VAR(1)."""
        model = VarModel(np.zeros(2), np.eye(2) * 0.5, np.eye(2))
        assert model.lag == 1

    def test_arrays_are_read_only(self):
        """Stored arrays should not be writable."""
        model = VarModel.scalar(0.5)
        with pytest.raises(ValueError):
            model.coeffs[0, 0, 0] = 1.0

    def test_rejects_asymmetric_noise(self):
        """A non-symmetric noise covariance should be rejected."""
        with pytest.raises(ModelValidationError, match="symmetric"):
            VarModel(np.zeros(2), np.zeros((1, 2, 2)), np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_rejects_indefinite_noise(self):
        """A noise covariance with a negative eigenvalue should be rejected."""
        with pytest.raises(ModelValidationError, match="semidefinite"):
            VarModel(np.zeros(2), np.zeros((1, 2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_mismatched_coeffs(self):
        """Coefficient matrices must be d x d."""
        with pytest.raises(ModelValidationError, match="coeffs"):
            VarModel(np.zeros(2), np.zeros((1, 3, 3)), np.eye(2))

    def test_rejects_non_finite_values(self):
        """NaN coefficients should be rejected."""
        with pytest.raises(ModelValidationError, match="non-finite"):
            VarModel(np.zeros(1), np.array([[[np.nan]]]), np.eye(1))

    def test_rejects_wrong_label_count(self):
        """Labels must match the dimension."""
        with pytest.raises(ModelValidationError, match="labels"):
            VarModel(np.zeros(2), np.zeros((1, 2, 2)), np.eye(2), labels=("a",))

    def test_component_names_default(self):
        """Unlabelled models should name their components x0, x1, ..."""
        assert VarModel(np.zeros(2), np.zeros((1, 2, 2)), np.eye(2)).component_names() == ("x0", "x1")


class TestStructuralVarModel:
    """Tests for the StructuralVarModel invariants."""

    def test_cyclic_instantaneous_effects_rejected(self):
        """A 2-cycle of instantaneous effects has no triangular ordering."""
        with pytest.raises(DomainError, match="cyclic"):
            StructuralVarModel(
                intercept=np.zeros(2),
                instantaneous=np.array([[0.0, 0.5], [0.5, 0.0]]),
                lag_coeffs=np.zeros((1, 2, 2)),
                noise_cov=np.eye(2),
            )

    def test_nonzero_diagonal_rejected(self):
        """Instantaneous self-effects are not allowed."""
        with pytest.raises(ModelValidationError, match="diagonal"):
            StructuralVarModel(np.zeros(2), np.eye(2), np.zeros((1, 2, 2)), np.eye(2))

    def test_non_diagonal_noise_rejected(self):
        """Structural shocks must be uncorrelated."""
        with pytest.raises(ModelValidationError, match="diagonal"):
            StructuralVarModel(np.zeros(2), np.zeros((2, 2)), np.zeros((1, 2, 2)), np.ones((2, 2)))

    def test_causal_order_respects_instantaneous_edges(self, german_structural):
        """Every instantaneous cause should precede its effect."""
        order = german_structural.causal_order()
        position = {node: k for k, node in enumerate(order)}
        for cause, effect in zip(*np.nonzero(german_structural.instantaneous)):
            assert position[cause] < position[effect]


class TestCompanionMatrix:
    """Tests for companion_matrix."""

    def test_scalar_lag_one(self):
        """For p = 1 the companion matrix is B_1."""
        assert companion_matrix(VarModel.scalar(0.5)).tolist() == [[0.5]]

    def test_pendulum_is_its_own_companion(self, pendulum):
        """The pendulum VAR(1) companion matrix equals its coefficient matrix."""
        np.testing.assert_allclose(companion_matrix(pendulum), PENDULUM_B, atol=1e-15)

    def test_scalar_lag_two_layout(self):
        """d=1, p=2 should give [[b1, b2], [1, 0]]."""
        assert companion_matrix(VarModel.scalar(0.2, 0.3)).tolist() == [[0.2, 0.3], [1.0, 0.0]]

    def test_block_layout(self, german):
        """Top block row holds the coefficients, identity blocks sit below."""
        companion = companion_matrix(german)
        d = german.dim
        assert companion.shape == (d * 4, d * 4)
        np.testing.assert_array_equal(companion[:d, d : 2 * d], german.coeffs[1])
        np.testing.assert_array_equal(companion[d:, :-d], np.eye(d * 3))
        np.testing.assert_array_equal(companion[d:, -d:], np.zeros((d * 3, d)))


class TestCheckStability:
    """Tests for check_stability."""

    def test_pendulum_radius(self, pendulum):
        """Both pendulum companion moduli equal 1/sqrt(2)."""
        report = check_stability(pendulum)
        assert report.is_stable
        assert report.spectral_radius == pytest.approx(1 / math.sqrt(2), abs=1e-9)
        assert report.root_moduli == pytest.approx([1 / math.sqrt(2)] * 2, abs=1e-7)

    def test_zero_coefficients(self):
        """No dynamics means spectral radius 0."""
        report = check_stability(VarModel(np.zeros(3), np.zeros((2, 3, 3)), np.eye(3)))
        assert report.is_stable
        assert report.spectral_radius == 0.0

    def test_unit_root(self):
        """B_1 = I is not stable."""
        report = check_stability(VarModel(np.zeros(2), np.eye(2), np.eye(2)))
        assert not report.is_stable
        assert report.spectral_radius == pytest.approx(1.0)

    def test_margin_is_respected(self):
        """A radius inside (1 - margin, 1) counts as unstable."""
        model = VarModel.scalar(0.99)
        assert check_stability(model).is_stable
        assert not check_stability(model, margin=0.05).is_stable

    def test_negative_margin_rejected(self):
        """The margin must be nonnegative."""
        with pytest.raises(DomainError):
            check_stability(VarModel.scalar(0.5), margin=-1.0)

    def test_transpose_invariance(self, rng):
        """Transposing every B_k leaves the companion spectrum unchanged."""
        for _ in range(10):
            model = random_stable_model(rng, 4, 3, radius=rng.uniform(0.2, 1.2))
            transposed = model.replace(coeffs=np.transpose(model.coeffs, (0, 2, 1)))
            assert check_stability(transposed).spectral_radius == pytest.approx(
                check_stability(model).spectral_radius, rel=1e-8
            )

    def test_moduli_are_reciprocal_polynomial_roots(self, rng):
        """Companion moduli times the determinantal-root moduli equal 1 for scalar models."""
        for p in (1, 2, 3):
            b = rng.uniform(-0.5, 0.5, size=p)
            report = check_stability(VarModel.scalar(*b))
            # roots of 1 - b1 z - ... - bp z^p, highest power first
            roots = np.roots(np.concatenate([-b[::-1], [1.0]]))
            products = np.sort(report.root_moduli) * np.sort(np.abs(roots))[::-1]
            np.testing.assert_allclose(products, 1.0, atol=1e-8)


class TestMaCoefficients:
    """Tests for ma_coefficients."""

    def test_scalar_geometric_powers(self):
        """An AR(1) with a = 0.5 has Phi_i = 0.5 ** i."""
        phis = ma_coefficients(VarModel.scalar(0.5), 3).phis
        assert phis[:, 0, 0].tolist() == [1.0, 0.5, 0.25, 0.125]

    def test_second_lag_only(self):
        """With B_1 = 0 and B_2 = C, odd Phi vanish and Phi_4 = C @ C."""
        c = np.array([[0.3, 0.1], [-0.2, 0.4]])
        model = VarModel(np.zeros(2), np.stack([np.zeros((2, 2)), c]), np.eye(2))
        phis = ma_coefficients(model, 4).phis
        np.testing.assert_array_equal(phis[1], np.zeros((2, 2)))
        np.testing.assert_array_equal(phis[2], c)
        np.testing.assert_array_equal(phis[3], np.zeros((2, 2)))
        np.testing.assert_allclose(phis[4], c @ c, atol=1e-15)

    def test_pendulum_second_power(self, pendulum):
        """For a VAR(1), Phi_2 = B @ B."""
        phis = ma_coefficients(pendulum, 2).phis
        np.testing.assert_allclose(phis[2], pendulum.coeffs[0] @ pendulum.coeffs[0], atol=1e-14)

    def test_first_matrix_is_identity(self, german):
        """Phi_0 is always the identity."""
        np.testing.assert_array_equal(ma_coefficients(german, 0).phis[0], np.eye(7))

    def test_cumulative_sums(self):
        """cumulative() returns running sums of the Phi matrices."""
        cumulative = ma_coefficients(VarModel.scalar(0.5), 2).cumulative()
        assert cumulative[:, 0, 0].tolist() == [1.0, 1.5, 1.75]

    def test_negative_horizon_rejected(self):
        with pytest.raises(DomainError):
            ma_coefficients(VarModel.scalar(0.5), -1)


class TestLongRun:
    """Tests for long_run_matrix, process_mean and stationary_covariance."""

    def test_scalar(self):
        """1 / (1 - a) for a scalar AR(1)."""
        assert long_run_matrix(VarModel.scalar(0.5)).tolist() == [[2.0]]

    def test_pendulum_direct_inverse(self, pendulum):
        """Matches a direct 2x2 inversion with determinant 1.5 - sqrt(2)."""
        lhs = np.eye(2) - PENDULUM_B
        assert np.linalg.det(lhs) == pytest.approx(1.5 - math.sqrt(2), abs=1e-12)
        np.testing.assert_allclose(long_run_matrix(pendulum), np.linalg.inv(lhs), atol=1e-10)

    def test_truncated_series_identity(self, rng):
        """(I - sum B)^{-1} equals sum_{l <= H} Phi_l with H = 50 / (1 - rho)."""
        for _ in range(100):
            model = random_stable_model(rng, int(rng.integers(1, 7)), int(rng.integers(1, 5)), rng.uniform(0.1, 0.9))
            radius = check_stability(model).spectral_radius
            horizon = int(math.ceil(50 / (1 - radius)))
            truncated = ma_coefficients(model, horizon).phis.sum(axis=0)
            assert np.linalg.norm(long_run_matrix(model) - truncated) < 1e-6

    def test_unstable_model_rejected(self):
        """The long-run matrix is undefined for unstable models."""
        with pytest.raises(DomainError, match="long-run matrix undefined"):
            long_run_matrix(VarModel.scalar(1.0))

    def test_report_flags_ill_conditioning(self):
        """A near-unit root beyond the condition limit is flagged, not rejected."""
        model = VarModel(np.zeros(2), np.diag([0.999, 0.0]), np.eye(2))
        report = long_run_report(model, condition_limit=10.0)
        assert report.ill_conditioned
        assert report.condition_number == pytest.approx(1000.0)
        assert report.matrix[0, 0] == pytest.approx(1000.0)

    def test_process_mean(self):
        """mu = Phi(1) nu."""
        assert process_mean(VarModel.scalar(0.5, intercept=1.0)).tolist() == [2.0]
        assert process_mean(VarModel(np.zeros(2), np.eye(2) * 0.3, np.eye(2))).tolist() == [0.0, 0.0]

    def test_stationary_covariance_scalar(self):
        """Var(X) = sigma^2 / (1 - a^2) for an AR(1)."""
        assert stationary_covariance(VarModel.scalar(0.5))[0, 0] == pytest.approx(4.0 / 3.0)

    def test_stationary_covariance_solves_lyapunov(self, pendulum):
        """Gamma_0 = B Gamma_0 B' + Sigma_u for a VAR(1)."""
        gamma = stationary_covariance(pendulum)
        b = pendulum.coeffs[0]
        np.testing.assert_allclose(gamma, b @ gamma @ b.T + pendulum.noise_cov, atol=1e-12)


class TestSvarToVar:
    """Tests for svar_to_var."""

    def test_no_instantaneous_effects_transposes(self):
        """With C = 0 the reduced form is the transposed structural form."""
        lag = np.array([[0.2, 0.4], [0.0, 0.5]])
        svar = StructuralVarModel(np.array([1.0, 2.0]), np.zeros((2, 2)), lag[np.newaxis], np.diag([1.0, 2.0]))
        model = svar_to_var(svar)
        np.testing.assert_array_equal(model.coeffs[0], lag.T)
        np.testing.assert_array_equal(model.intercept, [1.0, 2.0])
        np.testing.assert_array_equal(model.noise_cov, np.diag([1.0, 2.0]))

    def test_single_instantaneous_effect_noise(self):
        """c_{0->1} = 0.5 with unit shocks gives [[1, 0.5], [0.5, 1.25]]."""
        instantaneous = np.array([[0.0, 0.5], [0.0, 0.0]])
        svar = StructuralVarModel(np.zeros(2), instantaneous, np.zeros((1, 2, 2)), np.eye(2))
        np.testing.assert_allclose(svar_to_var(svar).noise_cov, [[1.0, 0.5], [0.5, 1.25]], atol=1e-15)

    def test_german_reduced_form_is_stable(self, german):
        """The German reduced form is a stable VAR(4) over 7 components."""
        assert german.dim == 7
        assert german.lag == 4
        assert check_stability(german).is_stable
        assert german.labels[0] == "Expertise"
        assert german.labels[6] == "CreditScore"
