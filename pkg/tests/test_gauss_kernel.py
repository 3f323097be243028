"""Closed-form Gaussian averages against independent quadrature."""

import math

import numpy as np
import pytest

from concept_drift_dynamics.modules.gauss_kernel import (
    GaussianSpec,
    activation,
    activation_prime,
    check_activation,
    curvature_average,
    heaviside_moment,
    pair_average,
    prime_pair_average,
    quad_expect,
    std_normal_cdf,
    std_normal_pdf,
    triple_average,
)
from concept_drift_dynamics.utils.errors import ConfigError, DegenerateIndicatorError, DomainError
from oracles import erf_unit, erf_unit_prime, erf_unit_second, hermite_expect, pair_quad, relu, relu_prime, sample_expect

PHI_0 = 1.0 / math.sqrt(2.0 * math.pi)

COV3 = np.array(
    [
        [1.0, 0.3, 0.2],
        [0.3, 0.8, -0.1],
        [0.2, -0.1, 0.6],
    ]
)


class TestScalarFunctions:
    """Normal distribution helpers and transfer functions."""

    def test_cdf_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-15)
        assert std_normal_cdf(math.inf) == 1.0
        assert std_normal_cdf(-math.inf) == 0.0

    def test_cdf_rejects_nan(self):
        with pytest.raises(DomainError):
            std_normal_cdf(float("nan"))

    def test_pdf_at_origin(self):
        assert std_normal_pdf(0.0) == pytest.approx(PHI_0, abs=1e-16)

    def test_erf_activation(self):
        assert activation("erf", 1.0) == pytest.approx(0.6826894921370859, abs=1e-15)
        assert activation("erf", 0.0) == 0.0
        assert activation_prime("erf", 0.0) == pytest.approx(math.sqrt(2.0 / math.pi))

    def test_relu_activation(self):
        np.testing.assert_array_equal(activation("relu", np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(activation_prime("relu", np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 1.0])

    def test_unknown_activation(self):
        with pytest.raises(ConfigError):
            check_activation("tanh")
        with pytest.raises(ConfigError):
            activation("tanh", 0.0)


class TestGaussianSpec:
    """Validation of mean/covariance pairs."""

    def test_rejects_five_dimensions(self):
        with pytest.raises(DomainError):
            GaussianSpec(np.zeros(5), np.eye(5))

    def test_rejects_asymmetric_covariance(self):
        with pytest.raises(DomainError):
            GaussianSpec([0.0, 0.0], [[1.0, 0.2], [0.1, 1.0]])

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(DomainError):
            GaussianSpec([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_is_immutable(self):
        spec = GaussianSpec([0.0], [[1.0]])
        with pytest.raises(AttributeError):
            spec.mean = np.ones(1)
        with pytest.raises(ValueError):
            spec.cov[0, 0] = 2.0

    def test_accepts_rank_deficient_covariance(self):
        spec = GaussianSpec([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])
        root = spec.sqrt_cov()
        np.testing.assert_allclose(root @ root, spec.cov, atol=1e-12)


class TestPairAverages:
    """Pair averages against 2-d adaptive quadrature."""

    def test_erf_pair_matches_quadrature(self):
        expected = pair_quad(erf_unit, erf_unit, 1.0, 0.3, 0.8)
        assert pair_average("erf", 1.0, 0.3, 0.8) == pytest.approx(expected, abs=1e-7)

    def test_relu_pair_matches_quadrature(self):
        expected = pair_quad(relu, relu, 1.2, -0.4, 0.7)
        assert pair_average("relu", 1.2, -0.4, 0.7) == pytest.approx(expected, abs=1e-6)

    def test_relu_pair_exact_values(self):
        # <relu(u)^2> = c/2 and <relu(u) relu(v)> = 1/(2 pi) for independent unit variances
        assert pair_average("relu", 1.0, 1.0, 1.0) == pytest.approx(0.5, abs=1e-15)
        assert pair_average("relu", 1.0, 0.0, 1.0) == pytest.approx(1.0 / (2.0 * math.pi), abs=1e-15)

    def test_relu_pair_degenerate_variance_is_zero(self):
        assert pair_average("relu", 0.0, 0.0, 1.0) == 0.0

    def test_erf_prime_pair_matches_quadrature(self):
        expected = pair_quad(erf_unit_prime, erf_unit_prime, 0.7, 0.25, 1.1)
        assert prime_pair_average("erf", 0.7, 0.25, 1.1) == pytest.approx(expected, abs=1e-8)

    def test_relu_prime_pair_orthant_probability(self):
        assert prime_pair_average("relu", 1.0, 0.0, 2.0) == pytest.approx(0.25, abs=1e-15)
        assert prime_pair_average("relu", 2.0, 2.0, 2.0) == pytest.approx(0.5, abs=1e-12)
        assert prime_pair_average("relu", 1.0, -1.0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_erf_curvature_matches_quadrature(self):
        expected = pair_quad(erf_unit_second, erf_unit, 0.9, 0.35, 1.3)
        assert curvature_average("erf", 0.9, 0.35, 1.3) == pytest.approx(expected, abs=1e-8)

    def test_relu_curvature_independent_pair(self):
        assert curvature_average("relu", 1.0, 0.0, 1.0) == pytest.approx(1.0 / (2.0 * math.pi), abs=1e-15)

    def test_vectorised_arguments(self):
        c11 = np.array([1.0, 0.5])
        c12 = np.array([0.2, -0.1])
        c22 = np.array([0.8, 0.9])
        values = pair_average("erf", c11, c12, c22)
        assert values.shape == (2,)
        assert values[1] == pytest.approx(pair_average("erf", 0.5, -0.1, 0.9), abs=1e-15)

    @pytest.mark.parametrize("kind", ["erf", "relu"])
    def test_rejects_inconsistent_pair(self, kind):
        with pytest.raises(DomainError):
            pair_average(kind, 1.0, 1.5, 1.0)

    def test_default_boundary_is_strict(self):
        with pytest.raises(DomainError):
            pair_average("erf", 1.0, 1.0 + 1e-6, 1.0)

    def test_erf_tolerates_round_off_beyond_boundary(self):
        value = pair_average("erf", 1.0, 1.0 + 1e-6, 1.0, tolerance=1e-5)
        assert value == pytest.approx((2.0 / math.pi) * math.asin(0.5), abs=1e-6)

    def test_relu_projects_onto_boundary_within_tolerance(self):
        # a perfectly correlated pair: both units active together half of the time
        assert prime_pair_average("relu", 1.0, 1.0 + 1e-7, 1.0, tolerance=1e-5) == pytest.approx(0.5, abs=1e-12)
        assert curvature_average("relu", 1.0, -1.0 - 1e-7, 1.0, tolerance=1e-5) == 0.0
        assert pair_average("relu", 1.0, 1.0 + 1e-7, 1.0, tolerance=1e-5) == pytest.approx(0.5, abs=1e-12)

    def test_negative_tolerance(self):
        with pytest.raises(DomainError):
            pair_average("erf", 1.0, 0.0, 1.0, tolerance=-1.0)

    def test_relu_derivative_averages_need_positive_variance(self):
        with pytest.raises(DomainError):
            prime_pair_average("relu", 0.0, 0.0, 1.0)


class TestTripleAverage:
    """<g'(z_u) z_v g(z_w)> via Gaussian integration by parts."""

    @pytest.mark.parametrize("u, v, w", [(0, 1, 2), (0, 0, 0), (1, 2, 1), (2, 0, 1)])
    def test_erf_matches_hermite(self, u, v, w):
        expected = hermite_expect(lambda p: erf_unit_prime(p[:, u]) * p[:, v] * erf_unit(p[:, w]), np.zeros(3), COV3, order=40)
        assert triple_average("erf", COV3, u, v, w) == pytest.approx(expected, abs=1e-8)

    def test_relu_matches_sampling(self):
        expected = sample_expect(lambda p: relu_prime(p[:, 0]) * p[:, 1] * relu(p[:, 2]), np.zeros(3), COV3)
        assert triple_average("relu", COV3, 0, 1, 2) == pytest.approx(expected, abs=8e-3)

    def test_index_arrays(self):
        u, v, w = np.array([0, 1]), np.array([1, 2]), np.array([2, 0])
        values = triple_average("erf", COV3, u, v, w)
        for k in range(2):
            assert values[k] == pytest.approx(triple_average("erf", COV3, int(u[k]), int(v[k]), int(w[k])), abs=1e-15)


class TestHeavisideMoment:
    """<(a.z + a0) Theta(b.z + b0)>."""

    def test_half_normal_mean(self):
        spec = GaussianSpec([0.0], [[1.0]])
        assert heaviside_moment(0.0, [1.0], 0.0, [1.0], spec) == pytest.approx(PHI_0, abs=1e-15)

    def test_probability_of_half_space(self):
        spec = GaussianSpec([0.0], [[1.0]])
        assert heaviside_moment(1.0, [0.0], 1.0, [1.0], spec) == pytest.approx(0.8413447460685429, abs=1e-15)

    def test_matches_split_quadrature(self):
        mean = np.array([0.2, -0.1, 0.5])
        spec = GaussianSpec(mean, COV3)
        a, a0 = np.array([1.0, -0.5, 0.3]), 0.1
        b, b0 = np.array([0.5, 1.0, -0.2]), 0.3
        expected = quad_expect(lambda p: p @ a + a0, spec, order=40, indicator=(b0, b))
        assert heaviside_moment(a0, a, b0, b, spec) == pytest.approx(expected, abs=1e-10)

    def test_matches_sampling(self):
        mean = np.array([0.2, -0.1, 0.5])
        a, b = np.array([1.0, -0.5, 0.3]), np.array([0.5, 1.0, -0.2])
        expected = sample_expect(lambda p: (p @ a + 0.1) * (p @ b + 0.3 > 0.0), mean, COV3)
        assert heaviside_moment(0.1, a, 0.3, b, GaussianSpec(mean, COV3)) == pytest.approx(expected, abs=8e-3)

    def test_matrix_of_coefficients(self):
        spec = GaussianSpec([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]])
        rows = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        offsets = np.array([1.0, 0.0, 0.0])
        values = heaviside_moment(offsets, rows, 0.0, np.array([1.0, 0.0]), spec)
        assert values[0] == pytest.approx(0.5)
        assert values[1] == pytest.approx(PHI_0)
        assert values[2] == pytest.approx(0.5 * PHI_0)

    def test_degenerate_indicator(self):
        spec = GaussianSpec([0.0, 0.0], np.eye(2))
        with pytest.raises(DegenerateIndicatorError):
            heaviside_moment(0.0, [1.0, 0.0], 1.0, [0.0, 0.0], spec)


class TestQuadExpect:
    """Gauss-Hermite rule used as an oracle elsewhere."""

    def test_second_moments_are_exact(self):
        cov = np.array([[1.0, 0.3], [0.3, 2.0]])
        spec = GaussianSpec([0.5, -1.0], cov)
        assert quad_expect(lambda p: p[:, 0] * p[:, 1], spec, order=10) == pytest.approx(0.3 - 0.5, abs=1e-12)
        assert quad_expect(lambda p: p[:, 1] ** 2, spec, order=10) == pytest.approx(3.0, abs=1e-12)

    def test_half_line_probability(self):
        spec = GaussianSpec([0.0], [[1.0]])
        value = quad_expect(lambda p: np.ones(len(p)), spec, indicator=(1.0, np.array([1.0])))
        assert value == pytest.approx(0.8413447460685429, abs=1e-12)

    def test_rejects_low_order(self):
        with pytest.raises(DomainError):
            quad_expect(lambda p: np.ones(len(p)), GaussianSpec([0.0], [[1.0]]), order=1)
