"""
Tests for the reference values: Mittag-Leffler, scalar relaxation and brute-force fractional Laplacian
"""
import math

import numpy as np
import pytest
from scipy.special import erfcx

from numerics.errors import DomainError, OracleConvergenceError
from numerics.oracle import (
    brute_force_frac_laplacian, bump_laplacian, constant_forcing_solution, eigen_reference,
    eigen_reference_solution, mittag_leffler, relaxation_kernel,
)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 4.0, 50.0])
def test_half_order_mittag_leffler_is_erfcx(x):
    assert mittag_leffler(0.5, -x) == pytest.approx(float(erfcx(x)), rel=1e-6)


def test_mittag_leffler_asymptotic_regime():
    x = 1e7
    assert mittag_leffler(0.5, -x) == pytest.approx(float(erfcx(x)), rel=1e-10)


def test_mittag_leffler_special_cases():
    assert mittag_leffler(1.0, -2.5) == pytest.approx(math.exp(-2.5), rel=1e-15)
    assert mittag_leffler(0.5, 0.0, beta=2.0) == pytest.approx(1.0)
    # E_{1,2}(z) = (e^z - 1) / z
    assert mittag_leffler(1.0, 0.7, beta=2.0) == pytest.approx(math.expm1(0.7) / 0.7, rel=1e-12)


def test_mittag_leffler_domain():
    with pytest.raises(DomainError):
        mittag_leffler(1.5, -1.0)
    with pytest.raises(DomainError):
        mittag_leffler(0.5, 5e6)
    with pytest.raises(DomainError):
        relaxation_kernel(0.5, 1.0, 0.0)


def test_eigen_reference_matches_closed_form():
    times = [0.25, 0.5, 1.0]
    by_quadrature = eigen_reference(0.5, 2.0, lambda t: 1.0, times)
    closed = constant_forcing_solution(0.5, 2.0, 1.0, np.array(times))
    np.testing.assert_allclose(by_quadrature, closed, rtol=1e-7)


def test_eigen_reference_initial_value_decays():
    y = eigen_reference(0.7, 1.0, lambda t: 0.0, [0.0, 1.0, 4.0], y0=1.0)
    assert y[0] == 1.0
    assert 1.0 > y[1] > y[2] > 0.0


def test_bump_closed_form():
    # (-Delta)^{1/2} (1 - x^2)_+^{1/2} = 1 on the unit interval
    assert bump_laplacian(1, 0.5) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("s", [0.3, 0.5])
def test_bruteforce_bump_in_one_dimension(s):
    def bump(y):
        return max(1.0 - float(y[0]) ** 2, 0.0) ** s
    value = brute_force_frac_laplacian(bump, 0.0, s, radius=50.0, breakpoints=(1.0,))
    assert value == pytest.approx(bump_laplacian(1, s), rel=1e-4)


@pytest.mark.slow
def test_bruteforce_bump_in_two_dimensions():
    s = 0.5

    def bump(y):
        return max(1.0 - float(np.dot(y, y)), 0.0) ** s
    value = brute_force_frac_laplacian(bump, [0.0, 0.0], s, radius=20.0, breakpoints=(1.0,), tol=1e-6)
    assert value == pytest.approx(bump_laplacian(2, s), rel=1e-3)


def test_bruteforce_without_levels_raises():
    with pytest.raises(OracleConvergenceError):
        brute_force_frac_laplacian(lambda y: math.exp(-float(y[0]) ** 2), 0.0, 0.5, levels=1)


def test_bruteforce_domain():
    with pytest.raises(DomainError):
        brute_force_frac_laplacian(lambda y: 0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        brute_force_frac_laplacian(lambda y: 0.0, [0.0, 0.0, 0.0], 0.5)


def test_modal_reference_solution():
    matrix = np.array([[3.0, -1.0], [-1.0, 3.0]])
    times = np.array([0.0, 0.5, 1.0])
    mode = np.array([1.0, 1.0]) / np.sqrt(2.0)
    u = eigen_reference_solution(matrix, mode, times, 0.5)
    expected = np.outer(mode, constant_forcing_solution(0.5, 2.0, 1.0, times))
    np.testing.assert_allclose(u, expected, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(eigen_reference_solution(matrix, np.zeros(2), times, 0.5), 0.0)
    by_quadrature = eigen_reference_solution(matrix, mode, times, 0.5, forcing=lambda t: 1.0)
    np.testing.assert_allclose(by_quadrature, expected, rtol=1e-7, atol=1e-12)


def test_modal_reference_rejects_nonsymmetric_matrices():
    with pytest.raises(DomainError):
        eigen_reference_solution(np.array([[2.0, 1.0], [0.0, 2.0]]), np.ones(2), [1.0], 0.5)
