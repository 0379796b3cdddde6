"""
Tests for the time-fractional operators
"""
import numpy as np
import pytest

from models.time_mesh import ConvScheme, TimeMesh, TimeSignal
from numerics.errors import DomainError
from numerics.special import gamma
from numerics.timefrac import (
    caputo_derivative, caputo_derivative_right, caputo_matrix, caputo_weights, convexity_gap, ibp_residual,
    observed_rate, phi_kernel, rl_derivative_left, rl_integral_matrix, rl_integral_weights,
    rl_derivative_matrix, rl_derivative_right, rl_integral_left, rl_integral_right, semigroup_residual,
)
from stages.verify_stage import convexity_signals

ORDERS = [0.3, 0.5, 0.7]
SWEEP = (16, 32, 64)


def test_mesh_rejects_bad_orders():
    with pytest.raises(DomainError):
        TimeMesh(T=1.0, N_t=16, alpha=1.0)
    with pytest.raises(DomainError):
        TimeMesh(T=1.0, N_t=1, alpha=0.5)
    with pytest.raises(DomainError):
        TimeMesh(T=-1.0, N_t=16, alpha=0.5)


def test_phi_kernel_domain():
    assert phi_kernel(0.5, 1.0) == pytest.approx(1.0 / np.sqrt(np.pi))
    with pytest.raises(DomainError):
        phi_kernel(0.5, 0.0)


@pytest.mark.parametrize("alpha", ORDERS)
def test_caputo_of_constant_is_exactly_zero(alpha):
    mesh = TimeMesh(T=2.0, N_t=40, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: 3.7 + 0.0 * t)
    assert np.all(caputo_derivative(u, alpha).values == 0.0)


@pytest.mark.parametrize("alpha", ORDERS)
def test_caputo_matrix_rows_sum_to_zero(alpha):
    mesh = TimeMesh(T=1.0, N_t=32, alpha=alpha)
    mat = caputo_matrix(mesh, alpha)
    assert np.max(np.abs(mat.sum(axis=1))) <= 1e-10 * np.max(np.abs(mat))


@pytest.mark.parametrize("alpha", ORDERS)
def test_caputo_exact_on_linear_signals(alpha):
    mesh = TimeMesh(T=1.0, N_t=32, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: 1.0 + 2.0 * t)
    t = mesh.nodes[1:]
    exact = 2.0 * t ** (1.0 - alpha) / gamma(2.0 - alpha)
    np.testing.assert_allclose(caputo_derivative(u, alpha).values[1:], exact, rtol=1e-11)


@pytest.mark.parametrize("alpha", ORDERS)
def test_caputo_of_power_function(alpha):
    mesh = TimeMesh(T=1.0, N_t=64, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: t ** alpha)
    late = mesh.nodes >= 0.25
    values = caputo_derivative(u, alpha).values[late]
    exact = gamma(1.0 + alpha)
    assert np.max(np.abs(values - exact)) / exact <= 5e-2


@pytest.mark.parametrize("alpha", ORDERS)
def test_rl_integral_exact_on_linear_signals(alpha):
    mesh = TimeMesh(T=1.5, N_t=24, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: 1.0 + 3.0 * t)
    t = mesh.nodes
    exact = t ** alpha / gamma(1.0 + alpha) + 3.0 * t ** (1.0 + alpha) / gamma(2.0 + alpha)
    np.testing.assert_allclose(rl_integral_left(u, alpha).values, exact, rtol=1e-11, atol=1e-14)


def test_right_integral_is_reflection():
    mesh = TimeMesh(T=1.0, N_t=20, alpha=0.4)
    ones = TimeSignal.from_function(mesh, lambda t: 1.0 + 0.0 * t)
    exact = (mesh.T - mesh.nodes) ** 0.4 / gamma(1.4)
    np.testing.assert_allclose(rl_integral_right(ones, 0.4).values, exact, rtol=1e-11, atol=1e-14)


def test_rl_derivative_of_constant():
    alpha = 0.5
    mesh = TimeMesh(T=1.0, N_t=16, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: 2.0 + 0.0 * t)
    t = mesh.nodes[1:]
    exact = 2.0 * t ** (-alpha) / gamma(1.0 - alpha)
    np.testing.assert_allclose(rl_derivative_left(u, alpha).values[1:], exact, rtol=1e-12)


def test_right_rl_derivative_of_constant():
    alpha = 0.3
    mesh = TimeMesh(T=1.0, N_t=16, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: 2.0 + 0.0 * t)
    t = mesh.nodes[:-1]
    exact = 2.0 * (mesh.T - t) ** (-alpha) / gamma(1.0 - alpha)
    np.testing.assert_allclose(rl_derivative_right(u, alpha).values[:-1], exact, rtol=1e-12)


def test_rl_derivative_matrix_consistency():
    alpha = 0.5
    mesh = TimeMesh(T=1.0, N_t=64, alpha=alpha)
    t = mesh.nodes
    approx = rl_derivative_matrix(mesh, alpha) @ t
    exact = t ** (1.0 - alpha) / gamma(2.0 - alpha)
    late = t >= 0.25
    assert np.max(np.abs(approx[late] - exact[late]) / exact[late]) <= 5e-2


@pytest.mark.parametrize("alpha", ORDERS)
def test_semigroup_residual_small_and_decaying(alpha):
    residuals = []
    for n_steps in SWEEP:
        mesh = TimeMesh(T=1.0, N_t=n_steps, alpha=alpha)
        u = TimeSignal.from_function(mesh, lambda t: np.cos(2.0 * t) + t)
        residuals.append(semigroup_residual(u, alpha))
    assert residuals[-1] <= 1e-2
    assert observed_rate(residuals) >= 0.9


@pytest.mark.parametrize("alpha", ORDERS)
def test_integration_by_parts_small_and_decaying(alpha):
    residuals = []
    for n_steps in SWEEP:
        mesh = TimeMesh(T=1.0, N_t=n_steps, alpha=alpha)
        f = TimeSignal.from_function(mesh, lambda t: 1.0 + t ** 2)
        g = TimeSignal.from_function(mesh, lambda t: np.cos(t))
        residuals.append(ibp_residual(f, g, alpha))
    assert residuals[-1] <= 5e-2
    assert observed_rate(residuals) >= 0.9


@pytest.mark.parametrize("alpha", ORDERS)
def test_convexity_inequality(alpha, rng):
    mesh = TimeMesh(T=1.0, N_t=64, alpha=alpha)
    wave = TimeSignal.from_function(mesh, lambda t: t * np.sin(2.0 * np.pi * t) - 0.3 * t)
    values = rng.standard_normal(mesh.size)
    values[0] = 0.0
    noisy = TimeSignal(mesh, values)
    assert convexity_gap(wave, alpha) <= 1e-12
    assert convexity_gap(noisy, alpha) <= 1e-12


@pytest.mark.parametrize("alpha", ORDERS)
def test_caputo_of_power_function_at_the_final_time(alpha):
    mesh = TimeMesh(T=1.0, N_t=64, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: t ** alpha)
    exact = gamma(1.0 + alpha)
    assert abs(caputo_derivative(u, alpha).values[-1] - exact) / exact <= 5e-2


def test_observed_rate():
    assert observed_rate([1.0, 0.5, 0.25]) == pytest.approx(1.0)
    assert observed_rate([1.0, 0.25]) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        observed_rate([1.0])
    with pytest.raises(DomainError):
        observed_rate([1.0, 0.0])


def test_right_schemes_reflect_the_left_ones():
    weights = rl_integral_weights(0.4, 8)
    right = weights.reflected()
    assert right.scheme is ConvScheme.RL_INTEGRAL_RIGHT
    assert right.scheme.is_right and not weights.scheme.is_right
    assert right.reflected().scheme is ConvScheme.RL_INTEGRAL
    np.testing.assert_array_equal(right.weights, weights.weights)
    assert caputo_weights(0.4, 8).reflected().scheme is ConvScheme.CAPUTO_L1_RIGHT


@pytest.mark.parametrize("alpha", ORDERS)
def test_right_matrices_are_upper_triangular_reflections(alpha):
    mesh = TimeMesh(T=1.0, N_t=24, alpha=alpha)
    u = TimeSignal.from_function(mesh, lambda t: np.exp(-t) + t ** 2)
    right_int = rl_integral_matrix(mesh, alpha, right=True)
    np.testing.assert_array_equal(np.tril(right_int, -1), 0.0)
    np.testing.assert_allclose(right_int @ u.values, rl_integral_right(u, alpha).values, rtol=1e-12, atol=1e-14)
    right_cap = caputo_matrix(mesh, alpha, right=True)
    np.testing.assert_array_equal(np.tril(right_cap, -1), 0.0)
    expected = caputo_derivative_right(u, alpha).values
    np.testing.assert_allclose(right_cap @ u.values, expected, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("alpha", ORDERS)
def test_convexity_suite_starting_from_zero(alpha):
    mesh = TimeMesh(T=1.0, N_t=64, alpha=alpha)
    signals = convexity_signals(mesh, seed=11, n_random=16)
    assert len(signals) == 18
    assert all(signal.values[0] == 0.0 for signal in signals)
    assert max(convexity_gap(signal, alpha) for signal in signals) <= 1e-12
