"""
Tests for the fractional Laplacian, its magnetic variant and the geometry they live on
"""
import math

import numpy as np
import pytest

from models.fields import MagneticPotential
from models.space_grid import NodeClass, SpaceGrid, Window
from numerics.errors import DomainError, GeometryError
from numerics.oracle import brute_force_frac_laplacian, bump_laplacian
from numerics.spacefrac import (
    assemble_fractional_laplacian, assemble_magnetic_operator, assemble_operator,
    assemble_operator_family, bilinear_eval, bilinear_form, c_ns, estimate_form_constants,
    exterior_coupling_defect, ucp_condition, ucp_witness,
)
from numerics.special import gamma


def _static_potential(grid, mesh, amplitude):
    def profile(x, t):
        rho2 = np.sum(x ** 2, axis=1) / grid.r_omega ** 2
        return amplitude * np.maximum(1.0 - rho2, 0.0)[:, None]
    return MagneticPotential.from_function(grid, mesh, profile)


def test_grid_orders_active_nodes(magnetic_grid):
    grid = magnetic_grid
    assert grid.n_active == grid.n_omega + grid.n_w1 + grid.n_w2
    assert np.all(np.abs(grid.omega_points[:, 0]) < grid.r_omega)
    assert np.all(grid.window1.contains(grid.window_points(NodeClass.W1)))
    assert np.all(grid.window2.contains(grid.window_points(NodeClass.W2)))
    assert grid.geometry_hash == SpaceGrid(1, 2.0, 0.0625).geometry_hash


def test_grid_rejects_invalid_geometries():
    with pytest.raises(GeometryError):
        SpaceGrid(1, 2.0, 0.0625, window1=Window((-0.3,), (-0.1,)), magnetic=False)
    with pytest.raises(GeometryError):
        SpaceGrid(1, 2.0, 0.0625, window1=Window((-0.9,), (-0.5,)), magnetic=True)
    with pytest.raises(GeometryError):
        SpaceGrid(1, 2.0, 0.07)
    with pytest.raises(GeometryError):
        SpaceGrid(3, 2.0, 0.5)


def test_normalization_constant():
    # c_{1,1/2} = 1/pi
    assert c_ns(1, 0.5) == pytest.approx(1.0 / math.pi, rel=1e-12)
    assert c_ns(2, 0.3) == pytest.approx(
        4.0 ** 0.3 * gamma(1.3) / (math.pi * abs(gamma(-0.3))), rel=1e-12)
    with pytest.raises(DomainError):
        c_ns(1, 1.0)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_operator_symmetric_and_annihilates_constants(magnetic_grid, s):
    op = assemble_operator(magnetic_grid, s)
    diag = np.max(np.abs(np.diag(op.matrix)))
    assert op.symmetry_defect() / diag <= 1e-12
    assert op.constant_defect() <= 1e-10
    off = op.matrix - np.diag(np.diag(op.matrix))
    assert np.all(off <= 0.0)
    assert np.all(op.tail >= 0.0)


def test_magnetic_operator_leaves_exterior_couplings_untouched(magnetic_grid, mesh):
    grid = magnetic_grid
    A = _static_potential(grid, mesh, 0.5 * math.pi / grid.omega_diameter)
    op_0 = assemble_operator(grid, 0.5)
    op_a = assemble_operator(grid, 0.5, A, 0)
    assert exterior_coupling_defect(op_a, op_0) == 0.0
    assert np.max(np.abs(op_a.omega_block - op_0.omega_block)) > 0.0
    assert op_a.symmetry_defect() <= 1e-12 * np.max(np.abs(np.diag(op_a.matrix)))


def test_magnetic_operator_is_gauge_even(magnetic_grid, mesh):
    grid = magnetic_grid
    A = _static_potential(grid, mesh, 2.0)
    op_plus = assemble_operator(grid, 0.5, A, 0)
    op_minus = assemble_operator(grid, 0.5, A.negated(), 0)
    assert np.array_equal(op_plus.matrix, op_minus.matrix)


def test_static_potential_shares_one_assembly(magnetic_grid, mesh):
    A = _static_potential(magnetic_grid, mesh, 1.0)
    family = assemble_operator_family(magnetic_grid, 0.5, A, mesh)
    assert len(family) == mesh.size
    assert all(op is family[0] for op in family)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_bump_has_constant_fractional_laplacian(wide_ball_grid, s):
    grid = wide_ball_grid
    u = np.zeros(grid.n_active)
    u[grid.omega] = np.maximum(1.0 - grid.omega_points[:, 0] ** 2, 0.0) ** s
    lu = assemble_operator(grid, s).apply(u)
    centre = np.abs(grid.omega_points[:, 0]) <= 0.5
    exact = bump_laplacian(1, s)
    assert np.max(np.abs(lu[grid.omega][centre] - exact)) / exact <= 3e-2


def test_form_constants_are_coercive(magnetic_grid, mesh):
    A = _static_potential(magnetic_grid, mesh, 1.0)
    constants = estimate_form_constants(magnetic_grid, 0.5, A, None, mesh)
    assert constants.c1 > 0.0
    assert constants.C0 >= constants.c1 - constants.c2
    assert constants.C_A > 0.0
    assert estimate_form_constants(magnetic_grid, 0.5, None, None, mesh).C_A == 0.0


def test_ucp_witness_bounded_by_condition(magnetic_grid, rng):
    grid = magnetic_grid
    bound = ucp_condition(grid, 0.5)
    assert np.isfinite(bound) and bound > 0.0
    for _ in range(5):
        u = np.zeros(grid.n_active)
        u[grid.omega] = rng.standard_normal(grid.n_omega)
        assert ucp_witness(grid, 0.5, u) <= bound * (1.0 + 1e-8)


def test_zero_potential_gives_the_plain_laplacian(magnetic_grid, mesh):
    zero = MagneticPotential.zero(magnetic_grid, mesh)
    plain = assemble_fractional_laplacian(magnetic_grid, 0.5)
    np.testing.assert_array_equal(assemble_magnetic_operator(magnetic_grid, 0.5, zero, 3).matrix, plain.matrix)
    with pytest.raises(DomainError):
        assemble_magnetic_operator(magnetic_grid, 0.5, zero, mesh.size)


def test_odd_fields_map_to_odd_fields(close_grid):
    grid = close_grid
    op = assemble_fractional_laplacian(grid, 0.4)
    points = grid.active_points[:, 0]
    u = np.where(np.abs(points) < grid.r_omega, points * (grid.r_omega - np.abs(points)), 0.0)
    lu = op.apply(u)
    mirror = np.array([np.argmin(np.abs(points + x)) for x in points])
    assert np.max(np.abs(lu + lu[mirror])) <= 1e-10 * np.max(np.abs(lu))


def test_bilinear_form_is_symmetric_and_positive(magnetic_grid, mesh, rng):
    grid = magnetic_grid
    A = _static_potential(grid, mesh, 1.0)
    form = bilinear_form(assemble_operator(grid, 0.5, A, 0), np.full(grid.n_omega, 0.3))
    u, v = rng.standard_normal(grid.n_active), rng.standard_normal(grid.n_active)
    assert bilinear_eval(form, u, v) == pytest.approx(bilinear_eval(form, v, u), rel=1e-10)
    hat = np.zeros(grid.n_active)
    hat[grid.n_omega // 2] = 1.0
    assert bilinear_eval(form, hat, hat) > 0.0


def _modulated_bump(xi):
    """cos(xi . x) (1 - |x|^2)_+^2, smooth enough for the lattice and the quadrature"""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))

    def u(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return max(1.0 - float(y @ y), 0.0) ** 2 * math.cos(float(xi @ y))
    return u


@pytest.mark.parametrize("s", [0.3, 0.5])
def test_modulated_cosine_matches_the_quadrature_oracle(wide_ball_grid, s):
    grid = wide_ball_grid
    u = _modulated_bump(3.0)
    values = np.array([u(p) for p in grid.active_points])
    lu = assemble_operator(grid, s).apply(values)
    points = grid.active_points[:, 0]
    grid_values, oracle_values = [], []
    for x in (0.0, 0.25, 0.5):
        i = int(np.argmin(np.abs(points - x)))
        grid_values.append(lu[i])
        oracle_values.append(brute_force_frac_laplacian(u, x, s, radius=50.0,
                                                        breakpoints=(1.0 - x, 1.0 + x)))
    oracle_values = np.array(oracle_values)
    scale = np.max(np.abs(oracle_values))
    assert np.max(np.abs(np.array(grid_values) - oracle_values)) / scale <= 2e-2


@pytest.mark.slow
def test_two_dimensional_operator_matches_the_quadrature_oracle():
    s = 0.5
    grid = SpaceGrid(2, 2.0, 0.125, r_omega=1.0, magnetic=False,
                     window1=Window((-1.9, -0.1), (-1.5, 0.1)), window2=Window((1.5, -0.1), (1.9, 0.1)))
    assert grid.n_per_axis == 33
    u = _modulated_bump([1.0, 0.5])
    values = np.array([u(p) for p in grid.active_points])
    lu = assemble_operator(grid, s).apply(values)
    centre = int(np.argmin(np.linalg.norm(grid.active_points, axis=1)))
    expected = brute_force_frac_laplacian(u, [0.0, 0.0], s, radius=20.0, breakpoints=(1.0,), tol=1e-6)
    assert abs(lu[centre] - expected) / abs(expected) <= 5e-2


def test_ucp_condition_grows_under_refinement():
    conditions = []
    for h in (1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0):
        grid = SpaceGrid(1, 2.0, h, r_omega=0.25, magnetic=False,
                         window1=Window((-1.9,), (-0.3,)), window2=Window((0.3,), (1.9,)))
        assert grid.n_w1 >= grid.n_omega
        conditions.append(ucp_condition(grid, 0.5))
    assert all(np.isfinite(conditions))
    assert conditions[0] < conditions[1] < conditions[2]
