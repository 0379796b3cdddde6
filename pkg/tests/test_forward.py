"""
Tests for the forward, Riemann-Liouville, dual and semilinear solvers
"""
import numpy as np
import pytest
from scipy.linalg import eigh

from models.fields import SemilinearSpec, SpaceTimeField
from models.space_grid import NodeClass
from models.time_mesh import TimeMesh
from numerics.dnmap import build_source_basis
from numerics.errors import DomainError
from numerics.forward import (
    ExteriorProblem, SemilinearSolver, TimeScheme, comparison_margin, linearization_gap,
    linfinity_certificate, solve_caputo_linear, solve_caputo_source, solve_rl_linear, solve_rl_source,
    solve_dual, solve_semilinear, solve_sensitivity,
)
from numerics.oracle import constant_forcing_solution, eigen_reference_solution
from numerics.timefrac import observed_rate


@pytest.fixture
def source(magnetic_grid, mesh):
    return build_source_basis(magnetic_grid, mesh, NodeClass.W1, 2, 2).element(0)


def _constant_q(grid, mesh, value):
    return SpaceTimeField.on_omega(grid, mesh, np.full((grid.n_omega, mesh.size), value))


def test_solution_keeps_exterior_data(magnetic_grid, mesh, source):
    u = solve_caputo_linear(magnetic_grid, mesh, 0.5, None, None, source)
    exterior = slice(magnetic_grid.n_omega, magnetic_grid.n_active)
    np.testing.assert_array_equal(u.values[exterior], source.values[exterior])
    np.testing.assert_array_equal(u.omega_values[:, 0], 0.0)


def test_exterior_data_must_vanish_on_omega(magnetic_grid, mesh):
    bad = SpaceTimeField.from_function(magnetic_grid, mesh, lambda x, t: np.ones(len(x)))
    with pytest.raises(DomainError):
        ExteriorProblem(magnetic_grid, mesh, 0.5).solve(bad)


def test_maximum_principle_certificate(magnetic_grid, mesh, source):
    q = _constant_q(magnetic_grid, mesh, 0.5)
    u = ExteriorProblem(magnetic_grid, mesh, 0.5, q=q).solve(source)
    report = linfinity_certificate(u, None, source)
    assert report.passed
    assert report.margin <= report.tolerance


def test_certificate_rejects_inflated_state(magnetic_grid, mesh, source):
    u = ExteriorProblem(magnetic_grid, mesh, 0.5).solve(source)
    values = np.array(u.values)
    values[magnetic_grid.omega, 1:] = 2.0 * source.sup_norm()
    assert not linfinity_certificate(u.with_values(values), None, source).passed


def test_comparison_principle(magnetic_grid, mesh, source):
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5, q=_constant_q(magnetic_grid, mesh, 1.0))
    lower = problem.solve(source)
    upper = problem.solve(source * 2.0)
    assert comparison_margin(lower, upper) <= 1e-12
    assert np.min(lower.omega_values) >= -1e-12


def test_riemann_liouville_solve_is_nonnegative(magnetic_grid, mesh, source):
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5)
    u_rl = problem.solve(source, TimeScheme.RIEMANN_LIOUVILLE)
    u_c = problem.solve(source, TimeScheme.CAPUTO)
    assert np.min(u_rl.omega_values) >= -1e-12
    assert np.max(np.abs(u_rl.omega_values - u_c.omega_values)) <= 0.1 * np.max(np.abs(u_c.omega_values))


def test_module_solvers_match_problem_methods(magnetic_grid, mesh, source):
    q = _constant_q(magnetic_grid, mesh, 0.5)
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5, q=q)
    np.testing.assert_allclose(solve_rl_linear(magnetic_grid, mesh, 0.5, None, q, source).values,
                               problem.solve(source, TimeScheme.RIEMANN_LIOUVILLE).values, rtol=1e-13, atol=0.0)
    f = np.ones((magnetic_grid.n_omega, mesh.size))
    np.testing.assert_allclose(solve_caputo_source(magnetic_grid, mesh, 0.5, None, q, f).values,
                               problem.solve_source(f, TimeScheme.CAPUTO).values, rtol=1e-13, atol=0.0)
    np.testing.assert_allclose(solve_rl_source(magnetic_grid, mesh, 0.5, None, q, f).values,
                               problem.solve_source(f, TimeScheme.RIEMANN_LIOUVILLE).values, rtol=1e-13, atol=0.0)


def test_sensitivity_matches_finite_difference(magnetic_grid, mesh, source):
    eps = 1e-5
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5, q=_constant_q(magnetic_grid, mesh, 0.5))
    u = problem.solve(source)
    shifted = ExteriorProblem(magnetic_grid, mesh, 0.5, q=_constant_q(magnetic_grid, mesh, 0.5 + eps),
                              operators=problem.operators).solve(source)
    direction = np.ones((magnetic_grid.n_omega, mesh.size))
    sensitivity = solve_sensitivity(problem, u, direction)
    difference = (shifted.omega_values - u.omega_values) / eps
    scale = np.max(np.abs(sensitivity.omega_values))
    assert scale > 0.0
    assert np.max(np.abs(difference - sensitivity.omega_values)) <= 1e-3 * scale
    assert np.max(sensitivity.omega_values) <= 1e-12


def test_eigenmode_matches_scalar_reference(magnetic_grid):
    alpha = 0.5
    errors = []
    for n_steps in (32, 128):
        mesh = TimeMesh(T=1.0, N_t=n_steps, alpha=alpha)
        problem = ExteriorProblem(magnetic_grid, mesh, 0.5)
        lam, vecs = eigh(problem.operators[0].omega_block)
        mode = vecs[:, 0]
        u = problem.solve_source(np.outer(mode, np.ones(mesh.size)), TimeScheme.CAPUTO)
        y = mode @ u.omega_values
        reference = constant_forcing_solution(alpha, float(lam[0]), 1.0, mesh.T)
        errors.append(abs(y[-1] - reference[0]) / abs(reference[0]))
    assert errors[-1] <= 2e-2
    assert errors[-1] < errors[0]


def test_dual_solution_carries_window_data(magnetic_grid, mesh):
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5)
    h = build_source_basis(magnetic_grid, mesh, NodeClass.W2, 2, 2).element(1)
    v = problem.solve_dual(h)
    np.testing.assert_array_equal(v.window_values(NodeClass.W2), h.window_values(NodeClass.W2))
    assert np.all(np.isfinite(v.omega_values))
    assert np.max(np.abs(v.omega_values)) > 0.0


def test_semilinear_with_zero_nonlinearity_is_linear(magnetic_grid, mesh, source):
    zero = SpaceTimeField.zeros(magnetic_grid, mesh)
    spec = SemilinearSpec([zero, zero], [0.0, 1.0])
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5)
    nonlinear = SemilinearSolver(problem, spec).solve(source)
    linear = problem.solve(source)
    np.testing.assert_allclose(nonlinear.omega_values, linear.omega_values, atol=1e-10)
    direct = solve_semilinear(magnetic_grid, mesh, 0.5, spec, source)
    np.testing.assert_allclose(direct.omega_values, linear.omega_values, atol=1e-10)


def test_semilinear_rejects_linear_potential_on_problem(magnetic_grid, mesh):
    zero = SpaceTimeField.zeros(magnetic_grid, mesh)
    problem = ExteriorProblem(magnetic_grid, mesh, 0.5, q=_constant_q(magnetic_grid, mesh, 1.0))
    with pytest.raises(DomainError):
        SemilinearSolver(problem, SemilinearSpec([zero], [0.0]))


def test_linearization_gap_scales_with_lambda(magnetic_grid, mesh, source):
    spec = SemilinearSpec([_constant_q(magnetic_grid, mesh, 1.0), _constant_q(magnetic_grid, mesh, 2.0)],
                          [0.0, 1.0])
    gap_large = linearization_gap(magnetic_grid, mesh, 0.5, spec, source, 0.04)
    gap_small = linearization_gap(magnetic_grid, mesh, 0.5, spec, source, 0.02)
    assert gap_large > 0.0
    assert 0.35 <= gap_small / gap_large <= 0.65


def test_linearization_gap_rejects_nonpositive_scale(magnetic_grid, mesh, source):
    spec = SemilinearSpec([_constant_q(magnetic_grid, mesh, 1.0)], [0.0])
    with pytest.raises(DomainError):
        linearization_gap(magnetic_grid, mesh, 0.5, spec, source, 0.0)


def test_semilinear_coefficients_must_be_nonnegative(magnetic_grid, mesh):
    zero = SpaceTimeField.zeros(magnetic_grid, mesh)
    with pytest.raises(DomainError):
        SemilinearSpec([_constant_q(magnetic_grid, mesh, -1.0), zero], [0.0, 1.0])
    with pytest.raises(DomainError):
        SemilinearSpec([zero, _constant_q(magnetic_grid, mesh, -0.5)], [0.0, 1.0])


def test_dual_solve_is_the_time_reflected_riemann_liouville_solve(magnetic_grid, mesh):
    grid = magnetic_grid
    profile = np.outer(1.0 + grid.omega_points[:, 0] ** 2, 1.0 + mesh.nodes)
    q = SpaceTimeField.on_omega(grid, mesh, profile)
    h = build_source_basis(grid, mesh, NodeClass.W2, 2, 2).element(1)
    dual = solve_dual(grid, mesh, 0.5, None, q, h)
    reflected = solve_rl_linear(grid, mesh, 0.5, None, q.time_reversed(), h.time_reversed()).time_reversed()
    scale = np.max(np.abs(dual.values))
    assert np.max(np.abs(dual.values - reflected.values)) <= 1e-10 * scale


def _two_term_spec(grid, mesh):
    return SemilinearSpec([_constant_q(grid, mesh, 1.0), _constant_q(grid, mesh, 2.0)], [0.0, 1.0])


def test_semilinear_solution_is_odd_in_the_exterior_data(magnetic_grid, mesh, source):
    spec = _two_term_spec(magnetic_grid, mesh)
    plus = solve_semilinear(magnetic_grid, mesh, 0.5, spec, source * 3.0)
    minus = solve_semilinear(magnetic_grid, mesh, 0.5, spec, -(source * 3.0))
    np.testing.assert_allclose(minus.values, -plus.values, rtol=0.0, atol=1e-12)


def test_single_term_semilinear_matches_the_linear_solve(magnetic_grid, mesh, source):
    a1 = _constant_q(magnetic_grid, mesh, 0.7)
    nonlinear = solve_semilinear(magnetic_grid, mesh, 0.5, SemilinearSpec([a1], [0.0]), source)
    linear = solve_caputo_linear(magnetic_grid, mesh, 0.5, None, a1, source)
    np.testing.assert_allclose(nonlinear.values, linear.values, rtol=0.0, atol=1e-10)


def test_semilinear_run_stays_under_the_barrier(magnetic_grid, mesh, source):
    g = source * 5.0
    u = solve_semilinear(magnetic_grid, mesh, 0.5, _two_term_spec(magnetic_grid, mesh), g)
    report = linfinity_certificate(u, None, g)
    assert report.passed
    assert report.barrier_peak == pytest.approx(g.sup_norm())


def test_caputo_solve_matches_the_modal_reference_in_space_time_l2(magnetic_grid):
    alpha = 0.5
    grid = magnetic_grid
    f = 1.0 - (grid.omega_points[:, 0] / grid.r_omega) ** 2
    finest = TimeMesh(T=1.0, N_t=64, alpha=alpha)
    block = ExteriorProblem(grid, finest, 0.5).operators[0].omega_block
    block = 0.5 * (block + block.T)
    exact = eigen_reference_solution(block, f, finest.nodes, alpha, forcing=lambda t: t * t)
    errors = []
    for n_steps in (16, 32, 64):
        mesh = TimeMesh(T=1.0, N_t=n_steps, alpha=alpha)
        u = ExteriorProblem(grid, mesh, 0.5).solve_source(np.outer(f, mesh.nodes ** 2), TimeScheme.CAPUTO)
        reference = exact[:, :: 64 // n_steps]
        weights = mesh.trapezoid_weights()[None, :]
        diff = np.sqrt(np.sum(weights * (u.omega_values - reference) ** 2))
        errors.append(diff / np.sqrt(np.sum(weights * reference ** 2)))
    assert errors[-1] <= 1e-2
    assert observed_rate(errors) >= (2.0 - alpha) * 0.8
