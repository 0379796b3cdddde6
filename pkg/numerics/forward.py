"""
Implicit time stepping for the fractional exterior-value problems

With u = w + g and g supported in the windows, the interior unknown w solves
D w + L_OO w + q w = -L_OW g with w(0) = 0, where D is the lower-triangular
time matrix of the chosen derivative. Every step solves one symmetric
positive definite system by Cholesky.
"""
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from config.settings import settings
from models.fields import MagneticPotential, SemilinearSpec, SpaceTimeField
from models.operators import NonlocalOperator
from models.space_grid import NodeClass, SpaceGrid
from models.time_mesh import TimeMesh
from numerics.errors import DomainError, GeometryError, NewtonDivergenceError, SingularStepError
from numerics.spacefrac import assemble_operator_family
from numerics.special import gamma
from numerics.timefrac import caputo_matrix, rl_derivative_matrix

logger = logging.getLogger(__name__)


class TimeScheme(Enum):
    """Time derivative used by a solve"""
    CAPUTO = "caputo"
    RIEMANN_LIOUVILLE = "riemann_liouville"


class ExteriorProblem:
    """Linear (or semilinear) fractional exterior-value problem on a fixed grid and mesh

    Operators are assembled once per time node and step factorizations are
    cached, so many sources can be solved against the same coefficients.
    """

    def __init__(self, grid: SpaceGrid, mesh: TimeMesh, s: float,
                 A: Optional[MagneticPotential] = None, q: Optional[SpaceTimeField] = None,
                 operators: Optional[List[NonlocalOperator]] = None):
        for name, item in (("A", A), ("q", q)):
            if item is not None and item.grid.geometry_hash != grid.geometry_hash:
                raise GeometryError(f"Coefficient {name} lives on a different grid")
            if item is not None and item.mesh != mesh:
                raise GeometryError(f"Coefficient {name} lives on a different time mesh")
        self.grid = grid
        self.mesh = mesh
        self.s = s
        self.A = A
        self.q = q
        self.operators = operators if operators is not None else assemble_operator_family(grid, s, A, mesh)
        self._time_matrices: Dict[TimeScheme, np.ndarray] = {}
        self._factors: Dict[Tuple, Tuple] = {}
        self._lock = threading.Lock()

    def q_column(self, n: int) -> np.ndarray:
        if self.q is None:
            return np.zeros(self.grid.n_omega)
        return self.q.omega_values[:, n]

    def time_matrix(self, scheme: TimeScheme) -> np.ndarray:
        if scheme not in self._time_matrices:
            if scheme == TimeScheme.CAPUTO:
                mat = caputo_matrix(self.mesh, self.mesh.alpha)
            else:
                mat = rl_derivative_matrix(self.mesh, self.mesh.alpha)
            self._time_matrices[scheme] = mat
        return self._time_matrices[scheme]

    def step_matrix(self, scheme: TimeScheme, n: int) -> np.ndarray:
        d_nn = self.time_matrix(scheme)[n, n]
        mat = self.operators[n].omega_block + np.diag(self.q_column(n))
        return mat + d_nn * np.eye(self.grid.n_omega)

    def _factor(self, scheme: TimeScheme, n: int):
        key = (scheme, id(self.operators[n]), self.q_column(n).tobytes())
        with self._lock:
            cached = self._factors.get(key)
        if cached is not None:
            return cached
        try:
            factor = cho_factor(self.step_matrix(scheme, n), lower=True, check_finite=False)
        except LinAlgError as exc:
            raise SingularStepError(f"Step matrix at t_{n} is not positive definite: {exc}", step=n)
        with self._lock:
            self._factors[key] = factor
        return factor

    def exterior_source(self, g: SpaceTimeField) -> np.ndarray:
        """-L_{Omega, ext}(t_n) g_n for every time node, shape (n_omega, N_t + 1)"""
        grid = self.grid
        ext = slice(grid.n_omega, grid.n_active)
        out = np.zeros((grid.n_omega, self.mesh.size))
        for n, op in enumerate(self.operators):
            out[:, n] = -op.block(grid.omega, ext) @ g.values[ext, n]
        return out

    def march(self, source: np.ndarray, scheme: TimeScheme) -> np.ndarray:
        """Interior solution with w(0) = 0 for an interior source, shape (n_omega, N_t + 1)"""
        mesh = self.mesh
        d_mat = self.time_matrix(scheme)
        w = np.zeros((self.grid.n_omega, mesh.size))
        for n in range(1, mesh.size):
            rhs = source[:, n] - w[:, :n] @ d_mat[n, :n]
            w[:, n] = cho_solve(self._factor(scheme, n), rhs, check_finite=False)
        return w

    def solve(self, g: SpaceTimeField, scheme: TimeScheme = TimeScheme.CAPUTO) -> SpaceTimeField:
        _check_exterior(self.grid, g)
        w = self.march(self.exterior_source(g), scheme)
        values = np.array(g.values, dtype=float)
        values[self.grid.omega] = w
        return SpaceTimeField(self.grid, self.mesh, values)

    def solve_source(self, f: np.ndarray, scheme: TimeScheme = TimeScheme.CAPUTO) -> SpaceTimeField:
        """Zero exterior data with an interior source f of shape (n_omega, N_t + 1)"""
        w = self.march(np.asarray(f, dtype=float), scheme)
        return SpaceTimeField.on_omega(self.grid, self.mesh, w)

    def reversed(self) -> "ExteriorProblem":
        """Problem with time-reversed coefficients, reusing the assembled operators"""
        return ExteriorProblem(
            self.grid, self.mesh, self.s,
            A=None if self.A is None else self.A.time_reversed(),
            q=None if self.q is None else self.q.time_reversed(),
            operators=list(reversed(self.operators)),
        )

    def solve_dual(self, h: SpaceTimeField) -> SpaceTimeField:
        """Backward problem with the right RL derivative and terminal condition I^(1-a)_T u = 0"""
        return self.reversed().solve(h.time_reversed(), TimeScheme.RIEMANN_LIOUVILLE).time_reversed()

    def dirichlet_to_neumann(self, u: SpaceTimeField, receivers: NodeClass) -> np.ndarray:
        """(L_A(t_k) u_k) restricted to the receiver window, shape (n_recv, N_t + 1)"""
        rows = self.grid.window_slice(receivers)
        out = np.zeros((rows.stop - rows.start, self.mesh.size))
        for n, op in enumerate(self.operators):
            out[:, n] = op.matrix[rows] @ u.values[:, n]
        return out


def _check_exterior(grid: SpaceGrid, g: SpaceTimeField) -> None:
    if g.grid.geometry_hash != grid.geometry_hash:
        raise GeometryError("Exterior data lives on a different grid")
    if np.any(g.omega_values != 0.0):
        raise DomainError("Exterior data must vanish on Omega")


def solve_caputo_linear(grid: SpaceGrid, mesh: TimeMesh, s: float, A: Optional[MagneticPotential],
                        q: Optional[SpaceTimeField], g: SpaceTimeField) -> SpaceTimeField:
    return ExteriorProblem(grid, mesh, s, A, q).solve(g, TimeScheme.CAPUTO)


def solve_rl_linear(grid: SpaceGrid, mesh: TimeMesh, s: float, A: Optional[MagneticPotential],
                    q: Optional[SpaceTimeField], g: SpaceTimeField) -> SpaceTimeField:
    return ExteriorProblem(grid, mesh, s, A, q).solve(g, TimeScheme.RIEMANN_LIOUVILLE)


def solve_dual(grid: SpaceGrid, mesh: TimeMesh, s: float, A: Optional[MagneticPotential],
               q: Optional[SpaceTimeField], h: SpaceTimeField) -> SpaceTimeField:
    return ExteriorProblem(grid, mesh, s, A, q).solve_dual(h)


def solve_caputo_source(grid: SpaceGrid, mesh: TimeMesh, s: float, A: Optional[MagneticPotential],
                        q: Optional[SpaceTimeField], f: np.ndarray) -> SpaceTimeField:
    return ExteriorProblem(grid, mesh, s, A, q).solve_source(f, TimeScheme.CAPUTO)


def solve_rl_source(grid: SpaceGrid, mesh: TimeMesh, s: float, A: Optional[MagneticPotential],
                    q: Optional[SpaceTimeField], f: np.ndarray) -> SpaceTimeField:
    return ExteriorProblem(grid, mesh, s, A, q).solve_source(f, TimeScheme.RIEMANN_LIOUVILLE)


class SemilinearSolver:
    """Caputo time stepping of D u + (-Delta)^s u + a(x, t, u) = 0 with damped Newton per step"""

    def __init__(self, problem: ExteriorProblem, spec: SemilinearSpec,
                 max_iterations: Optional[int] = None, tolerance: Optional[float] = None):
        if problem.q is not None:
            raise DomainError("The semilinear solver takes its linear potential from the semilinear coefficients")
        self.problem = problem
        self.spec = spec
        self.max_iterations = max_iterations or settings.NEWTON_MAX_ITER
        self.tolerance = tolerance or settings.NEWTON_TOL
        self.iterations: List[int] = []

    def _newton(self, n: int, base: np.ndarray, rhs: np.ndarray, start: np.ndarray) -> np.ndarray:
        spec = self.spec
        z = start.copy()
        scale = max(1.0, float(np.max(np.abs(rhs))))
        resid = base @ z + spec.value(n, z) - rhs
        norm = float(np.max(np.abs(resid)))
        for it in range(self.max_iterations):
            if norm <= self.tolerance * scale:
                self.iterations.append(it)
                return z
            jac = base + np.diag(spec.derivative(n, z))
            try:
                step = cho_solve(cho_factor(jac, lower=True, check_finite=False), -resid)
            except LinAlgError as exc:
                raise SingularStepError(f"Newton Jacobian at t_{n} is singular: {exc}", step=n)
            damping = 1.0
            while True:
                trial = z + damping * step
                trial_resid = base @ trial + spec.value(n, trial) - rhs
                trial_norm = float(np.max(np.abs(trial_resid)))
                if trial_norm < norm or damping < 2.0 ** -20:
                    break
                damping *= 0.5
            z, resid, norm = trial, trial_resid, trial_norm
            if damping * np.max(np.abs(step)) <= 1e-13 * (1.0 + np.max(np.abs(z))):
                self.iterations.append(it + 1)
                return z
        if norm <= self.tolerance * scale:
            self.iterations.append(self.max_iterations)
            return z
        raise NewtonDivergenceError("Newton iteration did not converge", residual=norm,
                                    iterations=self.max_iterations, step=n)

    def solve(self, g: SpaceTimeField) -> SpaceTimeField:
        problem = self.problem
        grid, mesh = problem.grid, problem.mesh
        _check_exterior(grid, g)
        d_mat = problem.time_matrix(TimeScheme.CAPUTO)
        source = problem.exterior_source(g)
        w = np.zeros((grid.n_omega, mesh.size))
        self.iterations = []
        for n in range(1, mesh.size):
            base = problem.operators[n].omega_block + d_mat[n, n] * np.eye(grid.n_omega)
            rhs = source[:, n] - w[:, :n] @ d_mat[n, :n]
            w[:, n] = self._newton(n, base, rhs, w[:, n - 1])
        values = np.array(g.values, dtype=float)
        values[grid.omega] = w
        logger.debug(f"Semilinear solve used {sum(self.iterations)} Newton iterations")
        return SpaceTimeField(grid, mesh, values)


def solve_semilinear(grid: SpaceGrid, mesh: TimeMesh, s: float, spec: SemilinearSpec,
                     g: SpaceTimeField) -> SpaceTimeField:
    return SemilinearSolver(ExteriorProblem(grid, mesh, s), spec).solve(g)


def solve_sensitivity(problem: ExteriorProblem, u: SpaceTimeField, direction: np.ndarray,
                      scheme: TimeScheme = TimeScheme.CAPUTO) -> SpaceTimeField:
    """Derivative of the solution along a perturbation of q: source -direction * u on Omega"""
    return problem.solve_source(-np.asarray(direction) * u.omega_values, scheme)


def linearization_gap(grid: SpaceGrid, mesh: TimeMesh, s: float, spec: SemilinearSpec,
                      g: SpaceTimeField, lam: float) -> float:
    """sup |u_g - u_{lambda g} / lambda| between the linearized and semilinear solutions"""
    if lam <= 0.0:
        raise DomainError(f"Scale lambda must be positive, got {lam}")
    problem = ExteriorProblem(grid, mesh, s)
    linear = ExteriorProblem(grid, mesh, s, q=spec.coefficients[0], operators=problem.operators)
    u_lin = linear.solve(g, TimeScheme.CAPUTO)
    u_lam = SemilinearSolver(problem, spec).solve(g * lam)
    return float(np.max(np.abs(u_lin.omega_values - u_lam.omega_values / lam)))


def linearization_gap_bound(mesh: TimeMesh, spec: SemilinearSpec, g: SpaceTimeField,
                            lam: float, f_sup: float = 0.0) -> float:
    """A priori size of the first neglected term, sum_k sup|a_k| lambda^b_k M^(b_k + 1)"""
    m_bound = mesh.T ** mesh.alpha / gamma(mesh.alpha + 1.0) * f_sup + g.sup_norm()
    bound = 0.0
    for coeff, b in zip(spec.coefficients[1:], spec.powers[1:]):
        bound += coeff.sup_norm() * lam ** b * m_bound ** (b + 1.0)
    return bound


@dataclass
class CertificateReport:
    """Outcome of the maximum-principle barrier check"""
    margin: float
    tolerance: float
    barrier_peak: float
    passed: bool

    def as_dict(self) -> dict:
        return {"margin": self.margin, "tolerance": self.tolerance,
                "barrier_peak": self.barrier_peak, "passed": self.passed}


def barrier_field(mesh: TimeMesh, f_sup: float, g_sup: float) -> np.ndarray:
    """(||f|| t^alpha / Gamma(alpha + 1) + ||g||) at every time node"""
    return f_sup * mesh.nodes ** mesh.alpha / gamma(mesh.alpha + 1.0) + g_sup


def linfinity_certificate(u: SpaceTimeField, f: Optional[np.ndarray], g: SpaceTimeField) -> CertificateReport:
    """Check |u| <= ||f|| t^alpha / Gamma(alpha + 1) + ||g|| on Omega for t > 0"""
    mesh = u.mesh
    f_sup = 0.0 if f is None else float(np.max(np.abs(f)))
    g_sup = g.sup_norm()
    barrier = barrier_field(mesh, f_sup, g_sup)
    tolerance = 1e-8 + f_sup * mesh.tau ** mesh.alpha / gamma(mesh.alpha + 1.0)
    margin = float(np.max(np.abs(u.omega_values[:, 1:]) - barrier[None, 1:]))
    return CertificateReport(margin=margin, tolerance=tolerance, barrier_peak=float(barrier[-1]),
                             passed=margin <= tolerance)


def comparison_margin(u1: SpaceTimeField, u2: SpaceTimeField) -> float:
    """max over Omega x (0, T] of u1 - u2; nonpositive when u1 <= u2"""
    return float(np.max(u1.omega_values[:, 1:] - u2.omega_values[:, 1:]))

