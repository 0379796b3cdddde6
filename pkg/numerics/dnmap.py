"""
Dirichlet-to-Neumann records on finite source bases

A forward record stores (-Delta)^s_A u restricted to W2 for every basis
source on W1; a dual record does the same for the backward problem with
sources on W2 and receivers on W1. Pairings integrate in time with the
trapezoid rule and in space with weight h^n.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import legendre

from config.settings import settings
from models.fields import Coefficients, MagneticPotential, SemilinearSpec, SpaceTimeField
from models.space_grid import NodeClass, SpaceGrid
from models.time_mesh import TimeMesh
from numerics.errors import GeometryError, LabError, SourceSolveError
from numerics.forward import ExteriorProblem, SemilinearSolver, TimeScheme

logger = logging.getLogger(__name__)


class Flavor(Enum):
    """Direction of a DN record"""
    FORWARD = "forward"
    DUAL = "dual"


_WINDOWS = {
    Flavor.FORWARD: (NodeClass.W1, NodeClass.W2),
    Flavor.DUAL: (NodeClass.W2, NodeClass.W1),
}


def _spatial_indices(dim: int, count: int) -> List[Tuple[int, ...]]:
    if dim == 1:
        return [(i,) for i in range(count)]
    pairs = [(i, j) for i in range(count) for j in range(count)]
    pairs.sort(key=lambda p: (p[0] + p[1], p[0]))
    return pairs[:count]


class SourceBasis:
    """Smooth sources on one window, vanishing on its boundary and at t = 0 and t = T

    Spatial modes are (1 - xi^2)^2 P_i(xi) per axis (tensor products in 2D,
    ordered by total degree); temporal modes are sin^2(pi t / T) cos(m pi t / T).
    Element index is i * n_time + m.
    """

    def __init__(self, grid: SpaceGrid, mesh: TimeMesh, window: NodeClass,
                 n_space: int = 4, n_time: int = 4, amplitude: float = 1.0):
        if n_space < 1 or n_time < 1:
            raise LabError("A source basis needs at least one spatial and one temporal mode")
        self.grid = grid
        self.mesh = mesh
        self.window = window
        self.n_space = n_space
        self.n_time = n_time
        self.amplitude = amplitude
        box = grid.window(window)
        pts = grid.window_points(window)
        lo, hi = np.asarray(box.lower), np.asarray(box.upper)
        xi = np.clip(2.0 * (pts - lo) / (hi - lo) - 1.0, -1.0, 1.0)
        envelope = (1.0 - xi ** 2) ** 2
        modes = []
        for index in _spatial_indices(grid.dim, n_space):
            mode = np.ones(len(pts))
            for axis, degree in enumerate(index):
                coeffs = np.zeros(degree + 1)
                coeffs[degree] = 1.0
                mode *= envelope[:, axis] * legendre.legval(xi[:, axis], coeffs)
            modes.append(mode)
        self.spatial = np.stack(modes, axis=1)
        phase = np.pi * mesh.nodes / mesh.T
        self.temporal = np.stack([np.sin(phase) ** 2 * np.cos(m * phase) for m in range(n_time)])
        self._elements: Optional[List[SpaceTimeField]] = None

    def __len__(self) -> int:
        return self.n_space * self.n_time

    def element_values(self, index: int) -> np.ndarray:
        """Window-node values of element ``index``, shape (n_window, N_t + 1)"""
        i, m = divmod(index, self.n_time)
        return self.amplitude * np.outer(self.spatial[:, i], self.temporal[m])

    def element(self, index: int) -> SpaceTimeField:
        values = np.zeros((self.grid.n_active, self.mesh.size))
        values[self.grid.window_slice(self.window)] = self.element_values(index)
        return SpaceTimeField(self.grid, self.mesh, values)

    @property
    def elements(self) -> List[SpaceTimeField]:
        if self._elements is None:
            self._elements = [self.element(i) for i in range(len(self))]
        return self._elements

    def combine(self, coefficients: np.ndarray) -> SpaceTimeField:
        values = np.zeros((self.grid.n_active, self.mesh.size))
        rows = self.grid.window_slice(self.window)
        for i, c in enumerate(coefficients):
            values[rows] += c * self.element_values(i)
        return SpaceTimeField(self.grid, self.mesh, values)

    def weights(self) -> np.ndarray:
        """Space-time quadrature weights h^n * trapezoid on the window"""
        n_win = self.spatial.shape[0]
        return np.outer(np.full(n_win, self.grid.cell_volume), self.mesh.trapezoid_weights())

    def gram(self) -> np.ndarray:
        flat = np.stack([self.element_values(i).ravel() for i in range(len(self))], axis=1)
        return flat.T @ (self.weights().ravel()[:, None] * flat)

    def describe(self) -> dict:
        return {"window": self.window.value, "n_space": self.n_space, "n_time": self.n_time,
                "amplitude": self.amplitude}


def build_source_basis(grid: SpaceGrid, mesh: TimeMesh, window: NodeClass, n_space: int = 4,
                       n_time: int = 4, amplitude: float = 1.0) -> SourceBasis:
    return SourceBasis(grid, mesh, window, n_space, n_time, amplitude)


@dataclass(eq=False)
class DNRecord:
    """Measurements of one DN map on a source basis, shape (n_sources, n_receivers, N_t + 1)"""
    flavor: Flavor
    grid: SpaceGrid
    mesh: TimeMesh
    s: float
    basis: SourceBasis
    receivers: NodeClass
    measurements: np.ndarray
    geometry_hash: str

    @property
    def n_sources(self) -> int:
        return self.measurements.shape[0]

    def pairing_weights(self) -> np.ndarray:
        return self.grid.cell_volume * self.mesh.trapezoid_weights()

    def pair(self, index: int, h_values: np.ndarray) -> float:
        """Integral over the receiver window and (0, T) of measurement ``index`` times h"""
        return float(np.sum(self.measurements[index] * h_values * self.pairing_weights()[None, :]))

    def weighted_vector(self) -> np.ndarray:
        return (self.measurements * np.sqrt(self.pairing_weights())[None, None, :]).ravel()

    def with_measurements(self, measurements: np.ndarray) -> "DNRecord":
        return replace(self, measurements=np.array(measurements, dtype=float))

    def time_reversed(self) -> "DNRecord":
        return self.with_measurements(self.measurements[:, :, ::-1])

    def header(self) -> dict:
        return {
            "flavor": self.flavor.value,
            "s": self.s,
            "alpha": self.mesh.alpha,
            "T": self.mesh.T,
            "N_t": self.mesh.N_t,
            "receivers": self.receivers.value,
            "basis": self.basis.describe(),
            "geometry_hash": self.geometry_hash,
        }


def measure(problem: ExteriorProblem, g: SpaceTimeField, flavor: Flavor) -> np.ndarray:
    """DN measurement of one source for a linear problem"""
    sources, receivers = _WINDOWS[flavor]
    if flavor == Flavor.FORWARD:
        u = problem.solve(g, TimeScheme.CAPUTO)
    else:
        u = problem.solve_dual(g)
    return problem.dirichlet_to_neumann(u, receivers)


def _run_sources(count: int, solve_one, threads: int) -> List[np.ndarray]:
    def guarded(i: int) -> np.ndarray:
        try:
            return solve_one(i)
        except LabError as exc:
            raise SourceSolveError(i, exc) from exc

    if threads <= 1:
        return [guarded(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, range(count)))


def assemble_dn(grid: SpaceGrid, mesh: TimeMesh, s: float, A: Optional[MagneticPotential],
                q: Optional[SpaceTimeField], basis: SourceBasis, flavor: Flavor = Flavor.FORWARD,
                threads: Optional[int] = None, problem: Optional[ExteriorProblem] = None) -> DNRecord:
    """Solve for every basis source and record the DN measurements"""
    sources, receivers = _WINDOWS[flavor]
    if basis.window != sources:
        raise GeometryError(f"A {flavor.value} record needs sources on {sources.value}")
    if basis.grid.geometry_hash != grid.geometry_hash:
        raise GeometryError("Source basis lives on a different grid")
    problem = problem or ExteriorProblem(grid, mesh, s, A, q)
    threads = threads or settings.THREADS
    results = _run_sources(len(basis), lambda i: measure(problem, basis.elements[i], flavor), threads)
    logger.info(f"Assembled {flavor.value} DN record with {len(basis)} sources")
    return DNRecord(flavor=flavor, grid=grid, mesh=mesh, s=s, basis=basis, receivers=receivers,
                    measurements=np.stack(results), geometry_hash=grid.geometry_hash)


def assemble_semilinear_dn(grid: SpaceGrid, mesh: TimeMesh, s: float, spec: SemilinearSpec,
                           basis: SourceBasis, lam: float, threads: Optional[int] = None,
                           problem: Optional[ExteriorProblem] = None) -> DNRecord:
    """DN record of the semilinear problem for the scaled sources lam * g_i"""
    if basis.window != NodeClass.W1:
        raise GeometryError("Semilinear records take sources on W1")
    problem = problem or ExteriorProblem(grid, mesh, s)
    threads = threads or settings.THREADS

    def solve_one(i: int) -> np.ndarray:
        u = SemilinearSolver(problem, spec).solve(basis.elements[i] * lam)
        return problem.dirichlet_to_neumann(u, NodeClass.W2)

    results = _run_sources(len(basis), solve_one, threads)
    return DNRecord(flavor=Flavor.FORWARD, grid=grid, mesh=mesh, s=s, basis=basis,
                    receivers=NodeClass.W2, measurements=np.stack(results),
                    geometry_hash=grid.geometry_hash)


def duality_residual(forward: DNRecord, dual: DNRecord) -> float:
    """max over basis pairs of |<Lambda g, h> - <Lambda* h, g>| / (|<Lambda g, h>| + eps)

    eps is the largest pairing magnitude, so near-orthogonal pairs are measured
    against the scale of the record rather than against zero.
    """
    if forward.flavor != Flavor.FORWARD or dual.flavor != Flavor.DUAL:
        raise GeometryError("duality_residual takes a forward and a dual record")
    if forward.geometry_hash != dual.geometry_hash or forward.mesh != dual.mesh:
        raise GeometryError("Forward and dual records were built on different geometries")
    n_f, n_d = forward.n_sources, dual.n_sources
    lhs = np.zeros((n_f, n_d))
    rhs = np.zeros((n_f, n_d))
    for i in range(n_f):
        g_i = forward.basis.element_values(i)
        for j in range(n_d):
            h_j = dual.basis.element_values(j)
            lhs[i, j] = forward.pair(i, h_j)
            rhs[i, j] = dual.pair(j, g_i)
    eps = float(np.max(np.abs(lhs)))
    if eps == 0.0:
        return float(np.max(np.abs(rhs)))
    return float(np.max(np.abs(lhs - rhs) / (np.abs(lhs) + eps)))


def dn_difference_norm(record1: DNRecord, record2: DNRecord) -> float:
    """Weighted L2 norm of the difference of two records on the same basis"""
    if record1.measurements.shape != record2.measurements.shape:
        raise GeometryError("Records have different shapes")
    return float(np.linalg.norm(record1.weighted_vector() - record2.weighted_vector()))


def noise_sigma(record: DNRecord, level: float) -> float:
    return level * float(np.max(np.abs(record.measurements)))


def noise_norm(record: DNRecord, level: float) -> float:
    """Expected weighted norm of the noise added by add_measurement_noise"""
    weights = np.broadcast_to(record.pairing_weights(), record.measurements.shape)
    return noise_sigma(record, level) * float(np.sqrt(np.sum(weights)))


def add_measurement_noise(record: DNRecord, level: float, seed: int = 0) -> DNRecord:
    """Gaussian noise with standard deviation level * max |measurement|"""
    rng = np.random.default_rng(seed)
    sigma = noise_sigma(record, level)
    return record.with_measurements(record.measurements + sigma * rng.standard_normal(record.measurements.shape))


def integral_identity_gap(grid: SpaceGrid, mesh: TimeMesh, s: float, coeffs1: Coefficients,
                          coeffs2: Coefficients, g1: SpaceTimeField, g2: SpaceTimeField) -> Tuple[float, float]:
    """Both sides of the integral identity for two coefficient sets

    lhs = <(Lambda_1 - Lambda_2) g1, g2>; rhs = sum_t w_t sum_ij G_ij u1_j u2*_i
    - sum (q2 - q1) u1 u2* h^n, where G = h^n (L_{A1} - L_{A2}) carries the
    magnetic difference and u2* is the dual solution for the second set.
    """
    p1 = ExteriorProblem(grid, mesh, s, coeffs1.A, coeffs1.q)
    p2 = ExteriorProblem(grid, mesh, s, coeffs2.A, coeffs2.q)
    u1 = p1.solve(g1, TimeScheme.CAPUTO)
    m1 = p1.dirichlet_to_neumann(u1, NodeClass.W2)
    m2 = p2.dirichlet_to_neumann(p2.solve(g1, TimeScheme.CAPUTO), NodeClass.W2)
    u2_star = p2.solve_dual(g2)
    vol = grid.cell_volume
    weights = mesh.trapezoid_weights()
    g2_w2 = g2.window_values(NodeClass.W2)
    lhs = float(np.sum((m1 - m2) * g2_w2 * (vol * weights)[None, :]))

    q1 = np.zeros((grid.n_omega, mesh.size)) if coeffs1.q is None else coeffs1.q.omega_values
    q2 = np.zeros((grid.n_omega, mesh.size)) if coeffs2.q is None else coeffs2.q.omega_values
    rhs = 0.0
    for n in range(mesh.size):
        g_mat = vol * (p1.operators[n].matrix - p2.operators[n].matrix)
        magnetic = u2_star.values[:, n] @ g_mat @ u1.values[:, n]
        electric = vol * np.sum((q2[:, n] - q1[:, n]) * u1.omega_values[:, n] * u2_star.omega_values[:, n])
        rhs += weights[n] * (magnetic - electric)
    return lhs, float(rhs)
