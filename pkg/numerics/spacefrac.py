"""
Fractional Laplacian and its magnetic variant on a box lattice

The base operator uses a midpoint rule over every box cell except the node's
own, a second-order Taylor correction on the self cell and an analytic tail
for the region outside the box. The magnetic operator multiplies the
off-diagonal entries by cos(d . A(midpoint)), which is 1 whenever the
midpoint lies outside Omega.
"""
import logging
import math
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.integrate import quad
from scipy.linalg import eigh, svdvals
from scipy.spatial.distance import cdist

from models.fields import MagneticPotential, SpaceTimeField
from models.operators import BilinearForm, FormConstants, NonlocalOperator
from models.space_grid import NodeClass, SpaceGrid
from models.time_mesh import TimeMesh
from numerics.errors import DomainError, GeometryError
from numerics.special import gamma

logger = logging.getLogger(__name__)

_ROW_CHUNK = 512


def _check_s(s: float) -> None:
    if not (0.0 < s < 1.0):
        raise DomainError(f"Spatial order s must lie in (0, 1), got {s}")


def c_ns(n: int, s: float) -> float:
    """Normalization 4^s Gamma(n/2 + s) / (pi^(n/2) |Gamma(-s)|)"""
    _check_s(s)
    return 4.0 ** s * gamma(0.5 * n + s) / (math.pi ** (0.5 * n) * abs(gamma(-s)))


def self_cell_integral(n: int, s: float, h: float) -> float:
    """Integral of |z|^(2 - n - 2s) over the cell [-h/2, h/2]^n"""
    half = 0.5 * h
    p = 2.0 - 2.0 * s
    if n == 1:
        return 2.0 * half ** p / p
    value, _ = quad(lambda phi: (half / math.cos(phi)) ** p / p, 0.0, 0.25 * math.pi)
    return 8.0 * value


def far_field_tail(grid: SpaceGrid, s: float) -> np.ndarray:
    """Integral of |x - y|^(-n - 2s) over y outside the lattice cover of the box"""
    b = grid.half_width + 0.5 * grid.h
    pts = grid.active_points
    if grid.dim == 1:
        x = pts[:, 0]
        return ((b - x) ** (-2.0 * s) + (b + x) ** (-2.0 * s)) / (2.0 * s)
    tail = np.zeros(len(pts))
    for i, (x1, x2) in enumerate(pts):
        total = 0.0
        for d, lo, hi in ((b - x1, -b - x2, b - x2), (b + x1, -b + x2, b + x2),
                          (b - x2, -b + x1, b + x1), (b + x2, -b - x1, b - x1)):
            angle_lo, angle_hi = math.atan2(lo, d), math.atan2(hi, d)
            value, _ = quad(lambda phi: math.cos(phi) ** (2.0 * s), angle_lo, angle_hi)
            total += d ** (-2.0 * s) * value
        tail[i] = total / (2.0 * s)
    return tail


@lru_cache(maxsize=16)
def _base_assembly(grid: SpaceGrid, s: float):
    n = grid.dim
    h = grid.h
    vol = grid.cell_volume
    n_act = grid.n_active
    row_mass = np.zeros(n_act)
    k_active = np.zeros((n_act, n_act))
    for start in range(0, n_act, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n_act)
        dist = cdist(grid.active_points[start:stop], grid.box_points)
        with np.errstate(divide="ignore"):
            kern = np.where(dist > 0.0, dist, np.inf) ** (-n - 2.0 * s)
        row_mass[start:stop] = vol * kern.sum(axis=1)
        k_active[start:stop] = vol * kern[:, grid.box_index]

    kappa = self_cell_integral(n, s, h) / (2.0 * n * h * h)
    nbr = grid.neighbor_table()
    nbr_active = np.where(nbr >= 0, grid.active_of_box[np.maximum(nbr, 0)], -1)
    tail_far = far_field_tail(grid, s)

    off = k_active.copy()
    rows = np.arange(n_act)
    for k in range(2 * n):
        present = nbr_active[:, k] >= 0
        off[rows[present], nbr_active[present, k]] += kappa
    n_inactive = np.sum(nbr_active < 0, axis=1)
    diag = row_mass + 2.0 * n * kappa + tail_far
    tail = row_mass - k_active.sum(axis=1) + kappa * n_inactive + tail_far
    return off, diag, tail


def _operator_from_parts(grid: SpaceGrid, s: float, off: np.ndarray, diag: np.ndarray,
                         tail: np.ndarray, t_index: Optional[int]) -> NonlocalOperator:
    c = c_ns(grid.dim, s)
    matrix = -c * off
    np.fill_diagonal(matrix, c * diag)
    return NonlocalOperator(grid=grid, s=s, c_ns=c, matrix=matrix, tail=c * tail, t_index=t_index)


def interpolation_matrix(grid: SpaceGrid, points: np.ndarray) -> sparse.csr_matrix:
    """Multilinear interpolation from Omega nodal values to arbitrary points

    Lattice nodes outside Omega carry the value 0.
    """
    m = grid.n_per_axis
    idx_f = (points + grid.half_width) / grid.h
    base = np.clip(np.floor(idx_f).astype(int), 0, m - 2)
    frac = idx_f - base
    rows, cols, vals = [], [], []
    for corner in np.ndindex(*([2] * grid.dim)):
        offs = np.asarray(corner)
        weight = np.prod(np.where(offs == 1, frac, 1.0 - frac), axis=1)
        multi = base + offs
        flat = np.ravel_multi_index(multi.T, (m,) * grid.dim)
        act = grid.active_of_box[flat]
        keep = (act >= 0) & (act < grid.n_omega) & (weight != 0.0)
        rows.append(np.flatnonzero(keep))
        cols.append(act[keep])
        vals.append(weight[keep])
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(len(points), grid.n_omega))


@lru_cache(maxsize=16)
def _magnetic_pairs(grid: SpaceGrid):
    """Active pairs i < j whose midpoint lies in the open ball, with offsets and interpolation"""
    pts = grid.active_points
    i_idx, j_idx = np.triu_indices(grid.n_active, k=1)
    mids = 0.5 * (pts[i_idx] + pts[j_idx])
    inside = grid.in_omega_ball(mids)
    i_idx, j_idx, mids = i_idx[inside], j_idx[inside], mids[inside]
    offsets = pts[j_idx] - pts[i_idx]
    return i_idx, j_idx, offsets, interpolation_matrix(grid, mids)


def magnetic_modulation(grid: SpaceGrid, A: MagneticPotential, k: int):
    """Pair indices and cos(|d . A(midpoint, t_k)|) for every pair with midpoint in Omega"""
    i_idx, j_idx, offsets, interp = _magnetic_pairs(grid)
    a_mid = interp @ A.at(k)
    phase = np.abs(np.sum(offsets * a_mid, axis=1))
    return i_idx, j_idx, np.cos(phase), phase


def assemble_operator(grid: SpaceGrid, s: float, A: Optional[MagneticPotential] = None,
                      t_index: int = 0) -> NonlocalOperator:
    """Assemble (-Delta)^s_A on the active nodes at time node ``t_index``"""
    _check_s(s)
    if grid.h >= 2.0 * grid.half_width:
        raise GeometryError("Grid spacing is not below the box diameter")
    off, diag, tail = _base_assembly(grid, s)
    if A is None or A.is_zero:
        return _operator_from_parts(grid, s, off, diag, tail, t_index)
    if A.grid.geometry_hash != grid.geometry_hash:
        raise GeometryError("Magnetic potential lives on a different grid")
    if not 0 <= t_index < A.mesh.size:
        raise DomainError(f"Time index {t_index} outside 0..{A.mesh.size - 1}")
    i_idx, j_idx, factor, _ = magnetic_modulation(grid, A, t_index)
    off = off.copy()
    off[i_idx, j_idx] *= factor
    off[j_idx, i_idx] *= factor
    return _operator_from_parts(grid, s, off, diag, tail, t_index)


def assemble_fractional_laplacian(grid: SpaceGrid, s: float) -> NonlocalOperator:
    return assemble_operator(grid, s, None)


def assemble_magnetic_operator(grid: SpaceGrid, s: float, A: MagneticPotential,
                               t_index: int) -> NonlocalOperator:
    if not 0 <= t_index < A.mesh.size:
        raise DomainError(f"Time index {t_index} outside 0..{A.mesh.size - 1}")
    return assemble_operator(grid, s, A, t_index)


def assemble_operator_family(grid: SpaceGrid, s: float, A: Optional[MagneticPotential],
                             mesh: TimeMesh) -> List[NonlocalOperator]:
    """One operator per time node; static potentials share a single assembly"""
    if A is None or A.is_zero or A.is_static:
        op = assemble_operator(grid, s, A, 0)
        return [op] * mesh.size
    return [assemble_operator(grid, s, A, k) for k in range(mesh.size)]


def exterior_coupling_defect(op_a: NonlocalOperator, op_0: NonlocalOperator) -> float:
    """sup of |L_A - L_0| over entries that touch an exterior node"""
    g = op_a.grid
    diff = np.abs(op_a.matrix - op_0.matrix)
    ext = slice(g.n_omega, g.n_active)
    return float(max(np.max(diff[g.omega, ext], initial=0.0), np.max(diff[ext, :], initial=0.0)))


def bilinear_form(op: NonlocalOperator, q: Optional[np.ndarray] = None) -> BilinearForm:
    q_vec = np.zeros(op.grid.n_omega) if q is None else np.asarray(q, dtype=float)
    return BilinearForm(operator=op, q=q_vec)


def bilinear_eval(form: BilinearForm, u: np.ndarray, v: np.ndarray) -> float:
    return form.evaluate(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def estimate_form_constants(grid: SpaceGrid, s: float, A: Optional[MagneticPotential],
                   q: Optional[SpaceTimeField], mesh: TimeMesh) -> FormConstants:
    """Continuity, coercivity and magnetic perturbation constants over all time nodes

    Norms are the discrete L2(Omega) and H^s norms, with Gram matrices h^n I
    and h^n (I + L_0).
    """
    vol = grid.cell_volume
    base = assemble_operator(grid, s, None)
    l0 = base.omega_block
    n_om = grid.n_omega
    gram_l2 = vol * np.eye(n_om)
    gram_hs = vol * (np.eye(n_om) + l0)
    family = assemble_operator_family(grid, s, A, mesh)
    q_vals = np.zeros((n_om, mesh.size)) if q is None else q.omega_values
    q_sup = float(np.max(np.abs(q_vals))) if q_vals.size else 0.0

    c_a = 0.0
    seen = {}
    for op in family:
        if id(op) not in seen:
            seen[id(op)] = float(np.linalg.norm(op.omega_block - l0, 2))
        c_a = max(c_a, seen[id(op)])
    c2 = 1.0 + q_sup + c_a

    c0, c1 = 0.0, math.inf
    for k, op in enumerate(family):
        form = bilinear_form(op, q_vals[:, k]).omega_matrix()
        eig = eigh(form, gram_hs, eigvals_only=True)
        c0 = max(c0, float(np.max(np.abs(eig))))
        shifted = eigh(form + c2 * gram_l2, gram_hs, eigvals_only=True)
        c1 = min(c1, float(shifted[0]))
    logger.debug(f"Form constants C0={c0:.4g} c1={c1:.4g} c2={c2:.4g} C_A={c_a:.4g}")
    return FormConstants(C0=c0, c1=c1, c2=c2, C_A=c_a)


def ucp_witness(grid: SpaceGrid, s: float, u: np.ndarray, window: NodeClass = NodeClass.W1,
                operator: Optional[NonlocalOperator] = None, eps: float = 1e-300) -> float:
    """||u||_Omega / (||u||_W + ||(-Delta)^s u||_W + eps) for an active-node vector u"""
    op = operator or assemble_operator(grid, s, None)
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_active,):
        raise DomainError(f"Expected an active-node vector of length {grid.n_active}")
    rows = grid.window_slice(window)
    scale = math.sqrt(grid.cell_volume)
    num = scale * np.linalg.norm(u[grid.omega])
    den = scale * (np.linalg.norm(u[rows]) + np.linalg.norm(op.apply(u)[rows]))
    return float(num / (den + eps))


def ucp_condition(grid: SpaceGrid, s: float, window: NodeClass = NodeClass.W1,
                  operator: Optional[NonlocalOperator] = None) -> float:
    """Worst-case UCP witness over Omega-supported vectors, 1 / sigma_min(L_{W, Omega})"""
    op = operator or assemble_operator(grid, s, None)
    block = op.block(grid.window_slice(window), grid.omega)
    sigma = svdvals(block)
    floor = np.finfo(float).eps * sigma[0]
    if len(sigma) < grid.n_omega:
        sigma_min = floor
    else:
        sigma_min = max(float(sigma[-1]), floor)
    return float(1.0 / sigma_min)
