"""
Runge approximation and coefficient recovery from DN records

Recoveries work in the piecewise-constant parameter space of a CellPartition.
The potential q is fitted by regularized Gauss-Newton with sensitivity-solve
Jacobians; the magnetic potential goes through a linear stage for A A^T and a
bounded nonlinear least-squares refinement; semilinear coefficients are
peeled off one power at a time from records at a ladder of source scales.
"""
import itertools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, lstsq, svd
from scipy.optimize import least_squares

from config.settings import settings
from models.fields import MagneticPotential, SemilinearSpec, SpaceTimeField
from models.recovery import CellPartition, ControlResult, RecoveryReport
from models.space_grid import NodeClass
from numerics.dnmap import (
    DNRecord, Flavor, SourceBasis, assemble_semilinear_dn, measure, noise_norm,
)
from numerics.errors import BranchAmbiguityError, IllConditionedWarning, LabError, StageBlockedError
from numerics.forward import ExteriorProblem, TimeScheme, solve_sensitivity
from numerics.spacefrac import _magnetic_pairs, assemble_operator

logger = logging.getLogger(__name__)

_MOROZOV_FACTOR = 1.1
_IRGN_DECAY = 0.5
_IRGN_MIN_ITERATIONS = 40


@dataclass
class ControlProblem:
    """Interior target to be reached by an exterior control on one window"""
    target: np.ndarray
    flavor: Flavor = Flavor.FORWARD
    eps: float = 1e-10


def _root_of_gram(gram: np.ndarray) -> np.ndarray:
    vals, vecs = eigh(gram)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


class RungeSynthesizer:
    """Interior states of every basis source, reused across control targets"""

    def __init__(self, problem: ExteriorProblem, basis: SourceBasis, flavor: Flavor = Flavor.FORWARD):
        expected = NodeClass.W1 if flavor == Flavor.FORWARD else NodeClass.W2
        if basis.window != expected:
            raise LabError(f"{flavor.value} controls act from {expected.value}")
        self.problem = problem
        self.basis = basis
        self.flavor = flavor
        grid, mesh = problem.grid, problem.mesh
        self.sqrt_w = np.sqrt(np.outer(np.full(grid.n_omega, grid.cell_volume), mesh.trapezoid_weights()))
        states = []
        for g in basis.elements:
            u = problem.solve(g) if flavor == Flavor.FORWARD else problem.solve_dual(g)
            states.append((u.omega_values * self.sqrt_w).ravel())
        self.states = np.stack(states, axis=1)
        self.gram = basis.gram()
        self.penalty = _root_of_gram(self.gram)

    def solve(self, target: np.ndarray, eps: float = 1e-10) -> ControlResult:
        y = (np.asarray(target, dtype=float) * self.sqrt_w).ravel()
        s_mat = self.states
        normal = s_mat.T @ s_mat
        eps_eff = eps * np.trace(normal) / max(np.trace(self.gram), np.finfo(float).tiny)
        stacked = np.vstack([s_mat, math.sqrt(eps_eff) * self.penalty])
        rhs = np.concatenate([y, np.zeros(len(self.basis))])
        coeffs, _, _, _ = lstsq(stacked, rhs)
        condition = float(np.linalg.cond(normal + eps_eff * self.gram))
        ill = condition > settings.COND_WARN
        if ill:
            message = f"Runge normal equations have condition number {condition:.3e}"
            logger.warning(message)
            warnings.warn(message, IllConditionedWarning, stacklevel=2)
        y_norm = float(np.linalg.norm(y))
        misfit = float(np.linalg.norm(s_mat @ coeffs - y))
        error = misfit / y_norm if y_norm > 0.0 else misfit
        return ControlResult(control=self.basis.combine(coeffs), coefficients=coeffs,
                             achieved_error=error, condition=condition, regularization=eps_eff,
                             ill_conditioned=ill)


def runge_control(control: ControlProblem, problem: ExteriorProblem, basis: SourceBasis) -> ControlResult:
    """Least-squares exterior control whose interior state approximates the target"""
    return RungeSynthesizer(problem, basis, control.flavor).solve(control.target, control.eps)


def _tikhonov_step(jac: np.ndarray, resid: np.ndarray, regularization: float) -> Tuple[np.ndarray, float]:
    """Regularized Gauss-Newton step with the parameter taken relative to sigma_max^2"""
    u_mat, sig, vt = svd(jac, full_matrices=False)
    beta = u_mat.T @ resid
    scale = float(sig[0] ** 2) if sig.size and sig[0] > 0.0 else 1.0
    lam = regularization * scale
    step = vt.T @ (sig / (sig ** 2 + lam) * beta)
    return step, regularization


def _discrepancy_reached(jac: np.ndarray, resid: np.ndarray, noise: float) -> bool:
    """Morozov test on the nonlinear residual, or on its component in the range of the Jacobian

    White noise of norm delta carries about delta * sqrt(rank / m) into a
    rank-dimensional range.
    """
    if float(np.linalg.norm(resid)) <= _MOROZOV_FACTOR * noise:
        return True
    u_mat, sig, _ = svd(jac, full_matrices=False)
    rank = int(np.sum(sig > sig[0] * 1e-12)) if sig.size and sig[0] > 0.0 else 0
    if rank == 0:
        return False
    projected = float(np.linalg.norm(u_mat[:, :rank].T @ resid))
    return projected <= _MOROZOV_FACTOR * noise * math.sqrt(rank / resid.size)


def _irgn_step(jac: np.ndarray, resid: np.ndarray, theta: np.ndarray, lam: float) -> np.ndarray:
    """Minimizer of |J s - r|^2 + lam |theta + s|^2, the iteratively regularized Gauss-Newton update"""
    root = math.sqrt(lam)
    stacked = np.vstack([jac, root * np.eye(jac.shape[1])])
    rhs = np.concatenate([resid, -root * theta])
    step, _, _, _ = lstsq(stacked, rhs)
    return step


def _weighted(measurements: np.ndarray, record: DNRecord) -> np.ndarray:
    return (measurements * np.sqrt(record.pairing_weights())[None, None, :]).ravel()


def _relative_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    denom = float(np.linalg.norm(truth))
    diff = float(np.linalg.norm(estimate - truth))
    return diff / denom if denom > 0.0 else diff


class PotentialFit:
    """Gauss-Newton fit of q in a cell partition against a forward DN record"""

    def __init__(self, data: DNRecord, partition: CellPartition, A: Optional[MagneticPotential] = None,
                 q_ref: Optional[SpaceTimeField] = None, threads: Optional[int] = None):
        if data.flavor != Flavor.FORWARD:
            raise LabError("Potential recovery takes a forward record")
        self.data = data
        self.partition = partition
        self.A = A
        self.q_ref = q_ref
        self.threads = threads
        grid, mesh = data.grid, data.mesh
        self.base = ExteriorProblem(grid, mesh, data.s, A, None)
        self.occupied = partition.occupied()

    def problem_for(self, theta: np.ndarray) -> ExteriorProblem:
        values = self.partition.expand(theta)
        if self.q_ref is not None:
            values = values + self.q_ref.omega_values
        q = SpaceTimeField.on_omega(self.data.grid, self.data.mesh, values)
        return ExteriorProblem(self.data.grid, self.data.mesh, self.data.s, self.A, q,
                               operators=self.base.operators)

    def model(self, theta: np.ndarray) -> Tuple[ExteriorProblem, List[SpaceTimeField], np.ndarray]:
        problem = self.problem_for(theta)
        states = [problem.solve(g, TimeScheme.CAPUTO) for g in self.data.basis.elements]
        meas = np.stack([problem.dirichlet_to_neumann(u, NodeClass.W2) for u in states])
        return problem, states, meas

    def jacobian(self, problem: ExteriorProblem, states: List[SpaceTimeField]) -> np.ndarray:
        n_data = self.data.measurements.size
        jac = np.zeros((n_data, self.partition.n_params))
        for p in np.flatnonzero(self.occupied):
            ind = self.partition.indicator(p)
            blocks = []
            for u in states:
                du = solve_sensitivity(problem, u, ind)
                blocks.append(problem.dirichlet_to_neumann(du, NodeClass.W2))
            jac[:, p] = _weighted(np.stack(blocks), self.data)
        return jac

    def run(self, regularization: float = 1e-10, noise_level: float = 0.0,
            max_iterations: int = 8) -> Tuple[np.ndarray, float, int, float]:
        """Gauss-Newton on clean data; iteratively regularized Gauss-Newton with a discrepancy stop on noisy data"""
        if noise_level > 0.0:
            return self._run_noisy(noise_norm(self.data, noise_level), max_iterations)
        theta = np.zeros(self.partition.n_params)
        target = self.data.weighted_vector()
        iterations = 0
        for iterations in range(1, max_iterations + 1):
            problem, states, meas = self.model(theta)
            resid = target - _weighted(meas, self.data)
            step, _ = _tikhonov_step(self.jacobian(problem, states), resid, regularization)
            theta = theta + step
            logger.debug(f"Gauss-Newton iteration {iterations}: |r|={np.linalg.norm(resid):.3e}")
            if np.linalg.norm(step) <= 1e-8 * (1.0 + np.linalg.norm(theta)):
                break
        return theta, self._relative_residual(theta, target), iterations, regularization

    def _run_noisy(self, noise: float, max_iterations: int) -> Tuple[np.ndarray, float, int, float]:
        theta = np.zeros(self.partition.n_params)
        target = self.data.weighted_vector()
        scale = None
        relative = used = 1.0
        iterations = 0
        for iterations in range(1, max(max_iterations, _IRGN_MIN_ITERATIONS) + 1):
            problem, states, meas = self.model(theta)
            resid = target - _weighted(meas, self.data)
            jac = self.jacobian(problem, states)
            if _discrepancy_reached(jac, resid, noise):
                logger.info(f"Discrepancy reached after {iterations - 1} regularized steps")
                break
            if scale is None:
                sig_max = float(np.linalg.norm(jac, 2))
                scale = sig_max ** 2 if sig_max > 0.0 else 1.0
            theta = theta + _irgn_step(jac, resid, theta, relative * scale)
            used = relative
            logger.debug(f"Regularized Gauss-Newton iteration {iterations}: |r|={np.linalg.norm(resid):.3e}, "
                         f"lambda={relative:.2e}")
            relative *= _IRGN_DECAY
        return theta, self._relative_residual(theta, target), iterations, used

    def _relative_residual(self, theta: np.ndarray, target: np.ndarray) -> float:
        _, _, meas = self.model(theta)
        final = float(np.linalg.norm(target - _weighted(meas, self.data)))
        scale = float(np.linalg.norm(target))
        return final / scale if scale > 0.0 else final


def _runge_estimate(fit: PotentialFit, eps: float, threshold: float) -> Tuple[np.ndarray, List[int], List[str]]:
    """Cell averages of q - q_ref from controls steered to cell indicators and to 1"""
    data = fit.data
    grid, mesh = data.grid, data.mesh
    reference = fit.problem_for(np.zeros(fit.partition.n_params))
    fwd_basis = data.basis
    dual_basis = SourceBasis(grid, mesh, NodeClass.W2, fwd_basis.n_space, fwd_basis.n_time,
                             fwd_basis.amplitude)
    model = np.stack([measure(reference, g, Flavor.FORWARD) for g in fwd_basis.elements])
    diff = model - data.measurements
    pairing = np.array([[float(np.sum(diff[i] * dual_basis.element_values(j)
                                      * data.pairing_weights()[None, :]))
                         for j in range(len(dual_basis))] for i in range(len(fwd_basis))])

    notes: List[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IllConditionedWarning)
        fwd = RungeSynthesizer(reference, fwd_basis, Flavor.FORWARD)
        dual = RungeSynthesizer(reference, dual_basis, Flavor.DUAL)
        ones = dual.solve(np.ones((grid.n_omega, mesh.size)), eps)
        estimate = np.full(fit.partition.n_params, np.nan)
        flagged: List[int] = []
        for p in range(fit.partition.n_params):
            measure_p = fit.partition.measure(p)
            if measure_p == 0.0:
                flagged.append(p)
                continue
            ctrl = fwd.solve(fit.partition.indicator(p), eps)
            if max(ctrl.achieved_error, ones.achieved_error) > threshold:
                flagged.append(p)
                continue
            estimate[p] = -float(ctrl.coefficients @ pairing @ ones.coefficients) / measure_p
    if caught:
        notes.append(f"{len(caught)} Runge solves exceeded the condition threshold")
    return estimate, flagged, notes


def recover_q_linear(data: DNRecord, partition: CellPartition, A: Optional[MagneticPotential] = None,
                     q_ref: Optional[SpaceTimeField] = None, mode: str = "tikhonov",
                     regularization: float = 1e-10, noise_level: float = 0.0, max_iterations: int = 8,
                     truth: Optional[np.ndarray] = None, runge_eps: float = 1e-10,
                     flag_threshold: Optional[float] = None, threads: Optional[int] = None) -> RecoveryReport:
    """Recover q - q_ref cell by cell from a forward DN record

    ``mode='tikhonov'`` runs regularized Gauss-Newton, with the discrepancy
    principle when ``noise_level`` is positive; ``mode='runge'`` evaluates
    the integral identity on synthesized controls and reports NaN for cells
    whose controls miss their targets.
    """
    fit = PotentialFit(data, partition, A, q_ref, threads)
    if mode == "tikhonov":
        theta, residual, iterations, lam = fit.run(regularization, noise_level, max_iterations)
        report = RecoveryReport(method="tikhonov", estimates={"q": partition.expand(theta)},
                                cell_values={"q": theta}, residual=residual, iterations=iterations,
                                regularization=lam)
    elif mode == "runge":
        threshold = flag_threshold if flag_threshold is not None else settings.CONTROL_FLAG_THRESHOLD
        theta, flagged, notes = _runge_estimate(fit, runge_eps, threshold)
        report = RecoveryReport(method="runge", estimates={"q": partition.expand(np.nan_to_num(theta))},
                                cell_values={"q": theta}, residual=float("nan"),
                                regularization=runge_eps, flagged_cells=flagged, warnings=notes)
    else:
        raise LabError(f"Unknown recovery mode '{mode}'")
    if truth is not None:
        mask = partition.occupied() & np.isfinite(report.cell_values["q"])
        report.error_vs_truth["q"] = _relative_error(report.cell_values["q"][mask], np.asarray(truth)[mask])
    logger.info(f"Recovered q ({report.method}) with residual {report.residual:.3e}")
    return report


class MagneticFit:
    """Bounded least-squares fit of a cell-wise constant magnetic potential"""

    def __init__(self, data: DNRecord, partition: CellPartition, q: Optional[SpaceTimeField] = None):
        if data.flavor != Flavor.FORWARD:
            raise LabError("Magnetic recovery takes a forward record")
        self.data = data
        self.partition = partition
        self.q = q
        grid = data.grid
        self.dim = grid.dim
        self.base_op = assemble_operator(grid, data.s, None)
        i_idx, j_idx, offsets, interp = _magnetic_pairs(grid)
        self.pairs = (i_idx, j_idx)
        self.offsets = offsets
        membership = np.zeros((grid.n_omega, partition.n_space))
        membership[np.arange(grid.n_omega), partition.space_labels] = 1.0
        self.cell_weights = np.asarray(interp @ membership)
        self.l0_pairs = self.base_op.matrix[i_idx, j_idx]
        self._cache: Dict[bytes, Tuple] = {}

    @property
    def n_params(self) -> int:
        return self.partition.n_params * self.dim

    def potential(self, theta: np.ndarray) -> MagneticPotential:
        grid, mesh = self.data.grid, self.data.mesh
        per_cell = np.asarray(theta).reshape(self.partition.n_params, self.dim)
        comps = [self.partition.expand(per_cell[:, k]) for k in range(self.dim)]
        values = np.stack(comps, axis=-1).transpose(1, 0, 2)
        return MagneticPotential(grid, mesh, values)

    def _pair_potential(self, theta: np.ndarray, n: int) -> np.ndarray:
        per_cell = np.asarray(theta).reshape(self.partition.n_space, self.partition.n_time, self.dim)
        j = self.partition.time_labels[n]
        return self.cell_weights @ per_cell[:, j, :]

    def model(self, theta: np.ndarray):
        key = np.asarray(theta, dtype=float).tobytes()
        if key not in self._cache:
            grid, mesh = self.data.grid, self.data.mesh
            problem = ExteriorProblem(grid, mesh, self.data.s, self.potential(theta), self.q)
            states = [problem.solve(g, TimeScheme.CAPUTO) for g in self.data.basis.elements]
            meas = np.stack([problem.dirichlet_to_neumann(u, NodeClass.W2) for u in states])
            self._cache = {key: (problem, states, meas)}
        return self._cache[key]

    def residual(self, theta: np.ndarray) -> np.ndarray:
        _, _, meas = self.model(theta)
        return _weighted(meas, self.data) - self.data.weighted_vector()

    def _perturbation_response(self, problem: ExteriorProblem, states: List[SpaceTimeField],
                               pair_delta: Callable[[int], np.ndarray]) -> np.ndarray:
        """DN response to a perturbation of the pair entries; pair_delta(n) gives dL on the pairs"""
        grid, mesh = self.data.grid, self.data.mesh
        i_idx, j_idx = self.pairs
        w2 = grid.w2
        deltas = [pair_delta(n) for n in range(mesh.size)]
        blocks = []
        for u in states:
            src = np.zeros((grid.n_omega, mesh.size))
            direct = np.zeros((grid.n_w2, mesh.size))
            for n, delta in enumerate(deltas):
                if not np.any(delta):
                    continue
                d_mat = np.zeros((grid.n_active, grid.n_active))
                d_mat[i_idx, j_idx] = delta
                d_mat[j_idx, i_idx] = delta
                du_n = d_mat @ u.values[:, n]
                src[:, n] = -du_n[grid.omega]
                direct[:, n] = du_n[w2]
            du = problem.solve_source(src, TimeScheme.CAPUTO)
            blocks.append(problem.dirichlet_to_neumann(du, NodeClass.W2) + direct)
        return _weighted(np.stack(blocks), self.data)

    def jacobian(self, theta: np.ndarray) -> np.ndarray:
        problem, states, _ = self.model(theta)
        jac = np.zeros((self.data.measurements.size, self.n_params))
        occupied = self.partition.occupied()
        for p in range(self.partition.n_params):
            if not occupied[p]:
                continue
            c, j = self.partition.split(p)
            for k in range(self.dim):
                def pair_delta(n: int, c=c, j=j, k=k) -> np.ndarray:
                    if self.partition.time_labels[n] != j:
                        return np.zeros(len(self.l0_pairs))
                    phase = np.sum(self.offsets * self._pair_potential(theta, n), axis=1)
                    return -self.l0_pairs * np.sin(phase) * self.offsets[:, k] * self.cell_weights[:, c]
                jac[:, p * self.dim + k] = self._perturbation_response(problem, states, pair_delta)
        return jac

    def quadratic_stage(self, regularization: float) -> Tuple[np.ndarray, float]:
        """Linear fit of S = A A^T per cell from 1 - cos(x) ~ x^2 / 2 around A = 0"""
        zero = np.zeros(self.n_params)
        problem, states, meas = self.model(zero)
        resid = self.data.weighted_vector() - _weighted(meas, self.data)
        components = [(k, l) for k in range(self.dim) for l in range(k, self.dim)]
        n_comp = len(components)
        jac = np.zeros((resid.size, self.partition.n_params * n_comp))
        occupied = self.partition.occupied()
        for p in range(self.partition.n_params):
            if not occupied[p]:
                continue
            c, j = self.partition.split(p)
            for m, (k, l) in enumerate(components):
                mult = 1.0 if k == l else 2.0
                coeff = -0.5 * mult * self.l0_pairs * self.offsets[:, k] * self.offsets[:, l] * self.cell_weights[:, c]

                def pair_delta(n: int, j=j, coeff=coeff) -> np.ndarray:
                    return coeff if self.partition.time_labels[n] == j else np.zeros_like(coeff)
                jac[:, p * n_comp + m] = self._perturbation_response(problem, states, pair_delta)
        s_params, _ = _tikhonov_step(jac, resid, regularization)
        theta = np.zeros(self.n_params)
        for p in range(self.partition.n_params):
            tensor = np.zeros((self.dim, self.dim))
            for m, (k, l) in enumerate(components):
                tensor[k, l] = tensor[l, k] = s_params[p * n_comp + m]
            vals, vecs = np.linalg.eigh(tensor)
            top = max(float(vals[-1]), 0.0)
            theta[p * self.dim:(p + 1) * self.dim] = math.sqrt(top) * vecs[:, -1]
        return _align_signs(theta.reshape(-1, self.dim)).ravel(), float(np.linalg.norm(resid))


def _align_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip cell vectors to agree with the largest one; its first nonzero component is made positive"""
    out = vectors.copy()
    if out.shape[1] == 1:
        return np.abs(out)
    norms = np.linalg.norm(out, axis=1)
    ref = out[int(np.argmax(norms))].copy()
    if not np.any(ref):
        return out
    lead = ref[np.flatnonzero(ref)[0]]
    ref *= np.sign(lead)
    for i in range(len(out)):
        if out[i] @ ref < 0.0:
            out[i] = -out[i]
    return out


def _check_branch(theta: np.ndarray, h: float) -> None:
    if theta.size and h * float(np.max(np.abs(theta))) >= math.pi:
        raise BranchAmbiguityError(
            f"Phase h*|A| = {h * float(np.max(np.abs(theta))):.3f} aliases at every sampled offset"
        )


def recover_A(data: DNRecord, partition: CellPartition, q: Optional[SpaceTimeField] = None,
              regularization: float = 1e-10, max_iterations: int = 8,
              truth: Optional[np.ndarray] = None) -> RecoveryReport:
    """Recover A up to a global sign; truth, if given, has shape (n_params, dim)"""
    fit = MagneticFit(data, partition, q)
    grid = data.grid
    theta0, initial_residual = fit.quadratic_stage(regularization)
    _check_branch(theta0, grid.h)
    bound = math.pi / grid.omega_diameter
    lower = np.zeros(fit.n_params) if fit.dim == 1 else np.full(fit.n_params, -bound)
    upper = np.full(fit.n_params, bound)
    fixed = np.repeat(~partition.occupied(), fit.dim)
    lower[fixed], upper[fixed] = 0.0, 1e-12
    x0 = np.clip(theta0, lower, upper)
    result = least_squares(fit.residual, x0, jac=fit.jacobian, bounds=(lower, upper), method="trf",
                           x_scale="jac", max_nfev=max(4 * max_iterations, 20), xtol=1e-12,
                           ftol=1e-14, gtol=1e-14)
    theta = result.x
    _check_branch(theta, grid.h)
    scale = float(np.linalg.norm(data.weighted_vector()))
    residual = float(np.linalg.norm(result.fun)) / scale if scale > 0.0 else float(np.linalg.norm(result.fun))
    per_cell = theta.reshape(partition.n_params, fit.dim)
    report = RecoveryReport(
        method="quadratic+least_squares",
        estimates={"A": fit.potential(theta).values},
        cell_values={"A": per_cell},
        residual=residual,
        iterations=int(result.nfev),
        regularization=regularization,
        sign_resolved=False,
        stages=[{"stage": "quadratic", "residual": initial_residual},
                {"stage": "least_squares", "status": int(result.status), "cost": float(result.cost)}],
    )
    if truth is not None:
        truth = np.asarray(truth, dtype=float).reshape(partition.n_params, fit.dim)
        report.error_vs_truth["A"] = min(_relative_error(per_cell, truth),
                                         _relative_error(-per_cell, truth))
    logger.info(f"Recovered A up to sign with residual {residual:.3e}")
    return report


def expansion_exponents(powers: Sequence[float], count: int, above: float = 0.0) -> List[float]:
    """Exponents of the small-scale expansion of u_lambda / lambda, shifted by ``above``

    They are the positive sums of the nonlinear powers b_2..b_m, which is where
    the remainder of the lambda expansion lives.
    """
    base = [b for b in powers[1:] if b > 0.0]
    sums = set()
    for order in range(1, count + 3):
        for combo in itertools.combinations_with_replacement(base, order):
            sums.add(round(sum(combo), 12))
    shifted = sorted(e - above for e in sums if e - above > 1e-12)
    return shifted[:count]


def extrapolate_to_zero(lambdas: Sequence[float], values: Sequence[np.ndarray],
                        exponents: Sequence[float]) -> np.ndarray:
    """Least-squares fit of v(lambda) = v0 + sum_j c_j lambda^e_j, returning v0"""
    lam = np.asarray(lambdas, dtype=float)
    design = np.column_stack([np.ones_like(lam)] + [lam ** e for e in exponents])
    stacked = np.stack([np.asarray(v, dtype=float).ravel() for v in values])
    coeffs, _, _, _ = lstsq(design, stacked)
    return coeffs[0].reshape(np.shape(values[0]))


class SemilinearData:
    """Synthetic semilinear DN records at each source scale"""

    def __init__(self, spec: SemilinearSpec, basis: SourceBasis, s: float, threads: Optional[int] = None):
        self.spec = spec
        self.basis = basis
        self.s = s
        self.threads = threads
        self.problem = ExteriorProblem(basis.grid, basis.mesh, s)

    def __call__(self, lam: float) -> DNRecord:
        return assemble_semilinear_dn(self.basis.grid, self.basis.mesh, self.s, self.spec, self.basis,
                                      lam, self.threads, self.problem)


def recover_semilinear(source: Callable[[float], DNRecord], lambdas: Sequence[float],
                       powers: Sequence[float], partition: CellPartition,
                       regularization: float = 1e-10, max_iterations: int = 8,
                       truth: Optional[Sequence[np.ndarray]] = None,
                       threads: Optional[int] = None) -> RecoveryReport:
    """Successive linearization: a_1 from the small-scale limit, then a_k from scaled remainders"""
    lambdas = sorted(float(lam) for lam in lambdas)
    powers = [float(b) for b in powers]
    records = {lam: source(lam) for lam in lambdas}
    first = records[lambdas[0]]
    grid, mesh, s, basis = first.grid, first.mesh, first.s, first.basis
    scaled = [records[lam].measurements / lam for lam in lambdas]

    report = RecoveryReport(method="successive_linearization", estimates={}, cell_values={},
                            residual=0.0, regularization=regularization)
    exps = expansion_exponents(powers, len(lambdas) - 1)
    limit = first.with_measurements(extrapolate_to_zero(lambdas, scaled, exps))
    fit = PotentialFit(limit, partition, threads=threads)
    theta1, residual, iterations, _ = fit.run(regularization, 0.0, max_iterations)
    thetas = [theta1]
    report.stages.append({"stage": "a1", "status": "ok", "residual": residual,
                          "iterations": iterations})
    report.residual = residual
    report.iterations = iterations

    linear = ExteriorProblem(grid, mesh, s, q=partition.field(theta1))
    states = [linear.solve(g, TimeScheme.CAPUTO) for g in basis.elements]
    blocked: Optional[str] = None
    for k in range(1, len(powers)):
        name = f"a{k + 1}"
        if blocked is not None:
            report.stages.append({"stage": name, "status": "blocked", "reason": blocked})
            report.warnings.append(str(StageBlockedError(f"{name} blocked by {blocked}")))
            continue
        try:
            fields = [partition.field(np.maximum(t, 0.0)) for t in thetas]
            known = SemilinearSpec(fields, powers[:k])
            b_k = powers[k]
            remainders = []
            for lam in lambdas:
                model = assemble_semilinear_dn(grid, mesh, s, known, basis, lam, threads)
                remainders.append((records[lam].measurements - model.measurements) / lam ** (1.0 + b_k))
            target = extrapolate_to_zero(lambdas, remainders, expansion_exponents(powers, len(lambdas) - 1, b_k))
            jac = np.zeros((target.size, partition.n_params))
            for p in np.flatnonzero(partition.occupied()):
                ind = partition.indicator(p)
                blocks = []
                for u in states:
                    z = u.omega_values
                    du = linear.solve_source(-ind * np.sign(z) * np.abs(z) ** (b_k + 1.0))
                    blocks.append(linear.dirichlet_to_neumann(du, NodeClass.W2))
                jac[:, p] = _weighted(np.stack(blocks), first)
            rhs = _weighted(target, first)
            theta_k, _ = _tikhonov_step(jac, rhs, regularization)
            stage_resid = float(np.linalg.norm(jac @ theta_k - rhs) / max(np.linalg.norm(rhs), 1e-300))
            thetas.append(theta_k)
            report.stages.append({"stage": name, "status": "ok", "residual": stage_resid})
        except LabError as exc:
            blocked = name
            report.stages.append({"stage": name, "status": "failed", "reason": str(exc)})
            report.warnings.append(f"{name} failed: {exc}")

    for k, theta in enumerate(thetas):
        name = f"a{k + 1}"
        report.cell_values[name] = theta
        report.estimates[name] = partition.expand(theta)
        if truth is not None and k < len(truth):
            report.error_vs_truth[name] = _relative_error(theta, np.asarray(truth[k], dtype=float))
    logger.info(f"Semilinear recovery finished with stages {[st['status'] for st in report.stages]}")
    return report
