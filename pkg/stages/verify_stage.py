"""
Verify Stage - Discrete calculus and operator identity suite
"""
import math
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from config.experiment import ExperimentConfig, build_A, build_grid, build_mesh
from config.tolerances import CheckKind, get_tolerance
from models.fields import MagneticPotential
from models.stage_result import StageResult
from models.time_mesh import TimeMesh, TimeSignal
from numerics.spacefrac import assemble_operator, exterior_coupling_defect
from numerics.special import gamma
from numerics.timefrac import (
    caputo_derivative, convexity_gap, ibp_residual, observed_rate, semigroup_residual,
)
from stages.base_stage import BaseStage

# Meshes of the convergence sweep are multiples of this base size
_BASE_STEPS = 16
_LEVELS = 3
_CAPUTO_STEPS = 64
_MIN_RATE = 0.9
_RANDOM_SIGNALS = 8


def _smooth_signal(mesh: TimeMesh) -> TimeSignal:
    return TimeSignal.from_function(mesh, lambda t: np.cos(2.0 * t) + t)


def convexity_signals(mesh: TimeMesh, seed: int, n_random: int = _RANDOM_SIGNALS) -> List[TimeSignal]:
    """Deterministic and seeded random signals, all starting from u(0) = 0"""
    T = mesh.T
    signals = [
        TimeSignal.from_function(mesh, lambda t: np.sin(2.0 * np.pi * t / T)),
        TimeSignal.from_function(mesh, lambda t: t * np.sin(6.0 * t / T) - 0.3 * t),
    ]
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        values = rng.standard_normal(mesh.size)
        values[0] = 0.0
        signals.append(TimeSignal(mesh, values))
    return signals


def gauge_potential(grid, mesh) -> MagneticPotential:
    """Static potential well inside the aliasing bound, used when the experiment has A = 0"""
    amplitude = 0.5 * math.pi / grid.omega_diameter
    direction = np.ones(grid.dim) / math.sqrt(grid.dim)

    def profile(x: np.ndarray, t: float) -> np.ndarray:
        rho2 = np.sum(x ** 2, axis=1) / grid.r_omega ** 2
        return amplitude * np.maximum(1.0 - rho2, 0.0)[:, None] * direction[None, :]

    return MagneticPotential.from_function(grid, mesh, profile)


class VerifyStage(BaseStage):
    """Stage running the identity suite of the time and space operators"""

    def __init__(self):
        super().__init__("verify")

    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        result = StageResult()
        alpha, s = experiment.orders.alpha, experiment.orders.s
        result.add_processing_step(self.name, "verification_started", f"alpha={alpha}, s={s}")

        seed = context.get("seed")
        rows = self._time_identities(experiment, result, experiment.noise.seed if seed is None else seed)
        self.save_table(result, context, "convergence.csv", pd.DataFrame(rows))
        self._space_identities(experiment, result)

        result.metrics["alpha"] = alpha
        result.metrics["s"] = s
        return result

    def _time_identities(self, experiment: ExperimentConfig, result: StageResult,
                         seed: int) -> List[Dict[str, Any]]:
        alpha, s = experiment.orders.alpha, experiment.orders.s
        T = experiment.time.T
        rows = []
        semigroup, ibp = [], []
        for level in range(_LEVELS):
            mesh = TimeMesh(T=T, N_t=_BASE_STEPS * 2 ** level, alpha=alpha)
            u = _smooth_signal(mesh)
            f = TimeSignal.from_function(mesh, lambda t: 1.0 + t ** 2)
            g = TimeSignal.from_function(mesh, lambda t: np.cos(t))
            semigroup.append(semigroup_residual(u, alpha))
            ibp.append(ibp_residual(f, g, alpha))
            rows.append({"N_t": mesh.N_t, "tau": mesh.tau, "semigroup": semigroup[-1], "ibp": ibp[-1]})
            self.logger.debug(f"N_t={mesh.N_t}: semigroup {semigroup[-1]:.3e}, ibp {ibp[-1]:.3e}")

        result.add_check("semigroup", semigroup[-1], get_tolerance(CheckKind.SEMIGROUP, alpha, s))
        self._rate_check(result, "semigroup_rate", semigroup)
        result.add_check("integration_by_parts", ibp[-1],
                         get_tolerance(CheckKind.INTEGRATION_BY_PARTS, alpha, s))
        self._rate_check(result, "integration_by_parts_rate", ibp)

        mesh = TimeMesh(T=T, N_t=_CAPUTO_STEPS, alpha=alpha)
        power = TimeSignal.from_function(mesh, lambda t: t ** alpha)
        exact = float(gamma(1.0 + alpha))
        late = mesh.nodes >= T / 4.0
        rel = float(np.max(np.abs(caputo_derivative(power, alpha).values[late] - exact)) / exact)
        result.add_check("caputo_power", rel, get_tolerance(CheckKind.CAPUTO_POWER, alpha, s),
                         detail=f"t >= T/4 against Gamma(1 + alpha) at N_t={_CAPUTO_STEPS}")

        signals = convexity_signals(mesh, seed)
        gap = max(convexity_gap(signal, alpha) for signal in signals)
        result.add_check("convexity", max(gap, 0.0), get_tolerance(CheckKind.CONVEXITY, alpha, s),
                         detail=f"{len(signals)} signals with u(0) = 0")
        return rows

    @staticmethod
    def _rate_check(result: StageResult, name: str, residuals: List[float]) -> None:
        rate = observed_rate([max(r, 1e-300) for r in residuals])
        result.add_check(name, rate, _MIN_RATE, passed=rate >= _MIN_RATE,
                         detail=f"mean log2 reduction per halving, at least {_MIN_RATE}")

    def _space_identities(self, experiment: ExperimentConfig, result: StageResult) -> None:
        alpha, s = experiment.orders.alpha, experiment.orders.s
        grid = build_grid(experiment)
        op = assemble_operator(grid, s)
        diag_scale = float(np.max(np.abs(np.diag(op.matrix))))
        result.metrics["active_nodes"] = grid.n_active
        result.metrics["omega_nodes"] = grid.n_omega
        result.add_check("symmetry", op.symmetry_defect() / diag_scale,
                         get_tolerance(CheckKind.SYMMETRY, alpha, s))
        result.add_check("constant_annihilation", op.constant_defect(),
                         get_tolerance(CheckKind.CONSTANT, alpha, s))

        if not grid.magnetic:
            result.add_warning("Geometry is non-magnetic; exterior coupling and gauge checks skipped")
            return
        mesh = build_mesh(experiment)
        A = build_A(experiment, grid, mesh)
        if A is None or A.is_zero:
            A = gauge_potential(grid, mesh)
        op_a = assemble_operator(grid, s, A, 0)
        op_minus = assemble_operator(grid, s, A.negated(), 0)
        result.add_check("exterior_coupling", exterior_coupling_defect(op_a, op),
                         get_tolerance(CheckKind.EXTERIOR_COUPLING, alpha, s))
        result.add_check("gauge", float(np.max(np.abs(op_a.matrix - op_minus.matrix))),
                         get_tolerance(CheckKind.GAUGE, alpha, s))
