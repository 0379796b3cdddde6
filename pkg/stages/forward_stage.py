"""
Forward Stage - Caputo, Riemann-Liouville and dual solves with their certificates
"""
from typing import Any, Dict

import numpy as np
import pandas as pd

from config.experiment import ExperimentConfig
from config.tolerances import CheckKind, get_tolerance
from models.space_grid import NodeClass
from models.stage_result import StageResult
from numerics.forward import ExteriorProblem, TimeScheme, linfinity_certificate
from numerics.spacefrac import estimate_form_constants
from stages.base_stage import BaseStage, Workbench


class ForwardStage(BaseStage):
    """Stage solving the exterior-value problems for the first basis source"""

    def __init__(self):
        super().__init__("forward")

    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        result = StageResult()
        alpha, s = experiment.orders.alpha, experiment.orders.s
        bench = Workbench.from_config(experiment)
        grid, mesh = bench.grid, bench.mesh
        problem = ExteriorProblem(grid, mesh, s, bench.A, bench.q)
        g = bench.basis(NodeClass.W1).element(0)
        h = bench.basis(NodeClass.W2).element(0)

        u = problem.solve(g, TimeScheme.CAPUTO)
        u_rl = problem.solve(g, TimeScheme.RIEMANN_LIOUVILLE)
        u_dual = problem.solve_dual(h)
        result.add_processing_step(self.name, "solves_completed",
                                   f"{grid.n_omega} interior nodes, {mesh.N_t} steps")

        header = {"grid": grid.describe(), "mesh": mesh.describe(), "s": s}
        self.save_field(result, context, "u_caputo.bin", u.values, {**header, "scheme": "caputo"})
        self.save_field(result, context, "u_rl.bin", u_rl.values, {**header, "scheme": "riemann_liouville"})
        self.save_field(result, context, "u_dual.bin", u_dual.values, {**header, "scheme": "dual"})

        certificate = linfinity_certificate(u, None, g)
        result.add_check("certificate", max(certificate.margin - certificate.tolerance, 0.0),
                         get_tolerance(CheckKind.CERTIFICATE, alpha, s),
                         detail=f"barrier peak {certificate.barrier_peak:.4g}")
        result.metrics["certificate"] = certificate.as_dict()

        constants = estimate_form_constants(grid, s, bench.A, bench.q, mesh)
        result.metrics["form_constants"] = constants.as_dict()
        result.add_check("coercivity", constants.c1, 0.0, passed=constants.c1 > 0.0,
                         detail="c1 must be positive")

        center = int(np.argmin(np.linalg.norm(grid.omega_points, axis=1)))
        trace = pd.DataFrame({
            "t": mesh.nodes,
            "caputo": u.omega_values[center],
            "riemann_liouville": u_rl.omega_values[center],
            "dual": u_dual.omega_values[center],
        })
        self.save_table(result, context, "trace.csv", trace)
        self.save_table(result, context, "convergence.csv", self._time_refinement(experiment, u))
        return result

    def _time_refinement(self, experiment: ExperimentConfig, u) -> pd.DataFrame:
        """Self-convergence of the Caputo solve under successive halving of tau"""
        rows = []
        coarse = u
        for factor in (2, 4):
            bench = Workbench.from_config(experiment, N_t=experiment.time.N_t * factor)
            problem = ExteriorProblem(bench.grid, bench.mesh, experiment.orders.s, bench.A, bench.q)
            fine = problem.solve(bench.basis(NodeClass.W1).element(0), TimeScheme.CAPUTO)
            step = fine.mesh.N_t // coarse.mesh.N_t
            gap = np.max(np.abs(fine.omega_values[:, ::step] - coarse.omega_values))
            scale = max(float(np.max(np.abs(fine.omega_values))), 1e-300)
            rows.append({"N_t": coarse.mesh.N_t, "tau": coarse.mesh.tau, "gap": float(gap) / scale})
            self.logger.debug(f"Refinement gap at N_t={coarse.mesh.N_t}: {rows[-1]['gap']:.3e}")
            coarse = fine
        return pd.DataFrame(rows)
