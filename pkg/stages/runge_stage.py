"""
Runge Stage - Exterior controls for an interior target over growing source bases
"""
import warnings
from typing import Any, Dict

import numpy as np
import pandas as pd

from config.experiment import ExperimentConfig
from config.tolerances import CheckKind, get_tolerance
from models.space_grid import NodeClass
from models.stage_result import StageResult
from numerics.dnmap import Flavor, build_source_basis
from numerics.errors import DomainError, IllConditionedWarning
from numerics.forward import ExteriorProblem
from numerics.inversion import RungeSynthesizer
from stages.base_stage import BaseStage, Workbench


class RungeStage(BaseStage):
    """Stage synthesizing forward and dual controls for one recovery cell"""

    def __init__(self):
        super().__init__("runge")

    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        result = StageResult()
        alpha, s = experiment.orders.alpha, experiment.orders.s
        inv = experiment.inversion
        bench = Workbench.from_config(experiment)
        grid, mesh, partition = bench.grid, bench.mesh, bench.partition
        cell = inv.runge_target_cell
        if cell >= partition.n_params or not partition.occupied()[cell]:
            raise DomainError(f"Runge target cell {cell} holds no Omega node")
        target = partition.indicator(cell)
        problem = ExteriorProblem(grid, mesh, s, bench.A, bench.q)
        amplitude = experiment.basis.amplitude
        sizes = range(1, min(experiment.basis.n_space, experiment.basis.n_time) + 1)

        rows = []
        control = None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IllConditionedWarning)
            for n in sizes:
                for flavor, window in ((Flavor.FORWARD, NodeClass.W1), (Flavor.DUAL, NodeClass.W2)):
                    basis = build_source_basis(grid, mesh, window, n, n, amplitude)
                    outcome = RungeSynthesizer(problem, basis, flavor).solve(target, inv.runge_eps)
                    rows.append({"flavor": flavor.value, "n_space": n, "n_time": n,
                                 "n_basis": len(basis), **outcome.summary()})
                    if flavor == Flavor.FORWARD:
                        control = outcome
        for item in caught:
            result.add_warning(str(item.message))

        frame = pd.DataFrame(rows)
        # Tikhonov weighting allows O(sqrt(eps)) growth of the misfit between nested bases
        slack = max(get_tolerance(CheckKind.RUNGE, alpha, s), float(np.sqrt(inv.runge_eps)))
        for flavor in (Flavor.FORWARD, Flavor.DUAL):
            errors = frame.loc[frame["flavor"] == flavor.value, "achieved_error"].to_numpy()
            increase = np.diff(errors) / np.maximum(errors[:-1], 1e-300)
            worst = max(float(np.max(increase, initial=0.0)), 0.0)
            result.add_check(f"{flavor.value}_error_monotone", worst, slack,
                             detail="largest relative increase of the achieved error with basis size")
            result.metrics[f"{flavor.value}_final_error"] = float(errors[-1])

        self.save_table(result, context, "error_vs_basis.csv", frame)
        self.save_field(result, context, "control.bin", control.control.values,
                        {"target_cell": cell, "flavor": "forward", "grid": grid.describe(),
                         "mesh": mesh.describe(), **control.summary()})
        return result
