"""
DN Map Stage - Forward and dual Dirichlet-to-Neumann records
"""
from typing import Any, Dict

import numpy as np
import pandas as pd

from config.experiment import ExperimentConfig
from config.tolerances import CheckKind, get_tolerance
from models.space_grid import NodeClass
from models.stage_result import StageResult
from numerics.dnmap import Flavor, add_measurement_noise, assemble_dn, duality_residual
from numerics.forward import ExteriorProblem
from stages.base_stage import BaseStage, Workbench
from stages.records import save_record

FORWARD_RECORD = "forward.bin"
DUAL_RECORD = "dual.bin"
NOISY_RECORD = "forward_noisy.bin"


class DNMapStage(BaseStage):
    """Stage assembling the DN records every inversion reads"""

    def __init__(self):
        super().__init__("dnmap")

    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        result = StageResult()
        alpha, s = experiment.orders.alpha, experiment.orders.s
        threads = context.get("threads")
        bench = Workbench.from_config(experiment)
        grid, mesh = bench.grid, bench.mesh
        problem = ExteriorProblem(grid, mesh, s, bench.A, bench.q)

        forward = assemble_dn(grid, mesh, s, bench.A, bench.q, bench.basis(NodeClass.W1),
                              Flavor.FORWARD, threads, problem)
        dual = assemble_dn(grid, mesh, s, bench.A, bench.q, bench.basis(NodeClass.W2),
                           Flavor.DUAL, threads, problem)
        self._save(result, context, FORWARD_RECORD, forward)
        self._save(result, context, DUAL_RECORD, dual)
        result.add_processing_step(self.name, "records_assembled",
                                   f"{forward.n_sources} forward and {dual.n_sources} dual sources")

        residual = duality_residual(forward, dual)
        result.add_check("duality", residual, get_tolerance(CheckKind.DUALITY, alpha, s))

        if bench.A is not None and not bench.A.is_zero:
            mirrored = assemble_dn(grid, mesh, s, bench.A.negated(), bench.q, forward.basis,
                                   Flavor.FORWARD, threads)
            gap = float(np.max(np.abs(mirrored.measurements - forward.measurements)))
            result.add_check("gauge", gap, get_tolerance(CheckKind.GAUGE, alpha, s),
                             detail="records of A and -A")

        level = experiment.noise.level
        if level > 0.0:
            seed = context.get("seed", experiment.noise.seed)
            noisy = add_measurement_noise(forward, level, seed)
            self._save(result, context, NOISY_RECORD, noisy)
            result.metrics["noise"] = {"level": level, "seed": seed}

        peaks = pd.DataFrame({
            "source": np.arange(forward.n_sources),
            "forward_peak": np.max(np.abs(forward.measurements), axis=(1, 2)),
            "dual_peak": np.max(np.abs(dual.measurements), axis=(1, 2)),
        })
        self.save_table(result, context, "record_peaks.csv", peaks)
        result.metrics["duality_residual"] = residual
        return result

    def _save(self, result: StageResult, context: Dict[str, Any], filename: str, record) -> None:
        path = self.stage_dir(context) / filename
        result.add_artifact(f"{self.artifact}/{filename}", save_record(path, record))
