"""
Invert A Stage - Recovers the magnetic potential up to sign, then q with the recovered A
"""
from typing import Any, Dict

import numpy as np

from config.experiment import ExperimentConfig
from config.tolerances import CheckKind, get_tolerance
from models.fields import MagneticPotential
from models.stage_result import StageResult
from numerics.errors import GeometryError
from numerics.inversion import recover_A
from stages.base_stage import BaseStage, Workbench
from stages.invert_q_stage import cell_table, load_forward_record, recover_potential


class InvertAStage(BaseStage):
    """Stage recovering A with q known, followed by the joint q recovery"""

    def __init__(self):
        super().__init__("invert_a")

    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        result = StageResult()
        alpha, s = experiment.orders.alpha, experiment.orders.s
        threads = context.get("threads")
        bench = Workbench.from_config(experiment)
        if not bench.grid.magnetic:
            raise GeometryError("Magnetic recovery needs windows outside B(0, 3r); "
                                "the geometry was built with magnetic=False")
        record = load_forward_record(experiment, bench, context, self.stage_type)
        inv = experiment.inversion
        truth = bench.A_cells()

        report = recover_A(record, bench.partition, q=bench.q, regularization=inv.regularization,
                           max_iterations=inv.max_iterations, truth=truth)
        result.add_check("A_recovery_up_to_sign", report.error_vs_truth["A"],
                         get_tolerance(CheckKind.MAGNETIC_RECOVERY, alpha, s),
                         detail="min over the two signs")
        result.metrics["magnetic"] = report.summary()
        recovered = MagneticPotential(bench.grid, bench.mesh, report.estimates["A"])

        header = {"quantity": "A", "method": report.method, "sign_resolved": report.sign_resolved,
                  "grid": bench.grid.describe(), "mesh": bench.mesh.describe()}
        self.save_field(result, context, "A_estimate.bin", recovered.values, header)
        per_cell = report.cell_values["A"]
        estimates = {f"A{k}": per_cell[:, k] for k in range(bench.grid.dim)}
        frame = cell_table(bench.partition, truth[:, 0], **estimates)
        for k in range(1, bench.grid.dim):
            frame[f"truth{k}"] = truth[:, k]
        self.save_table(result, context, "cells.csv", frame)
        fields = {"A": "A_estimate.bin"}
        documents = {"magnetic": report.summary()}

        if experiment.coefficients.q.kind != "zero":
            joint = recover_potential(record, experiment, bench, recovered, threads)
            result.add_check("q_recovery_with_recovered_A", joint.error_vs_truth["q"],
                             experiment.inversion.recovery_tolerance)
            result.metrics["joint_q"] = joint.summary()
            self.save_field(result, context, "q_estimate.bin", joint.estimates["q"],
                            {**header, "quantity": "q", "method": joint.method})
            fields["q"] = "q_estimate.bin"
            documents["joint_q"] = joint.summary()
            result.add_processing_step(self.name, "joint_recovery",
                                       f"q residual {joint.residual:.3e} with recovered A")
        else:
            result.add_processing_step(self.name, "joint_recovery", "q is zero; joint stage skipped")

        self.save_document(result, context, "report.json", {"reports": documents, "fields": fields})
        result.metrics["max_abs_A"] = float(np.max(np.abs(per_cell))) if per_cell.size else 0.0
        return result
