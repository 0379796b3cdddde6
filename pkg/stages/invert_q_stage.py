"""
Invert Q Stage - Recovers the electric potential from the forward DN record
"""
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config.experiment import ExperimentConfig
from models.fields import MagneticPotential
from models.recovery import CellPartition, RecoveryReport
from models.space_grid import NodeClass
from models.stage_result import StageResult
from numerics.dnmap import DNRecord
from numerics.inversion import recover_q_linear
from stages.base_stage import BaseStage, Workbench
from stages.dnmap_stage import FORWARD_RECORD, NOISY_RECORD
from stages.records import load_record


def load_forward_record(experiment: ExperimentConfig, bench: Workbench, context: Dict[str, Any],
                        stage: str) -> DNRecord:
    """Forward record written by the dnmap stage; the noisy one when the experiment adds noise"""
    filename = NOISY_RECORD if experiment.noise.level > 0.0 else FORWARD_RECORD
    path = Path(context["out_dir"]) / "dnmap" / filename
    return load_record(path, bench.basis(NodeClass.W1), experiment.orders.s, stage)


def cell_table(partition: CellPartition, truth: np.ndarray, **estimates: np.ndarray) -> pd.DataFrame:
    """Recovered-versus-true values per recovery cell"""
    cells = np.arange(partition.n_params)
    frame = pd.DataFrame({
        "cell": cells,
        "space_cell": cells // partition.n_time,
        "time_cell": cells % partition.n_time,
        "occupied": partition.occupied(),
        "truth": truth,
    })
    for name, values in estimates.items():
        frame[name] = values
    return frame


def peak_cell_distance(partition: CellPartition, truth: np.ndarray, estimate: np.ndarray) -> int:
    """Space-cell distance between the largest true and recovered magnitudes"""
    true_cell = partition.split(int(np.argmax(np.abs(truth))))[0]
    found_cell = partition.split(int(np.argmax(np.abs(estimate))))[0]
    return abs(int(true_cell) - int(found_cell))


def flag_ratio(partition: CellPartition, flagged) -> float:
    """Share of occupied cells whose controls missed their targets"""
    occupied = partition.occupied()
    if not occupied.any():
        return 0.0
    missed = sum(1 for p in flagged if occupied[p])
    return missed / int(occupied.sum())


def recover_potential(record: DNRecord, experiment: ExperimentConfig, bench: Workbench,
                      A: Optional[MagneticPotential], threads: Optional[int],
                      mode: str = "tikhonov") -> RecoveryReport:
    inv = experiment.inversion
    return recover_q_linear(record, bench.partition, A=A, mode=mode,
                            regularization=inv.regularization, noise_level=experiment.noise.level,
                            max_iterations=inv.max_iterations, truth=bench.q_cells(),
                            runge_eps=inv.runge_eps, flag_threshold=inv.control_flag_threshold,
                            threads=threads)


class InvertQStage(BaseStage):
    """Stage recovering q with A known"""

    def __init__(self):
        super().__init__("invert_q")

    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        result = StageResult()
        threads = context.get("threads")
        bench = Workbench.from_config(experiment)
        record = load_forward_record(experiment, bench, context, self.stage_type)
        truth = bench.q_cells()

        report = recover_potential(record, experiment, bench, bench.A, threads)
        error = report.error_vs_truth["q"]
        if experiment.noise.level == 0.0:
            result.add_check("q_recovery", error, experiment.inversion.recovery_tolerance,
                             detail=f"relative L2 over {int(bench.partition.occupied().sum())} cells")
        else:
            result.metrics["noisy_error"] = error
        result.metrics["tikhonov"] = report.summary()

        runge = recover_potential(record, experiment, bench, bench.A, threads, mode="runge")
        result.metrics["runge"] = runge.summary()
        result.add_check("runge_flag_ratio", flag_ratio(bench.partition, runge.flagged_cells),
                         experiment.inversion.runge_flag_ratio,
                         detail=f"controls above {experiment.inversion.control_flag_threshold} relative error")
        if runge.flagged_cells:
            result.add_warning(f"Runge controls missed their targets on cells {runge.flagged_cells}")
        for note in report.warnings + runge.warnings:
            result.add_warning(note)

        if experiment.noise.level > 0.0:
            peak_true = int(np.argmax(np.abs(truth)))
            peak_found = int(np.argmax(np.abs(report.cell_values["q"])))
            result.metrics["peak_cells"] = {"truth": peak_true, "recovered": peak_found}
            distance = peak_cell_distance(bench.partition, truth, report.cell_values["q"])
            result.add_check("q_noisy_peak", distance, 1.0,
                             detail=f"space cells between true and recovered peak at noise {experiment.noise.level}")

        header = {"quantity": "q", "method": report.method, "grid": bench.grid.describe(),
                  "mesh": bench.mesh.describe()}
        self.save_field(result, context, "q_estimate.bin", report.estimates["q"], header)
        self.save_table(result, context, "cells.csv",
                        cell_table(bench.partition, truth, tikhonov=report.cell_values["q"],
                                   runge=runge.cell_values["q"]))
        self.save_document(result, context, "report.json",
                           {"report": report.summary(), "runge": runge.summary(),
                            "fields": {"q": "q_estimate.bin"}})
        return result
