"""
Base stage class for the experiment pipeline
"""
import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config.experiment import (
    ExperimentConfig, build_A, build_grid, build_mesh, build_partition, build_q, cell_parameters,
)
from config.settings import STAGE_CONFIGS, settings
from models.fields import MagneticPotential, SpaceTimeField
from models.recovery import CellPartition
from models.space_grid import NodeClass, SpaceGrid
from models.stage_result import StageResult
from models.time_mesh import TimeMesh
from numerics.dnmap import SourceBasis, build_source_basis
from numerics.errors import LabError
from utils.containers import write_container, write_csv, write_json


@dataclass
class Workbench:
    """Grid, mesh and true coefficients of one experiment"""
    config: ExperimentConfig
    grid: SpaceGrid
    mesh: TimeMesh
    A: Optional[MagneticPotential]
    q: Optional[SpaceTimeField]
    partition: CellPartition

    @classmethod
    def from_config(cls, config: ExperimentConfig, N_t: Optional[int] = None) -> "Workbench":
        grid = build_grid(config)
        mesh = build_mesh(config, N_t)
        return cls(config=config, grid=grid, mesh=mesh, A=build_A(config, grid, mesh),
                   q=build_q(config, grid, mesh), partition=build_partition(config, grid, mesh))

    @property
    def s(self) -> float:
        return self.config.orders.s

    def basis(self, window: NodeClass) -> SourceBasis:
        b = self.config.basis
        return build_source_basis(self.grid, self.mesh, window, b.n_space, b.n_time, b.amplitude)

    def q_cells(self) -> np.ndarray:
        """True cell values of q in the recovery partition"""
        profile = self.config.coefficients.q
        if profile.kind in ("cell", "cells"):
            return cell_parameters(profile, self.partition)
        if self.q is None:
            return np.zeros(self.partition.n_params)
        return self.partition.cell_means(self.q.omega_values)

    def A_cells(self) -> np.ndarray:
        """True cell vectors of A, shape (n_params, dim)"""
        dim = self.grid.dim
        if self.A is None:
            return np.zeros((self.partition.n_params, dim))
        return np.stack([self.partition.cell_means(self.A.values[:, :, k].T) for k in range(dim)], axis=1)


class BaseStage(ABC):
    """Base class for all pipeline stages"""

    def __init__(self, stage_type: str):
        self.stage_type = stage_type
        self.config = STAGE_CONFIGS.get(stage_type, {})
        self.name = self.config.get("name", f"{stage_type} Stage")
        self.description = self.config.get("description", "")
        self.artifact = self.config.get("artifact", stage_type)
        self.requires = list(self.config.get("requires", []))
        self.max_retries = self.config.get("max_retries", settings.MAX_RETRIES)

        self.logger = logging.getLogger(f"stages.{stage_type}")

        self.processing_stats = {
            "executions": 0,
            "successes": 0,
            "failures": 0,
            "total_time": 0.0,
            "average_time": 0.0
        }

    @abstractmethod
    def process(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        """
        Run the stage on one experiment

        Args:
            experiment: Parsed experiment configuration
            context: Run context with ``out_dir``, ``seed`` and ``threads``

        Returns:
            StageResult: Checks, artifacts and metrics of the stage
        """
        pass

    def execute(self, experiment: ExperimentConfig, context: Dict[str, Any]) -> StageResult:
        """
        Execute the stage with retry logic and timing

        Numerical errors are recorded on the result; the run goes on to write
        its manifest so that failures stay inspectable.
        """
        start_time = time.time()
        self.processing_stats["executions"] += 1

        result = StageResult()
        for attempt in range(self.max_retries + 1):
            try:
                self.logger.info(f"Executing {self.name} (attempt {attempt + 1})")
                result = self.process(experiment, context)
                break
            except LabError as e:
                error_msg = f"Attempt {attempt + 1} failed: {e}"
                self.logger.error(error_msg)
                result = StageResult()
                result.add_error(error_msg)
                if attempt < self.max_retries:
                    self.logger.info(f"Retrying {self.name} (attempt {attempt + 2})")

        processing_time = time.time() - start_time
        result.processing_time = processing_time
        self.processing_stats["total_time"] += processing_time
        self.processing_stats["average_time"] = (
            self.processing_stats["total_time"] / self.processing_stats["executions"]
        )
        if result.is_successful():
            self.processing_stats["successes"] += 1
            result.add_processing_step(self.name, "execution_completed",
                                       f"Completed in {processing_time:.2f}s")
            self.logger.info(f"{self.name} completed successfully in {processing_time:.2f}s")
        else:
            self.processing_stats["failures"] += 1
            failed = [c.name for c in result.checks if not c.passed]
            result.add_processing_step(self.name, "execution_failed",
                                       f"{len(result.errors)} errors, failed checks: {failed}")
            self.logger.error(f"{self.name} finished with errors or failed checks")
        return result

    def stage_dir(self, context: Dict[str, Any]) -> Path:
        path = Path(context["out_dir"]) / self.artifact
        path.mkdir(parents=True, exist_ok=True)
        return path

    def save_field(self, result: StageResult, context: Dict[str, Any], filename: str,
                   array: np.ndarray, header: Dict[str, Any]) -> Path:
        path = self.stage_dir(context) / filename
        result.add_artifact(f"{self.artifact}/{filename}", write_container(path, array, header))
        return path

    def save_table(self, result: StageResult, context: Dict[str, Any], filename: str,
                   frame: pd.DataFrame) -> Path:
        path = self.stage_dir(context) / filename
        result.add_artifact(f"{self.artifact}/{filename}", write_csv(path, frame))
        return path

    def save_document(self, result: StageResult, context: Dict[str, Any], filename: str,
                      payload: Dict[str, Any]) -> Path:
        path = self.stage_dir(context) / filename
        result.add_artifact(f"{self.artifact}/{filename}", write_json(path, payload))
        return path

    def get_stats(self) -> Dict[str, Any]:
        """Get stage processing statistics"""
        return {
            "stage": self.name,
            "type": self.stage_type,
            "description": self.description,
            "stats": self.processing_stats.copy(),
            "config": {
                "requires": self.requires,
                "max_retries": self.max_retries
            }
        }

    def __str__(self):
        return f"{self.name} ({self.stage_type})"

    def __repr__(self):
        return f"<{self.__class__.__name__}(type={self.stage_type}, name={self.name})>"
