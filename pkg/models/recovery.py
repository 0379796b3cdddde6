"""
Recovery cells, control results and recovery reports
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from models.fields import SpaceTimeField
from models.space_grid import SpaceGrid
from models.time_mesh import TimeMesh
from numerics.errors import DomainError


class CellPartition:
    """Piecewise-constant parameterization of a coefficient on Omega x (0, T)

    Omega's bounding box is split into ``space_cells`` intervals per axis and
    (0, T) into ``time_cells`` intervals. Parameter p = c * time_cells + j
    belongs to space cell c and time interval j.
    """

    def __init__(self, grid: SpaceGrid, mesh: TimeMesh, space_cells: int = 4, time_cells: int = 4):
        if space_cells < 1 or time_cells < 1:
            raise DomainError("Cell counts must be positive")
        self.grid = grid
        self.mesh = mesh
        self.space_cells = space_cells
        self.time_cells = time_cells
        r = grid.r_omega
        per_axis = np.clip(np.floor((grid.omega_points + r) / (2.0 * r) * space_cells).astype(int),
                           0, space_cells - 1)
        self.space_labels = np.ravel_multi_index(per_axis.T, (space_cells,) * grid.dim)
        self.n_space = space_cells ** grid.dim
        self.time_labels = np.clip(np.floor(mesh.nodes / mesh.T * time_cells).astype(int),
                                   0, time_cells - 1)
        self.n_time = time_cells
        self._weights = np.outer(np.full(grid.n_omega, grid.cell_volume), mesh.trapezoid_weights())

    @property
    def n_params(self) -> int:
        return self.n_space * self.n_time

    def split(self, p: int):
        return divmod(p, self.n_time)

    def indicator(self, p: int) -> np.ndarray:
        c, j = self.split(p)
        return np.outer(self.space_labels == c, self.time_labels == j).astype(float)

    def occupied(self) -> np.ndarray:
        """Parameters whose cell contains at least one Omega node"""
        counts = np.bincount(self.space_labels, minlength=self.n_space)
        return np.repeat(counts > 0, self.n_time)

    def expand(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(self.n_space, self.n_time)
        return theta[self.space_labels][:, self.time_labels]

    def field(self, theta: np.ndarray) -> SpaceTimeField:
        return SpaceTimeField.on_omega(self.grid, self.mesh, self.expand(theta))

    def measure(self, p: int) -> float:
        return float(np.sum(self.indicator(p) * self._weights))

    def cell_means(self, values: np.ndarray) -> np.ndarray:
        """Weighted averages of an (n_omega, N_t + 1) array over every cell; empty cells give 0"""
        out = np.zeros(self.n_params)
        for p in range(self.n_params):
            ind = self.indicator(p) * self._weights
            total = ind.sum()
            if total > 0.0:
                out[p] = float(np.sum(ind * values) / total)
        return out

    def describe(self) -> Dict[str, int]:
        return {"space_cells": self.space_cells, "time_cells": self.time_cells,
                "n_params": self.n_params}


@dataclass
class ControlResult:
    """Exterior control synthesized by Runge approximation"""
    control: SpaceTimeField
    coefficients: np.ndarray
    achieved_error: float
    condition: float
    regularization: float
    ill_conditioned: bool = False

    def summary(self) -> Dict[str, Any]:
        return {
            "achieved_error": self.achieved_error,
            "condition": self.condition,
            "regularization": self.regularization,
            "ill_conditioned": self.ill_conditioned,
            "n_basis": int(len(self.coefficients)),
        }


@dataclass
class RecoveryReport:
    """Outcome of one inversion"""
    method: str
    estimates: Dict[str, np.ndarray]
    cell_values: Dict[str, np.ndarray]
    residual: float
    iterations: int = 0
    regularization: float = 0.0
    error_vs_truth: Dict[str, float] = field(default_factory=dict)
    sign_resolved: bool = True
    flagged_cells: List[int] = field(default_factory=list)
    stages: List[Dict[str, Any]] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "residual": self.residual,
            "iterations": self.iterations,
            "regularization": self.regularization,
            "error_vs_truth": dict(self.error_vs_truth),
            "sign_resolved": self.sign_resolved,
            "flagged_cells": list(self.flagged_cells),
            "stages": list(self.stages),
            "warnings": list(self.warnings),
            "cell_values": {k: np.asarray(v).tolist() for k, v in self.cell_values.items()},
        }
