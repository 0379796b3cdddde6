"""
Assembled nonlocal operators and their bilinear forms
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.space_grid import SpaceGrid


@dataclass(frozen=True, eq=False)
class NonlocalOperator:
    """Dense matrix of (-Delta)^s_A on the active nodes

    ``tail`` is the part of the row action that couples to inactive lattice
    positions and to the far field, evaluated on the constant function 1, so
    that ``matrix @ ones - tail`` vanishes.
    """
    grid: SpaceGrid
    s: float
    c_ns: float
    matrix: np.ndarray
    tail: np.ndarray
    t_index: Optional[int] = None

    def __post_init__(self):
        for name in ("matrix", "tail"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    @property
    def omega_block(self) -> np.ndarray:
        g = self.grid
        return self.matrix[g.omega, g.omega]

    def block(self, rows: slice, cols: slice) -> np.ndarray:
        return self.matrix[rows, cols]

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))

    def constant_defect(self) -> float:
        """sup |L 1 - tail| relative to the diagonal scale"""
        resid = self.matrix @ np.ones(self.grid.n_active) - self.tail
        return float(np.max(np.abs(resid)) / np.max(np.abs(np.diag(self.matrix))))


@dataclass(frozen=True, eq=False)
class BilinearForm:
    """B_{A,q}(u, v) = h^n (v^T L u + sum_Omega q u v) at one time node"""
    operator: NonlocalOperator
    q: np.ndarray

    def evaluate(self, u: np.ndarray, v: np.ndarray) -> float:
        grid = self.operator.grid
        local = np.dot(self.q * u[grid.omega], v[grid.omega])
        return float(grid.cell_volume * (v @ self.operator.matrix @ u + local))

    def omega_matrix(self) -> np.ndarray:
        """Form matrix on functions supported in Omega"""
        grid = self.operator.grid
        return grid.cell_volume * (self.operator.omega_block + np.diag(self.q))


@dataclass(frozen=True)
class FormConstants:
    """Coercivity, continuity and perturbation constants of a bilinear form"""
    C0: float
    c1: float
    c2: float
    C_A: float

    def as_dict(self) -> dict:
        return {"C0": self.C0, "c1": self.c1, "c2": self.c2, "C_A": self.C_A}
