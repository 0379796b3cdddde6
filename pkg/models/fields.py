"""
Space-time fields, magnetic potentials and semilinear coefficients
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from models.space_grid import NodeClass, SpaceGrid
from models.time_mesh import TimeMesh
from numerics.errors import DomainError, GeometryError


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Nodal values on the active nodes of a grid at every time node

    ``values`` has shape (n_active, N_t + 1) in the grid's active ordering.
    """
    grid: SpaceGrid
    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (self.grid.n_active, self.mesh.size)
        if values.shape != expected:
            raise DomainError(f"SpaceTimeField needs shape {expected}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: SpaceGrid, mesh: TimeMesh) -> "SpaceTimeField":
        return cls(grid, mesh, np.zeros((grid.n_active, mesh.size)))

    @classmethod
    def from_function(cls, grid: SpaceGrid, mesh: TimeMesh,
                      func: Callable[[np.ndarray, float], np.ndarray],
                      support: Optional[NodeClass] = None) -> "SpaceTimeField":
        """Sample ``func(points, t)`` on the active nodes, optionally keeping one node class"""
        values = np.stack([np.asarray(func(grid.active_points, t), dtype=float)
                           * np.ones(grid.n_active) for t in mesh.nodes], axis=1)
        if support is not None:
            mask = np.zeros(grid.n_active, dtype=bool)
            mask[_support_slice(grid, support)] = True
            values[~mask] = 0.0
        return cls(grid, mesh, values)

    @classmethod
    def on_omega(cls, grid: SpaceGrid, mesh: TimeMesh, omega_values: np.ndarray) -> "SpaceTimeField":
        values = np.zeros((grid.n_active, mesh.size))
        values[grid.omega] = omega_values
        return cls(grid, mesh, values)

    @property
    def omega_values(self) -> np.ndarray:
        return self.values[self.grid.omega]

    def window_values(self, which: NodeClass) -> np.ndarray:
        return self.values[self.grid.window_slice(which)]

    def supported_on(self, which: NodeClass, atol: float = 0.0) -> bool:
        mask = np.ones(self.grid.n_active, dtype=bool)
        mask[_support_slice(self.grid, which)] = False
        return bool(np.all(np.abs(self.values[mask]) <= atol))

    def time_reversed(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.mesh, self.values[:, ::-1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def with_values(self, values: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.mesh, values)

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "SpaceTimeField":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpaceTimeField":
        return self.with_values(-self.values)


def _support_slice(grid: SpaceGrid, which: NodeClass) -> slice:
    if which == NodeClass.OMEGA:
        return grid.omega
    return grid.window_slice(which)


@dataclass(frozen=True, eq=False)
class MagneticPotential:
    """Vector potential A(x, t) sampled on Omega nodes, shape (N_t + 1, n_omega, dim)

    Off-node values come from linear interpolation of the nodal values and
    vanish outside the geometric ball.
    """
    grid: SpaceGrid
    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (self.mesh.size, self.grid.n_omega, self.grid.dim)
        if values.shape != expected:
            raise DomainError(f"MagneticPotential needs shape {expected}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("MagneticPotential contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zero(cls, grid: SpaceGrid, mesh: TimeMesh) -> "MagneticPotential":
        return cls(grid, mesh, np.zeros((mesh.size, grid.n_omega, grid.dim)))

    @classmethod
    def from_function(cls, grid: SpaceGrid, mesh: TimeMesh,
                      func: Callable[[np.ndarray, float], np.ndarray]) -> "MagneticPotential":
        pts = grid.omega_points
        values = np.stack([np.asarray(func(pts, t), dtype=float).reshape(len(pts), grid.dim)
                           for t in mesh.nodes])
        return cls(grid, mesh, values)

    def at(self, k: int) -> np.ndarray:
        return self.values[k]

    def negated(self) -> "MagneticPotential":
        return MagneticPotential(self.grid, self.mesh, -self.values)

    def time_reversed(self) -> "MagneticPotential":
        return MagneticPotential(self.grid, self.mesh, self.values[::-1])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    @property
    def is_static(self) -> bool:
        return bool(np.all(self.values == self.values[0:1]))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True, eq=False)
class SemilinearSpec:
    """Nonlinearity a(x, t, z) = sum_k a_k(x, t) |z|^{b_k} z with b_1 = 0"""
    coefficients: Sequence[SpaceTimeField]
    powers: Sequence[float]
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.coefficients) == 0 or len(self.coefficients) != len(self.powers):
            raise DomainError("SemilinearSpec needs one coefficient per power")
        powers = [float(b) for b in self.powers]
        if powers[0] != 0.0:
            raise DomainError("The first power must be 0 (the linear potential)")
        if any(b1 >= b2 for b1, b2 in zip(powers, powers[1:])):
            raise DomainError(f"Powers must be strictly increasing, got {powers}")
        for k, coeff in enumerate(self.coefficients, start=1):
            if np.any(coeff.omega_values < 0.0):
                raise DomainError(f"Coefficient a_{k} must be nonnegative")
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        object.__setattr__(self, "powers", tuple(powers))
        if not self.names:
            object.__setattr__(self, "names", [f"a{k + 1}" for k in range(len(powers))])

    @property
    def order(self) -> int:
        return len(self.powers)

    def value(self, n: int, z: np.ndarray) -> np.ndarray:
        """a(x, t_n, z) on Omega nodes"""
        out = np.zeros_like(z)
        for coeff, b in zip(self.coefficients, self.powers):
            out += coeff.omega_values[:, n] * np.sign(z) * np.abs(z) ** (b + 1.0)
        return out

    def derivative(self, n: int, z: np.ndarray) -> np.ndarray:
        """Partial derivative of a in z at time node n"""
        out = np.zeros_like(z)
        for coeff, b in zip(self.coefficients, self.powers):
            out += coeff.omega_values[:, n] * (b + 1.0) * np.abs(z) ** b
        return out

    def truncated(self, m: int) -> "SemilinearSpec":
        return SemilinearSpec(self.coefficients[:m], self.powers[:m], self.names[:m])


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Magnetic potential and electric potential of one linear problem"""
    A: Optional[MagneticPotential] = None
    q: Optional[SpaceTimeField] = None

    def validate(self, grid: SpaceGrid, mesh: TimeMesh) -> None:
        for name, item in (("A", self.A), ("q", self.q)):
            if item is None:
                continue
            if item.grid.geometry_hash != grid.geometry_hash or item.mesh != mesh:
                raise GeometryError(f"Coefficient {name} lives on a different grid or mesh")
