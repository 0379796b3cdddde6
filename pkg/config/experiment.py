"""
Experiment configuration: validated at parse time, hashed canonically
"""
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from models.fields import MagneticPotential, SemilinearSpec, SpaceTimeField
from models.recovery import CellPartition
from models.space_grid import SpaceGrid, Window
from models.time_mesh import TimeMesh
from numerics.errors import ConfigError, LabError
from utils.hashing import canonical_hash, canonical_json

logger = logging.getLogger(__name__)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WindowConfig(_Strict):
    lower: List[float]
    upper: List[float]


class GeometryConfig(_Strict):
    """Lattice, Omega radius and windows

    ``r_omega`` defaults to half_width / 6: at the default box both 1D magnetic
    windows then fit on one side of the origin between 3r and the box edge.
    """
    dim: Literal[1, 2] = 1
    half_width: float = Field(2.0, gt=0.0)
    h: float = Field(0.0625, gt=0.0)
    r_omega: Optional[float] = Field(None, gt=0.0, description="Omega radius, half_width / 6 when omitted")
    magnetic: bool = True
    window1: Optional[WindowConfig] = None
    window2: Optional[WindowConfig] = None


class OrdersConfig(_Strict):
    alpha: float = Field(0.5, gt=0.0, lt=1.0)
    s: float = Field(0.5, gt=0.0, lt=1.0)


class TimeConfig(_Strict):
    T: float = Field(1.0, gt=0.0)
    N_t: int = Field(64, ge=2)


class ProfileConfig(_Strict):
    """Coefficient profile on Omega x (0, T)

    ``cells`` takes one value per recovery cell as [space cell][time cell] and
    ``cell`` puts ``amplitude`` on the single cell ``cell = [space cell, time cell]``;
    ``bump`` is amplitude * (1 - |x - center|^2 / radius^2)_+^2 with an optional
    sin(pi t / T) time envelope.
    """
    kind: Literal["zero", "constant", "bump", "cell", "cells"] = "zero"
    amplitude: float = 0.0
    center: Optional[List[float]] = None
    radius: float = Field(0.25, gt=0.0)
    temporal: Literal["constant", "sine"] = "constant"
    cell_values: Optional[List[List[float]]] = None
    cell: Optional[List[int]] = None
    direction: Optional[List[float]] = None


def _default_q() -> ProfileConfig:
    return ProfileConfig(kind="cell", amplitude=1.0, cell=[1, 2])


def _default_semilinear() -> List[ProfileConfig]:
    return [ProfileConfig(kind="constant", amplitude=1.0),
            ProfileConfig(kind="constant", amplitude=2.0)]


class SemilinearConfig(_Strict):
    powers: List[float] = Field(default_factory=lambda: [0.0, 1.0])
    coefficients: List[ProfileConfig] = Field(default_factory=_default_semilinear)
    space_cells: int = Field(2, ge=1)
    time_cells: int = Field(2, ge=1)
    lambdas: List[float] = Field(default_factory=lambda: [0.04, 0.02, 0.01])

    @field_validator("lambdas")
    @classmethod
    def _positive_ladder(cls, value: List[float]) -> List[float]:
        if len(value) < 2 or any(lam <= 0.0 for lam in value):
            raise ValueError("The lambda ladder needs at least two positive scales")
        return value


class CoefficientConfig(_Strict):
    A: ProfileConfig = Field(default_factory=ProfileConfig)
    q: ProfileConfig = Field(default_factory=_default_q)
    semilinear: SemilinearConfig = Field(default_factory=SemilinearConfig)


class BasisConfig(_Strict):
    n_space: int = Field(4, ge=1)
    n_time: int = Field(4, ge=1)
    amplitude: float = Field(1.0, gt=0.0)


class InversionConfig(_Strict):
    space_cells: int = Field(4, ge=1)
    time_cells: int = Field(4, ge=1)
    regularization: float = Field(1e-10, ge=0.0)
    max_iterations: int = Field(8, ge=1)
    runge_eps: float = Field(1e-10, ge=0.0)
    runge_target_cell: int = Field(0, ge=0)
    control_flag_threshold: float = Field(0.3, gt=0.0)
    runge_flag_ratio: float = Field(0.5, ge=0.0, le=1.0)
    recovery_tolerance: float = Field(0.2, gt=0.0)


class NoiseConfig(_Strict):
    level: float = Field(0.0, ge=0.0)
    seed: int = 0


class ExperimentConfig(_Strict):
    """Complete description of one experiment"""
    name: str = "default"
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    orders: OrdersConfig = Field(default_factory=OrdersConfig)
    time: TimeConfig = Field(default_factory=TimeConfig)
    coefficients: CoefficientConfig = Field(default_factory=CoefficientConfig)
    basis: BasisConfig = Field(default_factory=BasisConfig)
    inversion: InversionConfig = Field(default_factory=InversionConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)

    @model_validator(mode="after")
    def _check_invariants(self) -> "ExperimentConfig":
        try:
            build_grid(self)
        except LabError as exc:
            raise ValueError(f"geometry: {exc}") from exc
        inv = self.inversion
        for name, profile, cells in (
            ("q", self.coefficients.q, (inv.space_cells ** self.geometry.dim, inv.time_cells)),
            ("A", self.coefficients.A, (inv.space_cells ** self.geometry.dim, inv.time_cells)),
        ):
            _check_cells(name, profile, cells)
        sl = self.coefficients.semilinear
        if len(sl.powers) != len(sl.coefficients):
            raise ValueError("semilinear: one coefficient profile per power is required")
        for k, profile in enumerate(sl.coefficients):
            _check_cells(f"a{k + 1}", profile, (sl.space_cells ** self.geometry.dim, sl.time_cells))
            if not _is_nonnegative(profile):
                raise ValueError(f"semilinear: coefficient a{k + 1} must be nonnegative")
        if self.coefficients.A.kind != "zero" and not self.geometry.magnetic:
            raise ValueError("A: a magnetic potential needs the magnetic geometry, "
                             "with both windows outside B(0, 3r)")
        return self

    def canonical(self) -> str:
        return canonical_json(self.model_dump(mode="json"))

    @property
    def config_hash(self) -> str:
        return canonical_hash(self.model_dump(mode="json"))


def _is_nonnegative(profile: ProfileConfig) -> bool:
    if profile.kind == "zero":
        return True
    if profile.kind == "cells":
        return profile.cell_values is None or bool(np.all(np.asarray(profile.cell_values) >= 0.0))
    return profile.amplitude >= 0.0


def _check_cells(name: str, profile: ProfileConfig, shape) -> None:
    if profile.kind == "cell":
        if profile.cell is None or len(profile.cell) != 2:
            raise ValueError(f"{name}: kind 'cell' needs cell = [space cell, time cell]")
        if not (0 <= profile.cell[0] < shape[0] and 0 <= profile.cell[1] < shape[1]):
            raise ValueError(f"{name}: cell {profile.cell} outside the partition {tuple(shape)}")
        return
    if profile.kind != "cells":
        return
    if profile.cell_values is None:
        raise ValueError(f"{name}: kind 'cells' needs cell_values")
    arr = np.asarray(profile.cell_values, dtype=float)
    if arr.shape != tuple(shape):
        raise ValueError(f"{name}: cell_values must have shape {tuple(shape)}, got {arr.shape}")


def load_config(path: Optional[Union[str, Path]] = None, require_magnetic: bool = False) -> ExperimentConfig:
    """Parse a JSON experiment file; a missing path gives the defaults

    ``require_magnetic`` rejects geometries whose windows may meet B(0, 3r),
    which magnetic recovery cannot use.
    """
    try:
        if path is None:
            config = ExperimentConfig()
        else:
            config = ExperimentConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ConfigError(f"Invalid experiment configuration: {exc}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Cannot read experiment configuration {path}: {exc}") from exc
    if require_magnetic and not config.geometry.magnetic:
        raise ConfigError("Magnetic recovery needs the magnetic geometry: both windows outside B(0, 3r)")
    return config


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(config.canonical(), encoding="utf-8")


def build_grid(config: ExperimentConfig, magnetic: Optional[bool] = None) -> SpaceGrid:
    geo = config.geometry
    w1 = None if geo.window1 is None else Window(tuple(geo.window1.lower), tuple(geo.window1.upper))
    w2 = None if geo.window2 is None else Window(tuple(geo.window2.lower), tuple(geo.window2.upper))
    return SpaceGrid(dim=geo.dim, half_width=geo.half_width, h=geo.h, r_omega=geo.r_omega,
                     window1=w1, window2=w2, magnetic=geo.magnetic if magnetic is None else magnetic)


def build_mesh(config: ExperimentConfig, N_t: Optional[int] = None) -> TimeMesh:
    return TimeMesh(T=config.time.T, N_t=N_t or config.time.N_t, alpha=config.orders.alpha)


def build_partition(config: ExperimentConfig, grid: SpaceGrid, mesh: TimeMesh) -> CellPartition:
    return CellPartition(grid, mesh, config.inversion.space_cells, config.inversion.time_cells)


def profile_values(profile: ProfileConfig, grid: SpaceGrid, mesh: TimeMesh,
                   partition: Optional[CellPartition] = None) -> np.ndarray:
    """Scalar profile on Omega nodes, shape (n_omega, N_t + 1)"""
    shape = (grid.n_omega, mesh.size)
    if profile.kind == "zero":
        return np.zeros(shape)
    if profile.kind == "constant":
        values = np.full(shape, profile.amplitude)
    elif profile.kind == "bump":
        center = np.zeros(grid.dim) if profile.center is None else np.asarray(profile.center)
        rho2 = np.sum((grid.omega_points - center) ** 2, axis=1) / profile.radius ** 2
        spatial = profile.amplitude * np.maximum(1.0 - rho2, 0.0) ** 2
        values = np.repeat(spatial[:, None], mesh.size, axis=1)
    else:
        if partition is None:
            raise ConfigError("A cell profile needs a recovery partition")
        return partition.expand(cell_parameters(profile, partition))
    if profile.temporal == "sine":
        values = values * np.sin(np.pi * mesh.nodes / mesh.T)[None, :]
    return values


def build_q(config: ExperimentConfig, grid: SpaceGrid, mesh: TimeMesh) -> Optional[SpaceTimeField]:
    profile = config.coefficients.q
    if profile.kind == "zero":
        return None
    partition = build_partition(config, grid, mesh)
    return SpaceTimeField.on_omega(grid, mesh, profile_values(profile, grid, mesh, partition))


def build_A(config: ExperimentConfig, grid: SpaceGrid, mesh: TimeMesh) -> Optional[MagneticPotential]:
    profile = config.coefficients.A
    if profile.kind == "zero":
        return None
    partition = build_partition(config, grid, mesh)
    scalar = profile_values(profile, grid, mesh, partition)
    direction = np.zeros(grid.dim)
    direction[0] = 1.0
    if profile.direction is not None:
        direction = np.asarray(profile.direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
    values = scalar.T[:, :, None] * direction[None, None, :]
    return MagneticPotential(grid, mesh, values)


def build_semilinear(config: ExperimentConfig, grid: SpaceGrid, mesh: TimeMesh) -> SemilinearSpec:
    sl = config.coefficients.semilinear
    partition = CellPartition(grid, mesh, sl.space_cells, sl.time_cells)
    coeffs = [SpaceTimeField.on_omega(grid, mesh, profile_values(p, grid, mesh, partition))
              for p in sl.coefficients]
    return SemilinearSpec(coeffs, sl.powers)


def cell_parameters(profile: ProfileConfig, partition: CellPartition) -> np.ndarray:
    """Parameter vector of a cell profile in the partition's ordering"""
    if profile.kind == "cell":
        theta = np.zeros(partition.n_params)
        theta[profile.cell[0] * partition.n_time + profile.cell[1]] = profile.amplitude
        return theta
    return np.asarray(profile.cell_values, dtype=float).ravel()
