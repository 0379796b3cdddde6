"""
Uniform lattice on a box, with the open ball Omega and two exterior windows
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from numerics.errors import GeometryError
from utils.hashing import canonical_hash

logger = logging.getLogger(__name__)

_TOL = 1e-12


class NodeClass(Enum):
    """Classification of a lattice node"""
    OMEGA = "omega"
    EXTERIOR_COLLAR = "exterior_collar"
    W1 = "w1"
    W2 = "w2"
    FAR = "far"


@dataclass(frozen=True)
class Window:
    """Closed axis-aligned box inside the exterior of Omega"""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper):
            raise GeometryError("Window bounds must have equal length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise GeometryError(f"Window bounds are inverted: {self.lower} / {self.upper}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lower) - _TOL
        hi = np.asarray(self.upper) + _TOL
        return np.all((points >= lo) & (points <= hi), axis=-1)

    def min_norm(self) -> float:
        closest = np.clip(0.0, self.lower, self.upper)
        return float(np.linalg.norm(closest))

    def intersects(self, other: "Window") -> bool:
        return all(lo1 <= hi2 and lo2 <= hi1 for lo1, hi1, lo2, hi2
                   in zip(self.lower, self.upper, other.lower, other.upper))

    def to_dict(self) -> Dict[str, List[float]]:
        return {"lower": list(self.lower), "upper": list(self.upper)}


def default_windows(dim: int, half_width: float, magnetic: bool) -> Tuple[Window, Window]:
    """Window placement used when a configuration leaves the windows unspecified

    Magnetic geometries keep both windows outside B_{3r}; in one dimension they
    sit on the same side so that some source-receiver midpoint avoids Omega.
    """
    b = half_width
    if dim == 1:
        if magnetic:
            return Window((-b,), (-0.78 * b,)), Window((-0.72 * b,), (-0.52 * b,))
        return Window((-0.5 * b,), (-0.3 * b,)), Window((0.3 * b,), (0.5 * b,))
    if dim == 2:
        if magnetic:
            return (Window((-b, -b), (-0.6 * b, -0.6 * b)),
                    Window((0.6 * b, 0.6 * b), (b, b)))
        return (Window((-0.5 * b, -0.1 * b), (-0.3 * b, 0.1 * b)),
                Window((0.3 * b, -0.1 * b), (0.5 * b, 0.1 * b)))
    raise GeometryError(f"Only dimensions 1 and 2 are supported, got {dim}")


class SpaceGrid:
    """Lattice x = -b + i*h on the box [-b, b]^n

    Active nodes are ordered Omega first, then W1, then W2; every nodal
    vector in the laboratory follows that ordering.
    """

    def __init__(self, dim: int, half_width: float, h: float, r_omega: Optional[float] = None,
                 window1: Optional[Window] = None, window2: Optional[Window] = None,
                 magnetic: bool = True, collar_width: Optional[float] = None):
        if dim not in (1, 2):
            raise GeometryError(f"Only dimensions 1 and 2 are supported, got {dim}")
        if not (h > 0.0):
            raise GeometryError(f"Grid spacing must be positive, got {h}")
        if h >= 2.0 * half_width:
            raise GeometryError(f"Grid spacing {h} is not below the box diameter {2 * half_width}")
        self.dim = dim
        self.half_width = float(half_width)
        self.h = float(h)
        self.r_omega = float(r_omega) if r_omega is not None else self.half_width / 6.0
        self.magnetic = bool(magnetic)
        if window1 is None or window2 is None:
            w1, w2 = default_windows(dim, self.half_width, self.magnetic)
            window1 = window1 or w1
            window2 = window2 or w2
        self.window1 = window1
        self.window2 = window2
        self.collar_width = float(collar_width) if collar_width is not None else 2.0 * self.h

        n_cells = int(round(2.0 * self.half_width / self.h))
        if abs(n_cells * self.h - 2.0 * self.half_width) > 1e-9 * self.half_width:
            raise GeometryError(f"Spacing {h} does not divide the box width {2 * half_width}")
        self.n_per_axis = n_cells + 1
        self.axis = -self.half_width + self.h * np.arange(self.n_per_axis)
        mesh = np.meshgrid(*([self.axis] * dim), indexing="ij")
        self.box_points = np.stack([m.ravel() for m in mesh], axis=-1)

        self._classify()
        self._validate()
        logger.debug(f"Built grid dim={dim} h={h} with {self.n_active} active nodes")

    def _classify(self) -> None:
        norms = np.linalg.norm(self.box_points, axis=1)
        omega = norms < self.r_omega - _TOL
        in_w1 = self.window1.contains(self.box_points) & ~omega
        in_w2 = self.window2.contains(self.box_points) & ~omega & ~in_w1
        collar = ~omega & ~in_w1 & ~in_w2 & (norms < self.r_omega + self.collar_width)

        labels = np.full(len(self.box_points), NodeClass.FAR, dtype=object)
        labels[collar] = NodeClass.EXTERIOR_COLLAR
        labels[in_w1] = NodeClass.W1
        labels[in_w2] = NodeClass.W2
        labels[omega] = NodeClass.OMEGA
        self.labels = labels

        self.box_index = np.concatenate([np.flatnonzero(omega), np.flatnonzero(in_w1),
                                         np.flatnonzero(in_w2)])
        self.n_omega = int(omega.sum())
        self.n_w1 = int(in_w1.sum())
        self.n_w2 = int(in_w2.sum())
        self.n_active = self.n_omega + self.n_w1 + self.n_w2
        self.active_points = self.box_points[self.box_index]
        self.active_of_box = np.full(len(self.box_points), -1, dtype=int)
        self.active_of_box[self.box_index] = np.arange(self.n_active)

    def _validate(self) -> None:
        for name, window in (("W1", self.window1), ("W2", self.window2)):
            if window.dim != self.dim:
                raise GeometryError(f"{name} has dimension {window.dim}, grid has {self.dim}")
            if min(window.lower) < -self.half_width - _TOL or max(window.upper) > self.half_width + _TOL:
                raise GeometryError(f"{name} is not contained in the computational box")
            if window.min_norm() < self.r_omega:
                raise GeometryError(f"{name} overlaps the closure of Omega")
        if self.window1.intersects(self.window2):
            raise GeometryError("W1 and W2 must be disjoint")
        if self.n_omega == 0:
            raise GeometryError("Omega contains no lattice node")
        if self.n_w1 == 0 or self.n_w2 == 0:
            raise GeometryError("Each window must contain at least one lattice node")
        if self.magnetic:
            for name, window in (("W1", self.window1), ("W2", self.window2)):
                if window.min_norm() <= 3.0 * self.r_omega:
                    raise GeometryError(f"{name} meets B_3r; magnetic geometries need W outside B_3r")
            x = self.window_points(NodeClass.W1)
            y = self.window_points(NodeClass.W2)
            mid = 0.5 * (x[:, None, :] + y[None, :, :])
            if not np.any(np.linalg.norm(mid, axis=-1) >= self.r_omega):
                raise GeometryError("No source-receiver midpoint lies outside Omega")

    @property
    def omega(self) -> slice:
        return slice(0, self.n_omega)

    @property
    def w1(self) -> slice:
        return slice(self.n_omega, self.n_omega + self.n_w1)

    @property
    def w2(self) -> slice:
        return slice(self.n_omega + self.n_w1, self.n_active)

    def window_slice(self, which: NodeClass) -> slice:
        if which == NodeClass.W1:
            return self.w1
        if which == NodeClass.W2:
            return self.w2
        raise GeometryError(f"{which} is not a window")

    def window(self, which: NodeClass) -> Window:
        return self.window1 if which == NodeClass.W1 else self.window2

    def window_points(self, which: NodeClass) -> np.ndarray:
        return self.active_points[self.window_slice(which)]

    @property
    def omega_points(self) -> np.ndarray:
        return self.active_points[self.omega]

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def omega_diameter(self) -> float:
        return 2.0 * self.r_omega

    def in_omega_ball(self, points: np.ndarray) -> np.ndarray:
        """Geometric membership in the open ball, for off-lattice points such as midpoints"""
        return np.linalg.norm(points, axis=-1) < self.r_omega - _TOL

    def neighbor_table(self) -> np.ndarray:
        """Box indices of the 2n lattice neighbours of each active node, -1 outside the box"""
        multi = np.array(np.unravel_index(self.box_index, (self.n_per_axis,) * self.dim)).T
        table = np.full((self.n_active, 2 * self.dim), -1, dtype=int)
        for k in range(self.dim):
            for j, step in enumerate((-1, 1)):
                shifted = multi.copy()
                shifted[:, k] += step
                inside = (shifted[:, k] >= 0) & (shifted[:, k] < self.n_per_axis)
                flat = np.ravel_multi_index(shifted[inside].T, (self.n_per_axis,) * self.dim)
                table[inside, 2 * k + j] = flat
        return table

    def describe(self) -> Dict:
        return {
            "dim": self.dim,
            "half_width": self.half_width,
            "h": self.h,
            "r_omega": self.r_omega,
            "magnetic": self.magnetic,
            "window1": self.window1.to_dict(),
            "window2": self.window2.to_dict(),
        }

    @property
    def geometry_hash(self) -> str:
        return canonical_hash(self.describe())

    def counts(self) -> Dict[str, int]:
        return {"omega": self.n_omega, "w1": self.n_w1, "w2": self.n_w2, "active": self.n_active,
                "box": len(self.box_points)}

    def __repr__(self) -> str:
        return (f"SpaceGrid(dim={self.dim}, h={self.h}, b={self.half_width}, "
                f"r={self.r_omega}, active={self.n_active})")
