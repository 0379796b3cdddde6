"""
Time mesh, time signals and convolution weights
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from numerics.errors import DomainError


class ConvScheme(Enum):
    """Discretization scheme that produced a set of convolution weights

    Right-sided schemes share the weights of their left counterpart and act
    on the time-reflected signal, so their matrices are upper triangular.
    """
    RL_INTEGRAL = "rl_integral"
    CAPUTO_L1 = "caputo_l1"
    RL_INTEGRAL_RIGHT = "rl_integral_right"
    CAPUTO_L1_RIGHT = "caputo_l1_right"

    @property
    def is_right(self) -> bool:
        return self.value.endswith("_right")

    def reflected(self) -> "ConvScheme":
        if self.is_right:
            return ConvScheme(self.value[:-len("_right")])
        return ConvScheme(f"{self.value}_right")


def _check_order(alpha: float, name: str = "alpha") -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {alpha}")


@dataclass(frozen=True)
class TimeMesh:
    """Uniform mesh t_k = k*tau on [0, T] carrying the time-fractional order"""
    T: float
    N_t: int
    alpha: float

    def __post_init__(self):
        if not (self.T > 0.0) or not np.isfinite(self.T):
            raise DomainError(f"T must be positive and finite, got {self.T}")
        if int(self.N_t) != self.N_t or self.N_t < 2:
            raise DomainError(f"N_t must be an integer >= 2, got {self.N_t}")
        _check_order(self.alpha)

    @property
    def tau(self) -> float:
        return self.T / self.N_t

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N_t + 1)

    @property
    def size(self) -> int:
        return self.N_t + 1

    def trapezoid_weights(self) -> np.ndarray:
        """Composite trapezoid weights over the nodes"""
        w = np.full(self.N_t + 1, self.tau)
        w[0] = w[-1] = 0.5 * self.tau
        return w

    def describe(self) -> dict:
        return {"T": self.T, "N_t": self.N_t, "alpha": self.alpha, "tau": self.tau}


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Real-valued samples of a scalar function of time on a mesh"""
    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.size,):
            raise DomainError(
                f"TimeSignal needs {self.mesh.size} samples, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, mesh: TimeMesh, func: Callable[[np.ndarray], np.ndarray]) -> "TimeSignal":
        return cls(mesh, np.asarray(func(mesh.nodes), dtype=float) * np.ones(mesh.size))

    @classmethod
    def zeros(cls, mesh: TimeMesh) -> "TimeSignal":
        return cls(mesh, np.zeros(mesh.size))

    def reversed(self) -> "TimeSignal":
        """Time reflection t -> T - t"""
        return TimeSignal(self.mesh, self.values[::-1])

    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> "TimeSignal":
        return TimeSignal(self.mesh, func(self.values))

    def __add__(self, other: "TimeSignal") -> "TimeSignal":
        return TimeSignal(self.mesh, self.values + other.values)

    def __sub__(self, other: "TimeSignal") -> "TimeSignal":
        return TimeSignal(self.mesh, self.values - other.values)

    def __mul__(self, other) -> "TimeSignal":
        if isinstance(other, TimeSignal):
            return TimeSignal(self.mesh, self.values * other.values)
        return TimeSignal(self.mesh, self.values * float(other))

    __rmul__ = __mul__

    def __len__(self) -> int:
        return self.mesh.size


@dataclass(frozen=True, eq=False)
class ConvWeights:
    """Convolution weights of a lower-triangular time operator

    ``weights[m]`` multiplies the sample m steps in the past; ``endpoint[n]``
    replaces the weight on t_0 in row n when the scheme needs a special
    starting weight. A common scale factor is kept apart so the weights stay
    independent of tau.
    """
    order: float
    scheme: ConvScheme
    weights: np.ndarray
    endpoint: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        for name in ("weights", "endpoint"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    def reflected(self) -> "ConvWeights":
        """Same weights under the scheme of the opposite time direction"""
        return ConvWeights(order=self.order, scheme=self.scheme.reflected(), weights=self.weights,
                           endpoint=self.endpoint)
