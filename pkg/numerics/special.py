"""
Gamma function by the Lanczos approximation

Coefficients are the g=7, n=9 set; relative error stays below 1e-13 on (0, 2)
and the reflection formula covers negative non-integer arguments.
"""
import math
from typing import Union

import numpy as np

from numerics.errors import DomainError

ArrayLike = Union[float, np.ndarray]

_LANCZOS_G = 7.0
_LANCZOS_COEFFS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


def _gamma_scalar(x: float) -> float:
    if x <= 0.0 and float(x).is_integer():
        raise DomainError(f"Gamma has a pole at {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _gamma_scalar(1.0 - x))
    z = x - 1.0
    series = _LANCZOS_COEFFS[0]
    for i in range(1, len(_LANCZOS_COEFFS)):
        series += _LANCZOS_COEFFS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_TWO_PI * t ** (z + 0.5) * math.exp(-t) * series


def gamma(x: ArrayLike) -> ArrayLike:
    """Gamma function for real arguments that are not non-positive integers"""
    if np.ndim(x) == 0:
        return _gamma_scalar(float(x))
    arr = np.asarray(x, dtype=float)
    return np.vectorize(_gamma_scalar, otypes=[float])(arr)
