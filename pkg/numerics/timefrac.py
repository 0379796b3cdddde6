"""
Time-fractional calculus on a uniform mesh

Left Riemann-Liouville integrals use the product-trapezoid rule, the left
Caputo derivative uses the L1 scheme, and every right-sided operator is the
time reflection of its left counterpart.
"""
import logging
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import toeplitz

from models.time_mesh import ConvScheme, ConvWeights, TimeMesh, TimeSignal
from numerics.errors import DomainError
from numerics.special import gamma

logger = logging.getLogger(__name__)


def _check_order(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"Fractional order must lie in (0, 1), got {alpha}")


def phi_kernel(alpha: float, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Riemann-Liouville kernel t^(alpha-1) / Gamma(alpha), for t > 0"""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"Kernel order must lie in (0, 1), got {alpha}")
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0.0):
        raise DomainError("Kernel is only defined for t > 0")
    out = arr ** (alpha - 1.0) / gamma(alpha)
    return float(out) if np.ndim(t) == 0 else out


@lru_cache(maxsize=64)
def rl_integral_weights(alpha: float, n_steps: int) -> ConvWeights:
    """Product-trapezoid weights of the left Riemann-Liouville integral

    Row n of the integral is tau^alpha / Gamma(alpha + 2) times
    endpoint[n] * u_0 + sum_{j=1..n} weights[n - j] * u_j.
    """
    _check_order(alpha)
    a1 = alpha + 1.0
    m = np.arange(n_steps + 1, dtype=float)
    weights = np.empty(n_steps + 1)
    weights[0] = 1.0
    mm = m[1:]
    weights[1:] = (mm + 1.0) ** a1 - 2.0 * mm ** a1 + (mm - 1.0) ** a1
    endpoint = np.zeros(n_steps + 1)
    endpoint[1:] = (mm - 1.0) ** a1 - (mm - alpha - 1.0) * mm ** alpha
    return ConvWeights(order=alpha, scheme=ConvScheme.RL_INTEGRAL, weights=weights, endpoint=endpoint)


@lru_cache(maxsize=64)
def caputo_weights(alpha: float, n_steps: int) -> ConvWeights:
    """L1 weights b_j = (j+1)^(1-alpha) - j^(1-alpha), j = 0..n_steps-1"""
    _check_order(alpha)
    j = np.arange(n_steps, dtype=float)
    weights = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    return ConvWeights(order=alpha, scheme=ConvScheme.CAPUTO_L1, weights=weights)


def _oriented(mat: np.ndarray, cw: ConvWeights) -> np.ndarray:
    return mat[::-1, ::-1].copy() if cw.scheme.is_right else mat


def rl_integral_matrix(mesh: TimeMesh, alpha: float, right: bool = False) -> np.ndarray:
    """Matrix of the RL integral of order alpha

    Left: lower triangular with a zero row at t_0. Right: the reflection, zero at T.
    """
    cw = rl_integral_weights(alpha, mesh.N_t)
    if right:
        cw = cw.reflected()
    n = mesh.N_t + 1
    mat = toeplitz(cw.weights, np.zeros(n))
    mat[:, 0] = cw.endpoint
    mat[0, :] = 0.0
    return _oriented(mat, cw) * (mesh.tau ** alpha / gamma(alpha + 2.0))


def caputo_matrix(mesh: TimeMesh, alpha: float, right: bool = False) -> np.ndarray:
    """L1 matrix, lower triangular or reflected; every row sums to zero up to rounding"""
    cw = caputo_weights(alpha, mesh.N_t)
    if right:
        cw = cw.reflected()
    n = mesh.N_t + 1
    diff = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    diff[idx, idx + 1] = 1.0
    diff[idx, idx] = -1.0
    conv = toeplitz(cw.weights, np.zeros(n - 1))
    mat = np.zeros((n, n))
    mat[1:] = conv @ diff
    return _oriented(mat, cw) * (mesh.tau ** (-alpha) / gamma(2.0 - alpha))


def rl_derivative_matrix(mesh: TimeMesh, alpha: float) -> np.ndarray:
    """Backward difference of the product-trapezoid I^(1-alpha); rows 1..N_t"""
    integral = rl_integral_matrix(mesh, 1.0 - alpha)
    mat = np.zeros_like(integral)
    mat[1:] = (integral[1:] - integral[:-1]) / mesh.tau
    return mat


def _signal(mesh: TimeMesh, values: np.ndarray) -> TimeSignal:
    return TimeSignal(mesh, values)


def rl_integral_left(u: TimeSignal, alpha: float) -> TimeSignal:
    """I^alpha_{0,t} u at every node; the value at t_0 is 0"""
    return _signal(u.mesh, rl_integral_matrix(u.mesh, alpha) @ u.values)


def rl_integral_right(u: TimeSignal, alpha: float) -> TimeSignal:
    """I^alpha_{t,T} u; the value at T is 0"""
    return _signal(u.mesh, rl_integral_matrix(u.mesh, alpha, right=True) @ u.values)


def caputo_derivative(u: TimeSignal, alpha: float) -> TimeSignal:
    """L1 Caputo derivative at t_1..t_N; node 0 is set to 0

    Evaluated on increments so that constant signals give exact zeros.
    """
    _check_order(alpha)
    mesh = u.mesh
    cw = caputo_weights(alpha, mesh.N_t)
    increments = np.diff(u.values)
    out = np.zeros(mesh.size)
    out[1:] = toeplitz(cw.weights, np.zeros(mesh.N_t)) @ increments
    return _signal(mesh, out * (mesh.tau ** (-alpha) / gamma(2.0 - alpha)))


def caputo_derivative_right(u: TimeSignal, alpha: float) -> TimeSignal:
    return caputo_derivative(u.reversed(), alpha).reversed()


def rl_derivative_left(u: TimeSignal, alpha: float) -> TimeSignal:
    """Left RL derivative as Caputo plus u_0 * phi_{1-alpha}(t)

    At t_0 the singular term is replaced by its cell average over (0, tau).
    """
    mesh = u.mesh
    out = caputo_derivative(u, alpha).values.copy()
    u0 = u.values[0]
    out[1:] += u0 * phi_kernel(1.0 - alpha, mesh.nodes[1:])
    out[0] = u0 * mesh.tau ** (-alpha) / gamma(2.0 - alpha)
    return _signal(mesh, out)


def rl_derivative_right(u: TimeSignal, alpha: float) -> TimeSignal:
    return rl_derivative_left(u.reversed(), alpha).reversed()


def cumulative_integral(u: TimeSignal) -> TimeSignal:
    """Trapezoid primitive int_0^t u"""
    return _signal(u.mesh, cumulative_trapezoid(u.values, u.mesh.nodes, initial=0.0))


def time_integral(u: Union[TimeSignal, np.ndarray], mesh: TimeMesh = None) -> float:
    if isinstance(u, TimeSignal):
        return float(trapezoid(u.values, u.mesh.nodes))
    return float(trapezoid(u, mesh.nodes))


def ibp_residual(f: TimeSignal, g: TimeSignal, alpha: float) -> float:
    """Defect of the discrete fractional integration-by-parts identity

    int g D^a f - [int f D^a_T g + g(T) I^(1-a) f(T)] - (f I^(1-a)_T g)|_0^T,
    with the endpoint-singular part moved onto the RL integral term.
    """
    mesh = f.mesh
    lhs = time_integral(g * caputo_derivative(f, alpha))
    rhs = (time_integral(f * caputo_derivative_right(g, alpha))
           + g.values[-1] * rl_integral_left(f, 1.0 - alpha).values[-1])
    boundary = -f.values[0] * rl_integral_right(g, 1.0 - alpha).values[0]
    residual = abs(lhs - rhs - boundary)
    logger.debug(f"ibp residual {residual:.3e} at N_t={mesh.N_t}, alpha={alpha}")
    return residual


def semigroup_residual(u: TimeSignal, alpha: float) -> float:
    """sup |I^alpha I^(1-alpha) u - int_0^t u|"""
    composed = rl_integral_left(rl_integral_left(u, 1.0 - alpha), alpha)
    return float(np.max(np.abs(composed.values - cumulative_integral(u).values)))


def observed_rate(residuals) -> float:
    """Mean log2 reduction per mesh halving over a refinement sweep"""
    values = np.asarray(residuals, dtype=float)
    if values.size < 2 or np.any(values <= 0.0):
        raise DomainError("A rate needs at least two positive residuals")
    return float(np.log2(values[0] / values[-1]) / (values.size - 1))


def convexity_gap(u: TimeSignal, alpha: float) -> float:
    """max_n [D^a H(u) - H'(u) D^a u] for H(z) = max(z, 0)^2 / 2; nonpositive for L1"""
    pos = np.maximum(u.values, 0.0)
    h_of_u = _signal(u.mesh, 0.5 * pos ** 2)
    gap = caputo_derivative(h_of_u, alpha).values - pos * caputo_derivative(u, alpha).values
    return float(np.max(gap[1:]))
