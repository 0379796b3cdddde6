"""
Independent reference values used to validate the discrete operators

Mittag-Leffler functions, scalar fractional relaxation by quadrature and a
brute-force fractional Laplacian by adaptive quadrature with Richardson
extrapolation in the excluded radius.
"""
import logging
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as sp_gamma, rgamma

from numerics.errors import DomainError, OracleConvergenceError

logger = logging.getLogger(__name__)

_SERIES_TERM_LIMIT = 1e3
_ASYMPTOTIC_THRESHOLD = 1e6


def _series(alpha: float, beta: float, z: float) -> Optional[float]:
    """Power series, or None when its terms grow past the cancellation limit"""
    total = 0.0
    for k in range(2000):
        log_mag = k * math.log(abs(z)) if z != 0.0 else (0.0 if k == 0 else -math.inf)
        arg = alpha * k + beta
        term = (z ** k) * rgamma(arg) if log_mag < 700 else math.inf
        if not math.isfinite(term) or abs(term) > _SERIES_TERM_LIMIT:
            return None
        total += term
        if k > 2 and abs(term) <= 1e-17 * max(abs(total), 1e-300) and arg > 1.0:
            return total
    return total


def _laplace_kernel(alpha: float, numerator_power: float) -> Callable[[float], float]:
    sin_a = math.sin(alpha * math.pi)
    cos_a = math.cos(alpha * math.pi)

    def kernel(r: float) -> float:
        ra = r ** alpha
        return r ** numerator_power * sin_a / (math.pi * (ra * ra + 2.0 * ra * cos_a + 1.0))
    return kernel


def mittag_leffler(alpha: float, z: float, beta: float = 1.0) -> float:
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z

    Negative arguments with large magnitude use the Laplace-integral form
    (beta = 1 or beta = alpha) and the asymptotic series beyond 1e6.
    """
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    z = float(z)
    if alpha == 1.0 and beta == 1.0:
        return math.exp(z)
    value = _series(alpha, beta, z) if abs(z) < _ASYMPTOTIC_THRESHOLD else None
    if value is not None:
        return float(value)
    if z > 0.0:
        raise DomainError("Large positive arguments are outside the supported range")
    x = -z
    if x >= _ASYMPTOTIC_THRESHOLD or alpha == 1.0:
        return float(sum((-1.0) ** (k + 1) * x ** (-k) * rgamma(beta - alpha * k) for k in range(1, 4)))
    t = x ** (1.0 / alpha)
    if beta == 1.0:
        return _laplace_integral(_laplace_kernel(alpha, alpha - 1.0), t)
    if beta == alpha:
        return t ** (1.0 - alpha) * _laplace_integral(_laplace_kernel(alpha, alpha), t)
    raise DomainError(f"beta={beta} is only supported through the power series")


def _laplace_integral(kernel: Callable[[float], float], t: float) -> float:
    """int_0^inf exp(-r t) kernel(r) dr, taken in v = r t"""
    def integrand(v: float) -> float:
        return math.exp(-v) * kernel(v / t) / t

    head, _ = quad(integrand, 0.0, 1.0, limit=400, epsabs=0.0, epsrel=1e-11)
    tail, _ = quad(integrand, 1.0, math.inf, limit=400, epsabs=0.0, epsrel=1e-11)
    return float(head + tail)


def relaxation_kernel(alpha: float, lam: float, t: float) -> float:
    """t^(alpha-1) E_{alpha,alpha}(-lam t^alpha)"""
    if t <= 0.0:
        raise DomainError("The relaxation kernel needs t > 0")
    return t ** (alpha - 1.0) * mittag_leffler(alpha, -lam * t ** alpha, alpha)


def eigen_reference(alpha: float, lam: float, forcing: Callable[[float], float],
                    t_eval: Union[float, Sequence[float]], y0: float = 0.0) -> np.ndarray:
    """Solution of D^alpha y + lam y = f with y(0) = y0, by quadrature

    The convolution with the relaxation kernel is taken in sigma = (t - s)^alpha,
    which removes the weak singularity.
    """
    times = np.atleast_1d(np.asarray(t_eval, dtype=float))
    out = np.zeros(len(times))
    for i, t in enumerate(times):
        if t <= 0.0:
            out[i] = y0
            continue
        upper = t ** alpha
        integral, _ = quad(lambda sig: mittag_leffler(alpha, -lam * sig, alpha)
                           * forcing(t - sig ** (1.0 / alpha)), 0.0, upper, limit=200,
                           epsabs=1e-13, epsrel=1e-12)
        out[i] = integral / alpha + y0 * mittag_leffler(alpha, -lam * t ** alpha)
    return out


def constant_forcing_solution(alpha: float, lam: float, f: float, t: Union[float, np.ndarray]) -> np.ndarray:
    """(f / lam) (1 - E_alpha(-lam t^alpha)) for constant forcing and zero start"""
    times = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([f / lam * (1.0 - mittag_leffler(alpha, -lam * tt ** alpha)) for tt in times])


def eigen_reference_solution(matrix: np.ndarray, f: np.ndarray, t_eval: Sequence[float], alpha: float,
                             forcing: Optional[Callable[[float], float]] = None) -> np.ndarray:
    """Modal solution of D^alpha u + L u = f(x) forcing(t) with u(0) = 0, shape (n, len(t_eval))

    ``forcing`` defaults to 1, for which every mode uses the closed form.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError("The reference solution needs a square matrix")
    if not np.allclose(matrix, matrix.T, rtol=1e-12, atol=0.0):
        raise DomainError("The reference solution needs a symmetric matrix")
    lam, vecs = np.linalg.eigh(matrix)
    if lam[0] <= 0.0:
        raise DomainError("The reference solution needs a positive definite matrix")
    coeffs = vecs.T @ np.asarray(f, dtype=float)
    times = np.asarray(t_eval, dtype=float)
    modal = np.zeros((len(lam), len(times)))
    for j, (lam_j, c_j) in enumerate(zip(lam, coeffs)):
        if c_j == 0.0:
            continue
        if forcing is None:
            modal[j] = c_j * constant_forcing_solution(alpha, float(lam_j), 1.0, times)
        else:
            modal[j] = c_j * eigen_reference(alpha, float(lam_j), forcing, times)
    return vecs @ modal


def _normalization(n: int, s: float) -> float:
    """4^s Gamma(n/2 + s) / (pi^(n/2) |Gamma(-s)|), computed with scipy"""
    return 4.0 ** s * float(sp_gamma(0.5 * n + s)) / (math.pi ** (0.5 * n) * abs(float(sp_gamma(-s))))


def bump_laplacian(n: int, s: float) -> float:
    """Constant value of (-Delta)^s (1 - |x|^2)_+^s inside the unit ball"""
    return 4.0 ** s * float(sp_gamma(1.0 + s) * sp_gamma(0.5 * n + s) / sp_gamma(0.5 * n))


def _truncated_integral(u: Callable[[np.ndarray], float], x: np.ndarray, s: float, eps: float,
                        radius: float, breakpoints: Sequence[float]) -> float:
    n = len(x)
    ux = u(x)
    pts = sorted(p for p in breakpoints if eps < p < radius)
    edges = [eps] + pts + [radius]

    def radial(rho: float, direction: np.ndarray) -> float:
        z = rho * direction
        return (2.0 * ux - u(x + z) - u(x - z)) * rho ** (-1.0 - 2.0 * s)

    if n == 1:
        e = np.ones(1)
        total = sum(quad(radial, a, b, args=(e,), limit=400, epsabs=1e-13, epsrel=1e-12)[0]
                    for a, b in zip(edges[:-1], edges[1:]))
        return total + ux * radius ** (-2.0 * s) / s

    def angular(theta: float) -> float:
        e = np.array([math.cos(theta), math.sin(theta)])
        return sum(quad(radial, a, b, args=(e,), limit=200, epsabs=1e-12, epsrel=1e-10)[0]
                   for a, b in zip(edges[:-1], edges[1:]))

    total, _ = quad(angular, 0.0, math.pi, limit=100, epsabs=1e-11, epsrel=1e-10)
    return total + math.pi * ux * radius ** (-2.0 * s) / s


def brute_force_frac_laplacian(u: Callable[[np.ndarray], float], x: Union[float, Sequence[float]], s: float,
                               radius: float = 1e3, eps0: float = 0.25, levels: int = 8,
                               tol: float = 1e-7, breakpoints: Sequence[float] = ()) -> float:
    """(-Delta)^s u(x) for u supported (or negligible) inside the ball of radius ``radius``

    The excluded ball |z| < eps contributes O(eps^(2-2s)); successive halvings
    of eps are combined by Richardson extrapolation with that exponent.
    """
    if not (0.0 < s < 1.0):
        raise DomainError(f"Spatial order s must lie in (0, 1), got {s}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(x)
    if n not in (1, 2):
        raise DomainError("The brute-force oracle supports dimensions 1 and 2")
    if levels < 1:
        raise DomainError("Richardson extrapolation needs at least one halving")
    factor = 2.0 ** (2.0 - 2.0 * s)
    previous = None
    eps = eps0
    coarse = _truncated_integral(u, x, s, eps, radius, breakpoints)
    last = coarse
    for level in range(levels):
        eps *= 0.5
        fine = _truncated_integral(u, x, s, eps, radius, breakpoints)
        extrapolated = (factor * fine - coarse) / (factor - 1.0)
        if previous is not None and abs(extrapolated - previous) <= tol * (1.0 + abs(extrapolated)):
            return _normalization(n, s) * extrapolated
        previous, coarse, last = extrapolated, fine, extrapolated
    scale = _normalization(n, s)
    raise OracleConvergenceError("Richardson extrapolation did not settle",
                                 previous=float(scale * previous), last=float(scale * last))
