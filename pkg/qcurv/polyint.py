"""
Polynomial integrability thresholds
Block-radial quadrature of |x|^sigma e^q(x) outside the unit ball for polynomials of the first k coordinates
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from qcurv.config import worker_count
from qcurv.constants import omega
from qcurv.conformal import panel_log_grid
from qcurv.errors import DomainError

logger = logging.getLogger(__name__)

START_RADIUS = 4.0
MAX_DOUBLINGS = 8
REL_TOL = 1e-6
ANGLE_LEVELS = 48
GL_ORDER = 16


@dataclass(frozen=True)
class ProductPolynomial:
    """q(x) = constant + sum_j a_j |y|^(2j) where y holds the first k coordinates of x"""

    k: int
    coefficients: Tuple[float, ...] = ()
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        if self.k < 0:
            raise DomainError(f"active block size must be >= 0, got {self.k}")
        if self.k == 0 and self.coefficients:
            raise DomainError("with no active variables q must be constant")
        if self.k > 0 and (not self.coefficients or self.coefficients[-1] >= 0):
            raise DomainError("q must tend to -infinity on the active block")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.full_like(y, self.constant)
        for j, a in enumerate(self.coefficients, start=1):
            out += a * y ** (2 * j)
        return out

    def threshold(self, n: int) -> float:
        """Supremum of sigma with a finite integral: -n + k, or +inf when q decays in every direction"""
        if self.k == n:
            return float("inf")
        return float(-n + self.k)


@dataclass(frozen=True)
class PolyIntResult:
    value: float
    converged: bool
    tail_exponent: float
    R_out: float


def _graded_angles() -> Tuple[np.ndarray, np.ndarray]:
    """Nodes in phi = pi/2 - psi, panels halving toward phi = 0"""
    edges = (np.pi / 2) * 2.0 ** -np.arange(ANGLE_LEVELS + 1)
    edges = np.append(edges, 0.0)[::-1]
    x, w = leggauss(GL_ORDER)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = (hi - lo) / 2
        nodes.append(lo + half * (x + 1))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _shell_density(q: ProductPolynomial, n: int, rho: np.ndarray) -> np.ndarray:
    """Integral of e^q over the sphere of radius rho, divided by rho^(n-1)"""
    k = q.k
    if k == n or k == 0:
        return omega(n) * np.exp(q(rho))
    phi, w = _graded_angles()
    y = rho[:, None] * np.sin(phi)[None, :]
    angular = np.sin(phi) ** (k - 1) * np.cos(phi) ** (n - k - 1)
    inner = np.exp(q(y)) @ (w * angular)
    return omega(k) * omega(n - k) * inner


def _annulus(q: ProductPolynomial, sigma: float, n: int, lo: float, hi: float) -> float:
    log_rho, w = panel_log_grid(np.array([math.log(lo), math.log(hi)]), 0.5, GL_ORDER)
    rho = np.exp(log_rho)
    return float(np.sum(w * rho ** (sigma + n) * _shell_density(q, n, rho)))


def weighted_exp_integral(q: ProductPolynomial, sigma: float, n: int,
                          R_out: float = START_RADIUS, doublings: int = MAX_DOUBLINGS) -> PolyIntResult:
    """Integral of |x|^sigma e^q over B_R minus B_1, doubling R until it settles.

    Converged means a relative change below 1e-6 or a geometric tail
    (measured increment exponent < 0), in which case the extrapolated tail
    is added to the value.
    """
    if sigma <= -n:
        raise DomainError(f"sigma must exceed -n = {-n}, got {sigma}")
    if q.k > n:
        raise DomainError(f"active block k={q.k} exceeds n={n}")

    value = _annulus(q, sigma, n, 1.0, R_out)
    increments = []
    exponent = float("nan")
    R = R_out
    for _ in range(doublings):
        delta = _annulus(q, sigma, n, R, 2 * R)
        value += delta
        R *= 2
        increments.append(delta)
        if value > 0 and delta <= REL_TOL * value:
            return PolyIntResult(value, True, exponent, R)
        if len(increments) >= 2 and increments[-2] > 0 and delta > 0:
            exponent = math.log2(delta / increments[-2])

    if exponent < 0:
        ratio = 2.0 ** exponent
        tail = increments[-1] * ratio / (1 - ratio)
        return PolyIntResult(value + tail, True, exponent, R)
    return PolyIntResult(value, False, exponent, R)


def direct_radial_integral(q: ProductPolynomial, sigma: float, n: int, R_out: float) -> float:
    """Reference value for k = n with adaptive quadrature in |x|"""
    if q.k != n:
        raise DomainError("direct radial quadrature needs k = n")
    value, _ = quad(lambda rho: rho ** (sigma + n - 1) * math.exp(float(q(np.array(rho)))),
                    1.0, R_out, limit=200, epsabs=0.0, epsrel=1e-12)
    return omega(n) * value


@dataclass(frozen=True)
class ThresholdEstimate:
    estimate: float
    inconclusive: bool
    table: pd.DataFrame


def threshold_scan(q: ProductPolynomial, n: int, sigma_grid: Sequence[float],
                   tol: float = 1e-3) -> ThresholdEstimate:
    """Locate the convergence boundary in sigma by scanning, then bisecting the bracket"""
    sigmas = sorted(float(s) for s in sigma_grid)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda s: weighted_exp_integral(q, s, n), sigmas))
    table = pd.DataFrame({
        "sigma": sigmas,
        "value": [r.value for r in results],
        "converged": [r.converged for r in results],
        "tail_exponent": [r.tail_exponent for r in results],
    })

    flags = table["converged"].to_numpy()
    bracket: Optional[Tuple[float, float]] = None
    for i in range(len(sigmas) - 1):
        if flags[i] and not flags[i + 1]:
            bracket = (sigmas[i], sigmas[i + 1])
            break
    if bracket is None:
        logger.warning(f"Threshold scan for k={q.k}, n={n} found no convergence boundary in the window")
        return ThresholdEstimate(float("nan"), True, table)

    lo, hi = bracket
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if weighted_exp_integral(q, mid, n).converged:
            lo = mid
        else:
            hi = mid
    estimate = (lo + hi) / 2
    logger.info(f"Threshold for k={q.k}, n={n}: {estimate:.4f} (expected {q.threshold(n):.4f})")
    return ThresholdEstimate(estimate, False, table)
