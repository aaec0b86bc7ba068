"""
Special functions and named constants
Gamma ratios, sphere areas, the Q-curvature normalizations and the Paneitz multipliers
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, gammasgn

from qcurv.errors import DomainError

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DimensionContext:
    """Dimension n and derivative order s with 0 < s < n"""

    n: int
    s: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n}")
        if not 0 < self.s < self.n:
            raise DomainError(f"order s must lie in (0, {self.n}), got {self.s}")

    @classmethod
    def critical(cls, n: int) -> "DimensionContext":
        """Context with s = n/2, the order of the main existence problem"""
        return cls(n=n, s=n / 2)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0"""
    if x <= 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return float(gammaln(x))


def sphere_area(d: int) -> float:
    """Surface area |S^d| = 2 pi^((d+1)/2) / Gamma((d+1)/2); d = 0 gives the two-point sphere"""
    if d < 0:
        raise DomainError(f"sphere dimension must be >= 0, got {d}")
    half = (d + 1) / 2
    return 2.0 * math.exp(half * math.log(math.pi) - gammaln(half))


def omega(n: int) -> float:
    """|S^(n-1)|, the measure of the unit sphere bounding the ball in R^n"""
    return sphere_area(n - 1)


def gamma_n(n: int) -> float:
    """gamma_n = (n-1)! |S^n| / 2"""
    return math.factorial(n - 1) * sphere_area(n) / 2.0


def lambda_1(n: int) -> float:
    """Mass of the round-sphere bubble, (n-1)! |S^n|"""
    return 2.0 * gamma_n(n)


def K_ns(n: int, s: float) -> float:
    """Normalization of the Riesz kernel inverting (-Delta)^(s/2) on R^n"""
    DimensionContext(n, s)
    log_value = (
        gammaln((n - s) / 2)
        - gammaln(s / 2)
        - s * math.log(2.0)
        - (n / 2) * math.log(math.pi)
    )
    return math.exp(log_value)


def _is_pole(b: float) -> bool:
    nearest = round(b)
    return nearest <= 0 and abs(b - nearest) < POLE_TOLERANCE


def paneitz_multiplier(l: int, ctx: DimensionContext) -> float:
    """Eigenvalue Gamma(l+n/2+s) / Gamma(l+n/2-s) of P_2s on degree-l harmonics.

    The ratio is zero when l + n/2 - s is a non-positive integer. Integer
    orders 2s use the finite rising factorial, which is exact in floating
    point; other orders go through log-gamma.
    """
    if l < 0:
        raise DomainError(f"harmonic degree must be >= 0, got {l}")
    b = l + ctx.n / 2 - ctx.s
    if _is_pole(b):
        return 0.0

    two_s = 2 * ctx.s
    if abs(two_s - round(two_s)) < POLE_TOLERANCE:
        return float(np.prod(b + np.arange(int(round(two_s)), dtype=float)))

    a = l + ctx.n / 2 + ctx.s
    sign = gammasgn(a) * gammasgn(b)
    return float(sign * np.exp(gammaln(a) - gammaln(b)))


def paneitz_sqrt_multiplier(l: int, ctx: DimensionContext) -> float:
    """Multiplier of the square root P_2s^(1/2); needs 0 < s <= n/2"""
    if ctx.s > ctx.n / 2:
        raise DomainError(f"square-root variant needs s <= n/2, got s={ctx.s}")
    return math.sqrt(paneitz_multiplier(l, ctx))


def paneitz_multipliers(l_max: int, ctx: DimensionContext) -> np.ndarray:
    """Vector of multipliers for l = 0..l_max"""
    return np.array([paneitz_multiplier(l, ctx) for l in range(l_max + 1)])
