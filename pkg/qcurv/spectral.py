"""
Zonal spectral analysis on S^n
Gegenbauer analysis/synthesis of radial sphere fields and the Paneitz operators as spectral multipliers
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import gammaln

from qcurv.constants import DimensionContext, omega, paneitz_multipliers
from qcurv.conformal import (
    Chart,
    RadialField,
    SphereQuadrature,
    log_radial_grid,
    sphere_interpolant,
    trapezoid_weights,
)
from qcurv.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_L_MAX = 64
DEFAULT_QUADRATURE_NODES = 256


class PaneitzVariant(str, Enum):
    P_2S = "P_2s"
    P_2S_SQRT = "P_2s_sqrt"
    P_S = "P_s"


@dataclass(frozen=True, eq=False)
class ZonalSpectrum:
    """Coefficients against L^2-normalized zonal harmonics Z_0..Z_lmax"""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    @property
    def l_max(self) -> int:
        return self.coeffs.size - 1

    def with_coeffs(self, coeffs: np.ndarray) -> "ZonalSpectrum":
        return ZonalSpectrum(self.n, coeffs)

    def inner(self, other: "ZonalSpectrum") -> float:
        return float(np.dot(self.coeffs, other.coeffs))

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"l": np.arange(self.coeffs.size), "coefficient": self.coeffs})

    @classmethod
    def unit(cls, n: int, l: int, l_max: int) -> "ZonalSpectrum":
        coeffs = np.zeros(l_max + 1)
        coeffs[l] = 1.0
        return cls(n, coeffs)


def gegenbauer_table(l_max: int, lam: float, x: np.ndarray) -> np.ndarray:
    """C_l^lam(x) for l = 0..l_max by the three-term recurrence"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    table = np.empty((l_max + 1, x.size))
    table[0] = 1.0
    if l_max >= 1:
        table[1] = 2.0 * lam * x
    for l in range(2, l_max + 1):
        table[l] = (2.0 * x * (l + lam - 1) * table[l - 1] - (l + 2 * lam - 2) * table[l - 2]) / l
    return table


def zonal_norms(l_max: int, n: int) -> np.ndarray:
    """Closed-form L^2(S^n) norms of C_l^((n-1)/2)(cos theta)"""
    lam = (n - 1) / 2
    l = np.arange(l_max + 1)
    log_h = (
        np.log(np.pi) + (1 - 2 * lam) * np.log(2.0) + gammaln(l + 2 * lam)
        - gammaln(l + 1) - np.log(l + lam) - 2 * gammaln(lam)
    )
    return np.sqrt(omega(n) * np.exp(log_h))


def zonal_values(l_max: int, n: int, x: np.ndarray) -> np.ndarray:
    """Normalized zonal harmonics Z_l(x), rows indexed by l"""
    return gegenbauer_table(l_max, (n - 1) / 2, x) / zonal_norms(l_max, n)[:, None]


class ZonalBasis:
    """Precomputed zonal harmonics at the nodes of a sphere quadrature.

    Norms are measured with the quadrature itself, which makes analysis
    followed by synthesis the identity on band-limited spectra.
    """

    def __init__(self, n: int, l_max: int = DEFAULT_L_MAX, nodes: int = DEFAULT_QUADRATURE_NODES):
        if l_max < 0:
            raise ConfigError(f"l_max must be >= 0, got {l_max}", key="l_max")
        if l_max > nodes // 2:
            raise ConfigError(
                f"l_max={l_max} exceeds the resolving power of {nodes} quadrature nodes",
                key="l_max",
            )
        self.n = n
        self.l_max = l_max
        self.quad = SphereQuadrature(n, nodes)
        raw = gegenbauer_table(l_max, (n - 1) / 2, self.quad.x)
        self.norms = np.sqrt(raw ** 2 @ self.quad.weights)
        self.table = raw / self.norms[:, None]
        logger.debug(f"Zonal basis ready: n={n}, l_max={l_max}, nodes={nodes}")

    def _node_values(self, u: RadialField) -> np.ndarray:
        if u.chart != Chart.SPHERE_POLAR:
            raise DomainError("analysis expects a field on the sphere chart")
        if u.grid.size == self.quad.size and np.allclose(u.grid, self.quad.theta, rtol=0, atol=1e-13):
            return u.values
        return sphere_interpolant(u)(self.quad.theta)

    def analyze(self, u: RadialField) -> ZonalSpectrum:
        values = self._node_values(u)
        return ZonalSpectrum(self.n, self.table @ (self.quad.weights * values))

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of values given at the quadrature nodes"""
        return self.table @ (self.quad.weights * values)

    def synthesize(self, spec: ZonalSpectrum) -> RadialField:
        return self.quad.field(self.node_values(spec.coeffs))

    def node_values(self, coeffs: np.ndarray) -> np.ndarray:
        return self.table[: coeffs.size].T @ coeffs

    def evaluate(self, spec: ZonalSpectrum, x: np.ndarray) -> np.ndarray:
        """Synthesis at arbitrary x = cos(theta)"""
        raw = gegenbauer_table(spec.l_max, (self.n - 1) / 2, x)
        return (raw / self.norms[: spec.l_max + 1, None]).T @ spec.coeffs


def multipliers(n: int, l_max: int, variant: PaneitzVariant, s: Optional[float] = None) -> np.ndarray:
    s = n / 2 if s is None else s
    variant = PaneitzVariant(variant)
    if variant == PaneitzVariant.P_S:
        return paneitz_multipliers(l_max, DimensionContext(n, s / 2))
    m = paneitz_multipliers(l_max, DimensionContext(n, s))
    if variant == PaneitzVariant.P_2S_SQRT:
        if s > n / 2:
            raise DomainError(f"square-root variant needs s <= n/2, got s={s}")
        return np.sqrt(m)
    return m


def apply_paneitz(spec: ZonalSpectrum, variant: PaneitzVariant, s: Optional[float] = None) -> ZonalSpectrum:
    return spec.with_coeffs(spec.coeffs * multipliers(spec.n, spec.l_max, variant, s))


def pn_half_norm(spec: ZonalSpectrum) -> float:
    """||P_n^(1/2) u||_2"""
    m = multipliers(spec.n, spec.l_max, PaneitzVariant.P_2S)
    return float(np.sqrt(np.sum(m * spec.coeffs ** 2)))


def h_half_norm(spec: ZonalSpectrum) -> float:
    """Full H^(n/2) norm, (||u||_2^2 + ||P_n^(1/2) u||_2^2)^(1/2)"""
    return float(np.sqrt(spec.l2_norm() ** 2 + pn_half_norm(spec) ** 2))


def poincare_constant(n: int) -> float:
    """Best C in ||u||_2^2 <= C ||P_n^(1/2) u||_2^2 for mean-zero u"""
    return 1.0 / multipliers(n, 1, PaneitzVariant.P_2S)[1]


def log_bilaplacian(values: np.ndarray, h: float) -> np.ndarray:
    """r^4 Delta^2 of a radial function in R^4, written in s = ln r as f'''' - 4 f''.

    Fourth-order central differences on a uniform grid of step h; the three
    nodes at each end are returned as NaN.
    """
    f = np.asarray(values, dtype=float)
    out = np.full_like(f, np.nan)
    c = slice(3, f.size - 3)
    d2 = (
        -f[1:-5] + 16 * f[2:-4] - 30 * f[3:-3] + 16 * f[4:-2] - f[5:-1]
    ) / (12 * h ** 2)
    d4 = (
        -f[:-6] + 12 * f[1:-5] - 39 * f[2:-4] + 56 * f[3:-3] - 39 * f[4:-2] + 12 * f[5:-1] - f[6:]
    ) / (6 * h ** 4)
    out[c] = d4 - 4 * d2
    return out


def conformal_norm_identity_check(u: RadialField, basis: ZonalBasis, t: Optional[np.ndarray] = None) -> float:
    """Relative gap between the spectral energy and the Euclidean energy of w = u o S.

    Only n = 4 is supported: there (-Delta)^2 is local and is differenced
    on the log-radial grid.
    """
    if u.n != 4 or basis.n != 4:
        raise ConfigError("the Euclidean energy is only implemented for n = 4", key="n")
    spec = basis.analyze(u)
    m = multipliers(4, spec.l_max, PaneitzVariant.P_2S)
    spectral_energy = float(np.sum(m * spec.coeffs ** 2))

    t = log_radial_grid() if t is None else t
    w = basis.evaluate(spec, np.tanh(t))
    h = abs(t[1] - t[0])
    integrand = w * log_bilaplacian(w, h)
    inner = slice(3, t.size - 3)
    euclidean_energy = float(omega(4) * np.sum(trapezoid_weights(t[inner]) * integrand[inner]))

    logger.info(f"Energy identity: spectral={spectral_energy:.10g}, euclidean={euclidean_energy:.10g}")
    if spectral_energy == 0.0:
        return abs(euclidean_energy)
    return abs(spectral_energy - euclidean_energy) / spectral_energy
