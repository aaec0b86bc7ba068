"""
Singular radial convolution kernels
Angular averages g_alpha and a_log, the radial Riesz convolution T, the potential v and spectral Green's functions
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.stats import linregress

from qcurv.constants import K_ns, gamma_n, omega, sphere_area
from qcurv.conformal import Chart, RadialField
from qcurv.errors import DomainError
from qcurv.spectral import PaneitzVariant, multipliers, zonal_values

logger = logging.getLogger(__name__)

PANEL_ORDER = 20
ROW_BLOCK = 512
TAU_MAX = 30.0
TAU_NODES = 600


class KernelRegime(str, Enum):
    BOUNDED = "bounded"
    LOG = "log"
    POWER = "power"


class ConvolutionMode(str, Enum):
    FLAT = "flat"
    SPHERE_CONFORMAL = "sphere_conformal"


def _angular_rule(n: int, one_minus_r: float) -> Tuple[np.ndarray, np.ndarray]:
    """Polar-angle nodes on [0, pi] graded towards phi = 0, weights carrying sin^(n-2).

    Panels halve in width towards the origin until they are finer than the
    distance of the kernel's near-singularity.
    """
    x, w = leggauss(PANEL_ORDER)
    depth = int(np.ceil(np.log2(4 * np.pi / max(one_minus_r, 1e-15)))) + 1
    edges = np.concatenate(([0.0], np.pi * 2.0 ** -np.arange(depth, -1, -1)))
    half = np.diff(edges)[:, None] / 2
    phi = (edges[:-1, None] + half * (x + 1)).ravel()
    weights = (half * w).ravel() * np.sin(phi) ** (n - 2)
    scale = sphere_area(n - 2) / sphere_area(n - 1)
    return phi, scale * weights


def _chord2(value: float, phi: np.ndarray) -> np.ndarray:
    # |e_1 - R omega|^2 in half-angle form; 1 - cos(phi) cancels below phi ~ 1e-8
    return (1.0 - value) ** 2 + 4.0 * value * np.sin(phi / 2) ** 2


def _check_alpha(alpha: float, n: int):
    if not 0 < alpha < n:
        raise DomainError(f"alpha must lie in (0, {n}), got {alpha}")


def g_alpha(R, alpha: float, n: int) -> np.ndarray:
    """Spherical mean of |e_1 - R omega|^(-alpha) over S^(n-1)"""
    _check_alpha(alpha, n)
    R = np.atleast_1d(np.asarray(R, dtype=float))
    if np.any(R < 0) or np.any(R >= 1):
        raise DomainError("g_alpha is defined for 0 <= R < 1")
    out = np.empty_like(R)
    for i, value in enumerate(R):
        phi, w = _angular_rule(n, 1.0 - value)
        dist2 = _chord2(value, phi)
        out[i] = np.sum(w * dist2 ** (-alpha / 2))
    return out


def _log_mean(R: np.ndarray, n: int) -> np.ndarray:
    """Spherical mean of ln|e_1 - R omega| for 0 <= R <= 1"""
    out = np.empty_like(R)
    for i, value in enumerate(R):
        phi, w = _angular_rule(n, max(1.0 - value, 1e-15))
        dist2 = _chord2(value, phi)
        out[i] = 0.5 * np.sum(w * np.log(np.maximum(dist2, 1e-300)))
    return out


def a_log(r, rho, n: int) -> np.ndarray:
    """Spherical mean of ln|r e_1 - rho omega|, symmetric in (r, rho)"""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    r, rho = np.broadcast_arrays(r, rho)
    big = np.maximum(r, rho)
    if np.any(big <= 0):
        raise DomainError("a_log needs r or rho positive")
    small = np.minimum(r, rho)
    return np.log(big) + _log_mean((small / big).ravel(), n).reshape(big.shape)


def regime(alpha: float, n: int) -> KernelRegime:
    if alpha < n - 1:
        return KernelRegime.BOUNDED
    if alpha == n - 1:
        return KernelRegime.LOG
    return KernelRegime.POWER


@dataclass(frozen=True, eq=False)
class AngularKernelTable:
    """g_alpha tabulated in tau = -ln(1 - R) with an asymptotic branch past TAU_MAX"""

    alpha: float
    n: int
    tau: np.ndarray
    log_values: np.ndarray
    regime: KernelRegime

    @classmethod
    def build(cls, alpha: float, n: int) -> "AngularKernelTable":
        _check_alpha(alpha, n)
        tau = np.linspace(0.0, TAU_MAX, TAU_NODES)
        R = 1.0 - np.exp(-tau)
        values = g_alpha(R, alpha, n)
        logger.debug(f"Tabulated g_alpha for alpha={alpha}, n={n}")
        return cls(alpha, n, tau, np.log(values), regime(alpha, n))

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicSpline(self.tau, self.log_values))

    def __call__(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        one_minus = np.maximum(1.0 - R, 1e-300)
        tau = -np.log(one_minus)
        inside = np.minimum(tau, TAU_MAX)
        log_g = self._spline(inside)
        beyond = tau > TAU_MAX
        if np.any(beyond):
            if self.regime == KernelRegime.POWER:
                slope = self.alpha - self.n + 1
                log_g = np.where(beyond, self.log_values[-1] + slope * (tau - TAU_MAX), log_g)
            elif self.regime == KernelRegime.LOG:
                log_g = np.where(beyond, self.log_values[-1] + np.log(tau / TAU_MAX), log_g)
        return np.exp(log_g)

    def local_integral(self, half_width: float) -> float:
        """Integral of g(e^(-|d|)) over |d| <= half_width, resolving the diagonal singularity"""
        value, _ = quad(lambda d: float(self(np.exp(-d))), 0.0, half_width, limit=200)
        return 2.0 * value


_TABLES: Dict[Tuple[float, int], AngularKernelTable] = {}


def kernel_table(alpha: float, n: int) -> AngularKernelTable:
    key = (float(alpha), int(n))
    if key not in _TABLES:
        _TABLES[key] = AngularKernelTable.build(alpha, n)
    return _TABLES[key]


def _sphere_weight(log_r: np.ndarray, log_rho: np.ndarray, exponent: float) -> np.ndarray:
    """((1 + r^2) / (1 + rho^2))^exponent on the (r, rho) grid"""
    top = np.logaddexp(0.0, 2.0 * log_r)[:, None]
    bottom = np.logaddexp(0.0, 2.0 * log_rho)[None, :]
    return np.exp(exponent * (top - bottom))


def _riesz_sum(
    f: RadialField, s: float, log_eval: np.ndarray, mode: ConvolutionMode
) -> np.ndarray:
    n = f.n
    table = kernel_table(n - s, n)
    log_rho = f.log_radius
    weights = f.quadrature_weights()
    dens = f.values * weights
    out = np.zeros(log_eval.size)
    local_cache: Dict[float, float] = {}

    for start in range(0, log_eval.size, ROW_BLOCK):
        rows = log_eval[start:start + ROW_BLOCK]
        d = log_rho[None, :] - rows[:, None]
        coincide = np.abs(d) < 1e-12
        R = np.exp(-np.abs(d))
        g = table(np.where(coincide, 0.0, R))
        log_a = (s - n) * np.maximum(rows[:, None], log_rho[None, :]) + n * log_rho[None, :]
        kernel = g * np.exp(log_a)
        if mode == ConvolutionMode.SPHERE_CONFORMAL:
            kernel *= _sphere_weight(rows, log_rho, (n - s) / 2)
        kernel[coincide] = 0.0
        block = kernel @ dens

        i_hit, j_hit = np.nonzero(coincide)
        for i, j in zip(i_hit, j_hit):
            half = round(float(weights[j]) / 2, 14)
            if half not in local_cache:
                local_cache[half] = table.local_integral(half)
            local = local_cache[half]
            block[i] += local * np.exp(s * log_rho[j]) * f.values[j]
        out[start:start + ROW_BLOCK] = block
    return omega(n) * out


def conv_T_radial(
    f: RadialField,
    s: float,
    mode: ConvolutionMode = ConvolutionMode.FLAT,
    eval_radii: Optional[np.ndarray] = None,
    c_corr: float = 0.0,
    corr_alpha: float = 1.0,
) -> RadialField:
    """Radial form of the Riesz convolution Tf(x) = integral |x - y|^(s-n) f(y) dy.

    In sphere-conformal mode the kernel carries the factor
    ((1+|x|^2)/(1+|y|^2))^((n-s)/2), and a correction of amplitude c_corr
    with order s + corr_alpha is added. The result lives on eval_radii
    (default: the grid of f).
    """
    n = f.n
    if not 0 < s < n:
        raise DomainError(f"order s must lie in (0, {n}), got {s}")
    if f.chart == Chart.SPHERE_POLAR:
        raise DomainError("conv_T_radial expects a radial chart")
    mode = ConvolutionMode(mode)

    if s <= 1:
        h = float(np.min(np.abs(np.diff(f.log_radius))))
        logger.warning(
            f"Kernel g_(n-s) is singular on the diagonal for s={s}; "
            f"estimated relative error ~ {h ** s:.1e} near the support of f"
        )

    if eval_radii is None:
        log_eval = f.log_radius
        grid, chart = f.grid, f.chart
    else:
        log_eval = np.log(np.asarray(eval_radii, dtype=float))
        grid, chart = np.exp(log_eval), Chart.EUCLIDEAN_RADIUS

    values = _riesz_sum(f, s, log_eval, mode)
    if mode == ConvolutionMode.SPHERE_CONFORMAL and c_corr != 0.0:
        if s + corr_alpha >= n:
            raise DomainError("correction order s + alpha must stay below n")
        values = values + c_corr * _riesz_sum(f, s + corr_alpha, log_eval, mode)
    return RadialField(chart, grid, values, n)


def riesz_potential(f: RadialField, s: float, eval_radii: Optional[np.ndarray] = None) -> RadialField:
    """K_{n,s} (I_{n-s} * f), the inverse of (-Delta)^(s/2) applied to f"""
    t = conv_T_radial(f, s, ConvolutionMode.FLAT, eval_radii)
    return t.with_values(K_ns(f.n, s) * t.values)


def riesz_oneil_bound(f: RadialField, s: float, r: float) -> float:
    """Right side of the rearrangement bound |S^(n-1)| ((n/s) r^(s-n) int_0^r f rho^(n-1) + int_r^inf f rho^(s-1))"""
    n = f.n
    log_rho = f.log_radius
    w = f.quadrature_weights()
    inner = log_rho < np.log(r)
    near = np.sum((f.values * w * np.exp(n * log_rho))[inner])
    far = np.sum((f.values * w * np.exp(s * log_rho))[~inner])
    return float(omega(n) * ((n / s) * r ** (s - n) * near + far))


def oneil_violation(f: RadialField, s: float, r: float) -> Tuple[float, float]:
    """(Tf(r), rearrangement bound at r); the first exceeds the second for
    non-monotone f when g_(n-s) is increasing"""
    tf = conv_T_radial(f, s, ConvolutionMode.FLAT, eval_radii=np.array([r])).values[0]
    return float(tf), riesz_oneil_bound(f, s, r)


def _check_mass_converged(u: RadialField, density: np.ndarray):
    total = np.sum(density)
    edge = max(1, u.grid.size // 100)
    tail = np.sum(density[:edge]) + np.sum(density[-edge:])
    if not np.isfinite(total) or total <= 0 or tail > 1e-8 * total:
        raise DomainError("mass of e^(n u) has not converged on this grid")


def potential_v(u: RadialField) -> RadialField:
    """(1/gamma_n) integral [ln(1+|y|) - ln|x-y|] e^(n u(y)) dy, evaluated on the grid of u"""
    n = u.n
    if u.chart == Chart.SPHERE_POLAR:
        raise DomainError("potential_v expects a radial chart")
    log_rho = u.log_radius
    order = np.argsort(log_rho)
    log_rho = log_rho[order]
    density = omega(n) * u.quadrature_weights()[order] * np.exp(n * u.values[order] + n * log_rho)
    _check_mass_converged(u, density)

    baseline = float(np.sum(np.logaddexp(0.0, log_rho) * density))
    # sum_j ln max(r_i, rho_j) mu_j via cumulative sums on the sorted grid
    below = np.cumsum(density)
    above = np.cumsum((log_rho * density)[::-1])[::-1]
    above_strict = np.append(above[1:], 0.0)
    log_max = log_rho * below + above_strict

    v_sorted = np.empty_like(log_rho)
    for start in range(0, log_rho.size, ROW_BLOCK):
        rows = log_rho[start:start + ROW_BLOCK]
        gap = np.abs(rows[:, None] - log_rho[None, :])
        correction = _log_mean_on_gaps(gap, n) @ density
        v_sorted[start:start + ROW_BLOCK] = baseline - log_max[start:start + ROW_BLOCK] - correction
    v_sorted /= gamma_n(n)

    values = np.empty_like(v_sorted)
    values[order] = v_sorted
    return u.with_values(values)


_LOG_MEAN_CACHE: Dict[Tuple[int, int], CubicSpline] = {}


def _log_mean_on_gaps(gap: np.ndarray, n: int) -> np.ndarray:
    """Spherical mean of ln|e_1 - R omega| at R = exp(-gap)"""
    if n == 2:
        return np.zeros_like(gap)
    key = (n, TAU_NODES)
    if key not in _LOG_MEAN_CACHE:
        grid = np.linspace(0.0, 40.0, 4 * TAU_NODES)
        _LOG_MEAN_CACHE[key] = CubicSpline(grid, _log_mean(np.exp(-grid), n))
    spline = _LOG_MEAN_CACHE[key]
    return np.where(gap > 40.0, 0.0, spline(np.minimum(gap, 40.0)))


def potential_slope(v: RadialField, lo: float, hi: float) -> Tuple[float, float]:
    """Least-squares slope of v against ln r on lo <= ln r <= hi, with its standard error"""
    log_r = v.log_radius
    mask = (log_r >= lo) & (log_r <= hi)
    fit = linregress(log_r[mask], v.values[mask])
    return float(fit.slope), float(fit.stderr)


def potential_lower_bound(v: RadialField, mass: float) -> np.ndarray:
    """Pointwise lower bound for v: 0 on the unit ball, -(mass/gamma_n) ln r outside it"""
    log_r = v.log_radius
    return np.where(log_r <= 0, 0.0, -mass / gamma_n(v.n) * log_r)


def green_spectral(
    variant: PaneitzVariant, s: float, theta: float, n: int, l_max: int = 64, order: int = 4
) -> float:
    """Zonal expansion of the Green's function of P_s or P_2s^(1/2) at geodesic angle theta.

    Partial sums are damped by (1 - (l(l+n-1) / L(L+n-1))^2)^order, a filter
    flat to second order at l = 0, so the means converge at every theta > 0
    where plain truncation oscillates.
    Degrees where the multiplier vanishes are left out.
    """
    if theta <= 0 or theta > np.pi:
        raise DomainError("green_spectral needs 0 < theta <= pi")
    variant = PaneitzVariant(variant)
    if variant == PaneitzVariant.P_2S:
        raise DomainError("green_spectral supports the P_s and P_2s_sqrt variants")
    m = multipliers(n, l_max, variant, s)
    l = np.arange(l_max + 1)
    ev = l * (l + n - 1)
    L = l_max + 1
    smoothing = np.clip(1.0 - (ev / (L * (L + n - 1))) ** 2, 0.0, None) ** order
    z = zonal_values(l_max, n, np.array([np.cos(theta), 1.0]))
    terms = np.where(m > 0, smoothing * z[:, 0] * z[:, 1] / np.where(m > 0, m, 1.0), 0.0)
    logger.debug(f"Green's function tail estimate at theta={theta}: {abs(terms[-1]):.2e}")
    return float(np.sum(terms))


def green_closed_form(s: float, theta: float, n: int) -> float:
    """K_{n,s} |eta - xi|^(s-n) for points at geodesic angle theta"""
    chord = 2.0 * np.sin(theta / 2)
    return K_ns(n, s) * chord ** (s - n)


def fit_green_exponent(
    variant: PaneitzVariant, s: float, n: int, thetas: np.ndarray, l_max: int = 4000
) -> Tuple[float, np.ndarray]:
    """Fitted exponent alpha in G(theta) theta^(n-s) / K_{n,s} = 1 + O(theta^alpha), with the ratios"""
    thetas = np.asarray(thetas, dtype=float)
    ratios = np.array([
        green_spectral(variant, s, th, n, l_max) * th ** (n - s) / K_ns(n, s) for th in thetas
    ])
    fit = linregress(np.log(thetas), np.log(np.abs(ratios - 1.0)))
    return float(fit.slope), ratios
