"""
Conformal geometry of radial fields
Stereographic projection, Jacobians, Kelvin inversion and transfer of fields between R^n and S^n
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BarycentricInterpolator, CubicSpline
from scipy.special import roots_gegenbauer

from qcurv.constants import lambda_1, omega, sphere_area
from qcurv.errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_T = 18.0
DEFAULT_NODES = 4096


class Chart(str, Enum):
    SPHERE_POLAR = "sphere_polar"
    EUCLIDEAN_RADIUS = "euclidean_radius"
    LOG_RADIAL = "log_radial"


@dataclass(frozen=True, eq=False)
class RadialField:
    """A radial function sampled on a monotone grid in one chart.

    For the two radial charts, ``weights`` are quadrature weights in the
    variable ln r; for the sphere chart they are weights of the surface
    measure. Without explicit weights the trapezoid rule is used.
    """

    chart: Chart
    grid: np.ndarray
    values: np.ndarray
    n: int
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "chart", Chart(self.chart))

        if grid.ndim != 1 or grid.shape != values.shape:
            raise DomainError("grid and values must be 1-D arrays of equal length")
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise DomainError("grid must be strictly monotone")
        if grid.size > 2 and not np.all(np.isfinite(values[1:-1])):
            raise DomainError("field values must be finite at interior nodes")
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def log_radius(self) -> np.ndarray:
        if self.chart == Chart.LOG_RADIAL:
            return -self.grid
        if self.chart == Chart.EUCLIDEAN_RADIUS:
            return np.log(self.grid)
        raise DomainError("sphere fields have no radial coordinate")

    @property
    def radii(self) -> np.ndarray:
        return np.exp(self.log_radius)

    def with_values(self, values: np.ndarray) -> "RadialField":
        return replace(self, values=np.asarray(values, dtype=float))

    def quadrature_weights(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        if self.chart == Chart.SPHERE_POLAR:
            theta = self.grid
            base = trapezoid_weights(theta) * np.sin(theta) ** (self.n - 1)
            return omega(self.n) * base
        return trapezoid_weights(self.log_radius)

    def integrate(self, values: Optional[np.ndarray] = None) -> float:
        """Integral over R^n (radial charts) or S^n (sphere chart)"""
        v = self.values if values is None else np.asarray(values, dtype=float)
        w = self.quadrature_weights()
        if self.chart == Chart.SPHERE_POLAR:
            return float(np.sum(w * v))
        r_n = np.exp(self.n * self.log_radius)
        return float(omega(self.n) * np.sum(w * v * r_n))

    def lp_norm(self, p: float) -> float:
        return self.integrate(np.abs(self.values) ** p) ** (1.0 / p)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"coordinate": self.grid, "value": self.values})


def trapezoid_weights(coordinate: np.ndarray) -> np.ndarray:
    """Trapezoid weights on a monotone (possibly decreasing) coordinate"""
    h = np.abs(np.diff(coordinate))
    w = np.zeros_like(coordinate, dtype=float)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def log_radial_grid(T: float = DEFAULT_T, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Uniform grid in t = -ln r on [-T, T], exactly symmetric about t = 0"""
    if nodes < 8 or T <= 0:
        raise DomainError(f"grid needs T > 0 and at least 8 nodes, got T={T}, nodes={nodes}")
    h = 2.0 * T / (nodes - 1)
    return h * (np.arange(nodes) - (nodes - 1) / 2.0)


def log_radial_field(values: np.ndarray, t: np.ndarray, n: int) -> RadialField:
    return RadialField(Chart.LOG_RADIAL, t, values, n)


def panel_log_grid(
    breakpoints: np.ndarray, max_width: float = 0.5, order: int = 16
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights in ln r.

    Each interval between consecutive breakpoints is split into panels no
    wider than max_width, so piecewise-smooth densities are integrated
    to full precision when their kinks sit on breakpoints.
    """
    x, w = leggauss(order)
    edges = []
    bp = np.sort(np.asarray(breakpoints, dtype=float))
    for lo, hi in zip(bp[:-1], bp[1:]):
        count = max(1, int(np.ceil((hi - lo) / max_width)))
        edges.append(np.linspace(lo, hi, count + 1)[:-1])
    edges.append(bp[-1:])
    edges = np.concatenate(edges)

    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = (hi - lo) / 2
        nodes.append(lo + half * (x + 1))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def panel_field(
    n: int, breakpoints: np.ndarray, func: Callable[[np.ndarray], np.ndarray],
    max_width: float = 0.5, order: int = 16
) -> RadialField:
    """Field on a Euclidean-radius panel grid with values func(r)"""
    log_r, w = panel_log_grid(breakpoints, max_width, order)
    r = np.exp(log_r)
    return RadialField(Chart.EUCLIDEAN_RADIUS, r, func(r), n, weights=w)


class SphereQuadrature:
    """Gauss rule in x = cos(theta) carrying the sphere weight (1-x^2)^((n-2)/2).

    Nodes are stored with theta ascending. The weights integrate over S^n,
    so they sum to |S^n|.
    """

    def __init__(self, n: int, nodes: int = 256):
        if n < 2:
            raise DomainError(f"sphere quadrature needs n >= 2, got {n}")
        x, w = roots_gegenbauer(nodes, (n - 1) / 2)
        order = np.argsort(-x)
        self.n = n
        self.size = nodes
        self.x = x[order]
        self.theta = np.arccos(np.clip(self.x, -1.0, 1.0))
        self.weights = omega(n) * w[order]

    def field(self, values: np.ndarray) -> RadialField:
        return RadialField(Chart.SPHERE_POLAR, self.theta, values, self.n, weights=self.weights)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))


def stereo(x: np.ndarray) -> np.ndarray:
    """Inverse-stereographic map from R^n onto S^n sending 0 to the north pole"""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    head = 2.0 * x / (1.0 + r2)
    tail = (1.0 - r2) / (1.0 + r2)
    return np.concatenate([head, tail], axis=-1)


def stereo_inv(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    last = eta[..., -1:]
    if np.any(np.isclose(last, -1.0, atol=1e-14)):
        raise DomainError("stereo_inv is undefined at the south pole")
    return eta[..., :-1] / (1.0 + last)


def jacobian_S(r: np.ndarray, n: int) -> np.ndarray:
    return (2.0 / (1.0 + np.asarray(r, dtype=float) ** 2)) ** n


def polar_angle(r: np.ndarray) -> np.ndarray:
    """Geodesic distance to the north pole of the image of a point at radius r"""
    return 2.0 * np.arctan(r)


def radius_from_angle(theta: np.ndarray) -> np.ndarray:
    return np.tan(np.asarray(theta, dtype=float) / 2.0)


def chordal_from_radii(r, rho, phi, n: int):
    """|S(x) - S(y)| for |x| = r, |y| = rho at angle phi; rho may be infinite"""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    jr = jacobian_S(r, n) ** (1.0 / (2 * n))
    with np.errstate(invalid="ignore", over="ignore"):
        dist = np.sqrt(r ** 2 + rho ** 2 - 2.0 * r * rho * np.cos(phi))
        finite = jr * dist * jacobian_S(rho, n) ** (1.0 / (2 * n))
    at_infinity = jr * np.sqrt(2.0)
    return np.where(np.isinf(rho), at_infinity, finite)


def geodesic_distance(eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
    chord = np.linalg.norm(np.asarray(eta) - np.asarray(xi), axis=-1)
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def _require_log_symmetric(log_r: np.ndarray):
    if not np.allclose(log_r, -log_r[::-1], rtol=0.0, atol=1e-12 * max(1.0, np.abs(log_r).max())):
        raise DomainError("Kelvin transform needs a grid closed under r -> 1/r")


def kelvin(u: RadialField) -> RadialField:
    """u(x/|x|^2) - 2 ln|x|, done as an index reversal on a log-symmetric grid"""
    log_r = u.log_radius
    _require_log_symmetric(log_r)
    return u.with_values(u.values[::-1] - 2.0 * log_r)


def bubble(r: np.ndarray, n: int, lam: float = 1.0) -> np.ndarray:
    """Entire solution ln(2 ((n-1)!)^(1/n) lam / (1 + lam^2 r^2)) centred at the origin"""
    c = math.log(math.factorial(n - 1)) / n
    r = np.asarray(r, dtype=float)
    return np.log(2.0 * lam) + c - np.log1p((lam * r) ** 2)


def bubble_field(n: int, lam: float = 1.0, T: float = DEFAULT_T, nodes: int = DEFAULT_NODES) -> RadialField:
    t = log_radial_grid(T, nodes)
    return log_radial_field(bubble(np.exp(-t), n, lam), t, n)


def bubble_mass(n: int) -> float:
    return lambda_1(n)


def mass(u: RadialField) -> float:
    """Total mass of e^(n u) over R^n"""
    return u.integrate(np.exp(u.n * u.values))


def sphere_interpolant(f: RadialField) -> Callable[[np.ndarray], np.ndarray]:
    """Polynomial interpolant of a sphere field in x = cos(theta)"""
    if f.chart != Chart.SPHERE_POLAR:
        raise DomainError("expected a field on the sphere chart")
    interp = BarycentricInterpolator(np.cos(f.grid), f.values)
    return lambda theta: interp(np.cos(theta))


def pushforward_density(f: RadialField, s: float, t: Optional[np.ndarray] = None) -> RadialField:
    """f(S(x)) J(x)^(s/n) on a Euclidean-radius grid; preserves the L^(n/s) norm"""
    if f.chart != Chart.SPHERE_POLAR:
        raise DomainError("pushforward_density expects a field on the sphere chart")
    t = log_radial_grid() if t is None else t
    r = np.exp(np.sort(t))
    values = sphere_interpolant(f)(polar_angle(r)) * jacobian_S(r, f.n) ** (s / f.n)
    return RadialField(Chart.EUCLIDEAN_RADIUS, r, values, f.n)


def pullback_field(w: RadialField, quad: SphereQuadrature) -> RadialField:
    """w o S^(-1) sampled at the nodes of a sphere quadrature"""
    log_r = w.log_radius
    order = np.argsort(log_r)
    spline = CubicSpline(log_r[order], w.values[order])
    target = np.log(np.maximum(radius_from_angle(quad.theta), 1e-300))
    target = np.clip(target, log_r.min(), log_r.max())
    return quad.field(spline(target))


def transform_law(u: RadialField, quad: SphereQuadrature) -> RadialField:
    """Sphere function u o S^(-1) - (1/n) ln J; constant for the standard bubble"""
    r = radius_from_angle(quad.theta)
    base = pullback_field(u, quad).values
    return quad.field(base - np.log(2.0 / (1.0 + r ** 2)))


def sphere_area_check(n: int, t: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """Quadrature of J over R^n against |S^n|"""
    t = log_radial_grid() if t is None else t
    field = log_radial_field(jacobian_S(np.exp(-t), n), t, n)
    return field.integrate(), sphere_area(n)
