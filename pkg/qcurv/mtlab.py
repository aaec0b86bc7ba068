"""
Weighted Moser-Trudinger laboratory
Weights, exponential integrals, sharpness sequences, the Adams calculus lemma and the global counterexample
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from qcurv.config import worker_count
from qcurv.constants import K_ns, omega
from qcurv.conformal import Chart, RadialField, panel_field, panel_log_grid
from qcurv.errors import DomainError, PreconditionError
from qcurv.kernels import riesz_potential

logger = logging.getLogger(__name__)

LOG_OVERFLOW = float(np.log(np.finfo(float).max))
PANEL_SIZE = 64
BALL_DEPTH = 40.0


class WeightDomain(str, Enum):
    SPHERE = "Sphere"
    BALL = "Ball"
    EUCLIDEAN_DECAY = "EuclideanDecay"


@dataclass(frozen=True)
class WeightSpec:
    """Weight of an exponential integral.

    Sphere: C theta_N^beta exp(-theta_S^(-sigma)) in the polar angle from the north pole.
    Ball: |x|^beta on B_R.
    EuclideanDecay: C |x|^beta exp(-|x|^sigma) on R^n.
    """

    beta: float = 0.0
    sigma: float = 1.0
    C: float = 1.0
    domain: WeightDomain = WeightDomain.BALL
    R: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "domain", WeightDomain(self.domain))
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.C <= 0:
            raise DomainError(f"amplitude C must be positive, got {self.C}")
        if self.R <= 0:
            raise DomainError(f"ball radius must be positive, got {self.R}")

    def log_weight(self, coordinate: np.ndarray) -> np.ndarray:
        """ln of the weight at polar angles (Sphere) or radii (Ball, EuclideanDecay); -inf where it vanishes"""
        x = np.asarray(coordinate, dtype=float)
        with np.errstate(divide="ignore"):
            if self.domain == WeightDomain.SPHERE:
                south = np.pi - x
                decay = np.where(south > 0, -np.power(np.where(south > 0, south, 1.0), -self.sigma), -np.inf)
                return math.log(self.C) + self.beta * np.log(x) + decay
            log_r = np.log(x)
            if self.domain == WeightDomain.BALL:
                inside = x <= self.R * (1 + 1e-12)
                return np.where(inside, math.log(self.C) + self.beta * log_r, -np.inf)
            return math.log(self.C) + self.beta * log_r - np.power(x, self.sigma)

    def evaluate(self, coordinate: np.ndarray) -> np.ndarray:
        return np.exp(self.log_weight(coordinate))


@dataclass(frozen=True)
class ExpIntegralResult:
    value: float
    log_value: float
    overflow: bool = False
    panel: Optional[int] = None


def sharp_constant(n: int, s: float, beta: float) -> float:
    """(n+beta)/|S^(n-1)| K_{n,s}^(-n/(n-s)), the critical exponent coefficient"""
    if beta <= -n:
        raise DomainError(f"weight |x|^beta is not integrable at the origin for beta={beta} <= -{n}")
    return (n + beta) / omega(n) * K_ns(n, s) ** (-n / (n - s))


def _accumulate(log_terms: np.ndarray) -> Tuple[float, Optional[int]]:
    """Panel-wise log-sum-exp; returns the running total and the first panel that overflows"""
    total = -np.inf
    for panel, start in enumerate(range(0, log_terms.size, PANEL_SIZE)):
        chunk = log_terms[start:start + PANEL_SIZE]
        if np.any(np.isnan(chunk)):
            return np.inf, panel
        total = float(np.logaddexp(total, logsumexp(chunk)))
        if total > LOG_OVERFLOW:
            return np.inf, panel
    return total, None


def _log_measure(u: RadialField, weight: WeightSpec) -> np.ndarray:
    quad = u.quadrature_weights()
    with np.errstate(divide="ignore"):
        if weight.domain == WeightDomain.SPHERE:
            if u.chart != Chart.SPHERE_POLAR:
                raise DomainError("sphere weights need a field on the sphere chart")
            return np.log(quad) + weight.log_weight(u.grid)
        if u.chart == Chart.SPHERE_POLAR:
            raise DomainError(f"{weight.domain.value} weights need a radial field")
        radii = u.radii
        return np.log(omega(u.n) * quad) + u.n * u.log_radius + weight.log_weight(radii)


def exp_integral(u: RadialField, gamma: float, p: float, weight: WeightSpec) -> ExpIntegralResult:
    """Integral of exp(gamma |u|^p) against the weight, overflow-safe.

    A divergent integral comes back as value = inf with the index of the
    panel where the running sum left the representable range.
    """
    if weight.domain != WeightDomain.SPHERE and weight.beta <= -u.n:
        raise DomainError(f"weight |x|^beta is not integrable at the origin for beta={weight.beta}")
    measure = _log_measure(u, weight)
    log_terms = np.where(np.isneginf(measure), -np.inf, gamma * np.abs(u.values) ** p + measure)
    order = np.arange(log_terms.size) if u.chart == Chart.SPHERE_POLAR else np.argsort(u.log_radius)
    total, panel = _accumulate(log_terms[order])
    if panel is not None:
        logger.warning(f"Exponential integral overflowed in panel {panel} (gamma={gamma:.6g})")
        return ExpIntegralResult(np.inf, np.inf, True, panel)
    return ExpIntegralResult(float(np.exp(total)), total)


def ball_grid(R: float = 1.0, breakpoints: Sequence[float] = (), depth: float = BALL_DEPTH,
              max_width: float = 0.5, order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels in ln r reaching depth below the smallest breakpoint radius (or R)"""
    top = math.log(R)
    inner = [math.log(b) for b in breakpoints if 0 < b < R]
    bottom = min([top] + inner) - depth
    return panel_log_grid(np.unique([bottom] + inner + [top]), max_width, order)


def ball_exp_integral(f: RadialField, s: float, gamma: float, weight: WeightSpec,
                      breakpoints: Sequence[float] = (), depth: float = BALL_DEPTH) -> ExpIntegralResult:
    """exp_integral of u = K_{n,s} (I_{n-s} * f) over B_R, u sampled on a panel grid of the ball"""
    n = f.n
    log_r, w = ball_grid(weight.R, breakpoints, depth)
    u = riesz_potential(f, s, eval_radii=np.exp(log_r))
    u = replace(u, weights=w)
    return exp_integral(u, gamma, n / (n - s), weight)


def moser_density(r: float, R: float, n: int, s: float) -> Callable[[np.ndarray], np.ndarray]:
    """f_{r,R}(x) = |S^(n-1)|^(-1) ln(R/r)^(-1) |x|^(-s) on B_R minus B_r"""
    if not 0 < r < R:
        raise DomainError(f"Moser density needs 0 < r < R, got r={r}, R={R}")
    scale = 1.0 / (omega(n) * math.log(R / r))

    def density(rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return np.where((rho >= r) & (rho <= R), scale * rho ** (-s), 0.0)

    return density


def moser_norm(r: float, R: float, n: int, s: float) -> float:
    """Closed form of ||f_{r,R}||_{n/s}^{n/s}"""
    return omega(n) ** (-(n - s) / s) * math.log(R / r) ** (-(n - s) / s)


def moser_sequence(r: float, R: float, n: int, s: float) -> RadialField:
    """f_{r,R} sampled on Gauss-Legendre panels of its support"""
    density = moser_density(r, R, n, s)
    return panel_field(n, np.array([math.log(r), math.log(R)]), density)


def _scan(worker: Callable, items: Sequence) -> List:
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(worker, items))


def sharpness_scan(n: int, s: float, beta: float, gamma_factor: float,
                   r_list: Sequence[float], R: float = 1.0) -> pd.DataFrame:
    """Exponential integrals of the normalized Moser sequence at gamma_factor times the sharp constant"""
    if gamma_factor <= 0:
        raise DomainError(f"gamma_factor must be positive, got {gamma_factor}")
    gamma = gamma_factor * sharp_constant(n, s, beta)
    weight = WeightSpec(beta=beta, domain=WeightDomain.BALL, R=R)
    depth = max(10.0, BALL_DEPTH / (n + beta))
    logger.info(f"Sharpness scan: n={n}, s={s}, beta={beta}, gamma={gamma:.6g} over {len(r_list)} radii")

    def point(r: float) -> dict:
        f = moser_sequence(r, R, n, s)
        f = f.with_values(f.values / f.lp_norm(n / s))
        result = ball_exp_integral(f, s, gamma, weight, breakpoints=[r], depth=depth)
        return {
            "parameter": r,
            "integral": result.value,
            "log_integral": result.log_value,
            "overflow_flag": result.overflow,
        }

    return pd.DataFrame(_scan(point, list(r_list)))


def sharpness_verdict(integrals: Sequence[float], gamma_factor: float) -> bool:
    """Blow-up above the sharp constant, a bounded band well below it"""
    values = np.asarray(integrals, dtype=float)
    if gamma_factor > 1:
        return bool(np.all(np.diff(values) > 0) and values[-1] > 10 * values[0])
    if gamma_factor <= 0.9:
        return bool(np.all(np.isfinite(values)) and values.max() <= 2 * values.min())
    return True


def _indicator(w: np.ndarray, t: float) -> np.ndarray:
    return ((w >= 0) & (w <= t)).astype(float)


@dataclass(frozen=True)
class AdamsKernel:
    """Kernel a(w, t) = base(w, t) + 1_[0,t] g(w, t) + 1_(outside [0,t]) h(w, t).

    The default base is the indicator of [0, t]; g and h are the error terms
    the lemma allows inside and outside that interval.
    """

    g: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    h: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    base: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __call__(self, w: np.ndarray, t: float) -> np.ndarray:
        inside = _indicator(w, t)
        a = self.base(w, t) if self.base is not None else inside.copy()
        if self.g is not None:
            a = a + inside * self.g(w, t)
        if self.h is not None:
            a = a + (1.0 - inside) * self.h(w, t)
        return a


@dataclass(frozen=True)
class AdamsProfile:
    """A nonnegative function phi on the line, zero outside support"""

    func: Callable[[np.ndarray], np.ndarray]
    support: Tuple[float, float]
    breakpoints: Tuple[float, ...] = ()

    def nodes(self, extra: Sequence[float] = ()) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.support
        cuts = [b for b in list(self.breakpoints) + list(extra) if lo < b < hi]
        return panel_log_grid(np.unique([lo, hi] + cuts), max_width=0.25, order=16)

    def lp_mass(self, p: float) -> float:
        w, weights = self.nodes()
        return float(np.sum(weights * np.abs(self.func(w)) ** p))


@dataclass(frozen=True)
class AdamsResult:
    value: float
    diverged: bool
    t_max: float


def adams_F(phi: AdamsProfile, kernel: AdamsKernel, t: float, p: float) -> float:
    """F(t) = t - (integral a(w, t) phi(w) dw)^(p')"""
    w, weights = phi.nodes(extra=(0.0, t))
    mass = float(np.sum(weights * kernel(w, t) * phi.func(w)))
    return t - abs(mass) ** (p / (p - 1))


def adams_integral(phi: AdamsProfile, kernel: AdamsKernel, alpha: float, p: float,
                   tail_tol: float = 1e-8, t_cap: float = 4000.0) -> AdamsResult:
    """Integral over t > 0 of exp(-alpha F(t)), extended until the tail is below tail_tol"""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    mass = phi.lp_mass(p)
    if mass > 1 + 1e-9:
        raise PreconditionError(f"profile has L^p mass {mass:.12g} > 1")

    lo, hi = phi.support
    cuts = [c for c in (lo, hi) + tuple(phi.breakpoints) if c > 0]
    T = max(hi, 0.0) + 40.0 / alpha
    while T <= t_cap:
        t, weights = panel_log_grid(np.unique([0.0] + [c for c in cuts if c < T] + [T]), 0.25, 16)
        F = np.array([adams_F(phi, kernel, ti, p) for ti in t])
        total, panel = _accumulate(-alpha * F + np.log(weights))
        if panel is not None:
            logger.warning(f"Adams integral overflowed near t={t[min(panel * PANEL_SIZE, t.size - 1)]:.4g}")
            return AdamsResult(np.inf, True, T)
        tail = math.exp(-alpha * adams_F(phi, kernel, T, p)) / alpha
        if tail < tail_tol:
            return AdamsResult(float(np.exp(total)), False, T)
        T *= 2
    logger.warning(f"Adams integral tail did not decay before t={t_cap}")
    return AdamsResult(np.inf, True, t_cap)


def adams_hypothesis_bound(kernel: AdamsKernel, p: float, t_grid: Sequence[float],
                           outside_span: float = 40.0) -> Tuple[float, pd.DataFrame]:
    """Measured b = sup_t of the integrals of g + g^(p') over [0, t] and h^(p') outside [0, t]"""
    q = p / (p - 1)
    rows = []
    for t in t_grid:
        total = 0.0
        if kernel.g is not None and t > 0:
            w, weights = panel_log_grid(np.array([0.0, t]), 0.25, 16)
            g = kernel.g(w, t)
            total += float(np.sum(weights * (g + np.abs(g) ** q)))
        if kernel.h is not None:
            for lo, hi in ((-outside_span, 0.0), (t, t + outside_span)):
                w, weights = panel_log_grid(np.array([lo, hi]), 0.25, 16)
                total += float(np.sum(weights * np.abs(kernel.h(w, t)) ** q))
        rows.append({"t": float(t), "bound": total})
    frame = pd.DataFrame(rows)
    b = float(frame["bound"].max()) if len(frame) else 0.0
    logger.info(f"Adams hypothesis constant measured as b = {b:.6g}")
    return b, frame


def log_variable_density(f: Callable[[np.ndarray], np.ndarray], n: int, s: float) -> Callable[[np.ndarray], np.ndarray]:
    """phi(w) = |S^(n-1)|^(s/n) f(e^(-w)) e^(-s w), which carries ||f||_{n/s} to ||phi||_{n/s} on the line"""
    scale = omega(n) ** (s / n)

    def phi(w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return scale * f(np.exp(-w)) * np.exp(-s * w)

    return phi


def moser_profile(r: float, R: float, n: int, s: float) -> AdamsProfile:
    """Normalized Moser density in the variable w = -ln|x|"""
    density = moser_density(r, R, n, s)
    norm = moser_norm(r, R, n, s) ** (s / n)
    phi = log_variable_density(lambda rho: density(rho) / norm, n, s)
    return AdamsProfile(phi, (-math.log(R), -math.log(r)))


def remark_counterexample(R_list: Sequence[float], n: int, s: float, sigma: float, beta: float,
                          gamma: Optional[float] = None, C: float = 1.0,
                          inner_depth: float = 6.0) -> pd.DataFrame:
    """Exponential integrals over B_1 for the normalized densities f_R on B_R minus B_1.

    u_R is evaluated on panels of ln|x| in [-inner_depth, 0]; the integral is
    the B_1 part of the weighted integral over R^n, a lower bound for it.
    """
    R_values = list(R_list)
    if any(R <= math.e for R in R_values):
        raise DomainError("every R must exceed e")
    if gamma is None:
        gamma = sharp_constant(n, s, beta)
    weight = WeightSpec(beta=beta, sigma=sigma, C=C, domain=WeightDomain.EUCLIDEAN_DECAY)
    p = n / (n - s)
    log_r, w = panel_log_grid(np.array([-inner_depth, 0.0]), 0.5, 16)

    def point(R: float) -> dict:
        scale = (omega(n) * math.log(R)) ** (-s / n)
        f = panel_field(n, np.array([0.0, math.log(R)]),
                        lambda rho: np.where((rho >= 1) & (rho <= R), scale * rho ** (-s), 0.0))
        u = replace(riesz_potential(f, s, eval_radii=np.exp(log_r)), weights=w)
        result = exp_integral(u, gamma, p, weight)
        min_u = float(np.min(u.values))
        return {
            "parameter": R,
            "log_R": math.log(R),
            "f_norm": f.lp_norm(n / s),
            "min_u": min_u,
            "ratio": min_u / math.log(R) ** ((n - s) / n),
            "integral": result.value,
            "overflow_flag": result.overflow,
        }

    logger.info(f"Global counterexample over {len(R_values)} radii (gamma={gamma:.6g}, sigma={sigma}, beta={beta})")
    return pd.DataFrame(_scan(point, R_values))


def positive_family_scan(n: int = 4, s: float = 2.0, beta: float = 0.0, count: int = 20,
                         seed: int = 0) -> pd.DataFrame:
    """Exponential integrals at the sharp constant over random radial potentials with ||f||_{n/s} <= 1"""
    rng = np.random.default_rng(seed)
    gamma = sharp_constant(n, s, beta)
    weight = WeightSpec(beta=beta, domain=WeightDomain.BALL)
    members = []
    for _ in range(count):
        pieces = int(rng.integers(1, 4))
        lows = np.exp(-rng.uniform(0.5, 8.0, pieces))
        highs = np.minimum(lows * np.exp(rng.uniform(0.5, 4.0, pieces)), 1.0)
        members.append((lows, highs, rng.uniform(0.1, 1.0, pieces), rng.uniform(0.5, 1.0)))

    def point(member) -> dict:
        lows, highs, amps, target = member

        def density(rho: np.ndarray) -> np.ndarray:
            out = np.zeros_like(rho)
            for lo, hi, a in zip(lows, highs, amps):
                out += np.where((rho >= lo) & (rho <= hi), a * rho ** (-s), 0.0)
            return out

        edges = np.log(np.concatenate([lows, highs]))
        f = panel_field(n, np.unique(edges), density)
        f = f.with_values(target * f.values / f.lp_norm(n / s))
        result = ball_exp_integral(f, s, gamma, weight, breakpoints=np.concatenate([lows, highs]))
        return {"norm": f.lp_norm(n / s), "integral": result.value, "overflow_flag": result.overflow}

    frame = pd.DataFrame(_scan(point, members))
    frame.insert(0, "member", np.arange(count))
    logger.info(f"Positive family: max integral {frame['integral'].max():.6g} over {count} members")
    return frame
