"""
Variational solver for singular Liouville equations of order n
Builds the weight K, minimizes the functional on the sphere and assembles the Euclidean solution
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp, softmax
from scipy.stats import linregress

from qcurv.constants import gamma_n, lambda_1, omega, sphere_area
from qcurv.conformal import (
    DEFAULT_NODES,
    DEFAULT_T,
    Chart,
    RadialField,
    log_radial_grid,
    trapezoid_weights,
)
from qcurv.errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    GridRangeError,
    NumericalQualityError,
    PreconditionError,
)
from qcurv.mtlab import sharp_constant
from qcurv.spectral import (
    DEFAULT_L_MAX,
    DEFAULT_QUADRATURE_NODES,
    PaneitzVariant,
    ZonalBasis,
    ZonalSpectrum,
    log_bilaplacian,
    multipliers,
    zonal_values,
)

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MIN_STEP = 1e-14
BOUNDARY_SHARE = 0.01
BOUNDARY_MASS_TOL = 1e-10
RESIDUAL_WINDOW = 6.0
PHI0_CONVENTION = "phi0 = (-Delta)^(n/2) u0"


class SolveCase(str, Enum):
    A = "a"
    B = "b"


class U0Kind(str, Enum):
    SPLINE = "spline"
    CONFORMAL = "conformal"


@dataclass(frozen=True)
class RadialPolynomial:
    """p(r) = sum_k a_k r^(2k), k = 1..K, without constant term"""

    coefficients: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        if self.coefficients and self.coefficients[-1] >= 0:
            raise DomainError("leading coefficient must be negative so that p -> -infinity")

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    @property
    def degree(self) -> int:
        return 2 * len(self.coefficients)

    def check_dimension(self, n: int):
        if self.degree > n - 1:
            raise DomainError(f"degree {self.degree} exceeds the largest even degree <= {n - 1}")

    def of_log(self, log_r: np.ndarray) -> np.ndarray:
        """p evaluated at r = exp(log_r)"""
        log_r = np.asarray(log_r, dtype=float)
        out = np.zeros_like(log_r)
        for k, a in enumerate(self.coefficients, start=1):
            out += a * np.exp(2 * k * log_r)
        return out

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self.of_log(np.log(np.asarray(r, dtype=float)))

    def at_inverse(self, log_r: np.ndarray) -> np.ndarray:
        """q(x/|x|^2) as a function of ln|x|"""
        return self.of_log(-np.asarray(log_r, dtype=float))


@dataclass(frozen=True)
class SolveRequest:
    n: int
    lam: float
    beta: float = 0.0
    p: RadialPolynomial = field(default_factory=lambda: RadialPolynomial((-1.0,)))
    q: RadialPolynomial = field(default_factory=RadialPolynomial)
    case: SolveCase = SolveCase.B
    l_max: int = DEFAULT_L_MAX
    quad_nodes: int = DEFAULT_QUADRATURE_NODES
    T: float = DEFAULT_T
    nodes: int = DEFAULT_NODES
    tol: float = 1e-7
    max_iter: int = 5000
    mass_tol: float = 1e-6
    u0_profile: U0Kind = U0Kind.CONFORMAL

    def __post_init__(self):
        object.__setattr__(self, "case", SolveCase(self.case))
        object.__setattr__(self, "u0_profile", U0Kind(self.u0_profile))
        if int(self.n) != self.n or self.n < 3:
            raise PreconditionError(f"the existence problem needs an integer n >= 3, got {self.n}")
        if self.lam <= 0:
            raise PreconditionError(f"Lambda must be positive, got {self.lam}")
        if self.p.is_zero:
            raise PreconditionError("p must be a nonzero radial polynomial tending to -infinity")
        self.p.check_dimension(self.n)
        self.q.check_dimension(self.n)
        if self.case == SolveCase.A and self.q.is_zero:
            raise PreconditionError("case (a) needs a nonzero q tending to -infinity")
        if self.case == SolveCase.B:
            if not self.q.is_zero:
                raise PreconditionError("case (b) needs q = 0")
            if self.beta <= -1:
                raise PreconditionError(f"case (b) needs beta > -1, got {self.beta}")
            bound = lambda_1(self.n) * (1 + self.beta)
            if self.lam >= bound:
                raise PreconditionError(f"case (b) needs Lambda < {bound:.10g}, got {self.lam}")
        if self.u0_profile == U0Kind.SPLINE and self.n != 4:
            raise ConfigError("the spline u0 profile is only built for n = 4", key="u0_profile")

    @classmethod
    def from_dict(cls, config: Dict) -> "SolveRequest":
        """Build a request from a resolved run config; malformed values raise ConfigError naming the key"""
        grid = config.get("grid") or {}
        opt = config.get("opt") or {}

        def read(key: str, source: Dict, name: str, default, convert):
            try:
                return convert(source.get(name, default) if default is not None else source[name])
            except KeyError:
                raise ConfigError(f"missing config key {key}", key=key)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid value for {key}: {e}", key=key)

        def coefficients(raw) -> Tuple[float, ...]:
            return tuple(float(a) for a in raw)

        return cls(
            n=read("n", config, "n", None, int),
            lam=read("lambda", config, "lambda", None, float),
            beta=read("beta", config, "beta", 0.0, float),
            p=RadialPolynomial(read("p", config, "p", (-1.0,), coefficients)),
            q=RadialPolynomial(read("q", config, "q", (), coefficients)),
            case=read("case", config, "case", "b", SolveCase),
            l_max=read("l_max", config, "l_max", DEFAULT_L_MAX, int),
            quad_nodes=read("quad_nodes", config, "quad_nodes", DEFAULT_QUADRATURE_NODES, int),
            T=read("grid.T", grid, "T", DEFAULT_T, float),
            nodes=read("grid.nodes", grid, "nodes", DEFAULT_NODES, int),
            tol=read("opt.tol", opt, "tol", 1e-7, float),
            max_iter=read("opt.max_iter", opt, "max_iter", 5000, int),
            u0_profile=read("u0_profile", config, "u0_profile", U0Kind.CONFORMAL.value, U0Kind),
        )


class _Laurent:
    """Finite sum of c_k r^k with integer k of either sign"""

    def __init__(self, terms: Optional[Dict[int, float]] = None):
        self.terms = {k: c for k, c in (terms or {}).items() if c != 0.0}

    @classmethod
    def from_polynomial(cls, poly: Polynomial) -> "_Laurent":
        return cls({k: float(c) for k, c in enumerate(poly.coef)})

    def __add__(self, other: "_Laurent") -> "_Laurent":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return _Laurent(out)

    def scale(self, factor: float) -> "_Laurent":
        return _Laurent({k: factor * c for k, c in self.terms.items()})

    def shift(self, power: int) -> "_Laurent":
        return _Laurent({k + power: c for k, c in self.terms.items()})

    def derivative(self) -> "_Laurent":
        return _Laurent({k - 1: k * c for k, c in self.terms.items()})

    def laplacian(self, n: int) -> "_Laurent":
        d = self.derivative()
        return d.derivative() + d.shift(-1).scale(n - 1)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for k, c in self.terms.items():
            out += c * r ** k
        return out


def _log_laplacian(A: _Laurent, B: _Laurent, n: int) -> Tuple[_Laurent, _Laurent]:
    """Delta(A + B ln r) = (Delta A + 2 B'/r + (n-2) B/r^2) + (Delta B) ln r"""
    regular = A.laplacian(n) + B.derivative().shift(-1).scale(2.0) + B.shift(-2).scale(n - 2.0)
    return regular, B.laplacian(n)


class U0Profile:
    """Fixed function u0 with u0 ~ -ln r at infinity, and phi0 = (-Delta)^(n/2) u0"""

    n: int

    def value(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def phi0(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def phi0_mass(self) -> float:
        raise NotImplementedError

    def psi0_coeffs(self, l_max: int) -> np.ndarray:
        raise NotImplementedError


class SplineU0(U0Profile):
    """u0 = -chi(r) ln r with the degree-7 smoothstep chi from r = 1/2 to r = 1; n = 4 only"""

    INNER = 0.5
    OUTER = 1.0

    def __init__(self, n: int = 4):
        if n != 4:
            raise ConfigError("the spline u0 profile is only built for n = 4", key="n")
        self.n = n
        step = Polynomial([0, 0, 0, 0, 35, -84, 70, -20])
        tau = Polynomial([-self.INNER / (self.OUTER - self.INNER), 1 / (self.OUTER - self.INNER)])
        self.chi = _Laurent.from_polynomial(step(tau))

        A, B = _Laurent(), self.chi.scale(-1.0)
        for _ in range(n // 2):
            A, B = _log_laplacian(A, B, n)
        self._phi_regular, self._phi_log = A, B

    def cutoff(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = (r > self.INNER) & (r < self.OUTER)
        return np.where(r >= self.OUTER, 1.0, np.where(inside, self.chi(np.clip(r, self.INNER, self.OUTER)), 0.0))

    def value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return -self.cutoff(r) * np.log(r)

    def phi0(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = (r > self.INNER) & (r < self.OUTER)
        rc = np.clip(r, self.INNER, self.OUTER)
        return np.where(inside, self._phi_regular(rc) + self._phi_log(rc) * np.log(rc), 0.0)

    def _annulus_rule(self, order: int) -> Tuple[np.ndarray, np.ndarray]:
        x, w = leggauss(order)
        half = (self.OUTER - self.INNER) / 2
        return self.INNER + half * (x + 1), half * w

    def phi0_mass(self) -> float:
        r, w = self._annulus_rule(64)
        return float(omega(self.n) * np.sum(w * self.phi0(r) * r ** (self.n - 1)))

    def psi0_coeffs(self, l_max: int) -> np.ndarray:
        r, w = self._annulus_rule(128)
        x = (1 - r ** 2) / (1 + r ** 2)
        Z = zonal_values(l_max, self.n, x)
        return omega(self.n) * Z @ (w * self.phi0(r) * r ** (self.n - 1))


class ConformalU0(U0Profile):
    """u0 = -ln(1 + r^2)/2, half of a shifted bubble; phi0 = (n-1)!/2 J and psi0 is constant"""

    def __init__(self, n: int):
        self.n = n

    def value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return -0.5 * np.logaddexp(0.0, 2 * np.log(r))

    def phi0(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return 0.5 * math.factorial(self.n - 1) * (2.0 / (1.0 + r ** 2)) ** self.n

    def phi0_mass(self) -> float:
        return 0.5 * math.factorial(self.n - 1) * sphere_area(self.n)

    def psi0_coeffs(self, l_max: int) -> np.ndarray:
        coeffs = np.zeros(l_max + 1)
        coeffs[0] = 0.5 * math.factorial(self.n - 1) * math.sqrt(sphere_area(self.n))
        return coeffs


def make_u0(n: int, kind: U0Kind = U0Kind.CONFORMAL) -> U0Profile:
    kind = U0Kind(kind)
    return SplineU0(n) if kind == U0Kind.SPLINE else ConformalU0(n)


def check_u0_mass(profile: U0Profile, tol: float = 1e-6) -> U0Profile:
    """Raises ConstructionError unless phi0 integrates to gamma_n"""
    mass = profile.phi0_mass()
    target = gamma_n(profile.n)
    if abs(mass - target) > tol * target:
        raise ConstructionError(f"integral of phi0 is {mass:.12g}, expected gamma_n = {target:.12g}")
    return profile


def fix_u0(t: Optional[np.ndarray] = None, n: int = 4, l_max: int = DEFAULT_L_MAX,
           kind: U0Kind = U0Kind.CONFORMAL, tol: float = 1e-6) -> Tuple[RadialField, RadialField, ZonalSpectrum]:
    """u0 and phi0 on the log-radial grid, with the zonal spectrum of the pulled-back psi0"""
    profile = check_u0_mass(make_u0(n, kind), tol)
    t = log_radial_grid() if t is None else t
    r = np.exp(-t)
    u0 = RadialField(Chart.LOG_RADIAL, t, profile.value(r), n)
    phi0 = RadialField(Chart.LOG_RADIAL, t, profile.phi0(r), n)
    return u0, phi0, ZonalSpectrum(n, profile.psi0_coeffs(l_max))


def log_weight_K(req: SolveRequest, log_r: np.ndarray, profile: Optional[U0Profile] = None) -> np.ndarray:
    """ln K = n beta ln r + n (p(r) + q(x/|x|^2) + (Lambda/gamma_n) u0(r)), with ln r clamped to [-T, T]"""
    profile = profile or make_u0(req.n, req.u0_profile)
    log_r = np.clip(np.asarray(log_r, dtype=float), -req.T, req.T)
    coupling = req.lam / gamma_n(req.n)
    return req.n * (
        req.beta * log_r + req.p.of_log(log_r) + req.q.at_inverse(log_r)
        + coupling * profile.value(np.exp(log_r))
    )


def build_weight_K(req: SolveRequest, profile: Optional[U0Profile] = None) -> RadialField:
    """K on the log-radial grid of the request; raises when the grid cuts off weighted mass"""
    t = log_radial_grid(req.T, req.nodes)
    log_r = -t
    log_K = log_weight_K(req, log_r, profile)
    _check_boundary_mass(log_K + req.n * log_r, "K |x|^n")
    return RadialField(Chart.LOG_RADIAL, t, np.exp(log_K), req.n)


def _check_boundary_mass(log_density: np.ndarray, label: str):
    """Fails if the outer nodes at either end carry a visible share of the ln r integral"""
    edge = max(1, int(BOUNDARY_SHARE * log_density.size))
    total = logsumexp(log_density)
    for side, chunk in (("low", log_density[:edge]), ("high", log_density[-edge:])):
        share = float(np.exp(logsumexp(chunk) - total))
        if share > BOUNDARY_MASS_TOL:
            raise GridRangeError(f"{label} keeps a share {share:.2e} of its mass at the {side} end of the grid; widen T")


class SolverContext:
    """Everything the functional needs on the sphere: multipliers, psi0 and ln(Q w_i) at the nodes"""

    def __init__(self, req: SolveRequest):
        self.req = req
        self.n = req.n
        self.lam = req.lam
        self.gamma = gamma_n(req.n)
        self.profile = check_u0_mass(make_u0(req.n, req.u0_profile))
        self.basis = ZonalBasis(req.n, req.l_max, req.quad_nodes)
        self.m = multipliers(req.n, req.l_max, PaneitzVariant.P_2S)
        self.psi0 = self.profile.psi0_coeffs(req.l_max)

        theta = self.basis.quad.theta
        log_r = np.log(np.tan(theta / 2))
        log_J = req.n * (math.log(2.0) - np.logaddexp(0.0, 2 * np.clip(log_r, -req.T, req.T)))
        self.log_Q = log_weight_K(req, log_r, self.profile) - log_J
        self.log_QW = self.log_Q + np.log(self.basis.quad.weights)
        logger.debug(f"Solver context ready: n={self.n}, Lambda={self.lam:.6g}, l_max={req.l_max}")

    def node_values(self, coeffs: np.ndarray) -> np.ndarray:
        return self.basis.node_values(coeffs)

    def log_partition(self, coeffs: np.ndarray) -> float:
        """ln of the integral of Q e^(nu) over the sphere"""
        return float(logsumexp(self.log_QW + self.n * self.node_values(coeffs)))

    def probabilities(self, coeffs: np.ndarray) -> np.ndarray:
        return softmax(self.log_QW + self.n * self.node_values(coeffs))


def functional_I(u: ZonalSpectrum, ctx: SolverContext) -> float:
    """I[u] = 1/2 ||P_n^(1/2) u||^2 + (Lambda/gamma_n) <psi0, u> - (Lambda/n) ln(integral Q e^(nu))"""
    c = u.coeffs
    quadratic = 0.5 * float(np.sum(ctx.m * c ** 2))
    linear = ctx.lam / ctx.gamma * float(np.dot(ctx.psi0, c))
    return quadratic + linear - ctx.lam / ctx.n * ctx.log_partition(c)


def gradient_I(u: ZonalSpectrum, ctx: SolverContext) -> ZonalSpectrum:
    """Coefficient gradient of I with the constant direction projected out"""
    c = u.coeffs
    grad = ctx.m * c + ctx.lam / ctx.gamma * ctx.psi0 - ctx.lam * (ctx.basis.table @ ctx.probabilities(c))
    grad[0] = 0.0
    return u.with_coeffs(grad)


def euler_lagrange_residual(u: ZonalSpectrum, ctx: SolverContext, tests: int = 20, seed: int = 0) -> float:
    """Largest normalized defect of the weak Euler-Lagrange equation over random mean-zero test spectra"""
    rng = np.random.default_rng(seed)
    c = u.coeffs
    prob = ctx.probabilities(c)
    worst = 0.0
    for _ in range(tests):
        phi = rng.standard_normal(c.size) / (1.0 + np.arange(c.size)) ** 2
        phi[0] = 0.0
        energy = float(np.sum(ctx.m * c * phi))
        source = ctx.lam / ctx.gamma * float(np.dot(ctx.psi0, phi))
        nonlinear = ctx.lam * float(np.dot(prob, ctx.node_values(phi)))
        worst = max(worst, abs(energy + source - nonlinear) / float(np.linalg.norm(phi)))
    return worst


def coercivity_constant(ctx: SolverContext, samples: int = 50,
                        scales: Tuple[float, ...] = (0.1, 1.0, 10.0, 1000.0),
                        seed: int = 0) -> Tuple[float, pd.DataFrame]:
    """Smallest C with I[u] >= 1/4 ||P_n^(1/2) u||^2 - C over random mean-zero spectra.

    Sample k is drawn at scales[k % len(scales)]; the frame has one row per
    sample with its energy, I and the gap 1/4 energy - I.
    """
    rng = np.random.default_rng(seed)
    decay = (1.0 + np.arange(ctx.req.l_max + 1)) ** 2
    rows = []
    for k in range(samples):
        scale = scales[k % len(scales)]
        c = scale * rng.standard_normal(decay.size) / decay
        c[0] = 0.0
        energy = float(np.sum(ctx.m * c ** 2))
        value = functional_I(ZonalSpectrum(ctx.n, c), ctx)
        rows.append({"sample": k, "scale": scale, "energy": energy, "I": value, "gap": 0.25 * energy - value})
    frame = pd.DataFrame(rows)
    C = float(frame["gap"].max())
    logger.info(f"Coercivity surrogate over {samples} spectra: C = {C:.6g}")
    return C, frame


@dataclass
class SolutionReport:
    n: int
    lam: float
    beta: float
    case: str
    status: str
    iterations: int
    spectrum: ZonalSpectrum
    c_w: float
    mass: float
    I_value: float
    gradient_norm: float
    residual_pde: float
    residual_kind: str
    slope_origin: float
    slope_origin_stderr: float
    slope_infinity: float
    slope_infinity_stderr: float
    origin_window: Tuple[float, float]
    infinity_window: Tuple[float, float]
    u0_profile: str
    profiles: pd.DataFrame = field(repr=False, default_factory=pd.DataFrame)
    history: List[float] = field(repr=False, default_factory=list)
    convention: str = PHI0_CONVENTION

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def coupling(self) -> float:
        return self.lam / gamma_n(self.n)

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "beta": self.beta,
            "case": self.case,
            "status": self.status,
            "iterations": self.iterations,
            "coefficients": self.spectrum.coeffs.tolist(),
            "c_w": self.c_w,
            "mass": self.mass,
            "I_value": self.I_value,
            "gradient_norm": self.gradient_norm,
            "residual_pde": self.residual_pde,
            "residual_kind": self.residual_kind,
            "slope_origin": self.slope_origin,
            "slope_origin_stderr": self.slope_origin_stderr,
            "slope_infinity": self.slope_infinity,
            "slope_infinity_stderr": self.slope_infinity_stderr,
            "origin_window": list(self.origin_window),
            "infinity_window": list(self.infinity_window),
            "u0_profile": self.u0_profile,
            "convention": self.convention,
        }


def _fit_slope(log_r: np.ndarray, values: np.ndarray, window: Tuple[float, float]) -> Tuple[float, float]:
    mask = (log_r >= window[0]) & (log_r <= window[1])
    fit = linregress(log_r[mask], values[mask])
    return float(fit.slope), float(fit.stderr)


def _descend(ctx: SolverContext, coeffs: np.ndarray) -> Tuple[np.ndarray, float, float, int, str, List[float]]:
    """Preconditioned gradient descent with Armijo backtracking on the zonal coefficients.

    Also returns the functional value after every accepted step, starting
    with the initial value.
    """
    req = ctx.req
    c = coeffs.copy()
    spec = ZonalSpectrum(ctx.n, c)
    value = functional_I(spec, ctx)
    history = [value]
    precond = np.where(ctx.m > 0, ctx.m, 1.0)
    status = "max_iter"
    grad_norm = np.inf

    for iteration in range(req.max_iter):
        grad = gradient_I(ZonalSpectrum(ctx.n, c), ctx).coeffs
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < req.tol:
            status = "converged"
            break
        direction = -grad / precond
        direction[0] = 0.0
        slope = float(np.dot(grad, direction))

        step = 1.0
        while True:
            trial = c + step * direction
            trial_value = functional_I(ZonalSpectrum(ctx.n, trial), ctx)
            allowance = 16 * np.finfo(float).eps * max(1.0, abs(value))
            if trial_value <= value + ARMIJO_C * step * slope + allowance:
                break
            step *= BACKTRACK
            if step < MIN_STEP:
                logger.warning(f"Line search failed at iteration {iteration}, |grad|={grad_norm:.3e}")
                return c, value, grad_norm, iteration, "line_search_failed", history

        if trial_value > value + allowance:
            raise NumericalQualityError(f"functional increased from {value:.15g} to {trial_value:.15g}")
        c, value = trial, trial_value
        history.append(value)
        if iteration % 100 == 0:
            logger.debug(f"iter {iteration}: I={value:.12g}, |grad|={grad_norm:.3e}, step={step:.3g}")
    else:
        iteration = req.max_iter

    return c, value, grad_norm, iteration, status, history


def _assemble(ctx: SolverContext, coeffs: np.ndarray) -> Tuple[pd.DataFrame, float, float]:
    """u = w + p + q(x/|x|^2) + beta ln|x| + (Lambda/gamma_n) u0 + c_w on the log-radial grid"""
    req = ctx.req
    n = ctx.n
    c_w = (math.log(req.lam) - ctx.log_partition(coeffs)) / n

    t = log_radial_grid(req.T, req.nodes)
    log_r = -t
    r = np.exp(log_r)
    w = ctx.basis.evaluate(ZonalSpectrum(n, coeffs), np.tanh(t))
    p_part = req.p.of_log(log_r)
    q_part = req.q.at_inverse(log_r)
    u0 = ctx.profile.value(r)
    u = w + p_part + q_part + req.beta * log_r + req.lam / ctx.gamma * u0 + c_w

    log_density = n * u + n * log_r
    _check_boundary_mass(log_density, "e^(nu)")
    log_mass = math.log(omega(n)) + float(logsumexp(log_density + np.log(trapezoid_weights(t))))
    mass = math.exp(log_mass)

    frame = pd.DataFrame({
        "log_r": log_r,
        "u": u,
        "w": w,
        "p": p_part,
        "q_inverse": q_part,
        "u0": u0,
        "phi0": ctx.profile.phi0(r),
        "log_K": log_weight_K(req, log_r, ctx.profile),
    })
    return frame, c_w, mass


def minimize(req: SolveRequest, initial: Optional[np.ndarray] = None) -> SolutionReport:
    """Minimize the functional from u = 0 (or initial) and assemble the Euclidean solution"""
    logger.info(f"Solving n={req.n}, Lambda={req.lam:.6g}, beta={req.beta}, case ({req.case.value})")
    ctx = SolverContext(req)
    start = np.zeros(req.l_max + 1) if initial is None else np.asarray(initial, dtype=float).copy()
    # constants are a null direction of I
    start[0] = 0.0
    coeffs, value, grad_norm, iterations, status, history = _descend(ctx, start)
    coeffs = coeffs.copy()
    coeffs[0] = 0.0
    value = functional_I(ZonalSpectrum(req.n, coeffs), ctx)

    frame, c_w, mass = _assemble(ctx, coeffs)
    if abs(mass - req.lam) > req.mass_tol * req.lam:
        raise NumericalQualityError(f"assembled mass {mass:.12g} differs from Lambda = {req.lam:.12g}")

    log_r = frame["log_r"].to_numpy()
    origin_window = (-0.9 * req.T, -0.6 * req.T)
    infinity_window = (0.6 * req.T, 0.9 * req.T)
    u = frame["u"].to_numpy()
    slope_o, err_o = _fit_slope(log_r, u - frame["q_inverse"].to_numpy(), origin_window)
    slope_i, err_i = _fit_slope(log_r, u - frame["p"].to_numpy(), infinity_window)

    report = SolutionReport(
        n=req.n, lam=req.lam, beta=req.beta, case=req.case.value, status=status,
        iterations=iterations, spectrum=ZonalSpectrum(req.n, coeffs), c_w=c_w, mass=mass,
        I_value=value, gradient_norm=grad_norm, residual_pde=np.nan, residual_kind="",
        slope_origin=slope_o, slope_origin_stderr=err_o,
        slope_infinity=slope_i, slope_infinity_stderr=err_i,
        origin_window=origin_window, infinity_window=infinity_window,
        u0_profile=req.u0_profile.value, profiles=frame,
        history=history,
    )
    if req.n == 4:
        report.residual_pde = verify_pde_residual(report)
        report.residual_kind = "pde"
    else:
        report.residual_pde = euler_lagrange_residual(report.spectrum, ctx)
        report.residual_kind = "euler_lagrange"

    logger.info(
        f"Solve finished: status={status}, iterations={iterations}, I={value:.10g}, "
        f"mass={mass:.10g}, residual={report.residual_pde:.3e}, "
        f"slopes=({slope_o:.4f}, {slope_i:.4f})"
    )
    return report


def _relative_residual(lhs: np.ndarray, u: np.ndarray, log_r: np.ndarray, window: float) -> float:
    """max |lhs - r^4 e^(4u)| / max r^4 e^(4u) over |ln r| <= window"""
    rhs = np.exp(4 * (u + log_r))
    mask = (np.abs(log_r) <= window) & np.isfinite(lhs)
    scale = float(np.max(rhs[mask]))
    return float(np.max(np.abs(lhs[mask] - rhs[mask])) / (scale + np.finfo(float).eps))


def verify_pde_residual(report: SolutionReport, window: float = RESIDUAL_WINDOW) -> float:
    """Relative residual of Delta^2 u = e^(4u) in the log variable.

    The spectral part w is differenced numerically; Delta^2 of u0 enters as
    the analytic phi0, and the polynomial and logarithmic parts are
    biharmonic away from the origin.
    """
    if report.n != 4:
        raise PreconditionError("the finite-difference residual is only available for n = 4")
    frame = report.profiles
    log_r = frame["log_r"].to_numpy()
    h = abs(log_r[1] - log_r[0])
    lhs = log_bilaplacian(frame["w"].to_numpy(), h)
    lhs = lhs + report.coupling * np.exp(4 * log_r) * frame["phi0"].to_numpy()
    return _relative_residual(lhs, frame["u"].to_numpy(), log_r, window)


def field_residual(u: RadialField, window: float = RESIDUAL_WINDOW) -> float:
    """Residual of Delta^2 u = e^(4u) for a field given in closed form on a log-radial grid"""
    if u.n != 4 or u.chart != Chart.LOG_RADIAL:
        raise PreconditionError("field_residual needs an n = 4 field on the log-radial chart")
    log_r = u.log_radius
    lhs = log_bilaplacian(u.values, abs(log_r[1] - log_r[0]))
    return _relative_residual(lhs, u.values, log_r, window)


def case_b_delta(n: int, beta: float, lam: float) -> float:
    """Margin 1/2 - n Lambda / (4 gamma) with gamma the sharp constant for the weight |x|^(n beta).

    Positive exactly when Lambda < Lambda_1 (1 + beta), which is where the
    weighted inequality makes the functional coercive.
    """
    return 0.5 - n * lam / (4 * sharp_constant(n, n / 2, n * beta))

