"""
Test suite for the weighted Moser-Trudinger laboratory
"""

import math
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add project root to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from qcurv.acceptance import adams_closed_form
from qcurv.constants import K_ns, omega
from qcurv.conformal import Chart, RadialField, SphereQuadrature
from qcurv.errors import DomainError, PreconditionError
from qcurv.kernels import riesz_potential
from qcurv.mtlab import (
    AdamsKernel,
    AdamsProfile,
    WeightDomain,
    WeightSpec,
    adams_F,
    adams_hypothesis_bound,
    adams_integral,
    ball_grid,
    exp_integral,
    moser_density,
    moser_norm,
    moser_profile,
    moser_sequence,
    positive_family_scan,
    remark_counterexample,
    sharp_constant,
    sharpness_scan,
    sharpness_verdict,
)


def ball_field(n: int, values=0.0, R: float = 1.0) -> RadialField:
    log_r, w = ball_grid(R=R)
    r = np.exp(log_r)
    return RadialField(Chart.EUCLIDEAN_RADIUS, r, np.full_like(r, values), n, weights=w)


class TestWeights:

    def test_validation(self):
        """Test parameter checks on the weight"""
        with pytest.raises(DomainError):
            WeightSpec(sigma=0.0)
        with pytest.raises(DomainError):
            WeightSpec(C=-1.0)
        with pytest.raises(DomainError):
            WeightSpec(R=0.0)

    def test_ball_weight_vanishes_outside(self):
        """Test |x|^beta inside B_R and zero outside"""
        weight = WeightSpec(beta=1.0, domain=WeightDomain.BALL, R=2.0)
        values = weight.evaluate(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(values, [1.0, 2.0, 0.0])

    def test_sphere_weight_vanishes_at_south_pole(self):
        """Test the sphere weight near and at the pole"""
        weight = WeightSpec(beta=0.0, sigma=1.0, domain="Sphere")
        values = weight.evaluate(np.array([math.pi / 2, math.pi]))
        assert values[0] == pytest.approx(math.exp(-2 / math.pi))
        assert values[1] == 0.0

    def test_decay_weight(self):
        weight = WeightSpec(beta=2.0, sigma=2.0, C=3.0, domain=WeightDomain.EUCLIDEAN_DECAY)
        assert weight.evaluate(np.array([2.0]))[0] == pytest.approx(3.0 * 4.0 * math.exp(-4.0))


class TestExpIntegral:
    """Overflow-safe exponential integrals"""

    def test_sharp_constants(self):
        """Test the sharp constants for a few (n, s, beta)"""
        assert sharp_constant(2, 1, 0) == pytest.approx(4 * math.pi)
        assert sharp_constant(4, 2, 0) == pytest.approx(32 * math.pi ** 2)
        assert sharp_constant(4, 2, 2) == pytest.approx(1.5 * sharp_constant(4, 2, 0))
        with pytest.raises(DomainError):
            sharp_constant(4, 2, -4)

    @settings(max_examples=20, deadline=None)
    @given(beta=st.floats(min_value=-3.0, max_value=4.0))
    def test_zero_potential_gives_weighted_volume(self, beta):
        result = exp_integral(ball_field(4), 1.0, 2.0, WeightSpec(beta=beta))
        assert result.value == pytest.approx(omega(4) / (4 + beta), rel=1e-8)
        assert not result.overflow

    def test_overflow_is_flagged(self):
        """Test that overflow reports the first failing panel"""
        result = exp_integral(ball_field(4, values=1000.0), 1.0, 1.0, WeightSpec())
        assert result.overflow
        assert result.panel == 0
        assert math.isinf(result.value)

    def test_weight_must_match_chart(self):
        """Test that the weight domain must match the field chart"""
        sphere = SphereQuadrature(4, nodes=16).field(np.zeros(16))
        with pytest.raises(DomainError):
            exp_integral(sphere, 1.0, 2.0, WeightSpec())
        with pytest.raises(DomainError):
            exp_integral(ball_field(4), 1.0, 2.0, WeightSpec(domain="Sphere"))

    def test_sphere_integral_of_constant(self):
        quad = SphereQuadrature(4, nodes=64)
        result = exp_integral(quad.field(np.zeros(quad.size)), 1.0, 2.0, WeightSpec(beta=0.0, domain="Sphere"))
        expected = quad.integrate(np.exp(-np.power(np.pi - quad.theta, -1.0)))
        assert result.value == pytest.approx(expected, rel=1e-12)


class TestMoserSequence:

    def test_norm_closed_form(self):
        """Test the L^(n/s) norm of the Moser density"""
        f = moser_sequence(1e-3, 1.0, 4, 2.0)
        assert f.lp_norm(2.0) ** 2 == pytest.approx(moser_norm(1e-3, 1.0, 4, 2.0), rel=1e-10)

    def test_density_support(self):
        """Test that the density lives on [r, R]"""
        density = moser_density(0.1, 1.0, 4, 2.0)
        assert density(np.array([0.05]))[0] == 0.0
        assert density(np.array([0.5]))[0] > 0.0
        with pytest.raises(DomainError):
            moser_density(1.0, 1.0, 4, 2.0)

    def test_potential_is_flat_inside_inner_ball(self):
        """For n = 4, s = 2 the normalized sequence has u = K_{4,2} (|S^3| ln(R/r))^(1/2) on B_r"""
        r = 1e-3
        f = moser_sequence(r, 1.0, 4, 2.0)
        f = f.with_values(f.values / f.lp_norm(2.0))
        u = riesz_potential(f, 2.0, eval_radii=np.array([1e-5, 1e-4])).values
        expected = K_ns(4, 2.0) * math.sqrt(omega(4) * math.log(1 / r))
        np.testing.assert_allclose(u, expected, rtol=1e-8)

    def test_profile_is_normalized(self):
        phi = moser_profile(1e-2, 1.0, 4, 2.0)
        assert phi.lp_mass(2.0) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.slow
class TestSharpness:
    """The sharp constant separates bounded from blowing-up integrals"""

    def setup_method(self):
        """Set up test fixtures"""
        self.r_list = [1e-1, 1e-2, 1e-3, 1e-4]

    def test_supercritical_blows_up(self):
        """Test growth above the sharp constant"""
        table = sharpness_scan(4, 2.0, 0.0, 1.2, self.r_list)
        assert list(table.columns) == ["parameter", "integral", "log_integral", "overflow_flag"]
        assert sharpness_verdict(table["integral"], 1.2)

    def test_subcritical_is_bounded(self):
        """Test a bounded band below the sharp constant"""
        table = sharpness_scan(4, 2.0, 0.0, 0.5, self.r_list)
        assert sharpness_verdict(table["integral"], 0.5)

    def test_positive_family_has_a_uniform_cap(self):
        """Test one cap over 20 random normalized potentials at the sharp constant"""
        frame = positive_family_scan(count=20, seed=3)
        volume = omega(4) / 4
        assert len(frame) == 20
        assert np.all(frame["norm"] <= 1.0 + 1e-9)
        assert not frame["overflow_flag"].any()
        # e^(gamma u^2) >= 1, so every member is at least the ball volume
        assert frame["integral"].min() >= volume * (1 - 1e-8)
        assert frame["integral"].max() <= 100 * volume


class TestAdamsLemma:

    def setup_method(self):
        """Set up test fixtures"""
        self.T0 = 4.0
        self.phi = AdamsProfile(lambda w: np.full_like(w, self.T0 ** -0.5), (0.0, self.T0))

    def test_closed_form(self):
        """Test the integral against its closed form for a flat profile"""
        result = adams_integral(self.phi, AdamsKernel(), alpha=1.0, p=2.0)
        assert not result.diverged
        assert result.value == pytest.approx(adams_closed_form(self.T0), abs=1e-8)

    def test_zero_profile(self):
        """Test phi = 0, where F(t) = t and the integral is 1/alpha"""
        zero = AdamsProfile(np.zeros_like, (0.0, 1.0))
        for t in (0.5, 3.0):
            assert adams_F(zero, AdamsKernel(), t, 2.0) == t
        for alpha in (0.5, 1.0, 3.0):
            assert adams_integral(zero, AdamsKernel(), alpha, 2.0).value == pytest.approx(1 / alpha, rel=1e-8)

    def test_translation(self):
        """Test F for phi shifted by c: F_shifted(t + c) = F(t) + c with the indicator kernel"""
        c = 1.5
        shifted = AdamsProfile(lambda w: np.full_like(w, self.T0 ** -0.5), (c, self.T0 + c))
        for t in (0.5, 2.0, 3.9, 8.0):
            moved = adams_F(shifted, AdamsKernel(), t + c, 2.0)
            assert moved == pytest.approx(adams_F(self.phi, AdamsKernel(), t, 2.0) + c, abs=1e-12)

    def test_sign_convention(self):
        """Test F(t) = t - (integral of phi over [0, t])^2 for p = 2"""
        # Test inside the support, where the mass is t / T0^(1/2)
        assert adams_F(self.phi, AdamsKernel(), 1.0, 2.0) == pytest.approx(1.0 - 1.0 / self.T0, abs=1e-13)

        # Test past the support, where the whole mass T0^(1/2) is seen
        assert adams_F(self.phi, AdamsKernel(), 10.0, 2.0) == pytest.approx(10.0 - self.T0, abs=1e-12)

    def test_growing_outside_error_diverges(self):
        """Test divergence when h grows with t"""
        phi = AdamsProfile(np.ones_like, (-1.0, 0.0))
        kernel = AdamsKernel(h=lambda w, t: np.full_like(w, t))
        assert adams_integral(phi, kernel, 1.0, 2.0).diverged

    def test_mass_precondition(self):
        """Test that an L^p mass above 1 is refused"""
        heavy = AdamsProfile(lambda w: np.full_like(w, 2.0), (0.0, 1.0))
        with pytest.raises(PreconditionError):
            adams_integral(heavy, AdamsKernel(), 1.0, 2.0)

    def test_hypothesis_constant(self):
        kernel = AdamsKernel(g=lambda w, t: np.exp(-w) + np.exp(w - t))
        b, frame = adams_hypothesis_bound(kernel, 2.0, np.linspace(0.0, 50.0, 101))
        assert 3.0 <= b <= 4.0
        assert len(frame) == 101


@pytest.mark.slow
class TestGlobalCounterexample:

    def test_integral_grows_with_R(self):
        """Test that the integral keeps growing with R"""
        table = remark_counterexample([math.exp(2), math.exp(6)], 4, 2.0, 1.0, 0.0)
        assert table["ratio"].min() > 0
        assert table["integral"].iloc[-1] > table["integral"].iloc[0]
        np.testing.assert_allclose(table["f_norm"], 1.0, rtol=1e-10)

    def test_radii_must_exceed_e(self):
        with pytest.raises(DomainError):
            remark_counterexample([2.0], 4, 2.0, 1.0, 0.0)


if __name__ == "__main__":
    pytest.main([__file__])
