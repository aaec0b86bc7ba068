"""
Test suite for radial fields and the conformal transfer between R^n and S^n
"""

import math
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

# Add project root to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from qcurv.constants import lambda_1, sphere_area
from qcurv.conformal import (
    Chart,
    RadialField,
    SphereQuadrature,
    bubble_field,
    bubble_mass,
    chordal_from_radii,
    geodesic_distance,
    kelvin,
    log_radial_grid,
    mass,
    panel_log_grid,
    polar_angle,
    pushforward_density,
    radius_from_angle,
    sphere_area_check,
    stereo,
    stereo_inv,
    transform_law,
)
from qcurv.errors import DomainError


class TestRadialField:

    def setup_method(self):
        """Set up test fixtures"""
        self.t = log_radial_grid(T=10.0, nodes=1001)

    def test_grid_is_symmetric(self):
        """Test that the log grid is closed under r -> 1/r"""
        np.testing.assert_array_equal(self.t, -self.t[::-1])
        assert self.t[0] == pytest.approx(-10.0)

    def test_grid_rejects_tiny_sizes(self):
        """Test the smallest allowed grid"""
        with pytest.raises(DomainError):
            log_radial_grid(T=1.0, nodes=4)

    def test_rejects_non_monotone_grid(self):
        """Test that grids must be strictly monotone"""
        with pytest.raises(DomainError):
            RadialField(Chart.LOG_RADIAL, np.array([0.0, 1.0, 0.5]), np.zeros(3), 4)

    def test_rejects_interior_nan(self):
        """Test that interior values must be finite"""
        values = np.zeros(5)
        values[2] = np.nan
        with pytest.raises(DomainError):
            RadialField(Chart.LOG_RADIAL, np.arange(5.0), values, 4)

    def test_sphere_field_has_no_radius(self):
        field = SphereQuadrature(3, nodes=16).field(np.ones(16))
        with pytest.raises(DomainError):
            _ = field.log_radius

    def test_frame_export(self):
        """Test the DataFrame export of a field"""
        field = RadialField(Chart.LOG_RADIAL, self.t, np.zeros_like(self.t), 4)
        frame = field.to_frame()
        assert list(frame.columns) == ["coordinate", "value"]
        assert len(frame) == self.t.size


class TestQuadrature:

    def test_panel_weights_cover_interval(self):
        """Test that panel weights sum to the interval length"""
        nodes, weights = panel_log_grid(np.array([-3.0, 0.0, 2.2]), max_width=0.5, order=8)
        assert weights.sum() == pytest.approx(5.2)
        assert nodes.min() > -3.0 and nodes.max() < 2.2

    def test_sphere_quadrature_area(self):
        """Test |S^n| from the Gegenbauer rule"""
        for n in (2, 3, 4, 5):
            quad = SphereQuadrature(n, nodes=64)
            assert quad.integrate(np.ones(quad.size)) == pytest.approx(sphere_area(n), rel=1e-12)
            assert np.all(np.diff(quad.theta) > 0)

    def test_sphere_area_from_jacobian(self):
        """Test |S^n| as the integral of J over R^n"""
        for n in (2, 4, 6):
            measured, expected = sphere_area_check(n)
            assert measured == pytest.approx(expected, rel=1e-10)


class TestStereographicProjection:

    @settings(max_examples=50, deadline=None)
    @given(x=arrays(np.float64, 3, elements=st.floats(min_value=-50, max_value=50)))
    def test_lands_on_unit_sphere_and_inverts(self, x):
        """Test S(x) on the unit sphere and S^(-1)(S(x)) = x"""
        eta = stereo(x)
        assert np.linalg.norm(eta) == pytest.approx(1.0)
        np.testing.assert_allclose(stereo_inv(eta), x, rtol=1e-9, atol=1e-9)

    def test_origin_goes_to_north_pole(self):
        """Test S(0) = N"""
        np.testing.assert_allclose(stereo(np.zeros(4)), [0, 0, 0, 0, 1])

    def test_south_pole_is_rejected(self):
        """Test that S^(-1) is undefined at the south pole"""
        with pytest.raises(DomainError):
            stereo_inv(np.array([0.0, 0.0, -1.0]))

    def test_polar_angle_inverts(self):
        """Test r -> theta -> r"""
        r = np.array([0.01, 0.5, 1.0, 7.0])
        np.testing.assert_allclose(radius_from_angle(polar_angle(r)), r)
        assert polar_angle(np.array([1.0]))[0] == pytest.approx(math.pi / 2)

    def test_chordal_distance_matches_embedding(self):
        """Test the chordal distance from radii and angle"""
        x = np.array([0.3, -1.2, 0.4])
        y = np.array([2.0, 0.5, -0.7])
        r, rho = np.linalg.norm(x), np.linalg.norm(y)
        phi = math.acos(np.dot(x, y) / (r * rho))
        expected = np.linalg.norm(stereo(x) - stereo(y))
        assert float(chordal_from_radii(r, rho, phi, 3)) == pytest.approx(expected, rel=1e-10)

    def test_chordal_distance_to_infinity(self):
        r = 2.0
        value = float(chordal_from_radii(r, np.inf, 0.0, 4))
        assert value == pytest.approx(2 / math.sqrt(1 + r ** 2))

    def test_geodesic_between_poles(self):
        north = np.array([0.0, 0.0, 1.0])
        assert float(geodesic_distance(north, -north)) == pytest.approx(math.pi)


class TestBubble:
    """The standard bubble solves the Liouville-type equation with mass Lambda_1"""

    def test_mass_is_lambda_1(self):
        """Test the bubble mass for several n and lambda"""
        for n in (3, 4, 5):
            for lam in (0.5, 2.0):
                assert mass(bubble_field(n, lam)) == pytest.approx(bubble_mass(n), rel=1e-8)
            assert bubble_mass(n) == lambda_1(n)

    def test_kelvin_fixes_unit_bubble(self):
        """Test that the unit bubble is Kelvin invariant"""
        u = bubble_field(4)
        np.testing.assert_allclose(kelvin(u).values, u.values, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(min_value=-2.0, max_value=2.0), b=st.floats(min_value=0.1, max_value=3.0))
    def test_kelvin_is_an_involution(self, a, b):
        """Test kelvin(kelvin(u)) = u on smooth fields"""
        t = log_radial_grid(T=10.0, nodes=1001)
        u = RadialField(Chart.LOG_RADIAL, t, a * np.sin(b * t) - np.log1p(np.exp(-2 * t)), 4)
        np.testing.assert_allclose(kelvin(kelvin(u)).values, u.values, atol=1e-9)

    def test_kelvin_preserves_mass(self):
        """Test that the mass of e^(n u) survives the inversion for a bubble off the unit scale"""
        for n, lam in ((4, 2.0), (3, 0.5), (5, 3.0)):
            u = bubble_field(n, lam)
            assert mass(kelvin(u)) == pytest.approx(mass(u), rel=1e-12)

    def test_kelvin_needs_symmetric_grid(self):
        """Test that Kelvin refuses a grid not closed under r -> 1/r"""
        t = np.linspace(-3.0, 5.0, 101)
        u = RadialField(Chart.LOG_RADIAL, t, np.zeros_like(t), 4)
        with pytest.raises(DomainError):
            kelvin(u)

    def test_transform_law_is_constant(self):
        """Test that the bubble pulls back to a constant on the sphere"""
        quad = SphereQuadrature(4, nodes=128)
        values = transform_law(bubble_field(4), quad).values
        np.testing.assert_allclose(values, math.log(6.0) / 4, atol=1e-6)

    def test_pushforward_preserves_norm(self):
        """Test the L^(n/s) norm of a constant density"""
        quad = SphereQuadrature(4, nodes=64)
        pushed = pushforward_density(quad.field(np.ones(quad.size)), s=2.0)
        assert pushed.lp_norm(2.0) ** 2 == pytest.approx(sphere_area(4), rel=1e-8)

    def test_pushforward_isometry_on_smooth_fields(self):
        """Test that the L^(n/s) norm is preserved for five smooth zonal fields"""
        quad = SphereQuadrature(4, nodes=64)
        x = np.cos(quad.theta)
        fields = [x, np.exp(x), 1 + x ** 2, 1 - x ** 2, (1 - x) ** 3]
        for s in (1.0, 2.0):
            p = 4 / s
            for values in fields:
                expected = quad.integrate(np.abs(values) ** p)
                pushed = pushforward_density(quad.field(values), s=s)
                assert pushed.lp_norm(p) ** p == pytest.approx(expected, rel=1e-7)

    def test_pushforward_of_cosine(self):
        """Test f = cos(theta), n = 4, s = 2: the norm squared is |S^4| / 5"""
        quad = SphereQuadrature(4, nodes=64)
        pushed = pushforward_density(quad.field(np.cos(quad.theta)), s=2.0)
        assert pushed.lp_norm(2.0) ** 2 == pytest.approx(sphere_area(4) / 5, rel=1e-8)


if __name__ == "__main__":
    pytest.main([__file__])
