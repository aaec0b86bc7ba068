"""
Test suite for zonal spectral analysis and the Paneitz multipliers
"""

import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add project root to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from qcurv.conformal import bubble_field
from qcurv.errors import ConfigError, DomainError
from qcurv.spectral import (
    PaneitzVariant,
    ZonalBasis,
    ZonalSpectrum,
    apply_paneitz,
    conformal_norm_identity_check,
    h_half_norm,
    log_bilaplacian,
    multipliers,
    pn_half_norm,
    poincare_constant,
    zonal_norms,
)


class TestZonalBasis:
    """Analysis and synthesis with Gegenbauer quadrature"""

    def setup_method(self):
        """Set up test fixtures"""
        self.basis = ZonalBasis(4, l_max=16, nodes=64)

    def test_quadrature_norms_match_closed_form(self):
        """Test Gegenbauer norms from the quadrature"""
        np.testing.assert_allclose(self.basis.norms, zonal_norms(16, 4), rtol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_synthesis_then_analysis_is_identity(self, seed):
        """Test the round trip on band-limited spectra"""
        coeffs = np.random.default_rng(seed).standard_normal(17)
        spec = ZonalSpectrum(4, coeffs)
        recovered = self.basis.analyze(self.basis.synthesize(spec))
        np.testing.assert_allclose(recovered.coeffs, coeffs, atol=1e-11)

    def test_evaluate_matches_node_values(self):
        spec = ZonalSpectrum(4, np.linspace(1.0, -1.0, 17))
        at_nodes = self.basis.node_values(spec.coeffs)
        np.testing.assert_allclose(self.basis.evaluate(spec, self.basis.quad.x), at_nodes, atol=1e-12)

    def test_rejects_unresolved_degree(self):
        """Test that too few nodes for l_max are refused"""
        with pytest.raises(ConfigError):
            ZonalBasis(4, l_max=40, nodes=64)

    def test_rejects_radial_chart(self):
        with pytest.raises(DomainError):
            self.basis.analyze(bubble_field(4))

    def test_unit_spectrum_frame(self):
        """Test the DataFrame export of a unit spectrum"""
        frame = ZonalSpectrum.unit(4, 2, 5).to_frame()
        assert frame["coefficient"].tolist() == [0, 0, 1, 0, 0, 0]


class TestMultipliers:

    def test_variants_on_s4(self):
        """Test the three multiplier variants in dimension four"""
        l = np.arange(8)
        p4 = l * (l + 1) * (l + 2) * (l + 3)
        np.testing.assert_allclose(multipliers(4, 7, PaneitzVariant.P_2S), p4)
        np.testing.assert_allclose(multipliers(4, 7, PaneitzVariant.P_2S_SQRT), np.sqrt(p4))
        np.testing.assert_allclose(multipliers(4, 7, PaneitzVariant.P_S), (l + 1) * (l + 2))

    def test_square_root_needs_low_order(self):
        with pytest.raises(DomainError):
            multipliers(4, 3, PaneitzVariant.P_2S_SQRT, s=3.0)

    def test_norms(self):
        """Test the energy and H^(n/2) norms of a unit spectrum"""
        spec = ZonalSpectrum.unit(4, 1, 6)
        assert pn_half_norm(spec) == pytest.approx(np.sqrt(24.0))
        assert h_half_norm(spec) == pytest.approx(5.0)
        assert apply_paneitz(spec, PaneitzVariant.P_2S).coeffs[1] == pytest.approx(24.0)

    def test_poincare_constant(self):
        assert poincare_constant(4) == pytest.approx(1 / 24)


class TestLogBilaplacian:

    def test_quartic_is_exact(self):
        """Test the finite-difference bi-Laplacian on a quartic"""
        h = 0.05
        s = np.arange(-1.0, 1.0 + h / 2, h)
        out = log_bilaplacian(s ** 4, h)
        assert np.all(np.isnan(out[:3])) and np.all(np.isnan(out[-3:]))
        np.testing.assert_allclose(out[3:-3], 24 - 48 * s[3:-3] ** 2, atol=1e-6)

    def test_log_r_is_annihilated(self):
        """ln r and r^-2 are biharmonic away from the origin in R^4"""
        h = 0.02
        s = np.arange(0.0, 2.0, h)
        np.testing.assert_allclose(log_bilaplacian(s, h)[3:-3], 0.0, atol=1e-5)
        np.testing.assert_allclose(log_bilaplacian(np.exp(-2 * s), h)[3:-3], 0.0, atol=1e-5)


class TestEnergyIdentity:
    """The spectral P_4 energy matches the Euclidean bilaplacian energy of w = u o S"""

    def setup_method(self):
        """Set up test fixtures"""
        self.basis = ZonalBasis(4, l_max=4, nodes=128)

    def test_band_limited_spectra(self):
        """Test the energy identity on random spectra"""
        rng = np.random.default_rng(7)
        for _ in range(3):
            u = self.basis.synthesize(ZonalSpectrum(4, rng.standard_normal(5)))
            assert conformal_norm_identity_check(u, self.basis) < 1e-5

    def test_only_dimension_four(self):
        basis = ZonalBasis(3, l_max=4, nodes=32)
        u = basis.synthesize(ZonalSpectrum.unit(3, 1, 4))
        with pytest.raises(ConfigError):
            conformal_norm_identity_check(u, basis)


if __name__ == "__main__":
    pytest.main([__file__])
