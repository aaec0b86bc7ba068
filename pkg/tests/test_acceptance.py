"""
Test suite for the acceptance criteria runner
"""

import math
import os
import sys

import pytest

# Add project root to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from qcurv.acceptance import CRITERIA, adams_closed_form, run_acceptance


class TestAcceptance:

    def test_closed_form_limits(self):
        """A vanishing profile integrates exp(-t) to 1"""
        assert adams_closed_form(1e-12) == pytest.approx(1.0, abs=1e-9)
        assert adams_closed_form(4.0) > 1.0

    def test_fast_criteria_pass(self):
        """Test the quick acceptance criteria"""
        frame = run_acceptance(["paneitz_table", "galpha_trichotomy", "adams_lemma", "bubble"])
        assert list(frame.columns) == ["criterion", "passed", "measured", "threshold", "seconds"]
        assert frame["criterion"].tolist() == ["bubble", "paneitz_table", "galpha_trichotomy", "adams_lemma"]
        assert frame["passed"].all()

    def test_criteria_names_are_unique(self):
        names = [name for name, _ in CRITERIA]
        assert len(names) == len(set(names)) == 12

    @pytest.mark.slow
    def test_full_suite(self):
        """Test all twelve criteria"""
        frame = run_acceptance()
        failed = frame.loc[~frame["passed"], "criterion"].tolist()
        assert not failed, f"failed criteria: {failed}"
        assert not any(math.isnan(x) for x in frame["seconds"])


if __name__ == "__main__":
    pytest.main([__file__])
