"""Dropped-remainder inequalities over 50 random test functions per case (slow)."""

import numpy as np
import pytest

from hardylab import quadrature as quad
from hardylab.cases import case_library, list_cases
from hardylab.identities import random_test_functions, verify

SPEC = quad.QuadratureSpec(points_per_axis=8, rel_tol=1e-6)
ANNULAR = [c for c in list_cases() if c != "poincare-1d"]


@pytest.mark.parametrize("cid", ANNULAR)
def test_lhs_dominates_main_term(cid):
    case = case_library(cid)
    worst = np.inf
    for u in random_test_functions(case, 50, seed=2024):
        rep = verify(case, SPEC, u=u)
        assert rep.passed, rep.to_dict()
        gap = rep.lhs.value - rep.rhs_terms["main_term"].value
        assert gap >= -rep.quad_err_total
        assert rep.rhs_terms["cp_remainder"].value >= -rep.rhs_terms["cp_remainder"].err
        if case.theorem == "rellich":
            for name in ("rellich_gradient_term", "rellich_modulus_gap_term"):
                assert rep.rhs_terms[name].value >= -rep.rhs_terms[name].err
        worst = min(worst, gap / rep.lhs.value)
    assert worst > 0
