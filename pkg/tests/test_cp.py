import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.cp import (
    OutOfRangeWarning,
    ParameterRangeError,
    binomial_tail,
    compute_constant,
    cp_eval,
    cp_scale,
    lemma_bound_check,
    ratio_objective,
)

# 2000 x 2000 compactified grid scan (oracle script kept outside the package)
GRID_ORACLE = {
    ("c1", 2.5): 0.768019,
    ("c1", 3.0): 0.585786,
    ("c1", 4.0): 0.333333,
    ("c2", 1.2): 0.18971,
    ("c2", 1.5): 0.49411,
    ("c2", 1.8): 0.79948,
    ("c3", 1.2): 1.58083,
    ("c3", 1.5): 1.30656,
    ("c3", 1.8): 1.11077,
}


def _naive(p, xi, eta):
    a = xi - eta
    na = np.linalg.norm(a, axis=-1)
    return (
        np.linalg.norm(xi, axis=-1) ** p
        - na**p
        - p * na ** (p - 2) * np.real(np.sum(a * np.conj(eta), axis=-1))
    )


def _cvec(rng, n, dim):
    return rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))


def test_cp_examples():
    assert cp_eval(3.0, np.array([1.0, 2.0j]), np.zeros(2)) == 0.0
    assert cp_eval(2.0, np.array([1.0, 0.0]), np.array([0.3, 0.4])) == pytest.approx(0.25, rel=1e-14)
    xi = np.array([0.3 + 1j, -2.0])
    for p in (1.3, 2.0, 3.7):
        assert cp_eval(p, xi, xi) == pytest.approx(np.linalg.norm(xi) ** p, rel=1e-14)


def test_cp_matches_definition_away_from_cancellation():
    rng = np.random.default_rng(0)
    xi, eta = _cvec(rng, 200, 2), _cvec(rng, 200, 2)
    for p in (1.5, 2.5, 4.0):
        np.testing.assert_allclose(cp_eval(p, xi, eta), _naive(p, xi, eta), rtol=1e-10, atol=1e-12)


def test_cp_small_eta_uses_stable_branch():
    xi = np.array([1.0, 0.5j])
    eta = 1e-7 * np.array([0.3, -0.2 + 0.1j])
    # leading term p/2 |xi|^{p-2} (|eta|^2 + (p-2)(Re xi.eta / |xi|)^2) for small eta
    p = 3.0
    n = np.linalg.norm(xi)
    re = np.real(np.vdot(eta, xi))
    lead = 0.5 * p * n ** (p - 2) * (np.linalg.norm(eta) ** 2 + (p - 2) * re**2 / n**2)
    assert cp_eval(p, xi, eta) == pytest.approx(lead, rel=1e-5)
    assert cp_eval(p, xi, eta) > 0


def test_cp_errors():
    with pytest.raises(ValueError):
        cp_eval(2.0, np.ones(2), np.ones(3))
    with pytest.raises(ValueError):
        cp_eval(1.0, np.ones(2), np.ones(2))


def test_binomial_tail_against_high_precision():
    mpmath.mp.dps = 50
    w = np.array([-0.09, -1e-3, 1e-8, 0.05, 0.099, 0.11, 0.5, 3.0])
    for a in (0.6, 1.5, 2.0, 3.0):
        ref = [float((1 + mpmath.mpf(x)) ** a - 1 - a * mpmath.mpf(x)) for x in w]
        np.testing.assert_allclose(binomial_tail(w, a), ref, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1.05, 6.0),
    st.integers(1, 3),
    st.integers(0, 2**32 - 1),
    st.floats(1e-3, 1e3),
)
def test_cp_properties(p, dim, seed, tau):
    rng = np.random.default_rng(seed)
    xi, eta = _cvec(rng, 8, dim), _cvec(rng, 8, dim) * 10.0 ** rng.uniform(-4, 2, (8, 1))
    c = cp_eval(p, xi, eta)
    scale = cp_scale(p, xi, eta)
    assert np.all(c >= -1e-12 * scale)
    np.testing.assert_allclose(cp_eval(p, tau * xi, tau * eta), tau**p * c, rtol=1e-10, atol=1e-12 * tau**p * scale.max())
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    np.testing.assert_allclose(cp_eval(p, xi @ Q.T, eta @ Q.T), c, rtol=1e-10, atol=1e-12 * scale.max())
    np.testing.assert_allclose(cp_eval(2.0, xi, eta), np.linalg.norm(eta, axis=-1) ** 2, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.1, 5.0), st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_cp_definite_for_vectors(p, dim, seed):
    rng = np.random.default_rng(seed)
    xi, eta = _cvec(rng, 16, dim), _cvec(rng, 16, dim)
    assert np.all(cp_eval(p, xi, eta) > 0)


def test_ratio_objective_examples():
    s, t = np.array([0.3, -2.0, 5.0]), np.array([1.0, 0.1, -4.0])
    for which in ("c1", "c2", "c3"):
        np.testing.assert_allclose(ratio_objective(which, 2.0, s, t), 1.0, rtol=1e-14)
    assert ratio_objective("c1", 4.0, -1.0, 0.0) == pytest.approx(3.0, rel=1e-14)
    r3 = ratio_objective("c1", 4.0, 1e3, 0.0)
    r4 = ratio_objective("c1", 4.0, 1e4, 0.0)
    assert abs(r4 - 1) < abs(r3 - 1) < 1e-2
    with pytest.raises(ValueError):
        ratio_objective("c1", 3.0, 0.0, 0.0)
    with pytest.warns(OutOfRangeWarning):
        ratio_objective("c1", 1.5, 1.0, 1.0)


def test_c1_at_two_is_one():
    est = compute_constant("c1", 2.0)
    assert abs(est.value - 1.0) <= 1e-8
    assert est.lo <= est.value <= est.hi


@pytest.mark.parametrize("key", sorted(GRID_ORACLE))
def test_constants_match_grid_oracle(key):
    which, p = key
    est = compute_constant(which, p)
    assert est.value == pytest.approx(GRID_ORACLE[key], abs=2e-5)
    assert est.lo <= est.value <= est.hi
    if which == "c1":
        assert 0 < est.value <= 1
        assert est.limits["infinity"][0] == pytest.approx(1.0, abs=1e-6)
    elif which == "c2":
        assert 0 < est.value <= p * (p - 1) / 2 ** (p - 1)
        assert est.limits["origin"][0] == pytest.approx(p * (p - 1) / 2 ** (p - 1), rel=1e-5)
    else:
        assert est.value >= p / 2 ** (p - 1)
        assert est.limits["origin"][1] == pytest.approx(p / 2 ** (p - 1), rel=1e-5)


def test_closed_forms_at_three_and_four():
    assert compute_constant("c1", 3.0).value == pytest.approx(2 - math.sqrt(2), abs=1e-7)
    assert compute_constant("c1", 4.0).value == pytest.approx(1 / 3, abs=1e-7)


def test_constants_pinch_at_two():
    c2 = compute_constant("c2", 1.999)
    c3 = compute_constant("c3", 1.999)
    assert c2.value == pytest.approx(1.0, abs=2e-3)
    assert c3.value == pytest.approx(1.0, abs=2e-3)
    assert c2.value <= c3.value


def test_range_errors():
    with pytest.raises(ParameterRangeError):
        compute_constant("c1", 1.5)
    with pytest.raises(ParameterRangeError):
        compute_constant("c2", 2.5)


def test_constant_is_deterministic():
    a = compute_constant("c3", 1.4).to_dict()
    b = compute_constant("c3", 1.4).to_dict()
    assert a == b


def test_lemma_checks():
    c1 = compute_constant("c1", 3.0)
    rep = lemma_bound_check(3.0, 20_000, 2, {"c1": c1})
    assert rep.total_violations == 0
    assert rep.tightest["c1"] >= c1.lo
    c = {"c2": compute_constant("c2", 1.5), "c3": compute_constant("c3", 1.5)}
    rep = lemma_bound_check(1.5, 20_000, 2, c)
    assert rep.violations == {"c2": 0, "c3": 0}


def test_lemma_check_p2_is_tight():
    c = {"c1": compute_constant("c1", 2.0)}
    rep = lemma_bound_check(2.0, 5000, 3, c)
    assert rep.total_violations == 0
    assert rep.tightest["c1"] == pytest.approx(1.0, abs=1e-10)


def test_out_of_range_ratio_is_still_computable():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutOfRangeWarning)
        assert np.isfinite(ratio_objective("c2", 3.0, 0.5, 0.5))
