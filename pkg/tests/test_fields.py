import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab import quadrature as quad
from hardylab.fields import (
    SingularPointError,
    UnsupportedSystemError,
    horizontal_divergence,
    horizontal_gradient,
    l_apply,
    lp_apply,
    make_system,
    system_from_dict,
)
from hardylab.identities import annular_test_function, gradient_modulus_gap
from hardylab.scalar import ScalarField, annular_bump, coordinate, plane_wave, quadratic, radial_power

GRUSHIN = make_system("grushin", m=1, k=1, gamma=1.0)


def test_euclidean_sigma_is_identity():
    S = make_system("euclidean", N=3)
    X = np.random.default_rng(0).standard_normal((4, 3))
    np.testing.assert_array_equal(S.sigma(X), np.broadcast_to(np.eye(3), (4, 3, 3)))


def test_grushin_sigma_block_form():
    np.testing.assert_array_equal(GRUSHIN.sigma(np.array([2.0, 5.0])), [[1, 0], [0, 2]])


def test_greiner_row():
    G = make_system("greiner", n=1, gamma=1.0)
    np.testing.assert_allclose(G.sigma(np.array([1.0, 1.0, 0.0]))[0], [1, 0, 2])
    assert G.sigma(np.zeros(3)).shape == (2, 3)


def test_invalid_constructions():
    with pytest.raises(UnsupportedSystemError):
        make_system("greiner", n=1, gamma=0.5)
    with pytest.raises(UnsupportedSystemError):
        make_system("grushin", m=0, k=1, gamma=1.0)
    with pytest.raises(UnsupportedSystemError):
        make_system("heisenberg", N=3)


@pytest.mark.parametrize(
    "system",
    [
        make_system("grushin", m=1, k=1, gamma=1.0),
        make_system("grushin", m=2, k=1, gamma=3.0),
        make_system("greiner", n=1, gamma=1.0),
        make_system("greiner", n=2, gamma=2.0),
    ],
    ids=["grushin-1-1", "grushin-2-1", "greiner-1-1", "greiner-2-2"],
)
def test_sigma_jacobian_and_divergence_are_consistent(system):
    from hardylab import finite_diff as fd

    X = np.random.default_rng(1).uniform(0.3, 1.2, (4, system.dim_n))
    J = fd.gradient(lambda Y: system.sigma(Y).reshape(Y.shape[0], -1), X, 1e-5)
    J = J.reshape(X.shape[0], system.dim_l, system.dim_n, system.dim_n)
    np.testing.assert_allclose(system.sigma_jac(X), J, atol=1e-8)
    np.testing.assert_allclose(system.sigma_div(X), np.einsum("mijj->mi", J), atol=1e-8)


def test_horizontal_gradient_examples():
    e = make_system("euclidean", N=3)
    np.testing.assert_allclose(horizontal_gradient(e, coordinate(0, 3), np.array([0.3, 2.0, -1.0])), [1, 0, 0])
    np.testing.assert_allclose(horizontal_gradient(GRUSHIN, coordinate(1, 2), np.array([3.0, 7.0])), [0, 3])
    wave = plane_wave([1.0, 0.0])
    np.testing.assert_allclose(horizontal_gradient(make_system("euclidean", N=2), wave, np.zeros(2)), [1j, 0])


def test_horizontal_gradient_finite_difference_fallback():
    u = ScalarField(lambda X: X[:, 1] ** 2, 2)
    g = horizontal_gradient(GRUSHIN, u, np.array([3.0, 7.0]))
    np.testing.assert_allclose(g, [0, 42], rtol=1e-8)


def test_horizontal_divergence_examples():
    e2 = make_system("euclidean", N=2)
    X = np.random.default_rng(2).standard_normal((5, 2))
    np.testing.assert_allclose(horizontal_divergence(e2, lambda Y: Y, X), 2.0, rtol=1e-9)
    Xg = X + np.array([2.0, 0.0])
    np.testing.assert_allclose(
        horizontal_divergence(GRUSHIN, lambda Y: np.tile([0.0, 3.5], (Y.shape[0], 1)), Xg), 0.0, atol=1e-9
    )
    e3 = make_system("euclidean", N=3)
    X3 = np.random.default_rng(3).standard_normal((5, 3))
    np.testing.assert_allclose(horizontal_divergence(e3, lambda Y: 2 * Y, X3), 6.0, rtol=1e-9)
    with pytest.raises(ValueError):
        horizontal_divergence(e3, lambda Y: Y, X3, fd_enabled=False)


def test_horizontal_divergence_with_jacobian():
    e3 = make_system("euclidean", N=3)
    X = np.ones((2, 3))
    out = horizontal_divergence(e3, lambda Y: 2 * Y, X, jac=lambda Y: np.broadcast_to(2 * np.eye(3), (Y.shape[0], 3, 3)))
    np.testing.assert_allclose(out, 6.0)


def test_l_apply_examples():
    e3 = make_system("euclidean", N=3)
    sq = quadratic(0.0, np.zeros(3), np.eye(3), 3)
    X = np.random.default_rng(4).standard_normal((6, 3))
    np.testing.assert_allclose(l_apply(e3, sq, X), 6.0)
    g = quadratic(0.0, np.zeros(2), np.eye(2), 2)
    Xg = np.random.default_rng(5).uniform(0.2, 2.0, (6, 2))
    np.testing.assert_allclose(l_apply(GRUSHIN, g, Xg), 2 + 2 * Xg[:, 0] ** 2, rtol=1e-12)
    # FD route on the same field
    raw = ScalarField(g.value, 2)
    np.testing.assert_allclose(l_apply(GRUSHIN, raw, Xg), 2 + 2 * Xg[:, 0] ** 2, rtol=1e-6)


@pytest.mark.parametrize("N,alpha", [(3, 0.5), (4, 1.5), (5, 2.0), (6, 0.7)])
def test_l_apply_radial_power(N, alpha):
    e = make_system("euclidean", N=N)
    X = np.random.default_rng(N).uniform(0.3, 1.0, (5, N))
    r = np.linalg.norm(X, axis=-1)
    expect = alpha * (alpha - N + 2) * r ** (-alpha - 2)
    np.testing.assert_allclose(l_apply(e, radial_power(N, -alpha), X), expect, rtol=1e-12)


def test_lp_apply_p2_is_minus_l_apply():
    rng = np.random.default_rng(6)
    u = annular_bump(2, 0.5, 1.5) * quadratic(1.0, [0.1, 0.2], [[0.1, 0], [0, 0.05]], 2)
    X = rng.uniform(0.5, 0.9, (5, 2))
    for system in (make_system("euclidean", N=2), GRUSHIN):
        np.testing.assert_allclose(lp_apply(system, u, 2.0, X), -np.real(l_apply(system, u, X)), rtol=1e-14)


@pytest.mark.parametrize("N,p", [(3, 1.5), (3, 2.5), (4, 3.0), (5, 1.2)])
def test_lp_apply_hardy_profile(N, p):
    a = (N - p) / p
    e = make_system("euclidean", N=N)
    X = np.random.default_rng(7).uniform(0.4, 1.0, (5, N))
    r = np.linalg.norm(X, axis=-1)
    phi = r**-a
    expect = a**p * r**-p * phi ** (p - 1)
    np.testing.assert_allclose(lp_apply(e, radial_power(N, -a), p, X), expect, rtol=1e-6)


def test_lp_apply_linear_field_and_errors():
    e = make_system("euclidean", N=2)
    X = np.random.default_rng(8).standard_normal((4, 2))
    np.testing.assert_allclose(lp_apply(e, coordinate(0, 2), 3.0, X), 0.0, atol=1e-6)
    const = quadratic(1.0, np.zeros(2), np.zeros((2, 2)), 2)
    with pytest.raises(SingularPointError):
        lp_apply(e, const, 1.5, X)
    with pytest.raises(ValueError):
        lp_apply(e, const, 1.0, X)


def test_grushin_gamma_zero_is_euclidean():
    g0 = make_system("grushin", m=2, k=1, gamma=0.0)
    e = make_system("euclidean", N=3)
    u = annular_test_function(3, np.random.default_rng(9))
    X = np.random.default_rng(10).uniform(0.4, 0.8, (6, 3))
    np.testing.assert_array_equal(g0.sigma(X), e.sigma(X))
    np.testing.assert_array_equal(l_apply(g0, u, X), l_apply(e, u, X))
    np.testing.assert_array_equal(horizontal_gradient(g0, u, X), horizontal_gradient(e, u, X))


def test_system_roundtrip():
    for s in (GRUSHIN, make_system("greiner", n=1, gamma=2.0), make_system("euclidean", N=4)):
        t = system_from_dict(s.to_dict())
        assert t.to_dict() == s.to_dict()


def test_custom_system_matches_grushin():
    def sigma(X):
        S = np.zeros((X.shape[0], 2, 2))
        S[:, 0, 0] = 1.0
        S[:, 1, 1] = X[:, 0] ** 2
        return S

    custom = make_system("custom", sigma=sigma, N=2, dim_l=2)
    g2 = make_system("grushin", m=1, k=1, gamma=2.0)
    u = annular_test_function(2, np.random.default_rng(11))
    X = np.random.default_rng(12).uniform(0.5, 0.9, (5, 2))
    np.testing.assert_allclose(l_apply(custom, u, X), l_apply(g2, u, X), rtol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_product_rule_for_horizontal_gradient(seed):
    rng = np.random.default_rng(seed)
    f = annular_test_function(2, rng)
    g = quadratic(1.0, rng.standard_normal(2) * 0.2, np.eye(2) * 0.1, 2) * plane_wave(rng.standard_normal(2))
    x = rng.uniform(0.6, 1.0, 2) * rng.choice([-1, 1], 2)
    fg = ScalarField(lambda X: f.value(X) * g.value(X), 2)
    lhs = horizontal_gradient(GRUSHIN, fg, x, h=1e-4)
    rhs = horizontal_gradient(GRUSHIN, f, x) * g(x) + f(x) * horizontal_gradient(GRUSHIN, g, x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-6 * (1 + np.abs(rhs).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000), st.sampled_from([2, 3, 4]))
def test_gradient_modulus_inequality(seed, dim):
    rng = np.random.default_rng(seed)
    u = annular_test_function(dim, rng)
    d = rng.standard_normal((8, dim))
    X = rng.uniform(0.6, 1.4, (8, 1)) * d / np.linalg.norm(d, axis=1, keepdims=True)
    system = GRUSHIN if dim == 2 else make_system("euclidean", N=dim)
    assert np.all(gradient_modulus_gap(system, u, X) >= -1e-12)


def test_gradient_modulus_gap_examples():
    e = make_system("euclidean", N=2)
    wave = plane_wave([1.0, 0.0])
    np.testing.assert_allclose(gradient_modulus_gap(e, wave, np.array([0.3, 0.4])), 1.0)
    real = annular_test_function(2, np.random.default_rng(1), real=True)
    assert abs(gradient_modulus_gap(e, real, np.array([0.7, 0.4]))) < 1e-12
    with pytest.raises(ValueError):
        gradient_modulus_gap(e, real, np.array([3.0, 0.0]))


def test_adjoint_consistency_on_grushin():
    rng = np.random.default_rng(13)
    u = annular_test_function(2, rng, 0.4, 1.6)
    v = annular_test_function(2, rng, 0.5, 1.5)
    a = np.array([0.7, -1.3])

    def F(Y):
        return v.value(Y)[:, None] * (a + Y)

    def f(Y):
        lhs = np.sum(horizontal_gradient(GRUSHIN, u, Y) * F(Y), axis=-1)
        rhs = -u.value(Y) * horizontal_divergence(GRUSHIN, F, Y, h=1e-5)
        return np.stack([lhs, rhs], axis=-1)

    res = quad.integrate(f, quad.annulus(2, 0.4, 1.6), quad.QuadratureSpec(rel_tol=1e-9))
    lhs, rhs = res.value
    assert abs(lhs - rhs) <= 1e-7 * abs(lhs) + np.sum(res.err_est)
