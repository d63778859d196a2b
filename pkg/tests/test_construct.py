import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardyforge.construct import (
    HardyFamilyParams,
    HypothesisError,
    OneDimWeight,
    ParameterError,
    classical_weight,
    construct_weight,
    construct_weight_general,
    default_reference,
    f_1,
    f_1_prime,
    f_w,
    f_w_prime,
    sup_ratio,
    u_xi,
    u_xi_checks,
    u_xi_zero,
    verify_ermakov_pinney,
    w_family,
)
from hardyforge.domain import DomainSpec, ScalarField, laplacian_neumann
from hardyforge.examples import green_pipeline
from hardyforge.green import GreenPotential, canonical_density

SQRT3_OVER_2 = 0.8660254037844386  # sqrt(3)/2


def unit(n):
    return ScalarField(lambda x: np.ones(len(np.atleast_2d(x))), lambda x: np.zeros_like(np.atleast_2d(x)), "u")


def newton_kernel():
    # 1/(4 pi |x|), the pure kernel on R^3 with pole at the origin
    def value(x):
        return 1.0 / (4 * np.pi * np.linalg.norm(np.atleast_2d(x), axis=1))

    def grad(x):
        x = np.atleast_2d(x)
        r = np.linalg.norm(x, axis=1)
        return -x / (4 * np.pi * r[:, None] ** 3)

    return ScalarField(value, grad, "G")


@pytest.fixture(scope="module")
def punctured_half():
    return green_pipeline(DomainSpec.punctured_space(3), 0.5)


# --------------------------------------------------------------------------- 1D profiles


def test_f_w_values():
    assert SQRT3_OVER_2 == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert float(f_w(0.5, 1.0)) == pytest.approx(SQRT3_OVER_2, rel=1e-14)
    assert float(f_w(2.0, 0.0)) == pytest.approx(2.0, rel=1e-15)
    assert float(f_w(2.0, 1.0)) == 0.0
    assert float(f_w_prime(1.0, 1.0)) == 0.0


def test_f_w_outside_range_raises():
    with pytest.raises(ParameterError):
        f_w(2.5, 1.0)


def test_f_1_vanishes_at_reference_and_changes_sign():
    for a in (0.0, 0.5, 1.0, 1.9):
        assert float(f_1(default_reference(a), a)) == pytest.approx(0.0, abs=1e-15)
        assert float(f_1(0.5 * default_reference(a), a)) > 0
        assert float(f_1(min(1.2 * default_reference(a), 0.99 * 2 / a if a else 5), a)) < 0


def test_default_reference_when_one_leaves_the_interval():
    assert default_reference(1.0) == 1.0
    assert default_reference(3.0) == pytest.approx(0.5)
    assert float(f_1(0.1, 3.0)) > 0


def test_f_1_domain_errors():
    with pytest.raises(ParameterError):
        f_1(0.0, 1.0)
    with pytest.raises(ParameterError):
        f_1(2.0, 1.0)


def test_ratio_f_w_over_f_1_vanishes_at_zero():
    t = 10.0 ** -np.arange(2, 12, 2)
    for a in (0.0, 1.0):
        q = f_w(t, a) / f_1(t, a)
        assert np.all(np.diff(q) < 0)
        # the ratio is 1 / int_t^1 ds/(2s - a s^2), which decays like 2 / log(1/t)
        oracle = 1.0 / (0.5 * np.log(t / (2 - a * t)) * -1 + 0.5 * np.log(1 / (2 - a)))
        np.testing.assert_allclose(q, oracle, rtol=1e-10)
    assert float(f_w(1e-300, 0.0) / f_1(1e-300, 0.0)) < 0.003


def test_f_1_closed_form_against_quadrature():
    from scipy.integrate import quad

    a, t = 0.7, 0.13
    integral = quad(lambda s: 1 / (2 * s - a * s * s), t, 1.0, epsrel=1e-13)[0]
    assert float(f_1(t, a)) == pytest.approx(float(f_w(t, a)) * integral, rel=1e-12)


@pytest.mark.parametrize("a,hi", [(0.0, 10.0), (1.0, 1.9)])
def test_ermakov_pinney_residuals(a, hi):
    grid = np.linspace(0.1, hi, 400)
    rep = verify_ermakov_pinney(a, grid, h=1e-3)
    assert rep.residual_fw <= 1e-6
    assert rep.residual_f1 <= 1e-6
    assert rep.wronskian_variation <= 1e-10


def test_wronskian_is_minus_one():
    t = np.linspace(0.05, 1.9, 50)
    wr = f_w(t, 1.0) * f_1_prime(t, 1.0) - f_w_prime(t, 1.0) * f_1(t, 1.0)
    np.testing.assert_allclose(wr, -1.0, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(1e-3, 4.0)), st.floats(0.01, 0.99))
def test_family_weight_dominates_classical(a, frac):
    # (2t - a t^2)^-2 >= 1/(4t^2) wherever f_w is defined, strictly for a > 0
    t = frac * (2.0 / a if a > 0 else 100.0)
    assert w_family(t, a) >= 0.25 / t**2 * (1 - 1e-12)
    if a > 0:
        assert w_family(t, a) > 0.25 / t**2


# --------------------------------------------------------------------------- sup normalisation


def test_sup_ratio_normalisation_and_stability():
    dom = DomainSpec.half_space(3)
    from hardyforge.green import images_kernel

    Gp = GreenPotential(images_kernel(dom, laplacian_neumann(3)), canonical_density(dom))
    s1 = sup_ratio(Gp, unit(3), dom, samples=2000, seed=1)
    s2 = sup_ratio(Gp, unit(3), dom, samples=4000, seed=2)
    assert abs(s1.S - s2.S) / s2.S < 5e-3
    assert s1.a_max == pytest.approx(1 / s1.S)
    scaled = Gp.scaled(0.5 / s2.S)
    s3 = sup_ratio(scaled, unit(3), dom, samples=2000, seed=3)
    assert s3.S == pytest.approx(0.5, rel=5e-3)


def test_params_validation():
    with pytest.raises(ParameterError):
        HardyFamilyParams(2.5, 0.5, 2.0)
    with pytest.raises(ParameterError):
        HardyFamilyParams(1.0, 0.0, 2.0)
    assert HardyFamilyParams(2.0, 0.5, 2.0).attained
    assert not HardyFamilyParams(1.0, 0.5, 2.0).attained


def test_attained_sup_warns():
    G, u, res = green_pipeline(DomainSpec.punctured_space(3), 0.0)
    with pytest.warns(RuntimeWarning):
        construct_weight(G, u, 2.0, laplacian_neumann(3), params=HardyFamilyParams(2.0, 0.5, 2.0))


# --------------------------------------------------------------------------- weights


def test_pure_kernel_gives_inverse_square():
    x = np.random.default_rng(0).normal(size=(200, 3)) * 3
    res = construct_weight(newton_kernel(), unit(3), 0.0, laplacian_neumann(3))
    W = res.W(x)
    np.testing.assert_allclose(W * np.sum(x * x, axis=1), 0.25, rtol=1e-12)


def test_pure_kernel_rejects_positive_a():
    with pytest.raises(ParameterError):
        construct_weight(newton_kernel(), unit(3), 0.5, laplacian_neumann(3))


def test_a_zero_matches_classical(punctured_half):
    G, u, _ = punctured_half
    x = np.random.default_rng(1).normal(size=(300, 3)) * 4
    x = x[np.linalg.norm(x, axis=1) > 1.0]
    res = construct_weight(G, u, 0.0, laplacian_neumann(3), params=HardyFamilyParams(0.0, 0.5, 2.0))
    np.testing.assert_allclose(res.W(x), classical_weight(G, u, laplacian_neumann(3))(x), rtol=1e-12)


def test_weight_grows_with_a(punctured_half):
    G, u, res = punctured_half
    x = np.random.default_rng(2).normal(size=(300, 3)) * 4
    x = x[np.linalg.norm(x, axis=1) > 1.0]
    w0 = construct_weight(G, u, 0.0, laplacian_neumann(3), params=HardyFamilyParams(0.0, 0.5, 2.0)).W(x)
    assert np.all(res.W(x) > w0)


def test_weight_nonnegative_everywhere(punctured_half):
    _, _, res = punctured_half
    rng = np.random.default_rng(3)
    x = rng.normal(size=(10_000, 3)) * rng.uniform(0.01, 10, (10_000, 1))
    W = res.W(x)
    assert np.all(np.isfinite(W)) and np.all(W >= 0)


def test_general_route_reproduces_family(punctured_half):
    G, u, res = punctured_half
    a = res.params.a
    gen = construct_weight_general(G, u, OneDimWeight.family(a), laplacian_neumann(3), params=res.params)
    x = np.random.default_rng(4).normal(size=(300, 3)) * 3
    np.testing.assert_allclose(gen.W(x), res.W(x), rtol=1e-10)
    np.testing.assert_allclose(gen.v(x), res.v(x), rtol=1e-12)


def test_general_route_rejects_decreasing_profile(punctured_half):
    G, u, res = punctured_half
    bad = OneDimWeight(lambda t: 0 * t, lambda t: 1 / t, lambda t: -1 / t**2, (0, np.inf), "decreasing")
    with pytest.raises(HypothesisError):
        construct_weight_general(G, u, bad, laplacian_neumann(3), params=res.params)


def _fd_laplacian(f, x, h=1e-3):
    out = -2 * x.shape[1] * f(x)
    for i in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[i] = h
        out = out + f(x + e) + f(x - e)
    return out / h**2


def test_ground_state_identity_by_finite_differences(punctured_half):
    # -Lap v = W v both inside and outside the support of the density
    _, _, res = punctured_half
    rng = np.random.default_rng(5)
    d = rng.normal(size=(60, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = np.concatenate([rng.uniform(0.2, 0.8, 30), rng.uniform(1.3, 4.0, 30)])
    x = d * r[:, None]
    lhs = -_fd_laplacian(res.v, x)
    rhs = res.W(x) * res.v(x)
    np.testing.assert_allclose(lhs, rhs, rtol=2e-4, atol=1e-6)


def test_supersolution_is_a_solution_off_the_support(punctured_half):
    # h = u f_1(t) satisfies -Lap h = W_a h where the density vanishes, up to the f' phi term
    _, _, res = punctured_half
    x = np.array([[2.0, 0.5, 0.0], [0.0, 3.0, 1.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lhs = -_fd_laplacian(res.h, x)
    # off the support the weight is w(t) |grad t|^2, and f_1 solves the same ODE as f_w
    np.testing.assert_allclose(lhs, res.W(x) * res.h(x), rtol=5e-4)


def test_neumann_condition_on_half_space():
    G, u, res = green_pipeline(DomainSpec.half_space(3), 0.5)
    x = np.array([[0.3, -0.2, 0.0], [2.0, 1.0, 0.0], [-5.0, 0.0, 0.0]])
    g = res.v.grad(x)
    assert np.all(np.abs(g[:, -1]) <= 1e-12 * np.linalg.norm(g, axis=1))


# --------------------------------------------------------------------------- oscillatory family


@pytest.mark.parametrize("xi,M,a", [(1.0, 1.0, 1.0), (0.5, 2.0, 0.5), (3.0, 0.7, 2.0)])
def test_u_xi_checks(xi, M, a):
    c = u_xi_checks(xi, M, a)
    assert all(c.passed().values()), c


def test_u_xi_out_of_range():
    with pytest.raises(ParameterError):
        u_xi(np.array([2.5]), 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        u_xi(np.array([0.5]), 0.0, 1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.1, 10.0), st.floats(0.1, 4.0), st.floats(0.001, 0.999))
def test_u_xi_envelope(xi, M, a, frac):
    t = np.array([frac * 2.0 / a])
    assert abs(float(u_xi(t, xi, M, a)[0])) <= float(f_w(t, a)[0]) * (1 + 1e-12)


def test_u_xi_zero_location():
    t0 = u_xi_zero(1.0, 1.0, 1.0)
    assert t0 == pytest.approx(2 / (math.exp(math.pi) + 1), rel=1e-15)
    assert abs(float(u_xi(np.array([t0]), 1.0, 1.0, 1.0)[0])) < 1e-14
