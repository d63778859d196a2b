import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardyforge.construct import OneDimWeight
from hardyforge.sturm import (
    AT_INFINITY,
    AT_ZERO,
    CONVERGENT,
    DIVERGENT,
    INCONCLUSIVE,
    NOT_OPTIMAL,
    OPTIMAL,
    classify_divergence,
    is_optimal_1d,
    ode_residual,
)

LN10 = 2.302585092994046  # log(10)
HALF_LINE = (0.0, np.inf)


def _ones(t):
    return np.ones_like(np.asarray(t, dtype=float))


# (integrand, side, interval, expected class, expected estimate or None)
CORPUS = {
    "inverse_at_zero": (lambda t: 1 / t, AT_ZERO, HALF_LINE, DIVERGENT, None),
    "half_inverse_at_zero": (lambda t: 0.5 / t, AT_ZERO, HALF_LINE, DIVERGENT, None),
    "inverse_sqrt_at_zero": (lambda t: t**-0.5, AT_ZERO, HALF_LINE, CONVERGENT, 2.0),
    "constant_at_zero": (_ones, AT_ZERO, HALF_LINE, CONVERGENT, 1.0),
    "inverse_square_at_zero": (lambda t: t**-2.0, AT_ZERO, HALF_LINE, DIVERGENT, None),
    "log_log_at_zero": (lambda t: 1 / (t * (1 + abs(np.log(t)))), AT_ZERO, HALF_LINE, DIVERGENT, None),
    "log_square_at_zero": (lambda t: 1 / (t * (1 + abs(np.log(t))) ** 2), AT_ZERO, HALF_LINE, CONVERGENT, None),
    "inverse_at_infinity": (lambda t: 1 / t, AT_INFINITY, HALF_LINE, DIVERGENT, None),
    "inverse_square_at_infinity": (lambda t: t**-2.0, AT_INFINITY, HALF_LINE, CONVERGENT, 1.0),
    "power_three_halves_at_infinity": (lambda t: t**-1.5, AT_INFINITY, HALF_LINE, CONVERGENT, 2.0),
    "exponential_at_infinity": (lambda t: np.exp(-t), AT_INFINITY, HALF_LINE, CONVERGENT, math.exp(-1)),
    "linear_at_infinity": (lambda t: t, AT_INFINITY, HALF_LINE, DIVERGENT, None),
    "log_log_at_infinity": (lambda t: 1 / (t * (1 + np.log(t))), AT_INFINITY, HALF_LINE, DIVERGENT, None),
    "pole_at_finite_end": (lambda t: 1 / (2 - t), AT_INFINITY, (0.0, 2.0), DIVERGENT, None),
    "sqrt_pole_at_finite_end": (lambda t: (2 - t) ** -0.5, AT_INFINITY, (0.0, 2.0), CONVERGENT, 2.0),
    "oscillating_sign": (lambda t: np.sin(np.log(t)) / t, AT_ZERO, HALF_LINE, INCONCLUSIVE, None),
}


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_classifier_corpus(name):
    f, side, interval, expected, estimate = CORPUS[name]
    v = classify_divergence(f, side, interval)
    assert v.cls == expected
    if estimate is not None:
        assert v.estimate == pytest.approx(estimate, rel=1e-6)


def test_growth_slopes():
    assert LN10 == pytest.approx(math.log(10), rel=1e-15)
    assert classify_divergence(lambda t: 1 / t, AT_ZERO).growth_slope == pytest.approx(LN10, rel=1e-9)
    assert classify_divergence(lambda t: 0.5 / t, AT_ZERO).growth_slope == pytest.approx(LN10 / 2, rel=1e-9)
    assert classify_divergence(lambda t: 1 / t, AT_INFINITY).growth_slope == pytest.approx(LN10, rel=1e-9)


def test_partials_are_increasing_truncations():
    v = classify_divergence(lambda t: 1 / t, AT_ZERO, decades=6)
    pts = [p for p, _ in v.partials]
    vals = [s for _, s in v.partials]
    assert len(pts) == 6
    assert all(b < a for a, b in zip(pts, pts[1:]))
    np.testing.assert_allclose(np.diff(vals), LN10, rtol=1e-9)


def test_bad_side_rejected():
    with pytest.raises(ValueError):
        classify_divergence(lambda t: 1 / t, "sideways")


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(sorted(CORPUS)), st.floats(-8, 8))
def test_scale_invariance(name, log_scale):
    f, side, interval, expected, _ = CORPUS[name]
    c = 10.0**log_scale
    assert classify_divergence(lambda t: c * f(t), side, interval).cls == expected


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 2.0])
def test_conjugation_swaps_ends(p):
    # int_0 t^-p dt and int^inf s^(p-2) ds are the same integral under s = 1/t
    at_zero = classify_divergence(lambda t: t**-p, AT_ZERO).cls
    at_inf = classify_divergence(lambda s: s ** (p - 2.0), AT_INFINITY).cls
    assert at_zero == at_inf


def test_record_round_trip():
    d = classify_divergence(lambda t: t**-0.5, AT_ZERO).to_dict()
    assert d["class"] == CONVERGENT and d["side"] == AT_ZERO
    assert isinstance(d["partials"][0], list)


# --------------------------------------------------------------------------- one-dimensional optimality


def test_classical_pair_is_optimal():
    v = is_optimal_1d(OneDimWeight.classical())
    assert v.overall == OPTIMAL
    assert v.ode_residual <= 1e-6


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_family_is_optimal(a):
    v = is_optimal_1d(OneDimWeight.family(a))
    assert v.overall == OPTIMAL, v.to_dict()


def test_euler_pair_is_not_optimal():
    pair = OneDimWeight(lambda t: 0.25 / t**2, lambda t: t, lambda t: _ones(t), HALF_LINE, "euler")
    v = is_optimal_1d(pair)
    assert not v.ode_ok
    assert v.overall == NOT_OPTIMAL


def test_subcritical_pair_is_not_optimal():
    # psi = 1 solves -psi'' = 0, but psi^2 w = 0 is integrable at both ends
    pair = OneDimWeight(lambda t: 0 * t, _ones, lambda t: 0 * t, HALF_LINE, "zero")
    v = is_optimal_1d(pair)
    assert v.ode_ok
    assert v.overall == NOT_OPTIMAL
    assert {x.cls for x in v.cond3} == {CONVERGENT}


def test_non_positive_psi_has_infinite_residual():
    pair = OneDimWeight(lambda t: 0 * t, lambda t: 1 - t, None, HALF_LINE, "sign change")
    assert ode_residual(pair) == float("inf")


def test_verdict_serialises():
    d = is_optimal_1d(OneDimWeight.classical()).to_dict()
    assert d["overall"] == OPTIMAL
    assert set(d["cond2"]) == {AT_ZERO, AT_INFINITY}


def test_quarter_power_pair_fails_on_the_first_integral():
    # t^(1/4) solves -psi'' = 3/(16 t^2) psi exactly, but 1/psi^2 = t^(-1/2) is integrable at 0
    pair = OneDimWeight(lambda t: 3 / (16 * t**2), lambda t: t**0.25, lambda t: 0.25 * t**-0.75, HALF_LINE, "quarter")
    v = is_optimal_1d(pair)
    assert v.ode_ok
    assert v.cond2[0].side == AT_ZERO and v.cond2[0].cls == CONVERGENT
    assert v.overall == NOT_OPTIMAL
