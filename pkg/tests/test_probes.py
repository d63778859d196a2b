import json
import math

import numpy as np
import pytest

from hardyforge.discrete import RadialGrid, discretize
from hardyforge.domain import DomainSpec, ScalarField, laplacian_neumann
from hardyforge.examples import green_pipeline
from hardyforge.probes import (
    SCHEMA,
    VerificationReport,
    eigen_max_principle_consistency,
    flux_constancy_check,
    green_cross_validation,
    khasminskii_probe,
    null_criticality_probe,
    optimality_at_infinity_probe,
    radial_null_criticality,
)

LN10 = math.log(10.0)


def classical_radial(p):
    return 0.25 / np.linalg.norm(p, axis=1) ** 2


@pytest.fixture(scope="module")
def punctured():
    return green_pipeline(DomainSpec.punctured_space(3), 0.0)


@pytest.fixture(scope="module")
def half_space():
    return green_pipeline(DomainSpec.half_space(3), 0.5)


# --------------------------------------------------------------------------- reports


def _sample_report():
    return VerificationReport(
        "khasminskii",
        [{"k": 1, "R": 2.0, "ratio": 0.5}, {"k": 2, "R": 4.0, "ratio": 0.001}],
        {"final": 0.001},
        "Decaying",
        {"final": 1e-2, "factor": 2.0},
    )


def test_report_round_trip():
    rep = _sample_report()
    d = json.loads(rep.to_json())
    assert d["schema"] == SCHEMA
    assert set(d) == {"schema", "probe", "levels", "fit", "verdict", "tolerances", "extra"}
    back = VerificationReport.from_dict(d)
    assert back == rep
    assert back.reverify() == rep.verdict


def test_reverify_follows_the_stored_levels():
    d = _sample_report().to_dict()
    d["levels"][-1]["ratio"] = 0.4
    assert VerificationReport.from_dict(d).reverify() == "NotDecaying"


# --------------------------------------------------------------------------- Khas'minskii


def test_khasminskii_identical_functions_do_not_decay():
    one = ScalarField.constant(1.0, "one")
    rep = khasminskii_probe(one, one, DomainSpec.punctured_space(3), K_max=5)
    assert rep.verdict == "NotDecaying"
    assert rep.reverify() == rep.verdict
    assert [lv["ratio"] for lv in rep.levels] == [1.0] * 5


def test_khasminskii_fast_ratio_decays():
    # r^-2 / r^-1 = 1/r falls by a factor 2 per level
    u0 = ScalarField(lambda x: np.linalg.norm(x, axis=1) ** -2.0, None, "u0")
    u1 = ScalarField(lambda x: 1.0 / np.linalg.norm(x, axis=1), None, "u1")
    rep = khasminskii_probe(u0, u1, DomainSpec.punctured_space(3), K_max=10)
    assert rep.fit["strictly_decreasing"]
    assert rep.verdict == "Decaying"


def test_khasminskii_rejects_nonpositive_denominator():
    zero = ScalarField.constant(0.0, "zero")
    with pytest.raises(ValueError):
        khasminskii_probe(zero, zero, DomainSpec.punctured_space(3), K_max=2)


# --------------------------------------------------------------------------- flux


def test_flux_constant_punctured(punctured):
    G, _, _ = punctured
    out = flux_constancy_check(G, laplacian_neumann(3), 1e-3, 1e-2)
    assert out["relative_difference"] <= 1e-6


def test_flux_constant_half_space(half_space):
    G, _, _ = half_space
    out = flux_constancy_check(G, laplacian_neumann(3), 1e-3, 1e-2, hemisphere=True)
    assert out["relative_difference"] <= 1e-3


def test_flux_equals_mass(punctured):
    # the total flux of -grad G through a surface around the density is its mass
    G, _, _ = punctured
    out = flux_constancy_check(G, laplacian_neumann(3), 1e-3, 1e-2)
    assert out["flux_t1"] == pytest.approx(G.density.mass, rel=1e-6)


def test_flux_level_inside_support(punctured):
    G, _, _ = punctured
    with pytest.raises(ValueError):
        flux_constancy_check(G, laplacian_neumann(3), 1e-3, 0.49)
    with pytest.raises(ValueError):
        flux_constancy_check(G, laplacian_neumann(3), 1e-2, 1e-3)


# --------------------------------------------------------------------------- null-criticality


def test_null_criticality_divergent_with_analytic_slope(punctured):
    G, _, res = punctured
    flux = flux_constancy_check(G, laplacian_neumann(3), 1e-3, 1e-2)["flux_t1"]
    rep = null_criticality_probe(res.v, res.W, res.t, alpha=0.05, analytic_slope=flux * LN10 / 2)
    assert rep.verdict == "Divergent"
    assert rep.fit["relative_slope_error"] <= 1e-3
    assert rep.reverify() == "Divergent"


def test_null_criticality_control_converges(punctured):
    _, _, res = punctured
    damped = ScalarField(lambda x: res.W(x) * np.sqrt(res.t(x)), None, "damped")
    rep = null_criticality_probe(res.v, damped, res.t, alpha=0.05)
    assert rep.verdict == "Convergent"


def test_coarea_and_sandwich_agree(punctured):
    _, _, res = punctured
    a = null_criticality_probe(res.v, res.W, res.t, alpha=0.05, decades=4)
    b = null_criticality_probe(res.v, res.W, res.t, alpha=0.05, decades=4, method="sandwich")
    assert b.verdict == a.verdict == "Divergent"
    assert abs(a.fit["slope_per_decade"] - b.fit["slope_per_decade"]) <= 0.1 * a.fit["slope_per_decade"]


def test_null_criticality_rejects_nonsymmetric(punctured):
    _, _, res = punctured
    with pytest.raises(NotImplementedError):
        null_criticality_probe(res.v, res.W, res.t, alpha=0.05, symmetric=False)
    with pytest.raises(ValueError):
        null_criticality_probe(res.v, res.W, res.t, alpha=0.05, method="grid")


def test_radial_reduction_matches_closed_form():
    # v = r^(-1/2), W = 1/(4 r^2), t = 1/r in R^3: each decade of t adds pi log(10)
    rep = radial_null_criticality(
        lambda r: r**-0.5, lambda r: 0.25 / r**2, lambda r: 1.0 / r, 3, alpha=0.1, analytic_slope=math.pi * LN10
    )
    assert rep.verdict == "Divergent"
    assert rep.fit["relative_slope_error"] <= 1e-10


# --------------------------------------------------------------------------- optimality at infinity


def test_optimality_matches_analytic_eigenvalues():
    rep = optimality_at_infinity_probe(classical_radial, 3, per_unit_log=100)
    for lv in rep.levels:
        exact = 1.0 + 4 * math.pi**2 / math.log(lv["R"] / 2.0) ** 2
        assert lv["lambda0"] == pytest.approx(exact, rel=1e-8)
    assert rep.fit["limit"] == pytest.approx(1.0, abs=1e-6)
    assert rep.verdict == "PASS"
    assert rep.fit["all_below_upper_bound"] is False


def test_optimality_fails_for_subcritical_weight():
    rep = optimality_at_infinity_probe(lambda p: 0.5 * classical_radial(p), 3, per_unit_log=50, refinements=1)
    assert rep.verdict == "FAIL"


# --------------------------------------------------------------------------- cross checks


def test_green_cross_validation_coarse():
    out = green_cross_validation(h=1 / 16)
    assert out["max_relative_error"] <= 0.02


def test_eigen_max_principle_consistency():
    systems = [
        discretize(laplacian_neumann(3), RadialGrid.with_density(3, 1.0, 10.0**k, 40)).with_weight(classical_radial)
        for k in (1, 2, 3)
    ]
    rep = eigen_max_principle_consistency(systems)
    assert rep.verdict == "PASS"
    assert rep.fit["monotone_non_increasing"]
