import json
import math

import numpy as np
import pytest

from hardyforge.construct import ParameterError
from hardyforge.domain import DomainSpec
from hardyforge.examples import (
    ExteriorBallFields,
    compare_kl_weight,
    epsilon_gamma,
    example_exterior_ball,
    example_half_space,
    example_punctured_space,
    green_pipeline,
    half_space_asymptotics,
)


@pytest.fixture(scope="module")
def ext_ball():
    return example_exterior_ball()


def test_epsilon_gamma():
    assert epsilon_gamma(3, 1.0) == 0.25
    assert epsilon_gamma(4, 0.5) == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        epsilon_gamma(2, 1.0)
    with pytest.raises(ParameterError):
        epsilon_gamma(3, -1.0)


@pytest.mark.parametrize("n,gamma", [(3, 1.0), (3, 0.3), (4, 2.0), (5, 0.0), (3, -0.5)])
def test_exterior_ball_residuals(n, gamma):
    f = ExteriorBallFields(n, gamma, epsilon_gamma(n, gamma))
    r = np.geomspace(1.0, 1e4, 300)
    d = np.random.default_rng(0).normal(size=(100, n))
    sphere = d / np.linalg.norm(d, axis=1)[:, None]
    assert f.pde_residual(r).max() <= 1e-8
    assert f.robin_residual(sphere).max() <= 1e-10


def test_exterior_ball_derivatives_by_differences():
    f = ExteriorBallFields(3, 1.0, 0.25)
    r = np.linspace(1.1, 20.0, 50)
    h = 1e-5 * r
    dv = (f.v_r(r + h) - f.v_r(r - h)) / (2 * h)
    np.testing.assert_allclose(f.dv_r(r), dv, rtol=1e-8, atol=1e-10)
    d2v = (f.dv_r(r + h) - f.dv_r(r - h)) / (2 * h)
    np.testing.assert_allclose(f.d2v_r(r), d2v, rtol=1e-7, atol=1e-9)


def test_exterior_ball_example(ext_ball):
    assert ext_ball.route == "explicit supersolution"
    assert ext_ball.passed, ext_ball.checks
    assert ext_ball.residuals["cross_module_weight"] <= 1e-8
    assert ext_ball.verdicts["null_criticality"].verdict == "Divergent"
    assert ext_ball.verdicts["null_criticality_sandwich"].verdict == "Divergent"
    assert "khasminskii" not in ext_ball.checks


def test_example_outputs(ext_ball, tmp_path):
    files = ext_ball.write(tmp_path)
    assert all((tmp_path / p).exists() for p in files)
    summary = json.loads((tmp_path / "exterior_ball.json").read_text())
    assert summary["checks"] == {k: bool(v) for k, v in ext_ball.checks.items()}
    header = (tmp_path / "exterior_ball_optimality_at_infinity.csv").read_text().splitlines()[0]
    assert header.startswith("k,R")


def test_compare_kl_table():
    out = compare_kl_weight(3, 1.0)
    assert out["ratio_at_1"] == pytest.approx(4.0, rel=1e-12)
    assert out["strict"]
    assert np.all(out["W_ours"] >= out["W_KL"] * (1 - 1e-12))
    assert out["ratio"][-1] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("n,gamma", [(4, 1.0), (5, 2.0), (3, 0.5)])
def test_compare_kl_offset_ratio(n, gamma):
    out = compare_kl_weight(n, gamma)
    assert out["offset_term_ratio_at_1"] == pytest.approx(((n - 1 + 2 * gamma) / (2 * gamma)) ** 2, rel=1e-12)


def test_compare_kl_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        compare_kl_weight(2, 1.0)
    with pytest.raises(ParameterError):
        compare_kl_weight(3, 0.0)


def test_punctured_example():
    res = example_punctured_space(K_max=4)
    assert res.passed, res.checks
    assert res.residuals["max_abs_W_r2_minus_limit"] <= 1e-12
    assert res.residuals["a_zero_vs_classical"] <= 1e-12


def test_green_pipeline_normalisation():
    G, u, res = green_pipeline(DomainSpec.half_space(3), 0.5)
    assert res.params.S == 0.5 and res.params.a == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        green_pipeline(DomainSpec.half_space(3), 1.5)


def test_half_space_asymptotics_fields():
    _, _, res = green_pipeline(DomainSpec.half_space(4), 0.5)
    out = half_space_asymptotics(res.W, 4)
    assert out["target"] == 1.0
    assert out["max_relative_error"] <= 1e-2
    assert len(out["rays"]) == 3


def test_half_space_example_without_eigenvalues():
    res = example_half_space(3, eigen=False)
    assert res.passed, res.checks
    assert res.residuals["neumann_residual"] <= 1e-8
    assert math.isfinite(res.residuals["asymptotic_relative_error"])
