import math

import numpy as np
import pytest

import approxsense as ax


def test_quantizer_and_sensitivity():
    q = ax.ApproxOperator.uniform_quantizer(0.5, 1.0)
    assert q.deterministic
    np.testing.assert_array_equal(q.transform(np.array([0.6, -0.9])), [0.5, -1.0])
    d = ax.empirical_sensitivity(np.array([0.6]), q, np.array([[1.0], [-2.0]]))
    assert d["value"] == pytest.approx(0.15)


def test_rademacher():
    assert ax.ellipse_rademacher(np.array([3.0, 4.0]), 2.0)["value"] == 2.5
    assert ax.geometry_rademacher({"variant": "ellipse", "p": 2.0, "mu": [3.0, 4.0]})["value"] == 2.5
    pts = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert ax.exact_rademacher(pts)["value"] == 0.25
    mc = ax.mc_rademacher(pts, 20000, 1)
    assert not mc["certified"]
    assert abs(mc["value"] - 0.25) <= 4 * mc["standard_error"]
    lo, hi = ax.crude_bounds(1.0, 2.0)
    assert lo == pytest.approx(1 / (2 * math.sqrt(2)))
    assert hi == 1.0


def test_bounds():
    assert ax.hoeffding_term(3.0, 40.0, 50) == pytest.approx(3 * math.sqrt(math.log(40) / 100))
    r = ax.uniform_restricted_bound(0.0, 0.0, 1.0, 50, 0.05)
    assert r["value"] == pytest.approx(sum(t["value"] for t in r["terms"]), abs=1e-12)
    eq = ax.lambda_equivalence_bound(1.0, 0.05, 50, 0.05, 1.0, 0.1)
    assert eq["value"] == pytest.approx(0.4 + 6 * math.sqrt(math.log(160) / 100))
    s = ax.stochastic_bound(0.0, 0.0, 0.0, 1.0, 100, 0.1)
    assert s["value"] == pytest.approx(math.sqrt(math.log(10) / 200))
    assert ax.sensitivity_deviation_bound(0.0, 1.0, 50, 0.05) == pytest.approx(3 * math.sqrt(math.log(40) / 100))


def test_lambda_erm_recovers_on_grid_teacher():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(30, 2))
    y = x @ np.array([0.5, -1.0])
    out = ax.lambda_erm(x, y, x, ax.ApproxOperator.uniform_quantizer(0.5, 1.0), 1.0)
    np.testing.assert_array_equal(out["weights"], [0.5, -1.0])
    assert out["objective_value"] == 0.0


def test_suites_and_errors():
    assert "lemma1" in ax.suite_names()
    report = ax.run_suite("ellipse_exact", trials=5, seed=3)
    assert report["passed"] and report["violations"] == 0
    with pytest.raises(ax.ApproxSenseError):
        ax.run_suite("nope")
