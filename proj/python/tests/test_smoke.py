import math

import numpy as np
import pytest

import tbgeo


def test_builtins_listed():
    names = tbgeo.builtin_manifolds()
    assert {"flat2", "sphere", "hyperbolic"} <= set(names)
    assert "all" in tbgeo.verify_suites()


def test_sphere_christoffel_value():
    m = tbgeo.Manifold("sphere")
    assert m.dim == 2
    assert m.bundle_dim == 6
    gamma = m.christoffel_at(np.array([math.pi / 4, 0.3]))
    assert gamma.shape == (2, 2, 2)
    # Gamma^th_{ph,ph} = -sin(th)cos(th) = -1/2 at th = pi/4
    assert gamma[0, 1, 1] == pytest.approx(-0.5, abs=1e-12)
    # Gamma^ph_{th,ph} = cot(th) = 1 at th = pi/4
    assert gamma[1, 0, 1] == pytest.approx(1.0, abs=1e-12)


def test_bundle_metric_scalars_and_shapes():
    m = tbgeo.Manifold("flat2")
    x = np.zeros(2)
    t = np.eye(2)
    bm = m.bundle_metric_at(x, t)
    assert bm["r2"] == pytest.approx(2.0)
    assert bm["alpha"] == pytest.approx(3.0)
    assert bm["natural"].shape == (6, 6)
    # positive definite
    assert np.linalg.eigvalsh(bm["natural"]).min() > 0

    assert m.bundle_christoffel_at(x, t).shape == (6, 6, 6)
    r = m.bundle_curvature_at(x, t)
    assert r.shape == (6, 6, 6, 6)
    # the bundle is curved even over the flat plane
    assert np.abs(r).max() > 1e-3


def test_lifts_and_purity():
    m = tbgeo.Manifold("sphere")
    x = np.array([1.1, 0.4])
    t = 0.5 * np.eye(2)
    X = np.array([0.3, -0.7])
    A = np.array([[0.2, 1.0], [-0.4, 0.1]])
    hx = m.horizontal_lift(X, x, t)
    va = m.vertical_lift(A)
    assert hx.shape == (6,)
    assert np.allclose(hx[:2], X)
    assert np.allclose(va[:2], 0)
    # mixed pairings vanish; purity holds for both sign structures
    assert m.bundle_inner(hx, va, x, t) == pytest.approx(0.0, abs=1e-12)
    for label in ("diag-identity", "neg-diag-identity"):
        S = m.structure_action(label, x, t)
        assert np.allclose(S @ S, np.eye(6), atol=1e-12)
        assert m.purity_defect(label, hx + va, hx - va, x, t) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ValueError):
        m.structure_action("no-such-structure", x, t)


def test_verify_report_and_determinism():
    report = tbgeo.verify("flat2", suite="purity", samples=2)
    assert report["passed"] is True
    assert report["manifold"] == "flat2"
    assert {c["name"] for c in report["checks"]} >= {"purity/diag-identity"}

    m = tbgeo.Manifold("sphere")
    a = m.verify_json("w3", 2, 42, "auto")
    b = m.verify_json("w3", 2, 42, "auto")
    assert a == b
    assert m.verify_json("w3", 2, 7, "auto") != a


def test_validation_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        tbgeo.Manifold("no-such-manifold")
    m = tbgeo.Manifold("flat2")
    with pytest.raises(ValueError):
        m.bundle_metric_at(np.zeros(3), np.eye(2))
