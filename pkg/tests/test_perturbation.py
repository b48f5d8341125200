import json
import warnings
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blenderlab.axioms import certify_blender
from blenderlab.disks import reference_graphs
from blenderlab.model import default_instance
from blenderlab.perturbation import (BUMP_SLOPE_MAX, Bump, BumpWarning, Composite, ParamJitter,
                                     perturbation_from_json, perturbed_map, random_perturbations,
                                     robustness_suite)

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"
M = default_instance()


def test_bump_profile_slope_constant():
    # max over r in [0,1] of 6 r (1 - r^2)^2 is attained at r = 1/sqrt(5)
    r = np.linspace(0, 1, 200001)
    assert np.max(6 * r * (1 - r ** 2) ** 2) == pytest.approx(BUMP_SLOPE_MAX, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 0.5), st.integers(0, 10 ** 6))
def test_bump_c1_bound_dominates_values_and_slopes(radius, seed):
    rng = np.random.default_rng(seed)
    b = Bump(rng.uniform(-0.5, 0.5, 3), radius, rng.normal(size=3) * 1e-3)
    X = b.center + rng.uniform(-radius, radius, (400, 3))
    v = b.value(X)
    if v is not None:
        assert np.max(np.linalg.norm(v, axis=1)) <= b.c1_bound() * (1 + 1e-12)
    J = b.jac(X)
    assert np.max(np.linalg.norm(J, ord=2, axis=(1, 2))) <= b.c1_bound() * (1 + 1e-12)


def test_bump_jacobian_matches_finite_differences():
    b = Bump([0.1, 0.05, 0.2], 0.2, [1e-3, -2e-3, 5e-4])
    X = np.array([[0.15, 0.02, 0.25]])
    h = 1e-7
    fd = np.column_stack([(b.value(X + h * e) - b.value(X - h * e))[0] / (2 * h) for e in np.eye(3)])
    assert np.allclose(b.jac(X)[0], fd, atol=1e-9)
    assert b.value(np.array([[5.0, 5.0, 5.0]])) is None


def test_c1_bounds():
    assert ParamJitter(0.01, 0.002).c1_bound(M) == pytest.approx(max(0.01 * M.delta + 0.002, 0.01))
    b = Bump([0, 0.05, 0], 0.1, [1e-4, 0, 0])
    c = Composite((ParamJitter(0.01, 0.0), b))
    assert c.c1_bound(M) == pytest.approx(0.01 + b.c1_bound())


def test_json_round_trip():
    p = Composite((ParamJitter(1e-4, -2e-5), Bump([0.0, 0.05, 0.0], 0.05, [1e-5, 2e-5, 0.0])))
    q = perturbation_from_json(json.loads(json.dumps(p.to_json())))
    assert q.to_json() == p.to_json()
    with pytest.raises(ValueError):
        perturbation_from_json({"kind": "Twist"})


def test_unperturbed_map_matches_model():
    pm = perturbed_map(M, ParamJitter(0.0, 0.0))
    X = np.random.default_rng(0).uniform(-0.5, 0.5, (10, 3))
    for b in "AB":
        assert np.array_equal(pm.eval(b, X), M.eval(b, X))
    sad = pm.continued_saddles()
    assert np.allclose(sad["P"][0], M.P.to_vector(), atol=1e-15)
    assert np.allclose(sad["Q"][0], M.Q.to_vector(), atol=1e-14)


def test_jitter_moves_saddles_exactly():
    pm = perturbed_map(M, ParamJitter(0.01, 0.001))
    q = pm.continued_saddles()["Q"][0]
    assert q[M.s] == pytest.approx(0.021 / 0.21, rel=1e-12)


def test_continuation_converges_for_random_perturbations():
    perts = random_perturbations(M, 12, 3e-4, seed=3, focus=[0.0, 0.05, 0.0])
    for p in perts:
        assert p.c1_bound(M) <= 3e-4 * (1 + 1e-12)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BumpWarning)
            pm = perturbed_map(M, p)
        sad = pm.continued_saddles()
        assert max(it for _, it in sad.values()) <= 20
        assert sad["Q"][0][M.s] - sad["P"][0][M.s] > 0


def test_shot_stable_manifold_is_invariant():
    bump = Bump([0.0, 0.05, 0.0], 0.08, [0.0, 2e-5, 0.0])
    pm = perturbed_map(M, bump)
    refP, _ = reference_graphs(pm)
    xs = np.linspace(-1, 1, 11)[:, None]
    g = refP(xs)
    pts = np.column_stack([xs, g])
    img = pm.eval("A", pts)
    # image of a point on the graph lies on the graph again
    assert np.max(np.abs(refP(img[:, :1]) - img[:, 1:])) < 1e-9


def test_boundary_crossing_bump_warns():
    with pytest.warns(BumpWarning):
        perturbed_map(M, Bump([0.0, 0.05, 1 / 3], 0.05, [1e-6, 0, 0]))


def test_margins_continuous_along_jitter_ray():
    margins = [certify_blender(perturbed_map(M, ParamJitter(0.0, s * 1e-3)), n_samples=50).min_margin
               for s in np.linspace(0, 1, 5)]
    assert np.max(np.abs(np.diff(margins))) < 2e-3


def test_small_suite():
    perts = [ParamJitter(1e-5, -1e-5), Bump([0.0, 0.05, 0.0], 0.06, [1e-6, 1e-6, 0.0]),
             ParamJitter(0.5, 0.0)]
    rep = robustness_suite(M, perts, {"apex": 0.05, "n_iter": 8}, n_samples=50)
    jsonschema.validate(rep, json.loads((SCHEMAS / "robustness.schema.json").read_text()))
    r = rep["records"]
    assert r[0]["passed"] and r[1]["passed"]
    assert not r[2]["in_margin"] and not r[2]["passed"]
    assert r[2]["status"].startswith("expected_failure")
    assert rep["summary"]["in_margin_passed"] == rep["summary"]["in_margin"] == 2
