import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blenderlab.axioms import default_cones
from blenderlab.disks import alpha_admissible
from blenderlab.folding import (FoldError, cone_trace, image_fold, locate_tangency,
                                make_quadratic_fold)
from blenderlab.geometry import in_cone
from blenderlab.model import default_instance

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"
M = default_instance()
ALPHA = alpha_admissible(M)


@pytest.fixture(scope="module")
def result():
    fold = make_quadratic_fold(M, "P", 0.05)
    return locate_tangency(fold, n_iter=40, tol=1e-2, alpha=default_cones(M)[0])


def test_fold_validates():
    r = make_quadratic_fold(M, "P", 0.05).check()
    assert r["endpoints_meet"] and r["interior_between"]


@pytest.mark.parametrize("apex", [0.0, -0.01, 0.11, 0.15])
def test_apex_outside_superposition_interval(apex):
    with pytest.raises(FoldError, match="outside superposition interval"):
        make_quadratic_fold(M, "P", apex)


def test_steep_fold_refused():
    with pytest.raises(FoldError):
        make_quadratic_fold(M, "P", 0.05, lip=2 * ALPHA)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.005, 0.095), st.floats(0.0, 0.9), st.sampled_from("PQ"))
def test_image_fold_is_a_fold(apex, lipfrac, saddle):
    fold = make_quadratic_fold(M, saddle, apex, lipfrac * ALPHA, t_grid=129)
    for _ in range(3):
        fold, branch, (a, b) = image_fold(fold)
        r = fold.check()
        assert r["endpoints_meet"] and r["interior_between"]
        assert 0.0 <= a < b <= 1.0


def test_windows_nested_and_shrinking(result):
    iv = np.array(result.parameter_intervals)
    assert np.all(iv[1:, 0] >= iv[:-1, 0] - 1e-15)
    assert np.all(iv[1:, 1] <= iv[:-1, 1] + 1e-15)
    w = iv[:, 1] - iv[:, 0]
    first_b = result.itinerary.index("B")
    assert np.all(np.diff(w[first_b + 1:]) <= 1e-15)
    assert w[-1] < 0.05


def test_tangency_is_accurate(result):
    assert result.bracketed
    a, b = result.parameter_intervals[-1]
    assert a <= result.t_star <= b
    assert result.residual_angle < 1e-8
    assert result.cone_margin > 0


def test_tangency_direction_stays_in_stable_cones(result):
    alpha = default_cones(M)[0]
    assert np.all(cone_trace(result, M, alpha) <= alpha)


def test_apex_tangent_lies_in_stable_cone():
    fold = make_quadratic_fold(M, "P", 0.05, lip=0.5 * ALPHA)
    D = fold.tangent_space(0.5, np.zeros(M.u))
    assert in_cone(D[:, 0], "S", default_cones(M)[0], M.s, M.u)


def test_q_side_fold(result):
    res = locate_tangency(make_quadratic_fold(M, "Q", 0.05), n_iter=25, tol=1.0)
    assert res.residual_angle < 1e-8
    assert res.itinerary[0] == "B"


def test_sloped_fold_tangency():
    res = locate_tangency(make_quadratic_fold(M, "P", 0.04, lip=0.5 * ALPHA), n_iter=25, tol=1.0)
    assert res.bracketed and res.residual_angle < 1e-8


def test_tangency_json(result):
    doc = result.to_json(with_orbit=True)
    jsonschema.validate(doc, json.loads((SCHEMAS / "tangency.schema.json").read_text()))


def test_skew_validation():
    with pytest.raises(FoldError):
        make_quadratic_fold(M, "P", 0.05, skew=1.0)
    with pytest.raises(FoldError, match="peak"):
        make_quadratic_fold(M, "P", 0.09, skew=0.9)
