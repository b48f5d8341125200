import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from blenderlab.geometry import (AmbientPoint, ConeParams, ReferenceCube, boundary_part,
                                 cone_ratio, diam_u, in_cone)

KINDS = ("S", "U", "UU")
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vectors = st.integers(1, 3).flatmap(
    lambda s: st.integers(1, 3).flatmap(
        lambda u: st.tuples(st.just(s), st.just(u), arrays(float, s + u + 1, elements=finite))))
alphas = st.floats(0.01, 0.99)


@given(vectors, alphas, alphas, st.sampled_from(KINDS))
def test_cone_nesting(vsu, a, b, kind):
    s, u, v = vsu
    lo, hi = min(a, b), max(a, b)
    if in_cone(v, kind, lo, s, u):
        assert in_cone(v, kind, hi, s, u)


@given(vectors, alphas)
def test_stable_and_unstable_cones_are_transverse(vsu, a):
    s, u, v = vsu
    if np.any(v != 0):
        assert not (in_cone(v, "S", a, s, u) and in_cone(v, "U", a, s, u))


@given(vectors, alphas)
def test_strong_unstable_cone_inside_unstable_cone(vsu, a):
    s, u, v = vsu
    if in_cone(v, "UU", a, s, u):
        assert in_cone(v, "U", a, s, u)


@given(vectors, alphas, st.sampled_from(KINDS))
def test_cone_ratio_matches_membership(vsu, a, kind):
    s, u, v = vsu
    r = float(cone_ratio(v, kind, s))
    if abs(r - a) > 1e-9 * max(1.0, a):
        assert in_cone(v, kind, a, s, u) == (r <= a)


def test_cone_examples():
    assert in_cone(np.array([1.0, 0.1, 0.0]), "S", 0.2, 1, 1)
    assert not in_cone(np.array([1.0, 0.3, 0.0]), "S", 0.2, 1, 1)
    assert in_cone(np.array([0.0, 0.0, 1.0]), "UU", 0.1, 1, 1)
    assert in_cone(np.array([0.0, 1.0, 0.0]), "U", 0.1, 1, 1)
    assert not in_cone(np.array([0.0, 1.0, 0.0]), "UU", 0.9, 1, 1)


def test_in_cone_rejects_bad_input():
    with pytest.raises(ValueError):
        in_cone(np.zeros(4), "S", 0.5, 1, 1)
    with pytest.raises(ValueError):
        in_cone(np.ones(3), "S", 1.5, 1, 1)
    with pytest.raises(ValueError):
        in_cone(np.ones(3), "X", 0.5, 1, 1)


def test_boundary_part():
    cube = ReferenceCube(0.125)
    assert boundary_part(AmbientPoint([0.0], 0.0, [0.0]), cube) == frozenset()
    assert boundary_part(AmbientPoint([1.0], 0.0, [0.2]), cube) == {"d_s"}
    assert boundary_part(AmbientPoint([-1.0], 0.125, [1.0]), cube) == {"d_s", "d_c", "d_uu"}
    with pytest.raises(ValueError):
        boundary_part(AmbientPoint([0.0], 0.2, [0.0]), cube)


def test_cube_excursion_and_params():
    cube = ReferenceCube(0.125)
    assert cube.excursion(AmbientPoint([0.5], 0.1, [0.5])) == 0.0
    assert cube.excursion(AmbientPoint([1.25], 0.1, [0.5])) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        ReferenceCube(0.0)
    with pytest.raises(ValueError):
        ConeParams(0.3, 0.4)
    assert diam_u(1) == 2.0 and diam_u(4) == 4.0


def test_point_vector_round_trip():
    p = AmbientPoint([0.1, 0.2], 0.03, [0.4])
    assert AmbientPoint.from_vector(p.to_vector(), 2) == p
