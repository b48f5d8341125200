import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blenderlab.axioms import sample_disks_by_class
from blenderlab.central import CentralIFS, choose_branch
from blenderlab.disks import (BETWEEN, LEFT_OF_P, MEETS_P, MEETS_Q, RIGHT_OF_Q, AdmissibilityError,
                              AffineDisk, SampledDisk, alpha_admissible, classify_position,
                              graph_transform, orbit_clearance, position_from_clearances,
                              random_affine_disks, reference_graphs)
from blenderlab.model import default_instance

M = default_instance()
ALPHA = alpha_admissible(M)
RIGHT_OF_P = (BETWEEN, MEETS_Q, RIGHT_OF_Q)


def disks(n, seed, lip=ALPHA, lo=-0.05, hi=0.15):
    b = random_affine_disks(np.random.default_rng(seed), M, n, lip, (lo, hi))
    return [b.disk(i) for i in range(n)]


def test_alpha_admissible_value():
    # min of the disjointness bound (q - 0)/(2 diam) and the half-overlap bound
    ifs = CentralIFS(M.lam, M.mu)
    expected = min(M.q_central / 4, (M.delta - M.q_central) / 2, M.delta / 2, ifs.overlap_width / 4)
    assert ALPHA == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("branch", "AB")
def test_graph_transform_contracts_slopes(branch):
    for d in disks(200, 1):
        if d.lip == 0:
            continue
        assert graph_transform(d, branch, M).lip < d.lip


def test_flat_positions():
    q = M.q_central
    assert classify_position(AffineDisk.flat(-0.01), M).kind == LEFT_OF_P
    assert classify_position(AffineDisk.flat(0.0), M).kind == MEETS_P
    assert classify_position(AffineDisk.flat(0.05), M).kind == BETWEEN
    assert classify_position(AffineDisk.flat(q), M).kind == MEETS_Q
    assert classify_position(AffineDisk.flat(q + 0.01), M).kind == RIGHT_OF_Q


def test_steep_disk_refused():
    with pytest.raises(AdmissibilityError):
        classify_position(AffineDisk([0.0], [[0.0]], 0.05, [2 * ALPHA]), M)


def test_position_from_clearances_rejects_inconsistent_pair():
    with pytest.raises(AdmissibilityError):
        position_from_clearances(-1.0, 1.0)


@given(st.floats(-0.1, 0.2), st.floats(-1, 1), st.floats(-ALPHA, ALPHA))
def test_position_monotone_in_central_offset(xc, xs, slope):
    order = [LEFT_OF_P, MEETS_P, BETWEEN, MEETS_Q, RIGHT_OF_Q]
    d1 = AffineDisk([xs], [[0.0]], xc, [slope])
    d2 = AffineDisk([xs], [[0.0]], xc + 1e-3, [slope])
    k1 = order.index(classify_position(d1, M).kind)
    k2 = order.index(classify_position(d2, M).kind)
    assert k2 >= k1


@pytest.mark.parametrize("item, kinds, branch, test", [
    (1, RIGHT_OF_P, "A", lambda p: p.clearance_p > 0),
    (2, (LEFT_OF_P,), "A", lambda p: p.clearance_p < 0),
    (3, (RIGHT_OF_Q,), "B", lambda p: p.clearance_q > 0),
    (4, (LEFT_OF_P, MEETS_P, BETWEEN), "B", lambda p: p.clearance_q < 0),
    (5, (LEFT_OF_P, MEETS_P), "B", lambda p: p.kind == LEFT_OF_P),
    (6, (RIGHT_OF_Q, MEETS_Q), "A", lambda p: p.kind == RIGHT_OF_Q),
])
def test_image_position_laws(item, kinds, branch, test):
    """Positions of images, checked through the explicit graph transform."""
    classes = sample_disks_by_class(M, ALPHA, 60, np.random.default_rng(item))
    seen = 0
    for name in kinds:
        b = classes[name]
        for i in range(len(b)):
            d = b.disk(i)
            img = graph_transform(d, branch, M)
            assert test(classify_position(img, M, alpha=1.0)), (item, name, d)
            seen += 1
    assert seen > 0


def test_between_disks_have_a_between_image():
    ifs = CentralIFS(M.lam, M.mu)
    for d in disks(300, 7, lo=0.0, hi=M.q_central):
        pos = classify_position(d, M)
        if pos.kind != BETWEEN:
            continue
        kinds = {b: classify_position(graph_transform(d, b, M), M, alpha=1.0).kind for b in "AB"}
        assert BETWEEN in kinds.values()
        if d.lip == 0:
            assert kinds[choose_branch(ifs, d.xc0)] == BETWEEN


def test_sampled_pipeline_agrees_with_affine():
    xu = np.linspace(-1, 1, 9)[:, None]
    for d in disks(20, 3):
        for b in "AB":
            exact = graph_transform(d, b, M)
            sampled = graph_transform(SampledDisk.from_affine(d), b, M)
            xs1, xc1 = exact.evaluate(xu)
            xs2, xc2 = sampled.evaluate(xu)
            assert np.max(np.abs(xc1 - xc2)) < 1e-12
            assert np.max(np.abs(xs1 - xs2)) < 1e-12
            assert sampled.lip >= exact.lip - 1e-12


def test_orbit_clearance_closed_form():
    refP, refQ = reference_graphs(M)
    lam, mu, q = M.lam, M.mu, M.q_central
    xc = np.array([0.0, 0.03, 0.07, 0.1])
    batch = random_affine_disks(np.random.default_rng(0), M, 4, 0.0, (0, 0)).shifted(xc)
    for word in ["", "A", "B", "AB", "BBA", "ABBAB"]:
        c = xc.copy()
        for b in word:
            c = lam * c - (mu if b == "B" else 0.0)
        assert np.allclose(orbit_clearance(M, word, batch, refP).clearance, c, atol=1e-15)
        assert np.allclose(orbit_clearance(M, word, batch, refQ).clearance, c - q, atol=1e-15)


def test_sampled_classes_classify_as_labelled():
    classes = sample_disks_by_class(M, ALPHA, 40, np.random.default_rng(5))
    for name, b in classes.items():
        for i in range(len(b)):
            assert classify_position(b.disk(i), M).kind == name
