import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from blenderlab.blender_property import cantor_coordinate, intersect_disk
from blenderlab.disks import AffineDisk, alpha_admissible
from blenderlab.model import default_instance

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"
M = default_instance()
ALPHA = alpha_admissible(M)


@pytest.mark.parametrize("disk", [
    AffineDisk.flat(0.05),
    AffineDisk.flat(0.0),
    AffineDisk.flat(M.q_central),
    AffineDisk([0.3], [[0.5 * ALPHA]], 0.02, [0.5 * ALPHA]),
    AffineDisk([-0.4], [[0.0]], 0.07, [-0.9 * ALPHA]),
])
@pytest.mark.parametrize("policy", ["PreferA", "PreferB"])
def test_witness_valid(disk, policy):
    w = intersect_disk(disk, M, policy=policy)
    assert w.valid
    assert len(w.itinerary) == 200
    assert w.orbit.shape == (201, M.n)
    xs, xc = disk.evaluate(w.point.xu[None, :])
    assert np.allclose(w.point.xs, xs[0]) and w.point.xc == pytest.approx(xc[0])


def test_orbit_follows_the_map():
    w = intersect_disk(AffineDisk([0.1], [[0.005]], 0.03, [0.006]), M)
    for j, b in enumerate(w.itinerary):
        assert M.dom(b).contains(w.orbit[j, M.s + 1:], tol=1e-12)
        assert np.max(np.abs(M.eval(b, w.orbit[j]) - w.orbit[j + 1])) <= 1e-12


def test_outside_disk_rejected():
    with pytest.raises(ValueError):
        intersect_disk(AffineDisk.flat(0.2), M)


def test_cantor_coordinate():
    assert np.array_equal(cantor_coordinate(M, "AAAA"), np.zeros(1))
    assert cantor_coordinate(M, "B" * 60)[0] == pytest.approx(M.horseshoe.a_u[0], abs=1e-12)
    x = cantor_coordinate(M, "AB")
    assert M.dom("A").contains(x)


def test_grid_of_between_disks():
    rng = np.random.default_rng(11)
    q = M.q_central
    bad = 0
    a_u = M.horseshoe.a_u[0]
    for frac in np.linspace(0.0, 1.0, 60):
        slope = rng.uniform(-ALPHA, ALPHA)
        # central offset range keeping the disk between the two reference manifolds
        lo, hi = 0.0, q - slope * a_u
        d = AffineDisk([rng.uniform(-0.5, 0.5)], [[0.0]], lo + frac * (hi - lo), [slope])
        bad += not intersect_disk(d, M).valid
    assert bad == 0


def test_witness_json():
    doc = intersect_disk(AffineDisk.flat(0.05), M).to_json(with_orbit=True)
    jsonschema.validate(doc, json.loads((SCHEMAS / "witness.schema.json").read_text()))
