"""Witnesses that an in-between uu-disk meets the local stable set.

The branch word of the witness comes from the central orbit of the disk's
central value; the unstable coordinate comes from the same word through
the inverse unstable branches. Both depend on each other for sloped disks,
so they are iterated to a self-consistent pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .central import CentralIFS, choose_branch, _snap
from .disks import (BETWEEN, MEETS_P, MEETS_Q, ConvergenceError,
                    classify_position)
from .geometry import AmbientPoint

N_STEPS = 200
STEP_TOL = 1e-12
SCHEMA_VERSION = 1


@dataclass
class IntersectionWitness:
    point: AmbientPoint
    itinerary: str
    forward_orbit_max_excursion: float
    residual: float
    rounds: int
    orbit: np.ndarray = field(default=None, repr=False)

    @property
    def valid(self) -> bool:
        return self.forward_orbit_max_excursion <= STEP_TOL and self.residual <= STEP_TOL

    def to_json(self, with_orbit: bool = False) -> dict:
        d = {"schema_version": SCHEMA_VERSION, "point": self.point.to_vector().tolist(),
             "itinerary": self.itinerary, "forward_orbit_max_excursion": self.forward_orbit_max_excursion,
             "residual": self.residual, "rounds": self.rounds, "valid": self.valid}
        if with_orbit and self.orbit is not None:
            d["orbit"] = self.orbit.tolist()
        return d


def _central_word(ifs: CentralIFS, x: float, k: int, policy: str, prev: str) -> tuple:
    """Central itinerary that keeps the previous round's letters while they
    remain admissible (this damps flip-flopping inside the overlap).

    A start value outside the closed interval (possible for a sloped disk
    before the loop has settled) is clamped to the nearest end; the final
    orbit is checked independently, so a bad clamp cannot go unnoticed."""
    orbit = [float(np.clip(x, 0.0, ifs.j_hi))]
    word = []
    for j in range(k):
        c = orbit[-1]
        b = None
        if j < len(prev):
            y = _snap(ifs, float(ifs.g(prev[j], c)))
            if 0.0 <= y <= ifs.j_hi:
                b = prev[j]
        if b is None:
            b = choose_branch(ifs, c, policy)
        word.append(b)
        orbit.append(_snap(ifs, float(ifs.g(b, c))))
    return "".join(word), np.array(orbit)


def cantor_coordinate(m, word: str, tail=None) -> np.ndarray:
    """Unstable coordinate coded by ``word`` (tail point defaults to P's x^u)."""
    xu = np.zeros((1, m.u)) if tail is None else np.atleast_2d(tail)
    for b in reversed(word):
        xu = m.solve_unstable(b, None, None, xu)
    return xu[0]


def intersect_disk(d, m, n_steps: int = N_STEPS, policy: str = "PreferA", max_rounds: int = 60,
                   check_position: bool = True) -> IntersectionWitness:
    if check_position:
        pos = classify_position(d, m)
        if pos.kind not in (BETWEEN, MEETS_P, MEETS_Q):
            raise ValueError(f"disk is {pos.kind}, not in between the reference manifolds")
    ifs = CentralIFS(m.lam, m.mu)
    xu = np.zeros(m.u)
    word = ""
    for rounds in range(1, max_rounds + 1):
        _, xc = d.evaluate(xu[None, :])
        new_word, central = _central_word(ifs, float(xc[0]), n_steps, policy, word)
        new_xu = cantor_coordinate(m, new_word)
        if new_word == word and np.array_equal(new_xu, xu):
            break
        word, xu = new_word, new_xu
    else:
        raise ConvergenceError(f"itinerary/unstable-coordinate loop did not settle in {max_rounds} rounds")
    orbit = witness_orbit(m, d, word, xu)
    # per-step consistency and containment
    s = m.s
    cube = m.cube
    steps = np.array([m.eval(b, orbit[j]) for j, b in enumerate(word)])
    residual = float(np.max(np.abs(steps - orbit[1:]))) if len(word) else 0.0
    dom_gap = max((float(np.max(np.maximum(m.dom(b).lo - orbit[j, s + 1:], orbit[j, s + 1:] - m.dom(b).hi)))
                   for j, b in enumerate(word)), default=-1.0)
    residual = max(residual, dom_gap)
    excursion = max(cube.excursion(AmbientPoint.from_vector(x, s)) for x in orbit)
    return IntersectionWitness(AmbientPoint.from_vector(orbit[0], s), word, float(excursion),
                               float(max(residual, 0.0)), rounds, orbit)


def witness_orbit(m, d, word: str, xu0) -> np.ndarray:
    """Orbit of the disk point over ``xu0`` along ``word``: stable and central
    parts forward, unstable part from the coding (pulled back)."""
    s, k = m.s, len(word)
    xu = np.zeros((k + 1, m.u))
    for j in range(k - 1, -1, -1):
        xu[j] = m.solve_unstable(word[j], None, None, xu[j + 1][None, :])[0]
    xu[0] = xu0
    xs0, xc0 = d.evaluate(np.atleast_2d(xu0))
    orbit = np.zeros((k + 1, m.n))
    orbit[0] = np.concatenate([xs0[0], [xc0[0]], xu[0]])
    ifs = CentralIFS(m.lam, m.mu)
    for j, b in enumerate(word):
        y = m.eval(b, orbit[j])
        y[s] = _snap(ifs, y[s])
        orbit[j + 1] = np.concatenate([y[:s + 1], xu[j + 1]])
    return orbit
