"""One-dimensional central reduction: g_A(x) = lam*x, g_B(x) = lam*x - mu."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OUTSIDE_LEFT = "OutsideLeft"
I1_ONLY = "I1Only"
OVERLAP = "Overlap"
I2_ONLY = "I2Only"
OUTSIDE_RIGHT = "OutsideRight"
BOUNDARY_P = "BoundaryP"
BOUNDARY_Q = "BoundaryQ"

POLICIES = ("PreferA", "PreferB", "Midpoint")

# rounding slack (in ulps of the interval end) absorbed when an orbit lands
# just past the closed superposition interval
_SNAP_ULPS = 8


class CentralError(ValueError):
    pass


@dataclass(frozen=True)
class CentralIFS:
    lam: float
    mu: float

    @property
    def j_hi(self) -> float:
        """Right end of the superposition interval J = (0, mu/(lam-1))."""
        return self.mu / (self.lam - 1)

    @property
    def t_lo(self) -> float:
        """inf I2 = mu/lam."""
        return self.mu / self.lam

    @property
    def t_hi(self) -> float:
        """sup I1 = mu/(lam(lam-1))."""
        return self.mu / (self.lam * (self.lam - 1))

    @property
    def overlap_width(self) -> float:
        return self.t_hi - self.t_lo

    def g(self, branch: str, x):
        return self.lam * x if branch == "A" else self.lam * x - self.mu

    @classmethod
    def of(cls, m) -> "CentralIFS":
        return cls(m.lam, m.mu)


def classify(ifs: CentralIFS, x: float) -> str:
    if x < 0:
        return OUTSIDE_LEFT
    if x == 0:
        return BOUNDARY_P
    if x > ifs.j_hi:
        return OUTSIDE_RIGHT
    if x == ifs.j_hi:
        return BOUNDARY_Q
    if x < ifs.t_lo:
        return I1_ONLY
    if x <= ifs.t_hi:
        return OVERLAP
    return I2_ONLY


def choose_branch(ifs: CentralIFS, x: float, policy: str = "PreferA") -> str:
    cls = classify(ifs, x)
    if cls in (I1_ONLY, BOUNDARY_P):
        return "A"
    if cls in (I2_ONLY, BOUNDARY_Q):
        return "B"
    if cls == OVERLAP:
        if policy == "PreferA":
            return "A"
        if policy == "PreferB":
            return "B"
        if policy == "Midpoint":
            return "A" if x < 0.5 * (ifs.t_lo + ifs.t_hi) else "B"
        raise ValueError(f"unknown policy {policy!r}")
    raise CentralError(f"x={x!r} lies outside the closed superposition interval [0, {ifs.j_hi!r}]")


def _snap(ifs: CentralIFS, x: float) -> float:
    eps = _SNAP_ULPS * np.spacing(ifs.j_hi)
    if -eps <= x < 0:
        return 0.0
    if ifs.j_hi < x <= ifs.j_hi + eps:
        return ifs.j_hi
    return x


def itinerary(ifs: CentralIFS, x: float, k: int, policy: str = "PreferA"):
    """Branch word of length ``k`` and the orbit x_0..x_k it realises."""
    orbit = [float(x)]
    word = []
    for _ in range(k):
        b = choose_branch(ifs, orbit[-1], policy)
        word.append(b)
        orbit.append(_snap(ifs, float(ifs.g(b, orbit[-1]))))
    return "".join(word), np.array(orbit)


@dataclass(frozen=True)
class CoveringResult:
    certified: bool
    overlap_width: float
    endpoint_residuals: tuple
    reason: str = ""


def covering_check(ifs: CentralIFS) -> CoveringResult:
    """g_A(closure I1) and g_B(closure I2) together cover closure(J)."""
    if not 1 < ifs.lam < 2:
        return CoveringResult(False, float("nan"), (), f"lambda={ifs.lam} outside (1, 2)")
    if not ifs.mu > 0:
        return CoveringResult(False, float("nan"), (), f"mu={ifs.mu} must be positive")
    left = ifs.g("B", ifs.t_lo) - 0.0
    right = ifs.g("A", ifs.t_hi) - ifs.j_hi
    w = ifs.overlap_width
    # images [g_B(t_lo), j_hi] and [0, g_A(t_hi)] cover [0, j_hi] iff the
    # preimage intervals overlap
    return CoveringResult(bool(w > 0), w, (left, right))
