"""Coordinates, the reference cube and cone fields.

Points of R^n are split into a stable block (dimension s), one central
coordinate and an unstable block (dimension u), always in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CONE_KINDS = ("S", "U", "UU")
BOUNDARY_PARTS = ("d_s", "d_c", "d_uu")


@dataclass(frozen=True)
class AmbientPoint:
    xs: np.ndarray
    xc: float
    xu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xs", np.atleast_1d(np.asarray(self.xs, dtype=float)))
        object.__setattr__(self, "xu", np.atleast_1d(np.asarray(self.xu, dtype=float)))
        object.__setattr__(self, "xc", float(self.xc))

    @property
    def s(self) -> int:
        return self.xs.size

    @property
    def u(self) -> int:
        return self.xu.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.xs, [self.xc], self.xu])

    @classmethod
    def from_vector(cls, v, s: int) -> "AmbientPoint":
        v = np.asarray(v, dtype=float)
        return cls(v[:s], v[s], v[s + 1:])

    def __eq__(self, other):
        if not isinstance(other, AmbientPoint):
            return NotImplemented
        return np.array_equal(self.to_vector(), other.to_vector()) and self.s == other.s

    def __hash__(self):
        return hash((self.s, tuple(self.to_vector())))


@dataclass(frozen=True)
class ReferenceCube:
    """[-1,1]^s x [-delta, delta] x [-1,1]^u."""

    delta: float
    s: int = 1
    u: int = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.s < 1 or self.u < 1:
            raise ValueError("s and u must be >= 1")

    @property
    def n(self) -> int:
        return self.s + self.u + 1

    def contains(self, p: AmbientPoint, tol: float = 0.0) -> bool:
        return (np.all(np.abs(p.xs) <= 1 + tol) and abs(p.xc) <= self.delta + tol
                and np.all(np.abs(p.xu) <= 1 + tol))

    def excursion(self, p: AmbientPoint) -> float:
        """Sup-norm distance by which ``p`` lies outside the cube (0 inside)."""
        return max(0.0, float(np.max(np.abs(p.xs))) - 1, abs(p.xc) - self.delta,
                   float(np.max(np.abs(p.xu))) - 1)


@dataclass(frozen=True)
class ConeParams:
    alpha: float
    alpha_prime: float

    def __post_init__(self):
        if not 0 < self.alpha_prime < self.alpha < 1:
            raise ValueError(
                f"need 0 < alpha' < alpha < 1, got alpha={self.alpha}, alpha'={self.alpha_prime}")


def _rescaled(v) -> np.ndarray:
    """``v`` divided by its sup norm (cones are scale invariant; this keeps
    tiny or huge vectors away from under/overflow in the norms)."""
    v = np.asarray(v, dtype=float)
    m = np.max(np.abs(v), axis=-1, keepdims=True)
    return v / np.where(m > 0, m, 1.0)


def split(v, s: int):
    v = np.asarray(v, dtype=float)
    return v[..., :s], v[..., s], v[..., s + 1:]


def cone_ratio(v, kind: str, s: int) -> np.ndarray:
    """Aperture of ``v`` in the cone of the given kind: the smallest alpha
    with ``v`` in the cone (inf when the reference block vanishes)."""
    vs, vc, vu = split(_rescaled(v), s)
    ns = np.linalg.norm(vs, axis=-1)
    nu = np.linalg.norm(vu, axis=-1)
    ncu = np.hypot(vc, nu)
    nsc = np.hypot(ns, vc)
    if kind == "S":
        num, den = ncu, ns
    elif kind == "U":
        num, den = ns, ncu
    elif kind == "UU":
        num, den = nsc, nu
    else:
        raise ValueError(f"unknown cone kind {kind!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return r


def in_cone(v, kind: str, alpha: float, s: int, u: int) -> bool:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != s + u + 1:
        raise ValueError(f"vector of length {v.size} does not match s={s}, u={u}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    vs, vc, vu = split(_rescaled(v), s)
    if kind == "S":
        return bool(np.hypot(vc, np.linalg.norm(vu)) <= alpha * np.linalg.norm(vs))
    if kind == "U":
        return bool(np.linalg.norm(vs) <= alpha * np.hypot(vc, np.linalg.norm(vu)))
    if kind == "UU":
        return bool(np.hypot(np.linalg.norm(vs), vc) <= alpha * np.linalg.norm(vu))
    raise ValueError(f"unknown cone kind {kind!r}")


def boundary_part(p: AmbientPoint, cube: ReferenceCube) -> frozenset:
    """Boundary pieces of ``cube`` touched by ``p``; empty set means interior."""
    if p.s != cube.s or p.u != cube.u:
        raise ValueError("point dimensions do not match the cube")
    if not cube.contains(p):
        raise ValueError("point lies outside the reference cube")
    parts = set()
    if np.any(np.abs(p.xs) == 1):
        parts.add("d_s")
    if abs(p.xc) == cube.delta:
        parts.add("d_c")
    if np.any(np.abs(p.xu) == 1):
        parts.add("d_uu")
    return frozenset(parts)


def diam_u(u: int) -> float:
    """Euclidean diameter of [-1,1]^u."""
    return 2.0 * np.sqrt(u)
