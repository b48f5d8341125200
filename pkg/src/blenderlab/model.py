"""The piecewise-affine blender family f_{lambda,mu}.

An affine horseshoe F acts on the (stable, unstable) coordinates with two
branches; the central coordinate is multiplied by lambda on branch A and
by lambda followed by a shift of -mu on branch B.
"""

from __future__ import annotations

import configparser
import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from .geometry import AmbientPoint, ReferenceCube

BRANCHES = ("A", "B")


class OutsideDomain:
    """Returned by :meth:`BlenderModel.apply` when x^u lies in neither branch domain."""

    def __repr__(self):
        return "OUTSIDE"

    def __bool__(self):
        return False


OUTSIDE = OutsideDomain()


class DomainError(ValueError):
    pass


def _op_norm(a) -> float:
    return float(np.linalg.norm(np.atleast_2d(a), 2))


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=float)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=float)))
        if np.any(self.lo > self.hi):
            raise ValueError("box with lo > hi")

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def disjoint(self, other: "Box") -> bool:
        return bool(np.any((self.hi < other.lo) | (other.hi < self.lo)))


@dataclass(frozen=True)
class AffineHorseshoe:
    """Base horseshoe: branch i maps (xs, xu) to (S_i xs + bs_i, U_i xu + bu_i).

    The unstable translations are derived so that U_i maps its domain onto
    [-1,1]^u; the stable translations are derived from the fixed points
    p = (0, 0) of branch 1 and q = (a_s, a_u) of branch 2.
    """

    S1: np.ndarray
    S2: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    dom1: Box
    dom2: Box
    a_s: np.ndarray
    a_u: np.ndarray
    bs1: np.ndarray = field(init=False)
    bs2: np.ndarray = field(init=False)
    bu1: np.ndarray = field(init=False)
    bu2: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("S1", "S2", "U1", "U2"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "a_s", np.atleast_1d(np.asarray(self.a_s, dtype=float)))
        object.__setattr__(self, "a_u", np.atleast_1d(np.asarray(self.a_u, dtype=float)))
        s, u = self.S1.shape[0], self.U1.shape[0]
        if self.S1.shape != (s, s) or self.S2.shape != (s, s):
            raise ValueError("stable matrices must be square and equal-sized")
        if self.U1.shape != (u, u) or self.U2.shape != (u, u):
            raise ValueError("unstable matrices must be square and equal-sized")
        if self.a_s.shape != (s,) or self.a_u.shape != (u,):
            raise ValueError("fixed point q has wrong dimensions")
        if self.dom1.lo.shape != (u,) or self.dom2.lo.shape != (u,):
            raise ValueError("branch domains have wrong dimension")
        if not self.dom1.disjoint(self.dom2):
            raise ValueError("branch domains overlap")
        # p = 0 fixed by branch 1; q fixed by branch 2
        object.__setattr__(self, "bs1", np.zeros(s))
        object.__setattr__(self, "bu1", np.zeros(u))
        object.__setattr__(self, "bs2", self.a_s - self.S2 @ self.a_s)
        object.__setattr__(self, "bu2", self.a_u - self.U2 @ self.a_u)

    @property
    def s(self) -> int:
        return self.S1.shape[0]

    @property
    def u(self) -> int:
        return self.U1.shape[0]


@dataclass(frozen=True)
class BlenderModel:
    horseshoe: AffineHorseshoe
    lam: float
    mu: float
    delta: float

    # the unstable block of each branch depends on x^u alone
    decoupled_unstable = True

    def __post_init__(self):
        for name in ("lam", "mu", "delta"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive (the mirrored case mu < 0 is not modelled)")
        if self.lam == 0:
            raise ValueError("lambda must be nonzero")

    # -- shape -------------------------------------------------------------
    @property
    def s(self) -> int:
        return self.horseshoe.s

    @property
    def u(self) -> int:
        return self.horseshoe.u

    @property
    def n(self) -> int:
        return self.s + self.u + 1

    @property
    def cube(self) -> ReferenceCube:
        return ReferenceCube(self.delta, self.s, self.u)

    @property
    def q_central(self) -> float:
        return self.mu / (self.lam - 1) if self.lam != 1 else float("inf")

    @property
    def P(self) -> AmbientPoint:
        return AmbientPoint(np.zeros(self.s), 0.0, np.zeros(self.u))

    @property
    def Q(self) -> AmbientPoint:
        return AmbientPoint(self.horseshoe.a_s, self.q_central, self.horseshoe.a_u)

    def replace(self, **kw) -> "BlenderModel":
        d = dict(horseshoe=self.horseshoe, lam=self.lam, mu=self.mu, delta=self.delta)
        d.update(kw)
        return BlenderModel(**d)

    # -- branch data -------------------------------------------------------
    def blocks(self, branch: str):
        """(S, U, bs, bu, central shift) for a branch."""
        h = self.horseshoe
        if branch == "A":
            return h.S1, h.U1, h.bs1, h.bu1, 0.0
        if branch == "B":
            return h.S2, h.U2, h.bs2, h.bu2, self.mu
        raise ValueError(f"unknown branch {branch!r}")

    def dom(self, branch: str) -> Box:
        return self.horseshoe.dom1 if branch == "A" else self.horseshoe.dom2

    def branch_of(self, xu):
        for b in BRANCHES:
            if self.dom(b).contains(xu):
                return b
        return None

    def linear_part(self, branch: str) -> np.ndarray:
        return self._cache[branch][0].copy()

    @functools.cached_property
    def _cache(self) -> dict:
        """Per-branch linear part, offset and inverse unstable block."""
        out = {}
        for b in BRANCHES:
            _, U, _, _, _ = self.blocks(b)
            out[b] = (self._linear_part(b), self._offset(b), np.linalg.inv(U))
        return out

    def _linear_part(self, branch: str) -> np.ndarray:
        S, U, *_ = self.blocks(branch)
        J = np.zeros((self.n, self.n))
        J[:self.s, :self.s] = S
        J[self.s, self.s] = self.lam
        J[self.s + 1:, self.s + 1:] = U
        return J

    def offset(self, branch: str) -> np.ndarray:
        return self._cache[branch][1].copy()

    def _offset(self, branch: str) -> np.ndarray:
        _, _, bs, bu, shift = self.blocks(branch)
        return np.concatenate([bs, [-shift], bu])

    # -- vectorised evaluation (branch formula extended off its domain) ----
    def eval(self, branch: str, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        L, c, _ = self._cache[branch]
        return X @ L.T + c

    def jac(self, branch: str, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        J = self.linear_part(branch)
        return np.broadcast_to(J, X.shape[:-1] + J.shape).copy()

    def solve_unstable(self, branch: str, xs, xc, target_u) -> np.ndarray:
        """x^u with f_branch(xs, xc, x^u)_u = target_u (exact for the affine model)."""
        _, _, _, bu, _ = self.blocks(branch)
        t = np.asarray(target_u, dtype=float) - bu
        return t @ self._cache[branch][2].T

    def solve_center_unstable(self, branch: str, xs, target_cu) -> np.ndarray:
        """(x^c, x^u) with f_branch(xs, x^c, x^u)_{c,u} = target_cu."""
        _, U, _, bu, shift = self.blocks(branch)
        tcu = np.asarray(target_cu, dtype=float)
        xc = (tcu[..., 0] + shift) / self.lam
        xu = (tcu[..., 1:] - bu) @ self._cache[branch][2].T
        return np.concatenate([xc[..., None], xu], axis=-1)

    # -- point API ---------------------------------------------------------
    def apply(self, p: AmbientPoint):
        b = self.branch_of(p.xu)
        if b is None:
            return OUTSIDE
        return self.apply_branch(b, p), b

    def apply_branch(self, branch: str, p: AmbientPoint) -> AmbientPoint:
        if not self.dom(branch).contains(p.xu):
            raise DomainError(f"x^u={p.xu} outside the domain of branch {branch}")
        return AmbientPoint.from_vector(self.eval(branch, p.to_vector()), self.s)

    def inverse_branch(self, branch: str, p: AmbientPoint) -> AmbientPoint:
        if not np.all(np.abs(p.xu) <= 1):
            raise DomainError(f"x^u={p.xu} outside the image of branch {branch}")
        x = np.linalg.solve(self.linear_part(branch), p.to_vector() - self.offset(branch))
        return AmbientPoint.from_vector(x, self.s)

    def jacobian(self, p: AmbientPoint) -> np.ndarray:
        b = self.branch_of(p.xu)
        if b is None:
            raise DomainError("point outside both branch domains")
        return self.linear_part(b)

    def local_manifolds(self) -> dict:
        """Flats of the local stable / strong unstable manifolds of P and Q.

        Each entry lists the fixed block values; ``free`` names the block that
        ranges over [-1,1].
        """
        h = self.horseshoe
        zs, zu = np.zeros(self.s), np.zeros(self.u)
        return {
            "Ws_loc(P)": {"free": "s", "xc": 0.0, "xu": zu},
            "Ws_loc(Q)": {"free": "s", "xc": self.q_central, "xu": h.a_u.copy()},
            "Wuu_loc(P)": {"free": "u", "xc": 0.0, "xs": zs},
            "Wuu_loc(Q)": {"free": "u", "xc": self.q_central, "xs": h.a_s.copy()},
        }

    def word_map(self, word: str):
        """Linear part and offset of the composition along ``word`` (first letter first)."""
        M = np.eye(self.n)
        c = np.zeros(self.n)
        for b in word:
            L = self.linear_part(b)
            M, c = L @ M, L @ c + self.offset(b)
        return M, c

    def periodic_points(self, k: int) -> list:
        """Fixed points of every composition along a word of length ``k``.

        Returns (word, point, residual) triples. Each orbit point is solved
        from its own cyclic rotation of the word, and the residual is the
        largest one-step defect along the orbit (forward iteration of a
        single point would amplify round-off by the unstable expansion).
        Points whose orbit leaves the branch domains are dropped.
        """
        out = []
        eye = np.eye(self.n)
        for letters in itertools.product(BRANCHES, repeat=k):
            w = "".join(letters)
            orbit = []
            for j in range(k):
                M, c = self.word_map(w[j:] + w[:j])
                orbit.append(np.linalg.solve(eye - M, c))
            if not all(self.dom(b).contains(orbit[j][self.s + 1:], tol=1e-12) for j, b in enumerate(w)):
                continue
            res = max(float(np.max(np.abs(self.eval(b, orbit[j]) - orbit[(j + 1) % k])))
                      for j, b in enumerate(w))
            out.append((w, AmbientPoint.from_vector(orbit[0], self.s), res))
        return out

    # -- invariant audit ---------------------------------------------------
    def audit(self) -> dict:
        h = self.horseshoe
        checks = {
            "lambda_in_(1,2)": 1 < self.lam < 2,
            "mu_in_(0,(lambda-1)delta)": 0 < self.mu < (self.lam - 1) * self.delta,
            "||S_i||<1/2": max(_op_norm(h.S1), _op_norm(h.S2)) < 0.5,
            "||U_i^-1||<1/2": max(_op_norm(np.linalg.inv(h.U1)), _op_norm(np.linalg.inv(h.U2))) < 0.5,
            "domains_disjoint": h.dom1.disjoint(h.dom2),
            "q_in_dom2": bool(h.dom2.contains(h.a_u)),
            "p_in_dom1": bool(h.dom1.contains(np.zeros(self.u))),
        }
        for b in BRANCHES:
            S, U, bs, bu, _ = self.blocks(b)
            d = self.dom(b)
            corners = np.array(list(itertools.product(*zip(d.lo, d.hi))))
            img = corners @ U.T + bu
            lo, hi = img.min(axis=0), img.max(axis=0)
            checks[f"U_{b}_onto_cube"] = bool(np.allclose(lo, -1, atol=1e-12) and np.allclose(hi, 1, atol=1e-12))
        return checks


def default_instance() -> BlenderModel:
    """s = u = 1 instance: S1 = y/3, S2 = y/3 + 0.4, U1 = 3x on [-1/3, 1/3],
    U2 = 4x - 2.4 on [0.35, 0.85]; lambda = 1.2, mu = 0.02, delta = 0.125.

    Q = (0.6, 0.1, 0.8) sits strictly inside the cube.
    """
    h = AffineHorseshoe(
        S1=[[1 / 3]], S2=[[1 / 3]], U1=[[3.0]], U2=[[4.0]],
        dom1=Box([-1 / 3], [1 / 3]), dom2=Box([0.35], [0.85]),
        a_s=[0.6], a_u=[0.8],
    )
    return BlenderModel(h, lam=1.2, mu=0.02, delta=0.125)


# -- structured text config ------------------------------------------------

def _fmt(a) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(a))


def _parse(text: str, shape=None) -> np.ndarray:
    vals = np.array([float(x) for x in text.replace(",", " ").split()])
    return vals.reshape(shape) if shape is not None else vals


def model_to_config(m: BlenderModel) -> configparser.ConfigParser:
    h = m.horseshoe
    cp = configparser.ConfigParser()
    cp["model"] = {
        "s": str(m.s), "u": str(m.u),
        "lambda": repr(m.lam), "mu": repr(m.mu), "delta": repr(m.delta),
        "S1": _fmt(h.S1), "S2": _fmt(h.S2), "U1": _fmt(h.U1), "U2": _fmt(h.U2),
        "dom1_min": _fmt(h.dom1.lo), "dom1_max": _fmt(h.dom1.hi),
        "dom2_min": _fmt(h.dom2.lo), "dom2_max": _fmt(h.dom2.hi),
        "a_s": _fmt(h.a_s), "a_u": _fmt(h.a_u),
    }
    return cp


def model_from_section(sec) -> BlenderModel:
    try:
        s, u = int(sec["s"]), int(sec["u"])
        h = AffineHorseshoe(
            S1=_parse(sec["S1"], (s, s)), S2=_parse(sec["S2"], (s, s)),
            U1=_parse(sec["U1"], (u, u)), U2=_parse(sec["U2"], (u, u)),
            dom1=Box(_parse(sec["dom1_min"]), _parse(sec["dom1_max"])),
            dom2=Box(_parse(sec["dom2_min"]), _parse(sec["dom2_max"])),
            a_s=_parse(sec["a_s"]), a_u=_parse(sec["a_u"]),
        )
        return BlenderModel(h, float(sec["lambda"]), float(sec["mu"]), float(sec["delta"]))
    except KeyError as e:
        raise ValueError(f"model config missing key {e}") from None


def model_to_text(m: BlenderModel) -> str:
    import io
    buf = io.StringIO()
    model_to_config(m).write(buf)
    return buf.getvalue()


def model_from_text(text: str) -> BlenderModel:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    if "model" not in cp:
        raise ValueError("config has no [model] section")
    return model_from_section(cp["model"])
