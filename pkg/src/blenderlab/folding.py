"""Folding manifolds, their branch images, and the tangency locator.

A fold is a one-parameter family of uu-disks S_t, t in [0,1], whose end
disks cross the local stable manifold of a reference saddle and whose
interior disks lie in between. An iterated fold is stored as the original
family, a branch word and a window of original parameters, so that every
image is evaluated exactly through the map rather than resampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .disks import (POSITION_TOL, AffineDiskBatch, orbit_clearance,
                    reference_graphs)
from .geometry import AmbientPoint, cone_ratio

T_GRID = 257
BISECTION_TOL = 1e-13
SCHEMA_VERSION = 1


class FoldError(ValueError):
    pass


class TangencyError(RuntimeError):
    pass


@dataclass
class FoldingManifold:
    """Quadratic fold relative to saddle P (or Q), possibly iterated.

    Original disks: x^s = xs_amp (2t-1) e_1, and the central value sits
    ``c(t) = apex (1 - r^2)(1 + skew r)``, r = 2t-1, above the reference
    manifold (below it for Q), with constant slope ``lc`` in x^u.
    """

    fmap: object
    saddle: str
    apex: float
    lc: np.ndarray
    xs_amp: float = 0.5
    word: str = ""
    window: tuple = (0.0, 1.0)
    t_grid: int = T_GRID
    refs: tuple = field(default=None, repr=False)
    skew: float = 0.0

    def __post_init__(self):
        if self.saddle not in ("P", "Q"):
            raise ValueError("saddle must be 'P' or 'Q'")
        if not abs(self.skew) < 1:
            raise ValueError("skew must lie in (-1, 1)")
        self.lc = np.atleast_1d(np.asarray(self.lc, dtype=float))
        if self.refs is None:
            self.refs = reference_graphs(self.fmap)

    # -- original family ------------------------------------------------
    @property
    def sign(self) -> float:
        return 1.0 if self.saddle == "P" else -1.0

    @property
    def ref(self):
        return self.refs[0] if self.saddle == "P" else self.refs[1]

    def profile(self, t):
        r = 2 * np.asarray(t, dtype=float) - 1
        return self.apex * (1 - r ** 2) * (1 + self.skew * r)

    def dprofile(self, t):
        r = 2 * np.asarray(t, dtype=float) - 1
        return 2 * self.apex * (self.skew * (1 - r ** 2) - 2 * r * (1 + self.skew * r))

    @property
    def peak(self) -> float:
        k = self.skew
        r = 0.0 if k == 0 else (np.sqrt(4 + 12 * k * k) - 2) / (6 * k)
        return float(self.apex * (1 - r * r) * (1 + k * r))

    def disks(self, t) -> AffineDiskBatch:
        """Original disks S_t for an array of original parameters."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s, u = self.fmap.s, self.fmap.u
        xs0 = np.zeros((t.size, s))
        xs0[:, 0] = self.xs_amp * (2 * t - 1)
        r = self.ref(xs0)
        xc0 = r[:, 0] + self.sign * self.profile(t) - r[:, 1:] @ self.lc
        return AffineDiskBatch(xs0, np.zeros((t.size, s, u)), xc0,
                               np.broadcast_to(self.lc, (t.size, u)).copy())

    @property
    def lip(self) -> float:
        return float(np.linalg.norm(self.lc))

    # -- the iterated fold ------------------------------------------------
    def to_original(self, tau):
        a, b = self.window
        return a + np.asarray(tau, dtype=float) * (b - a)

    def clearances(self, t, extra: str = ""):
        """(cP, cQ) of f_{word+extra}(S_t) for original parameters t."""
        batch = self.disks(t)
        w = self.word + extra
        cP = orbit_clearance(self.fmap, w, batch, self.refs[0]).clearance
        cQ = orbit_clearance(self.fmap, w, batch, self.refs[1]).clearance
        return cP, cQ

    def clearance(self, t, extra: str = "", which: str = "P") -> np.ndarray:
        """Clearance of f_{word+extra}(S_t) relative to one reference saddle."""
        ref = self.refs[0] if which == "P" else self.refs[1]
        return orbit_clearance(self.fmap, self.word + extra, self.disks(t), ref).clearance

    def grid(self) -> np.ndarray:
        return self.to_original(np.linspace(0.0, 1.0, self.t_grid))

    @property
    def continuity_modulus(self) -> float:
        """Largest central variation per unit of the fold's own parameter on its grid, inflated by 1.5."""
        t = self.grid()
        cP, _ = self.clearances(t)
        return 1.5 * float(np.max(np.abs(np.diff(cP))) * (self.t_grid - 1))

    def check(self, tol: float = POSITION_TOL) -> dict:
        t = self.grid()
        cP, cQ = self.clearances(t)
        ends = cP[[0, -1]] if self.saddle == "P" else cQ[[0, -1]]
        inner = slice(1, -1)
        between = (cP[inner] > tol) & (cQ[inner] < -tol)
        return {"endpoints_meet": bool(np.all(np.abs(ends) <= tol)),
                "interior_between": bool(np.all(between)),
                "endpoint_clearance": [float(x) for x in ends]}

    def validate(self, tol: float = POSITION_TOL) -> "FoldingManifold":
        r = self.check(tol)
        if not (r["endpoints_meet"] and r["interior_between"]):
            raise FoldError(f"not a folding manifold: {r}")
        return self

    # -- tangent data -----------------------------------------------------
    def point(self, t: float, xu) -> np.ndarray:
        d = self.disks([t])
        xs, xc = d(np.atleast_2d(xu))
        return np.concatenate([xs[0], [xc[0]], np.atleast_1d(xu)])

    def tangent_space(self, t: float, xu, h: float = 1e-6) -> np.ndarray:
        """Columns spanning T S at the fold point (t, xu): d/dt and d/dx^u."""
        n, s, u = self.fmap.n, self.fmap.s, self.fmap.u
        dxs = np.zeros(s)
        dxs[0] = 2 * self.xs_amp
        xs = np.zeros(s)
        xs[0] = self.xs_amp * (2 * t - 1)
        # profile part exactly; the reference graph part by central differences
        dr = (self.ref(xs + h * dxs) - self.ref(xs - h * dxs))[0] / (2 * h)
        dt = np.zeros(n)
        dt[:s] = dxs
        dt[s] = dr[0] + self.sign * self.dprofile(t) - dr[1:] @ self.lc
        D = np.zeros((n, 1 + u))
        D[:, 0] = dt
        D[s, 1:] = self.lc
        D[s + 1:, 1:] = np.eye(u)
        return D


def make_quadratic_fold(m, saddle: str = "P", apex: float = 0.05, lip: float = 0.0,
                        t_grid: int = T_GRID, xs_amp: float = 0.5, skew: float = 0.0) -> FoldingManifold:
    refP, refQ = reference_graphs(m)
    gap = refQ.central_range()[0] - refP.central_range()[1]
    if not 0 < apex < gap:
        raise FoldError(f"apex {apex} outside superposition interval (0, {gap})")
    if not abs(skew) < 1:
        raise FoldError(f"skew {skew} outside (-1, 1)")
    from .disks import alpha_admissible
    bound = alpha_admissible(m)
    if lip > bound:
        raise FoldError(f"fold slope {lip} exceeds alpha_admissible {bound}")
    lc = np.zeros(m.u)
    lc[0] = lip
    f = FoldingManifold(m, saddle, float(apex), lc, xs_amp, "", (0.0, 1.0), t_grid, (refP, refQ),
                        float(skew))
    if not f.peak < gap:
        raise FoldError(f"fold peak {f.peak} outside superposition interval (0, {gap})")
    return f.validate()


# -- one step of the image procedure ----------------------------------------

def _root(fn, a: float, b: float) -> float:
    return brentq(lambda x: float(fn(np.array([x]))[0]), a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                  maxiter=200)


def image_fold(fold: FoldingManifold, m=None, tol: float = BISECTION_TOL):
    """Pick the branch whose image of ``fold`` contains a folding manifold.

    Returns (image fold, branch used, window in the fold's own parameter).
    """
    keep, other = ("A", "B") if fold.saddle == "P" else ("B", "A")
    sg = fold.sign
    tau = np.linspace(0.0, 1.0, fold.t_grid)
    t = fold.to_original(tau)
    own = sg * fold.clearance(t, "", fold.saddle)
    if np.max(own) <= tol:
        raise FoldError(f"fold height {np.max(own):.3g} is below the bisection tolerance {tol:.3g}")
    cP, cQ = fold.clearances(t, keep)
    inner = slice(1, -1)
    if np.all(cP[inner] > POSITION_TOL) and np.all(cQ[inner] < -POSITION_TOL):
        out = replace(fold, word=fold.word + keep)
        return out, keep, (0.0, 1.0)

    opposite = "Q" if fold.saddle == "P" else "P"

    def crossing(x):
        return sg * fold.clearance(fold.to_original(x), keep, opposite)

    g = sg * (cQ if fold.saddle == "P" else cP)
    idx = np.flatnonzero(g >= 0)
    if idx.size == 0 or idx[0] == 0:
        raise FoldError("no crossing of the opposite stable manifold could be bracketed")
    i1 = idx[0]
    tau1 = _root(crossing, tau[i1 - 1], tau[i1])

    def height(x):
        return sg * fold.clearance(fold.to_original(x), other, fold.saddle)

    h = height(tau)
    h1 = float(height(np.array([tau1]))[0])
    if h1 <= 0:
        raise FoldError(f"other-branch image at the crossing is not in between (clearance {h1:.3g})")
    left = np.flatnonzero((h <= 0) & (tau < tau1))
    right = np.flatnonzero((h <= 0) & (tau > tau1))
    if left.size == 0 or right.size == 0:
        raise FoldError("window endpoints could not be bracketed")
    j2, j3 = left[-1], right[0]
    lo2 = tau[j2]
    hi2 = tau[j2 + 1] if tau[j2 + 1] <= tau1 else tau1
    lo3 = tau[j3 - 1] if tau[j3 - 1] >= tau1 else tau1
    tau2 = _root(height, lo2, hi2) if h[j2] < 0 else float(lo2)
    tau3 = _root(height, lo3, tau[j3]) if h[j3] < 0 else float(tau[j3])
    a, b = fold.to_original(tau2), fold.to_original(tau3)
    if not b > a:
        raise FoldError("degenerate window")
    out = replace(fold, word=fold.word + other, window=(float(a), float(b)))
    return out, other, (float(tau2), float(tau3))


# -- the tangency locator ----------------------------------------------------

@dataclass
class TangencyResult:
    point: AmbientPoint
    direction: np.ndarray
    itinerary: str
    t_star: float
    residual_angle: float
    parameter_intervals: list
    converged: bool
    width: float
    cone_margin: float
    bracketed: bool
    orbit: np.ndarray = field(default=None, repr=False)

    def to_json(self, with_orbit: bool = False) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "t_star": self.t_star,
            "interval_width": self.width,
            "itinerary": self.itinerary,
            "point": self.point.to_vector().tolist(),
            "direction": self.direction.tolist(),
            "residual_angle": self.residual_angle,
            "cone_margin": self.cone_margin,
            "converged": self.converged,
            "bracketed": self.bracketed,
            "iterations": len(self.itinerary),
            "parameter_intervals": [list(iv) for iv in self.parameter_intervals],
        }
        if with_orbit and self.orbit is not None:
            d["orbit"] = self.orbit.tolist()
        return d


def _pulled_back_direction(fmap, word: str, orbit: np.ndarray, ref) -> np.ndarray:
    """Unit stable vector at orbit[0] obtained by pulling back the tangent of
    the reference stable manifold at the end of the orbit."""
    s = fmap.s
    xs_end = orbit[-1, :s]
    h = 1e-6
    e = np.zeros(s)
    e[0] = h
    dg = (ref(xs_end + e) - ref(xs_end - e))[0] / (2 * h)
    v = np.concatenate([np.eye(s)[0], dg])
    v /= np.linalg.norm(v)
    for j in range(len(word) - 1, -1, -1):
        J = fmap.jac(word[j], orbit[j][None, :])[0]
        v = np.linalg.solve(J, v)
        v /= np.linalg.norm(v)
    return v


def _tangency_data(fold: FoldingManifold, t: float):
    word = fold.word
    oc = orbit_clearance(fold.fmap, word, fold.disks([t]), fold.ref)
    orbit = oc.orbit[:, 0, :]
    v = _pulled_back_direction(fold.fmap, word, orbit, fold.ref)
    s = fold.fmap.s
    D = fold.tangent_space(t, orbit[0, s + 1:])
    return orbit, v, D


def _signed_defect(fold: FoldingManifold, t: float) -> float:
    """Signed sine of the angle between the stable vector and the fold's
    t-direction after removing the x^u part along the disk."""
    _, v, D = _tangency_data(fold, t)
    s = fold.fmap.s
    vp = v - D[:, 1:] @ v[s + 1:]
    T = D[:, 0]
    num = vp[0] * T[s] - vp[s] * T[0]
    return float(num / (np.linalg.norm(vp[:s + 1]) * np.linalg.norm(T[:s + 1])))


def principal_angle(v: np.ndarray, D: np.ndarray) -> float:
    q, _ = np.linalg.qr(D)
    r = v - q @ (q.T @ v)
    return float(np.arcsin(min(1.0, np.linalg.norm(r) / np.linalg.norm(v))))


def locate_tangency(fold: FoldingManifold, m=None, n_iter: int = 60, tol: float = 1e-10,
                    alpha: float = None) -> TangencyResult:
    """Iterate :func:`image_fold` and extract the tangency point and direction."""
    fmap = fold.fmap
    intervals = [fold.window]
    cur = fold
    for _ in range(n_iter):
        cur, _, _ = image_fold(cur)
        a0, b0 = intervals[-1]
        a, b = cur.window
        slack = 4 * np.finfo(float).eps
        if a < a0 - slack or b > b0 + slack:
            raise TangencyError(f"parameter windows are not nested: {(a, b)} not in {(a0, b0)}")
        intervals.append((a, b))
    a, b = cur.window
    width = b - a
    fa, fb = _signed_defect(cur, a), _signed_defect(cur, b)
    bracketed = fa * fb <= 0
    if bracketed and fa != fb:
        t_star = brentq(lambda x: _signed_defect(cur, x), a, b, xtol=1e-300,
                        rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        t_star = 0.5 * (a + b)
    orbit, v, D = _tangency_data(cur, t_star)
    angle = principal_angle(v, D)
    if alpha is None:
        from .disks import alpha_admissible
        alpha = alpha_admissible(fmap)
    cone_margin = float(alpha - cone_ratio(v, "S", fmap.s))
    return TangencyResult(
        point=AmbientPoint.from_vector(orbit[0], fmap.s), direction=v, itinerary=cur.word,
        t_star=float(t_star), residual_angle=angle, parameter_intervals=intervals,
        converged=bool(width < tol), width=float(width), cone_margin=cone_margin,
        bracketed=bool(bracketed), orbit=orbit)


def cone_trace(result: TangencyResult, fmap, alpha: float) -> np.ndarray:
    """Stable-cone aperture of D f^i v_inf along the orbit (all must be <= alpha)."""
    v = result.direction.copy()
    out = [float(cone_ratio(v, "S", fmap.s))]
    for j, b in enumerate(result.itinerary):
        v = fmap.jac(b, result.orbit[j][None, :])[0] @ v
        v /= np.linalg.norm(v)
        out.append(float(cone_ratio(v, "S", fmap.s)))
    return np.array(out)
