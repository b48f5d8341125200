"""uu-disks and s-disks as graphs, their positions, and graph transforms.

A uu-disk is stored as a graph x^u -> (x^s, x^c) over the full unstable
cube [-1,1]^u. Positions relative to the local stable manifolds of the
reference saddles are decided by a signed central clearance measured where
the disk crosses the unstable coordinate of that manifold.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import diam_u

POSITION_TOL = 1e-10
SAMPLED_RESOLUTION = 65
LIP_INFLATION = 1.5

LEFT_OF_P = "LeftOfP"
MEETS_P = "MeetsP"
BETWEEN = "Between"
MEETS_Q = "MeetsQ"
RIGHT_OF_Q = "RightOfQ"
POSITIONS = (LEFT_OF_P, MEETS_P, BETWEEN, MEETS_Q, RIGHT_OF_Q)


class AdmissibilityError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


# -- reference manifolds ---------------------------------------------------

@dataclass(frozen=True)
class StableGraph:
    """Local stable manifold of a saddle as a graph x^s -> (x^c, x^u).

    Flat when ``values`` is None, otherwise sampled on a regular grid over
    [-1,1]^s and interpolated.
    """

    const: np.ndarray
    axes: tuple = None
    values: np.ndarray = None
    _interp: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "const", np.asarray(self.const, dtype=float))
        if self.values is not None:
            method = "cubic" if all(len(a) >= 4 for a in self.axes) else "linear"
            object.__setattr__(self, "_interp", RegularGridInterpolator(
                self.axes, self.values, method=method, bounds_error=False, fill_value=None))

    @classmethod
    def flat(cls, xc: float, xu) -> "StableGraph":
        return cls(np.concatenate([[xc], np.atleast_1d(xu)]))

    def __call__(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if self._interp is None:
            return np.broadcast_to(self.const, (xs.shape[0], self.const.size)).copy()
        return np.asarray(self._interp(xs))

    def central_range(self):
        if self.values is None:
            return float(self.const[0]), float(self.const[0])
        c = self.values[..., 0]
        return float(c.min()), float(c.max())

    def central_at(self, xs) -> np.ndarray:
        return self(xs)[:, 0]


def reference_graphs(fmap):
    """(graph of W^s_loc(P), graph of W^s_loc(Q)) for a map."""
    if hasattr(fmap, "reference_graphs"):
        return fmap.reference_graphs()
    h = fmap.horseshoe
    return (StableGraph.flat(0.0, np.zeros(fmap.u)),
            StableGraph.flat(fmap.q_central, h.a_u))


# -- disks -----------------------------------------------------------------

@dataclass(frozen=True)
class AffineDisk:
    """x^s = xs0 + Ls x^u,  x^c = xc0 + lc . x^u."""

    xs0: np.ndarray
    Ls: np.ndarray
    xc0: float
    lc: np.ndarray

    def __post_init__(self):
        xs0 = np.atleast_1d(np.asarray(self.xs0, dtype=float))
        lc = np.atleast_1d(np.asarray(self.lc, dtype=float))
        Ls = np.asarray(self.Ls, dtype=float).reshape(xs0.size, lc.size)
        object.__setattr__(self, "xs0", xs0)
        object.__setattr__(self, "lc", lc)
        object.__setattr__(self, "Ls", Ls)
        object.__setattr__(self, "xc0", float(self.xc0))

    @classmethod
    def flat(cls, xc: float, s: int = 1, u: int = 1, xs=None) -> "AffineDisk":
        xs0 = np.zeros(s) if xs is None else xs
        return cls(xs0, np.zeros((s, u)), xc, np.zeros(u))

    @property
    def s(self) -> int:
        return self.xs0.size

    @property
    def u(self) -> int:
        return self.lc.size

    @property
    def lip(self) -> float:
        return float(np.linalg.norm(np.vstack([self.Ls, self.lc[None, :]]), 2))

    def evaluate(self, xu):
        xu = np.atleast_2d(np.asarray(xu, dtype=float))
        return self.xs0 + xu @ self.Ls.T, self.xc0 + xu @ self.lc

    def to_json(self) -> dict:
        return {"representation": "affine", "xs0": self.xs0.tolist(), "Ls": self.Ls.tolist(),
                "xc0": self.xc0, "lc": self.lc.tolist(), "lip": self.lip}


def _grid_axes(u: int, k: int):
    return tuple(np.linspace(-1.0, 1.0, k) for _ in range(u))


def _grid_points(axes) -> np.ndarray:
    return np.array(list(itertools.product(*axes)))


@dataclass(frozen=True)
class SampledDisk:
    """Graph values (x^s, x^c) on a regular grid over [-1,1]^u.

    ``lip`` is a certified bound supplied by the producer, or, when omitted,
    the largest per-cell forward-difference slope inflated by 1.5.
    """

    axes: tuple
    values: np.ndarray  # grid shape + (s + 1,)
    lip: float = None
    _interp: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_interp", RegularGridInterpolator(
            self.axes, self.values, method="linear", bounds_error=False, fill_value=None))
        if self.lip is None:
            object.__setattr__(self, "lip", LIP_INFLATION * self.difference_slope())

    @property
    def u(self) -> int:
        return len(self.axes)

    @property
    def s(self) -> int:
        return self.values.shape[-1] - 1

    def difference_slope(self) -> float:
        worst = 0.0
        for ax in range(self.u):
            h = np.diff(self.axes[ax])
            d = np.diff(self.values, axis=ax)
            shape = [1] * (self.values.ndim)
            shape[ax] = h.size
            q = np.linalg.norm(d, axis=-1) / h.reshape(shape[:-1])
            worst = max(worst, float(q.max()) if q.size else 0.0)
        return worst * np.sqrt(self.u)

    @classmethod
    def from_function(cls, fn, s: int, u: int, k: int = SAMPLED_RESOLUTION, lip=None) -> "SampledDisk":
        axes = _grid_axes(u, k)
        pts = _grid_points(axes)
        xs, xc = fn(pts)
        vals = np.concatenate([np.asarray(xs).reshape(len(pts), s), np.asarray(xc).reshape(-1, 1)], axis=1)
        return cls(axes, vals.reshape((k,) * u + (s + 1,)), lip)

    @classmethod
    def from_affine(cls, d: AffineDisk, k: int = SAMPLED_RESOLUTION) -> "SampledDisk":
        return cls.from_function(d.evaluate, d.s, d.u, k, lip=d.lip)

    def evaluate(self, xu):
        xu = np.atleast_2d(np.asarray(xu, dtype=float))
        v = np.asarray(self._interp(xu))
        return v[:, :-1], v[:, -1]

    def to_json(self) -> dict:
        return {"representation": "sampled", "axes": [a.tolist() for a in self.axes],
                "values": self.values.tolist(), "lip": self.lip}


@dataclass(frozen=True)
class SDisk:
    """Graph x^s -> (x^c, x^u) over [-1,1]^s; boundary on the stable faces."""

    graph: StableGraph
    lip: float = 0.0


@dataclass(frozen=True)
class AffineDiskBatch:
    """Many affine disks evaluated row-wise: row i of ``xu`` on disk i."""

    xs0: np.ndarray  # (N, s)
    Ls: np.ndarray   # (N, s, u)
    xc0: np.ndarray  # (N,)
    lc: np.ndarray   # (N, u)

    def __call__(self, xu):
        xs = self.xs0 + np.einsum("nij,nj->ni", self.Ls, xu)
        xc = self.xc0 + np.einsum("nj,nj->n", self.lc, xu)
        return xs, xc

    def __len__(self):
        return self.xc0.shape[0]

    @classmethod
    def of(cls, disks) -> "AffineDiskBatch":
        return cls(np.array([d.xs0 for d in disks]), np.array([d.Ls for d in disks]),
                   np.array([d.xc0 for d in disks]), np.array([d.lc for d in disks]))

    def shifted(self, dc) -> "AffineDiskBatch":
        return AffineDiskBatch(self.xs0, self.Ls, self.xc0 + dc, self.lc)

    def disk(self, i: int) -> AffineDisk:
        return AffineDisk(self.xs0[i], self.Ls[i], self.xc0[i], self.lc[i])


# -- clearance along an orbit ----------------------------------------------

@dataclass
class OrbitClearance:
    clearance: np.ndarray   # (N,)
    orbit: np.ndarray       # (k+1, N, n)
    sweeps: int


def _decoupled(fmap) -> bool:
    return getattr(fmap, "decoupled_unstable", False)


def orbit_clearance(fmap, word: str, disk_fn, ref: StableGraph, n: int = None,
                    tol: float = 1e-15, max_sweeps: int = 60) -> OrbitClearance:
    """Signed central clearance of f_word(disk) relative to ``ref``.

    For each disk (row of the batch) the point z on the disk is found whose
    orbit along ``word`` ends on the unstable coordinate of ``ref``; the
    result is the central coordinate of the last orbit point minus the
    central value of ``ref`` there. Stable and central coordinates are
    propagated forward, unstable ones pulled back, alternating until the
    orbit is consistent.
    """
    s, u = fmap.s, fmap.u
    if n is None:
        n = len(disk_fn)
    k = len(word)
    xu = np.zeros((k + 1, n, u))
    xs = np.zeros((k + 1, n, s))
    xc = np.zeros((k + 1, n))
    prev = None
    sweep = 0
    if _decoupled(fmap) and ref.values is None:
        # unstable coordinates do not feel (xs, xc): one backward pass is exact
        xu[k] = ref.const[1:]
        for j in range(k - 1, -1, -1):
            xu[j] = fmap.solve_unstable(word[j], None, None, xu[j + 1])
        max_sweeps = 0
    for sweep in range(1, max_sweeps + 1):
        xs[0], xc[0] = disk_fn(xu[0])
        for j, b in enumerate(word):
            y = fmap.eval(b, np.concatenate([xs[j], xc[j][:, None], xu[j]], axis=1))
            xs[j + 1], xc[j + 1] = y[:, :s], y[:, s]
        r = ref(xs[k])
        xu[k] = r[:, 1:]
        for j in range(k - 1, -1, -1):
            xu[j] = fmap.solve_unstable(word[j], xs[j], xc[j], xu[j + 1])
        cur = np.concatenate([xu[0].ravel(), xc[k], xs[k].ravel()])
        if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, np.max(np.abs(cur))):
            break
        prev = cur
    else:
        if max_sweeps:
            raise ConvergenceError(f"orbit clearance did not settle in {max_sweeps} sweeps")
    # final consistent forward pass so that the orbit matches xu
    xs[0], xc[0] = disk_fn(xu[0])
    for j, b in enumerate(word):
        y = fmap.eval(b, np.concatenate([xs[j], xc[j][:, None], xu[j]], axis=1))
        xs[j + 1], xc[j + 1] = y[:, :s], y[:, s]
    clearance = xc[k] - ref(xs[k])[:, 0]
    orbit = np.concatenate([xs, xc[..., None], xu], axis=2)
    return OrbitClearance(clearance, orbit, sweep)


# -- positions -------------------------------------------------------------

@dataclass(frozen=True)
class Position:
    kind: str
    clearance_p: float
    clearance_q: float


def position_from_clearances(cP: float, cQ: float, tol: float = POSITION_TOL) -> Position:
    if cP < -tol and cQ > tol:
        raise AdmissibilityError("disk violates alpha-admissibility: left of P and right of Q")
    if abs(cP) <= tol:
        kind = MEETS_P
    elif abs(cQ) <= tol:
        kind = MEETS_Q
    elif cP < -tol:
        kind = LEFT_OF_P
    elif cQ > tol:
        kind = RIGHT_OF_Q
    else:
        kind = BETWEEN
    return Position(kind, float(cP), float(cQ))


def classify_positions(cP, cQ, tol: float = POSITION_TOL):
    cP, cQ = np.asarray(cP), np.asarray(cQ)
    if np.any((cP < -tol) & (cQ > tol)):
        raise AdmissibilityError("disk violates alpha-admissibility: left of P and right of Q")
    out = np.full(cP.shape, BETWEEN, dtype=object)
    out[cQ > tol] = RIGHT_OF_Q
    out[cP < -tol] = LEFT_OF_P
    out[np.abs(cQ) <= tol] = MEETS_Q
    out[np.abs(cP) <= tol] = MEETS_P
    return out


def alpha_admissible(fmap) -> float:
    """Largest cone parameter for which the position tests are sound.

    Combines the disjointness/central-face bounds for disks through the
    reference stable manifolds with the half-overlap bound of the central
    covering.
    """
    from .axioms import bh4_bound, bh6_bound
    return min(bh4_bound(fmap), bh6_bound(fmap))


class _Single:
    def __init__(self, d):
        self.d = d

    def __len__(self):
        return 1

    def __call__(self, xu):
        return self.d.evaluate(xu)


def classify_position(d, fmap, tol: float = POSITION_TOL, alpha: float = None) -> Position:
    """Position of a uu-disk relative to W^s_loc(P) and W^s_loc(Q)."""
    bound = alpha_admissible(fmap) if alpha is None else alpha
    if d.lip > bound:
        raise AdmissibilityError(
            f"disk Lipschitz constant {d.lip:.3g} exceeds the admissibility bound {bound:.3g}")
    refP, refQ = reference_graphs(fmap)
    cP = float(orbit_clearance(fmap, "", _Single(d), refP, n=1).clearance[0])
    cQ = float(orbit_clearance(fmap, "", _Single(d), refQ, n=1).clearance[0])
    return position_from_clearances(cP, cQ, tol)


# -- graph transform -------------------------------------------------------

def transform_factor(fmap, branch: str) -> float:
    """Lipschitz contraction of the graph transform: max(||S||, lam) ||U^-1||."""
    S, U, *_ = fmap.blocks(branch)
    return max(np.linalg.norm(S, 2), abs(fmap.lam)) * np.linalg.norm(np.linalg.inv(U), 2)


def graph_transform(d, branch: str, fmap, k: int = SAMPLED_RESOLUTION):
    """Image of the part of ``d`` over the branch domain, as a graph over [-1,1]^u."""
    if isinstance(d, AffineDisk) and not hasattr(fmap, "reference_graphs"):
        S, U, bs, bu, shift = fmap.blocks(branch)
        Ui = np.linalg.inv(U)
        r = -Ui @ bu
        xs0 = S @ (d.xs0 + d.Ls @ r) + bs
        Ls = S @ d.Ls @ Ui
        xc0 = fmap.lam * (d.xc0 + d.lc @ r) - shift
        lc = fmap.lam * (Ui.T @ d.lc)
        return AffineDisk(xs0, Ls, xc0, lc)
    axes = _grid_axes(d.u, k)
    pts = _grid_points(axes)
    xu = fmap.solve_unstable(branch, *d.evaluate(np.zeros_like(pts)), pts)
    for _ in range(60):
        xs, xc = d.evaluate(xu)
        nxt = fmap.solve_unstable(branch, xs, xc, pts)
        done = np.max(np.abs(nxt - xu)) <= 1e-15
        xu = nxt
        if done:
            break
    xs, xc = d.evaluate(xu)
    y = fmap.eval(branch, np.concatenate([xs, xc[:, None], xu], axis=1))
    vals = np.concatenate([y[:, :d.s], y[:, d.s:d.s + 1]], axis=1)
    out = SampledDisk(axes, vals.reshape((k,) * d.u + (d.s + 1,)))
    if not hasattr(fmap, "reference_graphs"):
        # affine branch: the contraction bound is certified
        object.__setattr__(out, "lip", min(out.lip, transform_factor(fmap, branch) * d.lip))
    return out


def random_affine_disks(rng, fmap, n: int, lip_max: float, xc_range, xs_range=(-0.5, 0.5)):
    """Batch of random affine uu-disks with Lipschitz constant <= lip_max."""
    s, u = fmap.s, fmap.u
    M = rng.normal(size=(n, s + 1, u))
    norms = np.linalg.norm(M, axis=(1, 2), ord=None)
    scale = lip_max * rng.uniform(0, 1, size=n) / np.where(norms > 0, norms, 1)
    M = M * scale[:, None, None]  # Frobenius <= lip_max bounds the spectral norm
    xs0 = rng.uniform(*xs_range, size=(n, s))
    xc0 = rng.uniform(*xc_range, size=n)
    return AffineDiskBatch(xs0, M[:, :s, :], xc0, M[:, s, :])


def diameter(fmap) -> float:
    return diam_u(fmap.u)
