"""Certification of the blender-horseshoe conditions BH1-BH6.

Affine models go through closed-form box and cone arithmetic. Any other
map (see :mod:`blenderlab.perturbation`) goes through a sampled path:
grids of map evaluations and Jacobians plus Monte Carlo disk audits. The
sampled path can refute a condition but only audits it otherwise; every
verdict records which path produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .central import CentralIFS, covering_check
from .disks import (AffineDiskBatch, orbit_clearance, random_affine_disks,
                    reference_graphs)
from .geometry import ConeParams, ReferenceCube, cone_ratio, diam_u
from .model import BRANCHES, BlenderModel

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"

SCHEMA_VERSION = 1
JACOBIAN_GRID = 13
DISKS_PER_CLASS = 500


@dataclass
class Verdict:
    status: str
    margin: float
    path: str = "analytic"
    detail: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_json(self) -> dict:
        return {"status": self.status, "margin": _num(self.margin), "path": self.path}


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _verdict(margin: float, path: str, detail=None, fail=REFUTED) -> Verdict:
    status = CERTIFIED if margin > 0 else fail
    return Verdict(status, float(margin), path, detail or {})


def is_analytic(fmap) -> bool:
    return isinstance(fmap, BlenderModel)


def _cube(fmap, cube):
    return cube if cube is not None else ReferenceCube(fmap.delta, fmap.s, fmap.u)


def _q_central(fmap) -> float:
    return fmap.mu / (fmap.lam - 1) if fmap.lam != 1 else float("inf")


def _box_abs_max(S, b) -> np.ndarray:
    """Componentwise max |S x + b| over x in [-1,1]^s."""
    return np.abs(b) + np.abs(S).sum(axis=1)


def stable_image_slack(fmap) -> float:
    return min(1.0 - float(np.max(_box_abs_max(S, bs)))
               for S, _, bs, _, _ in (fmap.blocks(b) for b in BRANCHES))


def _dom_slack(fmap, inflate=0.0) -> float:
    return min(1.0 - max(float(np.max(np.abs(fmap.dom(b).lo - inflate))),
                         float(np.max(np.abs(fmap.dom(b).hi + inflate))))
               for b in BRANCHES)


def domain_inflation(fmap) -> float:
    """Half the room available around the branch domains (gap and cube faces)."""
    d1, d2 = fmap.dom("A"), fmap.dom("B")
    gap = float(np.max(np.maximum(d2.lo - d1.hi, d1.lo - d2.hi)))
    return 0.25 * min(gap, _dom_slack(fmap))


# -- grids for the sampled path ----------------------------------------------

def _region_grid(fmap, branch, k, inflate):
    d = fmap.dom(branch)
    axes = ([np.linspace(-1, 1, k)] * fmap.s + [np.linspace(-fmap.delta, fmap.delta, k)]
            + [np.linspace(lo - inflate, hi + inflate, k) for lo, hi in zip(d.lo, d.hi)])
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    spacing = np.array([a[1] - a[0] for a in axes])
    return axes, X, spacing


def _cell_error(fmap, branch, X, spacing, rows, frozen=None):
    """Bound on the variation of selected output rows within a grid cell;
    ``frozen`` names an input axis held fixed (a face of the region)."""
    J = np.abs(fmap.jac(branch, X)[:, rows, :]).max(axis=0)
    h = 0.5 * spacing.copy()
    if frozen is not None:
        h[frozen] = 0.0
    return float(np.max(J @ h))


def _sphere(m: int, count: int = 48) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        th = np.linspace(0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    rng = np.random.default_rng(12345)
    v = rng.normal(size=(count * m, m))
    v = np.vstack([v, np.eye(m), -np.eye(m)])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cone_samples(kind: str, alpha: float, s: int, u: int) -> np.ndarray:
    """Directions filling the cone of the given kind (boundary and interior)."""
    radii = np.array([0.0, 0.25, 0.5, 0.75, 0.9, 1.0])
    if kind == "UU":
        inner, outer = _sphere(s + 1), _sphere(u)
        parts = [np.concatenate([alpha * r * a, b]) for r in radii for a in inner for b in outer]
    elif kind == "U":
        inner, outer = _sphere(s), _sphere(u + 1)
        parts = [np.concatenate([alpha * r * a, b]) for r in radii for a in inner for b in outer]
    else:
        inner, outer = _sphere(u + 1), _sphere(s)
        parts = [np.concatenate([b, alpha * r * a]) for r in radii for a in inner for b in outer]
    return np.array(parts)


# -- BH1 ------------------------------------------------------------------

def check_BH1(fmap, cube=None, k: int = 17) -> Verdict:
    cube = _cube(fmap, cube)
    if not fmap.dom("A").disjoint(fmap.dom("B")):
        return Verdict(REFUTED, -1.0, detail={"reason": "branch domains overlap"})
    if is_analytic(fmap):
        s_slack = stable_image_slack(fmap)
        d_slack = _dom_slack(fmap)
        c_slack = (abs(fmap.lam) - 1) * fmap.delta - fmap.mu
        detail = {"stable_image_slack": s_slack, "domain_to_uu_face": d_slack,
                  "central_crossing_slack": c_slack}
        return _verdict(min(s_slack, d_slack, c_slack), "analytic", detail)
    inflate = domain_inflation(fmap)
    s, u = fmap.s, fmap.u
    s_slack = c_slack = overshoot = np.inf
    for b in BRANCHES:
        axes, X, spacing = _region_grid(fmap, b, k, inflate)
        Y = fmap.eval(b, X)
        inside = np.all(np.abs(Y[:, s + 1:]) <= 1, axis=1)
        err_s = _cell_error(fmap, b, X, spacing, slice(0, s))
        err_c = _cell_error(fmap, b, X, spacing, slice(s, s + 1), frozen=s)
        if inside.any():
            s_slack = min(s_slack, 1 - float(np.abs(Y[inside, :s]).max()) - err_s)
        top = np.isclose(X[:, s], cube.delta)
        bot = np.isclose(X[:, s], -cube.delta)
        c_slack = min(c_slack, float(np.min(Y[top, s] - cube.delta)) - err_c,
                      float(np.min(-cube.delta - Y[bot, s])) - err_c)
        lo_u = X[:, s + 1:].min(axis=0)
        hi_u = X[:, s + 1:].max(axis=0)
        for j in range(u):
            err_u = _cell_error(fmap, b, X, spacing, slice(s + 1 + j, s + 2 + j), frozen=s + 1 + j)
            face = np.isclose(X[:, s + 1 + j], lo_u[j]) | np.isclose(X[:, s + 1 + j], hi_u[j])
            overshoot = min(overshoot, float(np.min(np.abs(Y[face, s + 1 + j]) - 1)) - err_u)
    d_slack = _dom_slack(fmap, inflate)
    detail = {"stable_image_slack": s_slack, "domain_to_uu_face": d_slack,
              "central_crossing_slack": c_slack, "unstable_face_overshoot": overshoot}
    return _verdict(min(s_slack, d_slack, c_slack, overshoot), "sampled", detail)


# -- BH2 ------------------------------------------------------------------

def _cone_args(cones, alpha, alpha_prime):
    if cones is not None:
        if isinstance(cones, ConeParams):
            return cones.alpha, cones.alpha_prime
        return float(cones[0]), float(cones[1])
    return alpha, alpha_prime


def analytic_cone_factors(fmap, branch: str) -> dict:
    S, U, *_ = fmap.blocks(branch)
    lam = abs(fmap.lam)
    nS = np.linalg.norm(S, 2)
    nUi = np.linalg.norm(np.linalg.inv(U), 2)
    sminU = 1 / nUi
    return {
        "uu": max(nS, lam) * nUi,
        "u": nS / min(lam, sminU),
        "s": max(1 / lam, nUi) * nS,
        "cu_min_rate": min(lam, sminU),
        "s_norm": nS,
    }


def cone_factor(fmap) -> float:
    """Worst aperture ratio alpha'/alpha achieved by the three cone fields."""
    return max(max(f["uu"], f["u"], f["s"])
               for f in (analytic_cone_factors(fmap, b) for b in BRANCHES))


def check_BH2(fmap, cube=None, cones=None, alpha=None, alpha_prime=None, k: int = JACOBIAN_GRID) -> Verdict:
    alpha, alpha_prime = _cone_args(cones, alpha, alpha_prime)
    if not 0 < alpha < 1 or not 0 < alpha_prime < alpha:
        return Verdict(REFUTED, alpha - alpha_prime if alpha_prime >= alpha else -1.0,
                       detail={"reason": "need 0 < alpha' < alpha < 1"})
    s, u = fmap.s, fmap.u
    if is_analytic(fmap):
        achieved, expansion, contraction = 0.0, np.inf, 0.0
        for b in BRANCHES:
            f = analytic_cone_factors(fmap, b)
            achieved = max(achieved, alpha * max(f["uu"], f["u"], f["s"]))
            expansion = min(expansion, f["cu_min_rate"] / np.sqrt(1 + alpha ** 2))
            contraction = max(contraction, f["s_norm"] * np.sqrt(1 + alpha ** 2))
        path = "analytic"
    else:
        cones_uu = _cone_samples("UU", alpha, s, u)
        cones_u = _cone_samples("U", alpha, s, u)
        cones_s = _cone_samples("S", alpha, s, u)
        achieved, expansion, contraction = 0.0, np.inf, 0.0
        kk = max(3, int(round(k ** (3 / fmap.n))))
        for b in BRANCHES:
            _, X, _ = _region_grid(fmap, b, kk, 0.0)
            J = fmap.jac(b, X)
            Jinv = np.linalg.inv(J)
            im_uu = np.einsum("nij,mj->nmi", J, cones_uu)
            im_u = np.einsum("nij,mj->nmi", J, cones_u)
            im_s = np.einsum("nij,mj->nmi", Jinv, cones_s)
            achieved = max(achieved, float(cone_ratio(im_uu, "UU", s).max()),
                           float(cone_ratio(im_u, "U", s).max()), float(cone_ratio(im_s, "S", s).max()))
            nu = np.linalg.norm(cones_u, axis=1)
            expansion = min(expansion, float((np.linalg.norm(im_u, axis=2) / nu).min()))
            ns = np.linalg.norm(cones_s, axis=1)
            contraction = max(contraction, float((ns / np.linalg.norm(im_s, axis=2)).max()))
        path = "sampled"
    margin = min(alpha_prime - achieved, expansion - 1, 1 - contraction)
    detail = {"alpha": alpha, "alpha_prime": alpha_prime, "achieved_alpha_prime": achieved,
              "expansion_rate": expansion, "contraction_rate": contraction}
    return _verdict(margin, path, detail)


# -- BH3 ------------------------------------------------------------------

def markov_boxes(fmap) -> dict:
    """Closed-form Markov boxes of the affine model."""
    out = {}
    for b in BRANCHES:
        _, _, _, _, shift = fmap.blocks(b)
        ends = sorted([(-fmap.delta + shift) / fmap.lam, (fmap.delta + shift) / fmap.lam])
        d = fmap.dom(b)
        out["AA" if b == "A" else "BB"] = {
            "stable": [[-1.0, 1.0]] * fmap.s,
            "central": ends,
            "unstable": [[float(lo), float(hi)] for lo, hi in zip(d.lo, d.hi)],
        }
    return out


def check_BH3(fmap, cube=None, k: int = 17) -> Verdict:
    cube = _cube(fmap, cube)
    s = fmap.s
    if is_analytic(fmap):
        boxes = markov_boxes(fmap)
        c_slack = min(cube.delta - max(abs(v) for v in bx["central"]) for bx in boxes.values())
        margin = min(c_slack, _dom_slack(fmap), stable_image_slack(fmap))
        detail = {"boxes": boxes, "central_slab_slack": c_slack}
        return _verdict(margin, "analytic", detail)
    inflate = domain_inflation(fmap)
    c_slack = np.inf
    u_slack = np.inf
    components = {}
    boxes = {}
    for b in BRANCHES:
        axes, X, spacing = _region_grid(fmap, b, k, inflate)
        Y = fmap.eval(b, X)
        in_cube = (np.all(np.abs(Y[:, :s]) <= 1, axis=1) & (np.abs(Y[:, s]) <= cube.delta)
                   & np.all(np.abs(Y[:, s + 1:]) <= 1, axis=1))
        mask = in_cube.reshape([len(a) for a in axes])
        _, ncomp = ndimage.label(mask)
        components[b] = int(ncomp)
        # central slab: preimage of the central faces, by Newton per column
        cols = X[np.isclose(X[:, s], axes[s][0])].copy()
        ends = []
        for target in (-cube.delta, cube.delta):
            c = np.full(len(cols), target / fmap.lam)
            for _ in range(30):
                Z = cols.copy()
                Z[:, s] = c
                r = fmap.eval(b, Z)[:, s] - target
                dc = fmap.jac(b, Z)[:, s, s]
                c = c - r / dc
            ends.append(c)
        keep = np.all(np.abs(fmap.eval(b, np.column_stack([cols[:, :s], ends[0], cols[:, s + 1:]]))[:, s + 1:]) <= 1, axis=1)
        lo, hi = ends[0][keep], ends[1][keep]
        if keep.any():
            c_slack = min(c_slack, cube.delta - float(max(np.abs(lo).max(), np.abs(hi).max())))
            boxes["AA" if b == "A" else "BB"] = {"central": [float(lo.min()), float(hi.max())]}
        if in_cube.any():
            u_slack = min(u_slack, 1 - float(np.abs(X[in_cube, s + 1:]).max()) - float(spacing[s + 1:].max()))
    bh1 = check_BH1(fmap, cube)
    s_slack = bh1.detail.get("stable_image_slack", -1.0)
    connected = all(v == 1 for v in components.values())
    margin = min(c_slack, u_slack, s_slack) if connected else -1.0
    detail = {"boxes": boxes, "components": components, "central_slab_slack": c_slack}
    return _verdict(margin, "sampled", detail)


# -- BH4 ------------------------------------------------------------------

def _bh4_terms(fmap, alpha: float):
    refP, refQ = reference_graphs(fmap)
    pmin, pmax = refP.central_range()
    qmin, qmax = refQ.central_range()
    d = diam_u(fmap.u)
    delta = fmap.delta
    return {
        "disjoint": (qmin - pmax) - 2 * alpha * d,
        "central_face_top": (delta - max(pmax, qmax)) - alpha * d,
        "central_face_bottom": (delta + min(pmin, qmin)) - alpha * d,
    }


def bh4_bound(fmap) -> float:
    """Largest alpha satisfying the sufficient BH4 inequalities (sup, not attained)."""
    t = _bh4_terms(fmap, 0.0)
    d = diam_u(fmap.u)
    return min(t["disjoint"] / (2 * d), t["central_face_top"] / d, t["central_face_bottom"] / d)


def check_BH4(fmap, cube=None, alpha: float = None) -> Verdict:
    bound = bh4_bound(fmap)
    path = "analytic" if is_analytic(fmap) else "sampled"
    terms = _bh4_terms(fmap, alpha)
    detail = {"alpha_admissible": bound, **terms}
    if bound <= 0:
        return Verdict(REFUTED, min(terms.values()), path, detail)
    if alpha < bound:
        return Verdict(CERTIFIED, min(terms.values()), path, detail)
    return Verdict(INCONCLUSIVE, min(terms.values()), path, detail)


# -- Monte Carlo disk audits -------------------------------------------------

def _betweenness(cP, cQ):
    return np.minimum(cP, -cQ)


class _Clearance:
    """Clearances of the branch images of a disk batch."""

    def __init__(self, fmap):
        self.fmap = fmap
        self.refP, self.refQ = reference_graphs(fmap)

    def __call__(self, batch, word=""):
        cP = orbit_clearance(self.fmap, word, batch, self.refP).clearance
        cQ = orbit_clearance(self.fmap, word, batch, self.refQ).clearance
        return cP, cQ


def sample_disks_by_class(fmap, alpha: float, n: int, rng, floor: float = 1e-6) -> dict:
    """Random affine disks with lip <= alpha placed in each position class."""
    q = _q_central(fmap)
    delta = fmap.delta
    d = diam_u(fmap.u)
    clr = _Clearance(fmap)
    out = {}
    room_out = max(floor * 10, delta - q - alpha * d)
    targets = {
        "LeftOfP": ("P", rng.uniform(-min(delta - alpha * d, q), -floor, n)),
        "MeetsP": ("P", np.zeros(n)),
        "Between": ("P", rng.uniform(floor, q - floor, n)),
        "MeetsQ": ("Q", np.zeros(n)),
        "RightOfQ": ("Q", rng.uniform(floor, room_out, n)),
    }
    for name, (which, tgt) in targets.items():
        base = random_affine_disks(rng, fmap, n, alpha, (0.0, q))
        cP, cQ = clr(base)
        cur = cP if which == "P" else cQ
        batch = base.shifted(tgt - cur)
        if name == "Between":
            cP, cQ = clr(batch)
            keep = cQ < -floor
            batch = AffineDiskBatch(batch.xs0[keep], batch.Ls[keep], batch.xc0[keep], batch.lc[keep])
        out[name] = batch
    return out


BH5_ITEMS = {
    # item: (source classes, branch, which clearance, sign asserted)
    1: (("Between", "MeetsQ", "RightOfQ"), "A", "P", +1),
    2: (("LeftOfP",), "A", "P", -1),
    3: (("RightOfQ",), "B", "Q", +1),
    4: (("LeftOfP", "MeetsP", "Between"), "B", "Q", -1),
    5: (("LeftOfP", "MeetsP"), "B", "P", -1),
    6: (("RightOfQ", "MeetsQ"), "A", "Q", +1),
}


def audit_bh5(fmap, alpha: float, n: int = DISKS_PER_CLASS, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    classes = sample_disks_by_class(fmap, alpha, n, rng)
    clr = _Clearance(fmap)
    images = {}
    for name, batch in classes.items():
        for b in BRANCHES:
            images[name, b] = clr(batch, b)
    worst = {}
    violations = 0
    for item, (srcs, b, which, sign) in BH5_ITEMS.items():
        vals = np.concatenate([images[c, b][0 if which == "P" else 1] for c in srcs]) * sign
        violations += int(np.sum(vals <= 0))
        worst[item] = float(vals.min())
    return {"violations": violations, "worst_clearance": worst,
            "disks": int(sum(len(v) for v in classes.values()))}


def audit_bh6(fmap, alpha: float, n: int = DISKS_PER_CLASS, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed + 1)
    batch = sample_disks_by_class(fmap, alpha, n, rng)["Between"]
    clr = _Clearance(fmap)
    bA = _betweenness(*clr(batch, "A"))
    bB = _betweenness(*clr(batch, "B"))
    best = np.maximum(bA, bB)
    return {"violations": int(np.sum(best <= 0)), "worst_clearance": float(best.min()),
            "disks": len(batch)}


# -- BH5 ------------------------------------------------------------------

def bh5_margins(fmap, alpha: float) -> dict:
    """Uniform clearances of items 5 and 6 for disks with lip <= alpha."""
    h = fmap.horseshoe
    p_u, a_u = np.zeros(fmap.u), h.a_u
    zB = fmap.solve_unstable("B", None, None, p_u[None, :])[0]
    zA = fmap.solve_unstable("A", None, None, a_u[None, :])[0]
    return {
        5: fmap.mu - abs(fmap.lam) * alpha * float(np.linalg.norm(zB - p_u)),
        6: fmap.mu - abs(fmap.lam) * alpha * float(np.linalg.norm(zA - a_u)),
    }


def bh5_bound(fmap) -> float:
    """Largest cone parameter keeping both BH5 item clearances positive."""
    z = bh5_margins(fmap, 1.0)
    reach = max(fmap.mu - v for v in z.values())
    return fmap.mu / reach if reach > 0 else np.inf


def check_BH5(fmap, cube=None, alpha: float = None, n_samples: int = DISKS_PER_CLASS,
              seed: int = 0) -> Verdict:
    if is_analytic(fmap):
        if fmap.lam <= 0:
            return Verdict(REFUTED, fmap.lam, detail={"reason": "central multiplier must be positive"})
        m = bh5_margins(fmap, alpha)
        detail = {"item_margins": m}
        if n_samples:
            detail["monte_carlo"] = audit_bh5(fmap, alpha, n_samples, seed)
            if detail["monte_carlo"]["violations"]:
                return Verdict(REFUTED, -1.0, "analytic", detail)
        return _verdict(min(m.values()), "analytic", detail)
    if fmap.lam <= 0:
        return Verdict(REFUTED, fmap.lam, "sampled", {"reason": "central multiplier must be positive"})
    mc = audit_bh5(fmap, alpha, n_samples, seed)
    margin = min(mc["worst_clearance"].values())
    return _verdict(margin if not mc["violations"] else -1.0, "sampled", {"monte_carlo": mc})


# -- BH6 ------------------------------------------------------------------

def bh6_bound(fmap) -> float:
    ifs = CentralIFS(fmap.lam, fmap.mu)
    if not 1 < fmap.lam < 2:
        return -np.inf
    return ifs.overlap_width / (2 * diam_u(fmap.u))


def check_BH6(fmap, cube=None, alpha: float = None, n_samples: int = DISKS_PER_CLASS,
              seed: int = 0) -> Verdict:
    ifs = CentralIFS(fmap.lam, fmap.mu)
    cov = covering_check(ifs)
    path = "analytic" if is_analytic(fmap) else "sampled"
    if not cov.certified:
        return Verdict(REFUTED, -1.0, path, {"reason": cov.reason or "no covering"})
    d = diam_u(fmap.u)
    w = cov.overlap_width
    margin = w / 2 - alpha * d
    detail = {"overlap_width": w, "alpha_d": alpha * d}
    if is_analytic(fmap):
        h = fmap.horseshoe
        zA = fmap.solve_unstable("A", None, None, h.a_u[None, :])[0]
        zB = fmap.solve_unstable("B", None, None, np.zeros((1, fmap.u)))[0]
        exact = w - alpha * float(np.linalg.norm(zA - zB))
        detail["exact_margin"] = exact
        if n_samples:
            detail["monte_carlo"] = audit_bh6(fmap, alpha, n_samples, seed)
            if detail["monte_carlo"]["violations"]:
                return Verdict(REFUTED, -1.0, path, detail)
        if margin > 0:
            return Verdict(CERTIFIED, margin, path, detail)
        return Verdict(REFUTED if exact <= 0 else INCONCLUSIVE, margin, path, detail)
    mc = audit_bh6(fmap, alpha, n_samples, seed)
    detail["monte_carlo"] = mc
    if mc["violations"]:
        return Verdict(REFUTED, mc["worst_clearance"], path, detail)
    return _verdict(min(margin, mc["worst_clearance"]), path, detail, fail=INCONCLUSIVE)


# -- certificate -----------------------------------------------------------

@dataclass
class BlenderCertificate:
    verdicts: dict
    cones: tuple
    alpha_admissible: float
    markov: dict
    splitting_rates: dict
    path: str

    @property
    def status(self) -> str:
        st = [v.status for v in self.verdicts.values()]
        if all(s == CERTIFIED for s in st):
            return CERTIFIED
        if any(s == REFUTED for s in st):
            return REFUTED
        return INCONCLUSIVE

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    @property
    def min_margin(self) -> float:
        return min(v.margin for v in self.verdicts.values())

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "path": self.path,
            "conditions": {k: v.to_json() for k, v in self.verdicts.items()},
            "alpha": self.cones[0],
            "alpha_prime": self.cones[1],
            "alpha_admissible": _num(self.alpha_admissible),
            "markov": self.markov,
            "splitting_rates": {k: (_num(v) if not isinstance(v, bool) else v)
                                for k, v in self.splitting_rates.items()},
        }


def splitting_rates(fmap) -> dict:
    nS = max(np.linalg.norm(fmap.blocks(b)[0], 2) for b in BRANCHES)
    smin = min(1 / np.linalg.norm(np.linalg.inv(fmap.blocks(b)[1]), 2) for b in BRANCHES)
    return {"contraction_Es": float(nS), "central_rate_Ecu": float(fmap.lam),
            "expansion_Euu": float(smin),
            "dominated": bool(nS < fmap.lam < smin and fmap.lam > 1)}


def default_cones(fmap, fraction: float = 0.8) -> tuple:
    """Cone parameters derived from the model: a fraction of the admissible
    alpha (capped by the BH5 clearance bound), and alpha' halfway between the achieved aperture and alpha."""
    adm = min(bh4_bound(fmap), bh6_bound(fmap))
    if is_analytic(fmap) and fmap.lam > 0:
        adm = min(adm, bh5_bound(fmap))
    alpha = fraction * adm if adm > 0 else 1e-3
    alpha = min(alpha, 0.5)
    f = cone_factor(fmap)
    alpha_prime = alpha * (1 + f) / 2 if f < 1 else alpha / 2
    return float(alpha), float(alpha_prime)


def certify_blender(fmap, cube=None, cones=None, n_samples: int = DISKS_PER_CLASS,
                    seed: int = 0) -> BlenderCertificate:
    cube = _cube(fmap, cube)
    alpha, alpha_prime = _cone_args(cones, None, None) if cones is not None else default_cones(fmap)
    verdicts = {
        "BH1": check_BH1(fmap, cube),
        "BH2": check_BH2(fmap, cube, alpha=alpha, alpha_prime=alpha_prime),
        "BH3": check_BH3(fmap, cube),
        "BH4": check_BH4(fmap, cube, alpha),
    }
    if verdicts["BH4"].status == REFUTED or not 1 < fmap.lam < 2:
        # disk positions are meaningless without the BH4 geometry
        n_mc = 0
    else:
        n_mc = n_samples
    try:
        verdicts["BH5"] = check_BH5(fmap, cube, alpha, n_mc, seed)
    except (ArithmeticError, ValueError, RuntimeError) as e:
        verdicts["BH5"] = Verdict(INCONCLUSIVE, float("nan"), detail={"error": str(e)})
    try:
        verdicts["BH6"] = check_BH6(fmap, cube, alpha, n_mc, seed)
    except (ArithmeticError, ValueError, RuntimeError) as e:
        verdicts["BH6"] = Verdict(INCONCLUSIVE, float("nan"), detail={"error": str(e)})
    markov = verdicts["BH3"].detail.get("boxes", {})
    adm = min(bh4_bound(fmap), bh6_bound(fmap))
    return BlenderCertificate(verdicts, (alpha, alpha_prime), adm, markov, splitting_rates(fmap),
                              "analytic" if is_analytic(fmap) else "sampled")
