"""C^1-small perturbations of the affine model and the robustness suite.

A perturbed map is the (possibly parameter-jittered) affine model plus a
sum of smooth bumps ``amp * (1 - |x-c|^2/r^2)^3``. Reference saddles are
continued by Newton and their local stable manifolds are evaluated
exactly by shooting along the branch that fixes the saddle.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .disks import StableGraph
from .model import BRANCHES, BlenderModel

# max of |d/drho (1 - rho^2)^3| on [0, 1], attained at rho = 1/sqrt(5)
BUMP_SLOPE_MAX = 96 / (25 * np.sqrt(5))
NEWTON_MAX = 20
SHOOT_STEPS = 22
SCHEMA_VERSION = 1


class ContinuationError(RuntimeError):
    pass


class BumpWarning(UserWarning):
    pass


# -- perturbation family ---------------------------------------------------

@dataclass(frozen=True)
class ParamJitter:
    dlambda: float
    dmu: float

    def c1_bound(self, m: BlenderModel) -> float:
        return max(abs(self.dlambda) * m.delta + abs(self.dmu), abs(self.dlambda))

    def to_json(self) -> dict:
        return {"kind": "ParamJitter", "dlambda": self.dlambda, "dmu": self.dmu}


@dataclass(frozen=True)
class Bump:
    center: np.ndarray
    radius: float
    amplitude: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "amplitude", np.asarray(self.amplitude, dtype=float))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")

    def c1_bound(self, m=None) -> float:
        return float(np.linalg.norm(self.amplitude)) * max(1.0, BUMP_SLOPE_MAX / self.radius)

    def value(self, X):
        """Bump contribution at the rows of X, or None when all rows lie outside the support."""
        d = X - self.center
        w = 1 - (d * d).sum(axis=1) / self.radius ** 2
        inside = w > 0
        if not inside.any():
            return None
        return (np.where(inside, w, 0.0) ** 3)[:, None] * self.amplitude

    def jac(self, X) -> np.ndarray:
        d = X - self.center
        rho2 = np.einsum("ij,ij->i", d, d) / self.radius ** 2
        g = np.where(rho2 < 1, -6 * (1 - rho2) ** 2, 0.0)[:, None] * d / self.radius ** 2
        return self.amplitude[None, :, None] * g[:, None, :]

    def to_json(self) -> dict:
        return {"kind": "Bump", "center": self.center.tolist(), "radius": self.radius,
                "amplitude": self.amplitude.tolist()}


@dataclass(frozen=True)
class Composite:
    parts: tuple

    def c1_bound(self, m: BlenderModel) -> float:
        return float(sum(p.c1_bound(m) for p in self.parts))

    def to_json(self) -> dict:
        return {"kind": "Composite", "parts": [p.to_json() for p in self.parts]}


def _flatten(p) -> list:
    if isinstance(p, Composite):
        return [q for part in p.parts for q in _flatten(part)]
    return [p]


def perturbation_from_json(d: dict):
    kind = d["kind"]
    if kind == "ParamJitter":
        return ParamJitter(float(d["dlambda"]), float(d["dmu"]))
    if kind == "Bump":
        return Bump(d["center"], float(d["radius"]), d["amplitude"])
    if kind == "Composite":
        return Composite(tuple(perturbation_from_json(x) for x in d["parts"]))
    raise ValueError(f"unknown perturbation kind {kind!r}")


# -- the perturbed map -----------------------------------------------------

@dataclass
class PerturbedMap:
    """Base model (after parameter jitter) plus bumps, with the model's map API."""

    base: BlenderModel
    bumps: tuple
    c1_bound: float
    _refs: tuple = field(default=None, repr=False)
    _saddles: dict = field(default=None, repr=False)

    @property
    def decoupled_unstable(self) -> bool:
        return not self.bumps

    # shape and parameters of the underlying model
    s = property(lambda self: self.base.s)
    u = property(lambda self: self.base.u)
    n = property(lambda self: self.base.n)
    lam = property(lambda self: self.base.lam)
    mu = property(lambda self: self.base.mu)
    delta = property(lambda self: self.base.delta)
    horseshoe = property(lambda self: self.base.horseshoe)
    cube = property(lambda self: self.base.cube)

    def blocks(self, branch):
        return self.base.blocks(branch)

    def dom(self, branch):
        return self.base.dom(branch)

    def eval(self, branch: str, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = self.base.eval(branch, X)
        extra = self._bump_sum(X)
        return Y if extra is None else Y + extra

    def jac(self, branch: str, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        J = self.base.jac(branch, X)
        for b in self.bumps:
            J = J + b.jac(X)
        return J

    def _bump_sum(self, X):
        out = None
        for b in self.bumps:
            v = b.value(X)
            if v is not None:
                out = v if out is None else out + v
        return out

    def solve_unstable(self, branch: str, xs, xc, target_u, tol: float = 1e-16) -> np.ndarray:
        """x^u with f_branch(xs, xc, x^u)_u = target_u, by fixed-point iteration
        on the affine inverse (the bump part contracts by its C^1 size)."""
        target_u = np.atleast_2d(np.asarray(target_u, dtype=float))
        xu = self.base.solve_unstable(branch, xs, xc, target_u)
        if not self.bumps:
            return xu
        s = self.s
        N = xu.shape[0]
        xs = np.broadcast_to(np.atleast_2d(xs), (N, s))
        xc = np.broadcast_to(np.asarray(xc, dtype=float).reshape(-1), (N,))
        for _ in range(60):
            X = np.concatenate([xs, xc[:, None], xu], axis=1)
            extra = self._bump_sum(X)
            if extra is None:
                break  # outside every bump the affine inverse is exact
            nxt = self.base.solve_unstable(branch, xs, xc, target_u - extra[:, s + 1:])
            err = np.max(np.abs(nxt - xu)) if nxt.size else 0.0
            xu = nxt
            if err <= tol:
                break
        return xu

    def solve_center_unstable(self, branch: str, xs, target_cu, tol: float = 1e-16) -> np.ndarray:
        target_cu = np.atleast_2d(np.asarray(target_cu, dtype=float))
        cu = self.base.solve_center_unstable(branch, xs, target_cu)
        if not self.bumps:
            return cu
        s = self.s
        xs = np.broadcast_to(np.atleast_2d(xs), (cu.shape[0], s))
        for _ in range(60):
            X = np.concatenate([xs, cu], axis=1)
            extra = self._bump_sum(X)
            if extra is None:
                break
            nxt = self.base.solve_center_unstable(branch, xs, target_cu - extra[:, s:])
            err = np.max(np.abs(nxt - cu)) if nxt.size else 0.0
            cu = nxt
            if err <= tol:
                break
        return cu

    # -- continued saddles and their stable manifolds ----------------------
    def continued_saddles(self) -> dict:
        if self._saddles is None:
            b = self.base
            self._saddles = {
                "P": continue_fixed_point(self, "A", b.P.to_vector()),
                "Q": continue_fixed_point(self, "B", b.Q.to_vector()),
            }
        return self._saddles

    def reference_graphs(self):
        if self._refs is None:
            sad = self.continued_saddles()
            if not self.bumps:
                self._refs = (StableGraph.flat(sad["P"][0][self.s], sad["P"][0][self.s + 1:]),
                              StableGraph.flat(sad["Q"][0][self.s], sad["Q"][0][self.s + 1:]))
            else:
                self._refs = (ShotStableGraph(self, "A", sad["P"][0]),
                              ShotStableGraph(self, "B", sad["Q"][0]))
        return self._refs


def continue_fixed_point(fmap, branch: str, x0, tol: float = 1e-14):
    """Newton continuation of a fixed point of one branch; returns (x, iterations)."""
    x = np.asarray(x0, dtype=float).copy()
    eye = np.eye(x.size)
    for it in range(1, NEWTON_MAX + 1):
        F = fmap.eval(branch, x[None, :])[0] - x
        J = fmap.jac(branch, x[None, :])[0] - eye
        dx = np.linalg.solve(J, F)
        x = x - dx
        if not np.all(np.isfinite(x)):
            break
        if np.max(np.abs(dx)) <= tol:
            return x, it
    raise ContinuationError(f"Newton continuation of the branch-{branch} fixed point failed")


class ShotStableGraph(StableGraph):
    """Local stable manifold of a continued saddle, evaluated by shooting.

    For each x^s the (x^c, x^u) part is found so that the branch orbit of
    length SHOOT_STEPS ends on the saddle's (x^c, x^u); the terminal error
    is damped by the central/unstable expansion along the way.
    """

    def __init__(self, fmap, branch: str, saddle: np.ndarray, k: int = 65):
        object.__setattr__(self, "fmap", fmap)
        object.__setattr__(self, "branch", branch)
        object.__setattr__(self, "saddle", np.asarray(saddle, dtype=float))
        s = fmap.s
        axes = tuple(np.linspace(-1, 1, k) for _ in range(s)) if s <= 2 else \
            tuple(np.linspace(-1, 1, 9) for _ in range(s))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = self.shoot(pts).reshape(tuple(len(a) for a in axes) + (1 + fmap.u,))
        super().__init__(self.saddle[s:], axes, vals)

    def _free_from(self, S) -> int:
        """First step J from which the rest of the shot orbit provably avoids
        every bump: from there on the map is affine, the stable part contracts
        towards the saddle and (x^c, x^u) sits exactly at the saddle's value."""
        s = self.fmap.s
        ps, pcu = self.saddle[:s], self.saddle[s:]
        rho = np.max(np.linalg.norm(S - ps, axis=2), axis=1)  # per step
        free = np.ones_like(rho, dtype=bool)
        for b in self.fmap.bumps:
            ds = np.maximum(0.0, np.linalg.norm(b.center[:s] - ps) - rho)
            dcu = np.linalg.norm(b.center[s:] - pcu)
            free &= ds ** 2 + dcu ** 2 >= b.radius ** 2
        # need the tail from J on to be free: take the first index after the last non-free one
        bad = np.flatnonzero(~free)
        return 0 if bad.size == 0 else int(bad[-1]) + 1

    def shoot(self, xs, max_sweeps: int = 60) -> np.ndarray:
        f, b, s = self.fmap, self.branch, self.fmap.s
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        N, K = xs.shape[0], SHOOT_STEPS
        cu_end = np.broadcast_to(self.saddle[s:], (N, self.saddle.size - s))
        S = np.zeros((K + 1, N, s))
        CU = np.broadcast_to(cu_end, (K + 1,) + cu_end.shape).copy()
        S[0] = xs
        for j in range(K):
            S[j + 1] = f.eval(b, np.concatenate([S[j], CU[j]], axis=1))[:, :s]
        k_eff = min(K, self._free_from(S))
        while True:
            prev = None
            for _ in range(max_sweeps):
                for j in range(k_eff - 1, -1, -1):
                    CU[j] = f.solve_center_unstable(b, S[j], CU[j + 1])
                for j in range(k_eff):
                    S[j + 1] = f.eval(b, np.concatenate([S[j], CU[j]], axis=1))[:, :s]
                if prev is not None and np.max(np.abs(CU[0] - prev)) <= 1e-16:
                    break
                prev = CU[0].copy()
            need = min(K, self._free_from(S[:k_eff + 1]) if k_eff < K else K)
            if need <= k_eff:
                return CU[0].copy()
            for j in range(k_eff, K):
                S[j + 1] = f.eval(b, np.concatenate([S[j], CU[j]], axis=1))[:, :s]
            k_eff = K

    def __call__(self, xs) -> np.ndarray:
        return self.shoot(xs)


# -- construction ----------------------------------------------------------

def perturbed_map(m: BlenderModel, p) -> PerturbedMap:
    parts = _flatten(p)
    base = m
    bumps = []
    for q in parts:
        if isinstance(q, ParamJitter):
            base = base.replace(lam=base.lam + q.dlambda, mu=base.mu + q.dmu)
        elif isinstance(q, Bump):
            if q.center.size != m.n or q.amplitude.size != m.n:
                raise ValueError("bump center/amplitude dimension mismatch")
            bumps.append(q)
        else:
            raise TypeError(f"unknown perturbation {q!r}")
    c1 = p.c1_bound(m)
    if not np.isfinite(c1):
        raise ValueError("perturbation c1_bound must be finite")
    for q in bumps:
        cu = q.center[m.s + 1:]
        for br in BRANCHES:
            d = m.dom(br)
            for edge in np.concatenate([d.lo, d.hi]).reshape(2, -1):
                if np.any(np.abs(edge - cu) < q.radius):
                    warnings.warn("bump support crosses a branch-domain boundary; "
                                  "BH1 connectivity must be rechecked", BumpWarning, stacklevel=2)
                    break
    return PerturbedMap(base, tuple(bumps), float(c1))


def random_perturbations(m: BlenderModel, n: int, c1_max: float, seed: int = 0, focus=None) -> list:
    """Random perturbations with c1_bound <= c1_max, cycling through parameter
    jitters, bumps inside a branch domain, bumps near ``focus`` (e.g. a fold
    apex, so that the bump reaches the orbits that decide the tangency) and
    jitter+bump composites. Bump supports never cross a branch-domain boundary."""
    rng = np.random.default_rng(seed)
    if focus is None:
        focus = np.concatenate([np.zeros(m.s), [0.5 * m.q_central], np.zeros(m.u)])
    focus = np.asarray(focus, dtype=float)

    def jitter(b):
        dl = rng.uniform(-1, 1) * b / max(1.0, m.delta + 1) * 0.5
        dm = rng.uniform(-1, 1) * b * 0.5
        return ParamJitter(dl, dm)

    def fit(center, r):
        # shrink the radius until the support stays inside one branch domain
        cu = center[m.s + 1:]
        for br in BRANCHES:
            d = m.dom(br)
            if np.all(d.contains(cu)):
                room = float(np.min(np.minimum(cu - d.lo, d.hi - cu)))
                return min(r, 0.95 * room)
        raise ValueError("bump centre outside both branch domains")

    def amplitude(b, r):
        a = rng.normal(size=m.n)
        return a * b / (np.linalg.norm(a) * max(1.0, BUMP_SLOPE_MAX / r))

    def domain_bump(b):
        d = m.dom(BRANCHES[rng.integers(2)])
        r = min(rng.uniform(0.04, 0.08), 0.45 * float(np.min(d.hi - d.lo)))
        cu = rng.uniform(d.lo + r, d.hi - r)
        c = np.concatenate([rng.uniform(-0.5, 0.5, m.s), [rng.uniform(0.0, m.q_central)], cu])
        r = fit(c, r)
        return Bump(c, r, amplitude(b, r))

    def focused_bump(b):
        r = rng.uniform(0.04, 0.08)
        c = focus + rng.uniform(-0.5, 0.5, m.n) * r
        r = fit(c, r)
        return Bump(c, r, amplitude(b, r))

    out = []
    for i in range(n):
        budget = c1_max * rng.uniform(0.5, 1.0)
        kind = i % 4
        if kind == 0:
            p = jitter(budget)
        elif kind == 1:
            p = domain_bump(budget)
        elif kind == 2:
            p = focused_bump(budget)
        else:
            p = Composite((jitter(budget / 2), focused_bump(budget / 2)))
        out.append(p)
    return out


# -- robustness suite ------------------------------------------------------

def _run_case(args):
    from .axioms import certify_blender
    from .folding import locate_tangency, make_quadratic_fold
    m, p, fold_spec, cones, n_samples, in_margin, angle_tol = args
    rec = {"perturbation": p.to_json(), "c1_bound": p.c1_bound(m), "in_margin": in_margin}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BumpWarning)
        pm = perturbed_map(m, p)
    try:
        sad = pm.continued_saddles()
    except ContinuationError as e:
        rec.update(status="out_of_neighborhood", error=str(e), passed=False)
        return rec
    rec["newton_iterations"] = {k: v[1] for k, v in sad.items()}
    rec["central_gap"] = float(sad["Q"][0][m.s] - sad["P"][0][m.s])
    cert = certify_blender(pm, cones=cones, n_samples=n_samples)
    rec["certificate"] = {k: v.to_json() for k, v in cert.verdicts.items()}
    rec["certified"] = cert.certified
    rec["min_margin"] = float(cert.min_margin)
    if not cert.certified:
        rec.update(status=cert.status, passed=False)
        return rec
    try:
        fold = make_quadratic_fold(pm, fold_spec.get("saddle", "P"), fold_spec.get("apex", 0.05),
                                   fold_spec.get("lip", 0.0))
        res = locate_tangency(fold, n_iter=fold_spec.get("n_iter", 12), tol=fold_spec.get("tol", 1.0),
                              alpha=cones[0])
        rec["tangency"] = {"t_star": res.t_star, "residual_angle": res.residual_angle,
                           "interval_width": res.width, "itinerary": res.itinerary,
                           "cone_margin": res.cone_margin, "bracketed": res.bracketed}
        ok = res.residual_angle < angle_tol and res.cone_margin > 0
    except (ValueError, RuntimeError) as e:
        rec["tangency"] = {"error": str(e)}
        ok = False
    rec.update(status="passed" if ok else "tangency_failed", passed=bool(ok))
    return rec


def robustness_suite(m: BlenderModel, perturbations: list, fold_spec: dict = None, jobs: int = 1,
                     n_samples: int = 200, angle_tol: float = 1e-6, cones=None) -> dict:
    """Re-certify and re-locate the tangency for every perturbation."""
    from .axioms import certify_blender
    base_cert = certify_blender(m)
    if not base_cert.certified:
        raise ValueError("base model is not certified")
    cones = cones or base_cert.cones
    limit = 0.1 * base_cert.min_margin
    fold_spec = dict(fold_spec or {})
    args = [(m, p, fold_spec, cones, n_samples, bool(p.c1_bound(m) <= limit), angle_tol)
            for p in perturbations]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_case, args))
    else:
        records = [_run_case(a) for a in args]
    for i, r in enumerate(records):
        r["index"] = i
        if not r["passed"] and not r["in_margin"]:
            r["status"] = "expected_failure:" + r["status"]
    safe = 0.0
    for r in sorted(records, key=lambda r: r["c1_bound"]):
        if not r["passed"]:
            break
        safe = r["c1_bound"]
    return {
        "schema_version": SCHEMA_VERSION,
        "base_min_margin": float(base_cert.min_margin),
        "c1_limit": float(limit),
        "alpha": cones[0],
        "alpha_prime": cones[1],
        "records": records,
        "summary": {
            "n": len(records),
            "passed": int(sum(r["passed"] for r in records)),
            "in_margin": int(sum(r["in_margin"] for r in records)),
            "in_margin_passed": int(sum(r["passed"] for r in records if r["in_margin"])),
            "max_safe_c1_bound": safe,
        },
    }
