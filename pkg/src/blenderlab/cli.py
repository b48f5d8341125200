"""Command line entry points: certify, tangency, sweep, robustness, export-disks.

Settings come from (highest precedence first) command-line flags, the
command's section of the ``--config`` INI file, its ``[model]`` section,
and built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .axioms import CERTIFIED, REFUTED, certify_blender, default_cones
from .disks import alpha_admissible, classify_position, random_affine_disks
from .folding import FoldError, TangencyError, locate_tangency, make_quadratic_fold
from .model import BlenderModel, default_instance, model_from_section
from .perturbation import (perturbation_from_json, random_perturbations,
                           robustness_suite)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_REFUTED, EXIT_INCONCLUSIVE, EXIT_UNCERTIFIED, EXIT_UNCONVERGED = 0, 1, 2, 3, 4, 5

SWEEP_COLUMNS = ["lambda", "mu", "delta", "alpha", "alpha_prime", "alpha_admissible", "status",
                 "BH1", "BH1_margin", "BH2", "BH2_margin", "BH3", "BH3_margin",
                 "BH4", "BH4_margin", "BH5", "BH5_margin", "BH6", "BH6_margin",
                 "t_star", "residual_angle"]

DEFAULTS = {
    "apex": 0.05, "n_iter": 60, "tol": 1e-2, "jobs": 1, "seed": 0, "saddle": "P", "lip": 0.0,
    "lambdas": "1.1 1.2 1.3 1.4 1.5 1.6 1.7 1.8 1.9",
    "mu_fractions": "0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9",
    "n": 20, "c1_fraction": 0.1, "samples": 500,
}


class UsageError(Exception):
    pass


# -- output helpers ----------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(obj, out) -> None:
    text = dumps(obj)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def csv_text(rows: list, columns: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\r\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()


# -- settings ------------------------------------------------------------------

class Settings:
    def __init__(self, args, command: str):
        self.args = args
        self.cp = configparser.ConfigParser()
        if args.config:
            try:
                read = self.cp.read(args.config, encoding="utf-8")
            except configparser.Error as e:
                raise UsageError(f"malformed config: {e}") from None
            if not read:
                raise UsageError(f"cannot read config file {args.config}")
        self.section = self.cp[command] if self.cp.has_section(command) else {}

    def get(self, name: str, kind=str, default=None):
        v = getattr(self.args, name, None)
        if v is not None:
            return v
        for key in (name, name.replace("_", "-")):
            if key in self.section:
                return _convert(self.section[key], kind, key)
        if default is not None:
            return default
        d = DEFAULTS.get(name)
        return None if d is None else _convert(d, kind, name) if isinstance(d, str) and kind is not str else d


def _convert(text, kind, key):
    try:
        if kind is bool:
            return str(text).strip().lower() in ("1", "true", "yes", "on")
        return kind(text)
    except (TypeError, ValueError):
        raise UsageError(f"bad value for {key}: {text!r}") from None


def build_model(st: Settings) -> BlenderModel:
    try:
        if st.cp.has_section("model") and "S1" in st.cp["model"]:
            m = model_from_section(st.cp["model"])
        else:
            m = default_instance()
        sec = st.cp["model"] if st.cp.has_section("model") else {}
        kw = {}
        for flag, field in (("lambda_", "lam"), ("mu", "mu"), ("delta", "delta")):
            key = "lambda" if flag == "lambda_" else flag
            v = getattr(st.args, flag, None)
            if v is None and key in sec:
                v = float(sec[key])
            if v is not None:
                kw[field] = v
        return m.replace(**kw) if kw else m
    except (ValueError, KeyError) as e:
        raise UsageError(f"invalid model: {e}") from None


def _cones(m, alpha):
    if alpha is None:
        return default_cones(m)
    a, ap = default_cones(m)
    ratio = ap / a if a > 0 else 0.5
    return float(alpha), float(alpha) * ratio


def _floats(text: str, key: str) -> list:
    try:
        return [float(x) for x in str(text).replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"bad number list for {key}: {text!r}") from None


# -- commands ------------------------------------------------------------------

def cmd_certify(args) -> int:
    st = Settings(args, "certify")
    m = build_model(st)
    cones = _cones(m, st.get("alpha", float))
    cert = certify_blender(m, cones=cones, n_samples=st.get("samples", int), seed=st.get("seed", int))
    doc = cert.to_json()
    doc["model"] = {"lambda": m.lam, "mu": m.mu, "delta": m.delta, "s": m.s, "u": m.u}
    write_json(doc, st.get("out"))
    return {CERTIFIED: EXIT_OK, REFUTED: EXIT_REFUTED}.get(cert.status, EXIT_INCONCLUSIVE)


def cmd_tangency(args) -> int:
    st = Settings(args, "tangency")
    m = build_model(st)
    cones = _cones(m, st.get("alpha", float))
    force = bool(st.get("force", bool, default=False))
    cert = certify_blender(m, cones=cones, seed=st.get("seed", int))
    if not cert.certified and not force:
        print(f"model is not certified ({cert.status}); use --force to run anyway", file=sys.stderr)
        return EXIT_UNCERTIFIED
    try:
        fold = make_quadratic_fold(m, st.get("saddle"), st.get("apex", float), st.get("lip", float))
        res = locate_tangency(fold, n_iter=st.get("n_iter", int), tol=st.get("tol", float), alpha=cones[0])
    except FoldError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TangencyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNCONVERGED
    doc = res.to_json(with_orbit=True)
    doc["certificate_status"] = cert.status
    write_json(doc, st.get("out"))
    if not res.converged:
        print(f"unconverged: interval width {res.width:.3g} >= tol {st.get('tol', float):.3g}", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _sweep_row(job):
    m, alpha, seed, samples, tangency, apex = job
    row = {"lambda": m.lam, "mu": m.mu, "delta": m.delta}
    cones = _cones(m, alpha)
    cert = certify_blender(m, cones=cones, n_samples=samples, seed=seed)
    row.update(alpha=cones[0], alpha_prime=cones[1], alpha_admissible=cert.alpha_admissible,
               status=cert.status)
    for k, v in cert.verdicts.items():
        row[k] = v.status
        row[k + "_margin"] = v.margin if np.isfinite(v.margin) else None
    row["t_star"] = row["residual_angle"] = None
    if tangency and cert.certified:
        try:
            fold = make_quadratic_fold(m, "P", apex * m.q_central)
            res = locate_tangency(fold, n_iter=20, tol=1.0, alpha=cones[0])
            row["t_star"], row["residual_angle"] = res.t_star, res.residual_angle
        except (FoldError, TangencyError):
            pass
    return _clean(row)


def cmd_sweep(args) -> int:
    st = Settings(args, "sweep")
    base = build_model(st)
    lambdas = _floats(st.get("lambdas"), "lambdas")
    fracs = _floats(st.get("mu_fractions"), "mu_fractions")
    if not lambdas or not fracs:
        raise UsageError("empty sweep grid")
    alpha = st.get("alpha", float)
    seed, samples = st.get("seed", int), st.get("samples", int, default=100)
    tangency = bool(st.get("tangency", bool, default=False))
    apex_frac = float(st.get("apex_fraction", float, default=0.5))
    jobs = []
    for lam in lambdas:
        for fr in fracs:
            try:
                m = base.replace(lam=lam, mu=fr * (lam - 1) * base.delta)
            except ValueError as e:
                raise UsageError(f"grid point lambda={lam}, fraction={fr}: {e}") from None
            jobs.append((m, alpha, seed, samples, tangency, apex_frac))
    n_jobs = st.get("jobs", int)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            rows = list(ex.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    doc = {"schema_version": SCHEMA_VERSION, "columns": SWEEP_COLUMNS, "rows": rows}
    out = st.get("out")
    if out:
        write_json(doc, out)
        Path(out).with_suffix(".csv").write_text(csv_text(rows, SWEEP_COLUMNS), encoding="utf-8")
    else:
        sys.stdout.write(csv_text(rows, SWEEP_COLUMNS))
    return EXIT_OK


def cmd_robustness(args) -> int:
    st = Settings(args, "robustness")
    m = build_model(st)
    cert = certify_blender(m)
    if not cert.certified:
        print(f"base model is not certified ({cert.status})", file=sys.stderr)
        return EXIT_UNCERTIFIED
    apex = st.get("apex", float)
    src = st.get("perturbations")
    if src:
        try:
            perts = [perturbation_from_json(d) for d in json.loads(Path(src).read_text())]
        except (OSError, ValueError, KeyError) as e:
            raise UsageError(f"cannot read perturbations from {src}: {e}") from None
    else:
        c1_max = st.get("c1_fraction", float) * cert.min_margin
        focus = np.concatenate([np.zeros(m.s), [apex], np.zeros(m.u)])
        perts = random_perturbations(m, st.get("n", int), c1_max, st.get("seed", int), focus)
    fold_spec = {"apex": apex, "saddle": st.get("saddle"), "lip": st.get("lip", float),
                 "n_iter": st.get("n_iter", int, default=12)}
    rep = robustness_suite(m, perts, fold_spec, jobs=st.get("jobs", int),
                           n_samples=st.get("samples", int, default=200))
    write_json(rep, st.get("out"))
    s = rep["summary"]
    return EXIT_OK if s["in_margin_passed"] == s["in_margin"] else EXIT_REFUTED


DISK_COLUMNS = ["kind", "t", "position", "xs0", "Ls", "xc0", "lc", "lip"]


def _flat(a) -> str:
    return " ".join(repr(float(x)) for x in np.ravel(a))


def cmd_export_disks(args) -> int:
    st = Settings(args, "export-disks")
    m = build_model(st)
    try:
        fold = make_quadratic_fold(m, st.get("saddle"), st.get("apex", float), st.get("lip", float))
    except FoldError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    n_t = st.get("n_t", int, default=33)
    n_random = st.get("n", int, default=100)
    ts = np.linspace(0, 1, n_t)
    batch = fold.disks(ts)
    records = []
    for i, t in enumerate(ts):
        records.append(("fold", float(t), batch.disk(i)))
    rng = np.random.default_rng(st.get("seed", int))
    q = m.q_central
    rb = random_affine_disks(rng, m, n_random, 0.9 * alpha_admissible(m), (-0.25 * q, 1.25 * q))
    for i in range(n_random):
        records.append(("random", None, rb.disk(i)))
    rows = []
    for kind, t, d in records:
        rec = d.to_json()
        rec.update(kind=kind, t=t, position=classify_position(d, m).kind)
        rows.append(rec)
    out = st.get("out")
    if out and str(out).endswith(".csv"):
        flat = [{**r, "xs0": _flat(r["xs0"]), "Ls": _flat(r["Ls"]), "lc": _flat(r["lc"])} for r in rows]
        Path(out).write_text(csv_text(flat, DISK_COLUMNS), encoding="utf-8")
    else:
        write_json({"schema_version": SCHEMA_VERSION, "s": m.s, "u": m.u,
                    "references": {"P": {"xc": 0.0, "xu": [0.0] * m.u},
                                   "Q": {"xc": q, "xu": m.horseshoe.a_u.tolist()}},
                    "disks": rows}, out)
    return EXIT_OK


COMMANDS = {"certify": cmd_certify, "tangency": cmd_tangency, "sweep": cmd_sweep,
            "robustness": cmd_robustness, "export-disks": cmd_export_disks}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blenderlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file with [model] and per-command sections")
        sp.add_argument("--default", action="store_true", help="use the built-in default instance")
        sp.add_argument("--lambda", dest="lambda_", type=float)
        sp.add_argument("--mu", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--alpha", type=float, help="cone parameter (default: derived from the model)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--out", help="output path (default: standard output)")
        sp.add_argument("--samples", type=int, help="Monte Carlo disks per position class")
        if name in ("tangency", "robustness", "export-disks", "sweep"):
            sp.add_argument("--apex", type=float)
        if name in ("tangency", "robustness"):
            sp.add_argument("--n-iter", dest="n_iter", type=int)
        if name in ("tangency", "robustness", "export-disks"):
            sp.add_argument("--saddle", choices=("P", "Q"))
            sp.add_argument("--lip", type=float)
        if name == "tangency":
            sp.add_argument("--tol", type=float)
            sp.add_argument("--force", action="store_true", default=None)
        if name == "sweep":
            sp.add_argument("--lambdas")
            sp.add_argument("--mu-fractions", dest="mu_fractions")
            sp.add_argument("--tangency", action="store_true", default=None)
        if name in ("robustness", "export-disks"):
            sp.add_argument("--n", type=int, help="number of random perturbations or disks")
        if name == "robustness":
            sp.add_argument("--perturbations", help="JSON list of perturbations")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep" and args.apex is not None:
        args.apex_fraction = args.apex
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
