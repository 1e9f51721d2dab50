"""Command-line front end.

Exit codes: 0 success, 1 unresolved result under ``--strict``, 2 usage or
input errors, 3 internal errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from dataclasses import replace

import numpy as np

from . import experiments as ex
from .harmonic import SphereFunction, decompose, sobolev_norm
from .jets import SingularityType, cr_norm_estimate
from .mesh import make_mesh
from .poly import PolySystem, bw_norm, l2_norm, loads, sample_kostlan
from .topology import UnresolvedError, default_curve_level, locus_invariants

EXIT_OK, EXIT_UNRESOLVED, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read_json(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None


def _read_poly(path: str):
    data = _read_json(path)
    try:
        return loads(json.dumps(data))
    except KeyError as e:
        raise UsageError(f"{path}: missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise UsageError(f"{path}: {e}") from None


def _emit(obj, out: str | None = None, name: str | None = None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if out:
        _write_file(os.path.join(out, name), text)


def _write_file(path: str, text: str):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e.strerror}") from None


# ---------------------------------------------------------------------------

def cmd_sample(a) -> int:
    if a.n < 1 or a.d < 0 or a.count < 0:
        raise UsageError("need n >= 1, d >= 0, count >= 0")
    files = []
    for i in range(a.count):
        P = sample_kostlan(a.n, a.d, ex.trial_rng(a.seed, (a.d,), i))
        name = f"poly_{i:04d}.json"
        _write_file(os.path.join(a.out, name), json.dumps(P.to_dict(), indent=2) + "\n")
        files.append(name)
    manifest = {"command": "sample", "n": a.n, "d": a.d, "count": a.count, "seed": a.seed,
                "stream": "SeedSequence(blake2b-128('seed|d|index'))", "files": files}
    _write_file(os.path.join(a.out, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(json.dumps(manifest, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_decompose(a) -> int:
    P = _read_poly(a.input)
    S = P if isinstance(P, PolySystem) else PolySystem((P,))
    res = SphereFunction.from_poly(S).to_dict()
    res["parts"] = [[{"l": l, "poly": H.to_dict()} for l, H in sorted(decompose(C).parts.items())]
                    for C in S]
    _emit(res, a.out, "decomposition.json")
    return EXIT_OK


def cmd_norms(a) -> int:
    P = _read_poly(a.input)
    S = P if isinstance(P, PolySystem) else PolySystem((P,))
    f = SphereFunction.from_poly(S)
    res = {"bw": bw_norm(S), "l2": float(np.sqrt(sum(l2_norm(c) ** 2 for c in S))),
           "q": a.q, "sobolev": sobolev_norm(f, a.q)}
    if a.r is not None:
        if S.n not in (1, 2):
            raise UsageError("C^r estimates need n in (1, 2)")
        lv = a.mesh_level if a.mesh_level is not None else ex._norm_level(S.n, S.degree)
        mesh = make_mesh(S.n, lv)
        res.update(r=a.r, cr=cr_norm_estimate(S, a.r, mesh), mesh=mesh.describe())
    _emit(res, a.out, "norms.json")
    return EXIT_OK


def cmd_topology(a) -> int:
    P = _read_poly(a.input)
    try:
        W = SingularityType.parse(a.W)
    except ValueError as e:
        raise UsageError(str(e)) from None
    S = P if isinstance(P, PolySystem) else PolySystem((P,))
    if S.m != 1:
        raise UsageError("topology of systems with m > 1 is not supported")
    try:
        inv = locus_invariants(S[0], W, a.mesh_level)
        res = {"status": "resolved", **inv.to_dict()}
        code = EXIT_OK
    except UnresolvedError as e:
        res = {"status": "unresolved", "reason": str(e)}
        code = EXIT_UNRESOLVED if a.strict else EXIT_OK
    if W.kind == "ZeroSet" and S.n == 2:
        res["mesh_level"] = a.mesh_level if a.mesh_level is not None else default_curve_level(S.degree)
    _emit(res, a.out, "topology.json")
    return code


def _experiment_config(a, **extra) -> ex.ExperimentConfig:
    over = dict(seed=a.seed, trials=a.trials, regime=a.regime, c1=a.c1, out=a.out,
                workers=a.workers, verbose=a.verbose or None)
    if a.b is not None:
        over["b"] = ex.coerce_field("b", a.b)
    if a.degrees is not None:
        over["degrees"] = ex.coerce_field("degrees", a.degrees)
    if a.n is not None:
        over["n"] = a.n
    if a.W is not None:
        over["W"] = a.W
    if a.mesh_level is not None:
        over["mesh_level"] = a.mesh_level
    over.update(extra)
    cfg = ex.load_config(a.config, **over)
    if a.workers is None and "workers" not in _file_keys(a.config):
        cfg = replace(cfg, workers=os.cpu_count() or 1)
    return cfg


def _file_keys(path) -> set:
    if not path:
        return set()
    with open(path) as fh:
        return set(ex.parse_config_text(fh.read()))


def cmd_experiment(a) -> int:
    cfg = _experiment_config(a)
    res = ex.run_low_degree_experiment(cfg)
    _emit({"config_hash": res.manifest["config_hash"], "cells": res.table()})
    unresolved = sum(c.unresolved for c in res.cells)
    return EXIT_UNRESOLVED if a.strict and unresolved else EXIT_OK


def cmd_betti(a) -> int:
    cfg = _experiment_config(a, stability=False)
    res = ex.run_betti_tail(cfg, a.C)
    _emit({"config_hash": res.manifest["config_hash"], "rows": res.cells})
    unresolved = sum(r["unresolved"] for r in res.cells)
    return EXIT_UNRESOLVED if a.strict and unresolved else EXIT_OK


def cmd_calibrate(a) -> int:
    cfg = _experiment_config(a)
    res = ex.run_low_degree_experiment(cfg)
    try:
        values = [float(x) for x in a.c1_values.split(",") if x]
    except ValueError:
        raise UsageError(f"--c1-values: cannot parse {a.c1_values!r}") from None
    rows = ex.calibrate_c1(res, values)
    thresholds = ex.c1_threshold(res, a.target)
    out = {"config_hash": res.manifest["config_hash"], "rows": rows, "thresholds": thresholds}
    if cfg.out:
        _write_file(os.path.join(cfg.out, "calibration.csv"),
                    ex._csv_text(rows, list(rows[0]) if rows else ["c1"]))
        man = {**res.manifest, "experiment": "calibration", "c1_values": values,
               "thresholds": thresholds}
        _write_file(os.path.join(cfg.out, "calibration.manifest.json"),
                    json.dumps(man, indent=2, sort_keys=True) + "\n")
    _emit(out)
    return EXIT_OK


def cmd_inequality(a) -> int:
    degrees = tuple(range(a.d_min, a.d_max + 1))
    eye = np.eye(a.n + 1, dtype=int)
    alphas = ((0,) * (a.n + 1),) + tuple(tuple(row) for row in eye)
    try:
        cfg = ex.InequalityConfig(n=a.n, r=a.r, q=a.q, degrees=degrees, samples=a.samples,
                                  seed=a.seed, out=a.out or "", alphas=alphas)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rep = ex.run_inequality_suite(cfg)
    _emit(rep)
    return EXIT_OK if rep["passed"] else EXIT_UNRESOLVED


# ---------------------------------------------------------------------------

def _add_run_flags(p, with_config=True):
    if with_config:
        p.add_argument("--config", help="flat key = value file")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--regime", choices=["sqrtlog", "power", "linear"])
    p.add_argument("--b", help="comma-separated regime parameters")
    p.add_argument("--degrees", help="comma-separated degrees")
    p.add_argument("--n", type=int)
    p.add_argument("--W", help="ZeroSet, CriticalPoints or NondegenerateMinima")
    p.add_argument("--c1", type=float)
    p.add_argument("--mesh-level", type=int)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--strict", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lowdeg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="write Kostlan polynomials as JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decompose", help="harmonic pieces of a polynomial")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("norms", help="BW, L2, Sobolev and C^r norms")
    p.add_argument("input")
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--r", type=int)
    p.add_argument("--mesh-level", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("topology", help="invariants of a singular locus")
    p.add_argument("input")
    p.add_argument("--W", default="ZeroSet")
    p.add_argument("--mesh-level", type=int)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("experiment", help="low-degree truncation experiment")
    _add_run_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("betti", help="tail frequency of the Betti statistic")
    _add_run_flags(p)
    p.add_argument("--C", type=float, default=1.0)
    p.set_defaults(func=cmd_betti)

    p = sub.add_parser("calibrate", help="E_L frequencies over a sweep of c1")
    _add_run_flags(p)
    p.add_argument("--c1-values", default="0.25,0.5,1,2,4")
    p.add_argument("--target", type=float, default=0.9, help="E_L frequency the c1 threshold must reach")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("inequality", help="derivative and Sobolev inequality checks")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--q", type=float)
    p.add_argument("--d-min", type=int, default=5)
    p.add_argument("--d-max", type=int, default=40)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_inequality)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return a.func(a)
    except (UsageError, ex.ConfigError) as e:
        sys.stderr.write(f"lowdeg: error: {e}\n")
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
