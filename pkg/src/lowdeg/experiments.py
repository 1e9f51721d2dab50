"""Reproducible Monte Carlo experiments on low-degree truncations.

Every trial draws its own generator from a hash of (master seed, degree
pattern, trial index), so results do not depend on how trials are spread
over workers.  Output is a CSV with one row per (d, L) cell and a JSON
manifest echoing the configuration.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .harmonic import SphereFunction, decompose, sobolev_norm, truncate
from .jets import SingularityType, cr_norm_estimate, discriminant_distance, stability_margin
from .mesh import circle_mesh, icosphere, icosphere_level_for, make_mesh
from .poly import (
    HomogeneousPoly,
    l2_inner,
    partial_derivative,
    sample_kostlan,
    sample_kostlan_system,
)
from .topology import (
    CONSISTENT,
    INCONSISTENT,
    UNRESOLVED,
    UnresolvedError,
    betti_statistic,
    locus_invariants,
)

SCHEMA_VERSION = 1
Z95 = statistics.NormalDist().inv_cdf(0.975)


# ---------------------------------------------------------------------------
# schedules and intervals

def parity_level(d: int, L: int) -> int:
    """Clamp to [0, d] and lower by one when ``d - L`` is odd (raise from 0 instead)."""
    L = min(max(L, 0), d)
    if (d - L) % 2:
        L = L - 1 if L > 0 else L + 1
    return L


@dataclass(frozen=True)
class RegimeSchedule:
    kind: str
    b: float

    def __post_init__(self):
        if self.kind not in ("sqrtlog", "power", "linear"):
            raise ValueError(f"unknown regime {self.kind!r}")
        if not self.b >= 0:
            raise ValueError("b must be nonnegative")

    def raw(self, d: int) -> float:
        if self.kind == "sqrtlog":
            return self.b * math.sqrt(d * math.log(d)) if d > 1 else 0.0
        if self.kind == "power":
            return float(d) ** self.b
        return self.b * d

    def level(self, d: int) -> int:
        """Truncation level: nearest integer, clamped to [0, d], lowered by one on parity mismatch."""
        return parity_level(d, int(math.floor(self.raw(d) + 0.5)))

    def label(self) -> str:
        return f"{self.kind}({self.b:g})"


@dataclass(frozen=True)
class TailEstimate:
    k: int
    N: int
    p: float
    lo: float
    hi: float

    def to_dict(self):
        return asdict(self)


def wilson(k: int, N: int, z: float = Z95) -> TailEstimate:
    """Wilson score interval for ``k`` successes in ``N`` trials."""
    if not 0 <= k <= N:
        raise ValueError("need 0 <= k <= N")
    if N == 0:
        return TailEstimate(0, 0, float("nan"), 0.0, 1.0)
    p = k / N
    z2 = z * z
    centre = (p + z2 / (2 * N)) / (1 + z2 / N)
    half = z * math.sqrt(p * (1 - p) / N + z2 / (4 * N * N)) / (1 + z2 / N)
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard rounding at the boundary so the interval always contains k/N
    return TailEstimate(k, N, p, min(lo, p), max(hi, p))


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1
    m: int = 1
    degrees: tuple = (64, 100, 144)
    W: str = "ZeroSet"
    regime: str = "sqrtlog"
    b: tuple = (1.0, 2.0, 3.0)
    levels: tuple = ()
    trials: int = 100
    seed: int = 0
    mesh_level: int = -1
    c1: float = 1.0
    stability: bool = True
    out: str = ""
    workers: int = 1
    verbose: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        SingularityType.parse(self.W)
        self.schedules()

    @property
    def singularity(self) -> SingularityType:
        return SingularityType.parse(self.W)

    def schedules(self) -> list:
        return [RegimeSchedule(self.regime, float(b)) for b in self.b]

    def cells(self, d: int) -> list:
        """``(label, L)`` pairs evaluated at degree ``d``."""
        if self.levels:
            return [(f"L={L}", parity_level(d, int(L))) for L in self.levels if 0 <= int(L) <= d]
        return [(s.label(), s.level(d)) for s in self.schedules()]

    def mesh_for(self, d: int):
        lv = self.mesh_level
        if self.n == 1:
            if lv < 0:
                lv = max(0, math.ceil(math.log2(max(4 * d, 64) / 64)))
            return circle_mesh(lv)
        if self.n == 2:
            if lv < 0:
                lv = icosphere_level_for(4 * d * d)
            return icosphere(lv)
        raise ValueError("meshes are available for n in (1, 2)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["degrees"] = list(self.degrees)
        d["b"] = list(self.b)
        d["levels"] = list(self.levels)
        return d

    def canonical(self) -> str:
        """Key=value text of the result-determining fields (no output or worker settings)."""
        d = self.to_dict()
        for k in ("out", "workers", "verbose"):
            d.pop(k)
        return "".join(f"{k}={_fmt(v)}\n" for k, v in sorted(d.items()))

    def content_hash(self) -> str:
        """Git blob hash of the canonical text."""
        data = self.canonical().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


class ConfigError(ValueError):
    """Bad configuration text; ``line`` and ``key`` locate the problem."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def coerce_field(key: str, value: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if key not in types:
        raise ConfigError("unknown key", key=key)
    t = types[key]
    value = value.strip()
    try:
        if t == "int":
            return int(value)
        if t == "float":
            return float(value)
        if t == "bool":
            return _BOOL[value.lower()]
        if t == "tuple":
            parts = [x for x in value.replace(" ", "").split(",") if x]
            conv = float if key == "b" else int
            return tuple(conv(x) for x in parts)
        return value
    except (ValueError, KeyError):
        raise ConfigError(f"cannot parse {value!r} as {t}", key=key) from None


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", line=i)
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = coerce_field(key, value)
        except ConfigError as e:
            raise ConfigError(str(e).split(": ", 1)[-1], line=i, key=key) from None
    return out


def load_config(path: str | None = None, **overrides) -> ExperimentConfig:
    values = {}
    if path:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


# ---------------------------------------------------------------------------
# trials

def trial_seed(master_seed: int, degrees, trial: int) -> int:
    """128-bit stream key from a BLAKE2b digest of the trial coordinates."""
    text = f"{int(master_seed)}|{','.join(str(int(d)) for d in degrees)}|{int(trial)}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=16).digest(), "little")


def trial_rng(master_seed: int, degrees, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(trial_seed(master_seed, degrees, trial)))


@dataclass
class TrialRecord:
    trial: int
    seed: int
    d: int
    L: int
    label: str
    verdict: str
    invariants_p: dict | None = None
    invariants_q: dict | None = None
    margin: dict | None = None
    betti: int | None = None
    wall_time: float = 0.0

    def to_dict(self, with_time: bool = False) -> dict:
        d = asdict(self)
        if not with_time:
            d.pop("wall_time")
        return d


def _safe_invariants(f, W):
    try:
        return locus_invariants(f, W)
    except UnresolvedError:
        return None


def run_trial(cfg: ExperimentConfig, d: int, trial: int) -> list:
    """All cells of one trial at degree ``d``; the expensive parts are shared across ``L``."""
    t0 = time.perf_counter()
    W = cfg.singularity
    degrees = (d,) * cfg.m
    rng = trial_rng(cfg.seed, degrees, trial)
    P = sample_kostlan_system(cfg.n, degrees, rng)
    f = SphereFunction.from_poly(P)
    inv_p = _safe_invariants(f, W)
    betti = None
    if inv_p is not None and W.kind == "ZeroSet":
        betti = inv_p.data["count"] if inv_p.n == 1 else 2 * inv_p.data["components"]
    mesh = cfg.mesh_for(d) if cfg.stability else None
    dist = discriminant_distance(P, W, mesh) if cfg.stability else None
    by_level = {}
    out = []
    for label, L in cfg.cells(d):
        if L not in by_level:
            q = truncate(f, L)
            if L >= d:
                inv_q = inv_p
            else:
                try:
                    inv_q = _safe_invariants(q, W)
                except ValueError:          # truncation vanished identically
                    inv_q = None
            if inv_p is None or inv_q is None:
                verdict = UNRESOLVED
            else:
                verdict = CONSISTENT if inv_p.key() == inv_q.key() else INCONSISTENT
            margin = stability_margin(P, L, W, cfg.c1, mesh, dist, f).to_dict() if cfg.stability else None
            by_level[L] = (verdict, inv_q, margin)
        verdict, inv_q, margin = by_level[L]
        out.append(TrialRecord(
            trial, trial_seed(cfg.seed, degrees, trial), d, L, label, verdict,
            inv_p.to_dict() if inv_p and cfg.verbose else None,
            inv_q.to_dict() if inv_q and cfg.verbose else None,
            margin, betti,
        ))
    wall = time.perf_counter() - t0
    for r in out:
        r.wall_time = wall
    return out


def _trial_job(args):
    cfg, d, trial = args
    from threadpoolctl import threadpool_limits

    with threadpool_limits(1):
        return run_trial(cfg, d, trial)


def _map_trials(cfg: ExperimentConfig, d: int):
    jobs = [(cfg, d, t) for t in range(cfg.trials)]
    if cfg.workers == 1 or cfg.trials <= 1:
        for j in jobs:
            yield run_trial(*j)
        return
    with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
        yield from ex.map(_trial_job, jobs, chunksize=max(1, cfg.trials // (4 * cfg.workers)))


# ---------------------------------------------------------------------------
# aggregation and output

CSV_FIELDS = ["d", "label", "L", "trials", "consistent", "inconsistent", "unresolved",
              "p_consistent", "ci_low", "ci_high", "in_E_L", "p_E_L", "E_ci_low", "E_ci_high"]


@dataclass
class CellResult:
    d: int
    label: str
    L: int
    trials: int
    consistent: int
    inconsistent: int
    unresolved: int
    consistent_ci: TailEstimate
    in_E_L: int | None
    E_ci: TailEstimate | None

    def row(self) -> dict:
        r = {"d": self.d, "label": self.label, "L": self.L, "trials": self.trials,
             "consistent": self.consistent, "inconsistent": self.inconsistent,
             "unresolved": self.unresolved, "p_consistent": self.consistent_ci.p,
             "ci_low": self.consistent_ci.lo, "ci_high": self.consistent_ci.hi}
        if self.E_ci is None:
            r.update(in_E_L="", p_E_L="", E_ci_low="", E_ci_high="")
        else:
            r.update(in_E_L=self.in_E_L, p_E_L=self.E_ci.p, E_ci_low=self.E_ci.lo, E_ci_high=self.E_ci.hi)
        return r


def aggregate(cfg: ExperimentConfig, d: int, records: list) -> list:
    cells = []
    for j, (label, L) in enumerate(cfg.cells(d)):
        rs = [trial[j] for trial in records]
        counts = {v: sum(r.verdict == v for r in rs) for v in (CONSISTENT, INCONSISTENT, UNRESOLVED)}
        N = len(rs)
        assert sum(counts.values()) == N
        e = None
        k_e = None
        if cfg.stability:
            k_e = sum(bool(r.margin["in_E_L"]) for r in rs)
            e = wilson(k_e, N)
        cells.append(CellResult(d, label, L, N, counts[CONSISTENT], counts[INCONSISTENT],
                                counts[UNRESOLVED], wilson(counts[CONSISTENT], N), k_e, e))
    return cells


def _csv_text(rows: list, fieldnames: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _paths(out: str, stem: str):
    if not out:
        return None, None
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, f"{stem}.csv"), os.path.join(out, f"{stem}.manifest.json")


def _manifest(cfg: ExperimentConfig, kind: str, partial: bool, extra: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": kind,
        "config": cfg.to_dict(),
        "config_text": cfg.canonical(),
        "config_hash": cfg.content_hash(),
        "trial_stream": "SeedSequence(blake2b-128('seed|degrees|trial'))",
        "partial": partial,
        **extra,
    }


@dataclass
class ExperimentResult:
    cells: list
    records: list
    csv_text: str
    manifest: dict
    partial: bool = False

    def table(self) -> list:
        return [c.row() for c in self.cells]

    def cell(self, d: int, label: str | None = None, L: int | None = None) -> CellResult:
        for c in self.cells:
            if c.d == d and (label is None or c.label == label) and (L is None or c.L == L):
                return c
        raise KeyError((d, label, L))


def run_low_degree_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Consistency of loci of ``p`` and ``p|_L`` and the stability event, per (d, L) cell."""
    csv_path, man_path = _paths(cfg.out, "low_degree")
    cells, records = [], []
    notes = {}
    if cfg.singularity.kind != "ZeroSet":
        notes["verdict_note"] = "index-count agreement is a necessary condition only"

    def flush(partial):
        text = _csv_text([c.row() for c in cells], CSV_FIELDS)
        extra = {"cells": len(cells), **notes,
                 "unresolved": {f"{c.d}/{c.label}": c.unresolved for c in cells}}
        if cfg.stability:
            extra["meshes"] = {str(d): cfg.mesh_for(d).describe() for d in cfg.degrees}
        if cfg.verbose:
            extra["trials"] = [r.to_dict() for rs in records for r in rs]
        man = _manifest(cfg, "low_degree", partial, extra)
        if csv_path:
            _write(csv_path, text)
            _write(man_path, json.dumps(man, indent=2, sort_keys=True) + "\n")
        return text, man

    try:
        for d in cfg.degrees:
            recs = list(_map_trials(cfg, int(d)))
            records.extend(recs)
            cells.extend(aggregate(cfg, int(d), recs))
            if csv_path and d != cfg.degrees[-1]:
                flush(True)
    except (OSError, KeyboardInterrupt):
        flush(True)
        raise
    text, man = flush(False)
    return ExperimentResult(cells, records, text, man)


def calibrate_c1(result: ExperimentResult, c1_values) -> list:
    """E_L frequencies that the same trials would give under other values of ``c1``.

    Uses the recorded margins, so no trial is recomputed.
    """
    rows = []
    base = None
    for c in result.cells:
        rs = [t for trial in result.records for t in trial if t.d == c.d and t.label == c.label]
        for c1 in c1_values:
            k = 0
            for r in rs:
                m = r.margin
                if base is None:
                    base = result.manifest["config"]["c1"]
                dist = m["rhs"] / base
                k += bool(m["lhs"] < c1 * dist)
            est = wilson(k, len(rs))
            rows.append({"d": c.d, "label": c.label, "L": c.L, "c1": float(c1),
                         "in_E_L": k, "p_E_L": est.p, "ci_low": est.lo, "ci_high": est.hi,
                         "p_consistent": c.consistent_ci.p})
    return rows


def c1_threshold(result: ExperimentResult, target: float = 0.9) -> list:
    """Per cell, the smallest ``c1`` whose E_L frequency reaches ``target``.

    A trial is in E_L when ``lhs < c1 * dist``, so the answer is the next float
    above the ``ceil(target * N)``-th smallest ratio ``lhs / dist``.
    """
    if not 0 < target <= 1:
        raise ValueError("target must be in (0, 1]")
    base = result.manifest["config"]["c1"]
    rows = []
    for c in result.cells:
        rs = [t for trial in result.records for t in trial if t.d == c.d and t.label == c.label]
        ratios = []
        for r in rs:
            dist = r.margin["rhs"] / base
            ratios.append(r.margin["lhs"] / dist if dist > 0 else math.inf)
        ratios.sort()
        k = math.ceil(target * len(ratios) - 1e-9)
        c1 = float(np.nextafter(ratios[k - 1], math.inf)) if ratios else math.nan
        rows.append({"d": c.d, "label": c.label, "L": c.L, "target": target, "c1": c1,
                     "median_ratio": float(np.median(ratios)) if ratios else math.nan})
    return rows


# ---------------------------------------------------------------------------
# Betti tail

BETTI_FIELDS = ["d", "threshold", "trials", "unresolved", "exceed", "p", "ci_low", "ci_high", "mean_b"]


def _betti_job(args):
    cfg, d, trial = args
    rng = trial_rng(cfg.seed, (d,) * cfg.m, trial)
    P = sample_kostlan_system(cfg.n, (d,) * cfg.m, rng)
    try:
        return betti_statistic(P, cfg.singularity)
    except UnresolvedError:
        return None


def run_betti_tail(cfg: ExperimentConfig, C: float) -> ExperimentResult:
    """Frequency of ``b >= C d^n`` for the locus of a Kostlan ``p``, per degree."""
    csv_path, man_path = _paths(cfg.out, "betti_tail")
    rows = []
    for d in cfg.degrees:
        jobs = [(cfg, int(d), t) for t in range(cfg.trials)]
        if cfg.workers > 1 and cfg.trials > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                bs = list(ex.map(_betti_job, jobs, chunksize=max(1, cfg.trials // (4 * cfg.workers))))
        else:
            bs = [_betti_job(j) for j in jobs]
        good = [b for b in bs if b is not None]
        threshold = C * float(d) ** cfg.n
        k = sum(b >= threshold for b in good)
        est = wilson(k, len(bs))
        rows.append({"d": int(d), "threshold": threshold, "trials": len(bs),
                     "unresolved": len(bs) - len(good), "exceed": k, "p": est.p,
                     "ci_low": est.lo, "ci_high": est.hi,
                     "mean_b": float(np.mean(good)) if good else float("nan")})
    text = _csv_text(rows, BETTI_FIELDS)
    man = _manifest(cfg, "betti_tail", False, {"C": C})
    if csv_path:
        _write(csv_path, text)
        _write(man_path, json.dumps(man, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(rows, [], text, man)


# ---------------------------------------------------------------------------
# inequality suite

def _derivative(H: HomogeneousPoly, alpha) -> HomogeneousPoly:
    for i, k in enumerate(alpha):
        for _ in range(k):
            H = partial_derivative(H, i)
    return H


def random_harmonic(n: int, l: int, rng) -> HomogeneousPoly:
    """Top harmonic piece of a Kostlan form of degree ``l``."""
    return decompose(sample_kostlan(n, l, rng)).parts[l]


def seeley_ratio(H: HomogeneousPoly, alpha) -> float:
    """``int |d^alpha H|^2 / (l^(2|alpha|) int |H|^2)`` over the sphere."""
    a = int(sum(alpha))
    if a == 0:
        return 1.0
    D = _derivative(H, alpha)
    l = H.degree
    return l2_inner(D, D) / (float(l) ** (2 * a) * l2_inner(H, H))


def bounded(values) -> bool:
    """Max over the upper half of a sequence is at most twice the max over the lower half."""
    v = list(values)
    h = len(v) // 2
    lower, upper = v[:max(h, 1)], v[h:]
    return max(upper) <= 2.0 * max(lower)


def monomial_oracle(d: int, r: int = 1, q: float = 1.5) -> dict:
    """``|x_0^d|_{C^1}`` and ``|x_0^d|_{H^q}`` on S^2 from one-variable formulas.

    The Sobolev norm uses the Legendre expansion of ``t^d``; each ``P_l(x_0)``
    is a zonal harmonic with ``int_{S^2} P_l^2 = 4 pi / (2l + 1)``.
    """
    from numpy.polynomial import legendre

    if r != 1:
        raise ValueError("the closed form covers r = 1")
    c = legendre.poly2leg(np.eye(d + 1)[d])
    total = 0.0
    for l, a in enumerate(c):
        w = 1.0 if l == 0 else float(l) ** (2 * q)
        total += w * a * a * 4.0 * math.pi / (2 * l + 1)
    t = np.linspace(0.0, 1.0, 200001)
    vals = t ** (2 * d) + (d * t ** (d - 1)) ** 2 * (1 - t * t)
    return {"c1": float(np.sqrt(vals.max())), "hq": math.sqrt(total)}


@dataclass
class InequalityConfig:
    n: int = 2
    r: int = 1
    q: float | None = None
    degrees: tuple = tuple(range(5, 41))
    samples: int = 100
    ells: tuple = tuple(range(2, 17))
    seeley_samples: int = 50
    alphas: tuple = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))
    seed: int = 0
    mesh_level: int = -1
    out: str = ""

    def __post_init__(self):
        qmin = self.r + 0.5 * (self.n - 1)
        if self.q is None:
            self.q = qmin
        if self.q < qmin - 1e-12:
            raise ValueError(f"q must be at least r + (n-1)/2 = {qmin}")
        for a in self.alphas:
            if len(a) != self.n + 1:
                raise ValueError(f"multi-index {a} has the wrong length")


def run_inequality_suite(cfg: InequalityConfig) -> dict:
    """Calibrated derivative constants on harmonics and the C^r against H^q ratio."""
    seeley = {}
    for alpha in cfg.alphas:
        per_l = []
        for l in cfg.ells:
            rng = trial_rng(cfg.seed, (l, cfg.n), hash_alpha(alpha))
            per_l.append(max(seeley_ratio(random_harmonic(cfg.n, l, rng), alpha)
                             for _ in range(cfg.seeley_samples)))
        key = ",".join(map(str, alpha))
        seeley[key] = {"ells": list(cfg.ells), "beta_hat": per_l, "max": max(per_l),
                       "bounded": bounded(per_l),
                       "exact_one": all(v == 1.0 for v in per_l) if sum(alpha) == 0 else None}
    ratios = []
    for d in cfg.degrees:
        lv = cfg.mesh_level if cfg.mesh_level >= 0 else _norm_level(cfg.n, d)
        mesh = make_mesh(cfg.n, lv)
        best = 0.0
        for t in range(cfg.samples):
            P = sample_kostlan(cfg.n, d, trial_rng(cfg.seed, (d,), t))
            ratio = cr_norm_estimate(P, cfg.r, mesh) / (math.sqrt(d) * sobolev_norm(P, cfg.q))
            best = max(best, ratio)
        ratios.append(best)
    monomial = []
    if cfg.n == 2 and cfg.r == 1:
        for d in cfg.degrees:
            o = monomial_oracle(d, cfg.r, cfg.q)
            monomial.append(o["c1"] / (math.sqrt(d) * o["hq"]))
    report = {
        "n": cfg.n, "r": cfg.r, "q": cfg.q,
        "seeley": seeley,
        "cr_sobolev": {"degrees": list(cfg.degrees), "ratio_max": ratios,
                        "c_hat": max(ratios), "bounded": bounded(ratios)},
        "monomial": {"degrees": list(cfg.degrees), "ratio": monomial,
                     "below_c_hat": all(x <= max(ratios) for x in monomial) if monomial else None},
    }
    report["passed"] = all(s["bounded"] and s["exact_one"] is not False for s in seeley.values()) \
        and report["cr_sobolev"]["bounded"]
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        _write(os.path.join(cfg.out, "inequality.json"), json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def hash_alpha(alpha) -> int:
    return int("".join(str(int(a)) for a in alpha) or "0")


def _norm_level(n: int, d: int) -> int:
    if n == 1:
        return max(0, math.ceil(math.log2(max(4 * d, 64) / 64)))
    return icosphere_level_for(2 * d * d)
