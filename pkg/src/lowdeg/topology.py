"""Topological invariants of singular loci on S^1 and S^2.

Zero sets on the circle are counted by bracketing sign changes; curves on
S^2 are traced by marching triangles on an icosphere and summarized by the
adjacency tree of the complementary regions; critical points are found by
multistart Newton iteration in normal coordinates.  Every result is checked
at two resolutions and reported as unresolved when they disagree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .harmonic import SphereFunction
from .jets import (
    ZERO_SET,
    JetEvaluator,
    SingularityType,
    default_step,
    exp_map,
)
from .mesh import SphereMesh, icosphere, icosphere_level_for
from .poly import HomogeneousPoly, as_system, eval_poly

TIE_BREAK = 1e-12


class UnresolvedError(RuntimeError):
    """Two resolutions disagreed; ``results`` holds what each produced."""

    def __init__(self, message: str, results=None):
        super().__init__(message)
        self.results = results


def _scalar(f) -> tuple[HomogeneousPoly, int]:
    """Representative form and effective degree of a scalar sphere function."""
    if isinstance(f, SphereFunction):
        if f.m != 1:
            raise ValueError("expected a scalar function")
        eff = f.top_levels()[0]
        norm = math.sqrt(sum(float(t @ t) for t in f.coords[0].values()))
        P = f.representative[0]
    else:
        S = as_system(f)
        if S.m != 1:
            raise ValueError("expected a scalar function")
        P = S[0]
        eff, norm = P.degree, P.coeff_norm()
    if not norm > 1e-12:
        raise ValueError("function is identically zero")
    return P, eff


# ---------------------------------------------------------------------------
# S^1

def _circle(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _sign_change_roots(P: HomogeneousPoly, dP, K: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(K + 1) / K
    v = eval_poly(P, _circle(theta[:-1]))
    pos = v + TIE_BREAK * (v == 0) >= 0
    pos = np.append(pos, pos[0])
    idx = np.flatnonzero(pos[:-1] != pos[1:])
    lo, hi = theta[idx].copy(), theta[idx + 1].copy()
    plo = pos[idx]
    for _ in range(60):
        if np.all(hi - lo <= 1e-12):
            break
        mid = 0.5 * (lo + hi)
        pm = eval_poly(P, _circle(mid))
        pm = pm + TIE_BREAK * (pm == 0) >= 0
        same = pm == plo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    root = 0.5 * (lo + hi)
    # Newton polish, kept only where it stays inside the bracket
    for _ in range(3):
        x = _circle(root)
        val = eval_poly(P, x)
        der = dP(x)
        step = np.where(der != 0, val / np.where(der != 0, der, 1.0), 0.0)
        cand = root - step
        inside = (cand >= lo - 1e-12) & (cand <= hi + 1e-12)
        root = np.where(inside, cand, root)
    root = np.mod(root, 2.0 * np.pi)
    root[2.0 * np.pi - root < 1e-9] = 0.0
    root.sort()
    if root.size > 1:
        keep = np.concatenate([[True], np.diff(root) > 1e-9])
        root = root[keep]
        if root.size > 1 and root[0] + 2.0 * np.pi - root[-1] <= 1e-9:
            root = root[:-1]
    return root


def _angular_derivative(P: HomogeneousPoly):
    ev = JetEvaluator(P, 1)

    def dP(x):
        g = ev.ambient(x, 1)[1][:, 0]
        return -x[:, 1] * g[:, 0] + x[:, 0] * g[:, 1]

    return dP


def zeros_on_circle(f, grid_factor: int = 16) -> np.ndarray:
    """Sorted angles in ``[0, 2 pi)`` where the scalar function on S^1 vanishes."""
    P, eff = _scalar(f)
    if P.n_vars != 2:
        raise ValueError("zeros_on_circle needs a function on S^1")
    K = grid_factor * max(eff, 1)
    dP = _angular_derivative(P)
    coarse = _sign_change_roots(P, dP, K)
    fine = _sign_change_roots(P, dP, 2 * K)
    if coarse.size != fine.size:
        raise UnresolvedError(f"zero count changed from {coarse.size} to {fine.size} under grid doubling",
                              (coarse, fine))
    return fine


# ---------------------------------------------------------------------------
# S^2 curves

def _graph_components(n: int, edges: np.ndarray) -> np.ndarray:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    A = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)) if len(edges) \
        else coo_matrix((n, n))
    return connected_components(A, directed=False)[1]


def canonical_tree(n_nodes: int, edges) -> str:
    """Canonical string of an unrooted tree (rooted at its centre, children sorted)."""
    if n_nodes == 0:
        return ""
    adj = [[] for _ in range(n_nodes)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    deg = [len(x) for x in adj]
    layer = [i for i in range(n_nodes) if deg[i] <= 1]
    remaining = n_nodes
    while remaining > 2:
        remaining -= len(layer)
        nxt = []
        for u in layer:
            for v in adj[u]:
                deg[v] -= 1
                if deg[v] == 1:
                    nxt.append(v)
        layer = nxt
    centres = layer if layer else [0]

    def encode(root):
        out = {}
        stack = [(root, -1, False)]
        while stack:
            u, parent, done = stack.pop()
            if done:
                out[u] = "(" + "".join(sorted(out[v] for v in adj[u] if v != parent)) + ")"
            else:
                stack.append((u, parent, True))
                stack.extend((v, u, False) for v in adj[u] if v != parent)
        return out[root]

    return min(encode(c) for c in centres)


@dataclass(frozen=True)
class CurveResult:
    level: int
    components: int
    regions: int
    tree: str
    antipodal_pairs: bool

    def key(self):
        return (self.components, self.tree)

    def to_dict(self):
        return {"level": self.level, "components": self.components, "regions": self.regions,
                "tree": self.tree, "antipodal_pairs": self.antipodal_pairs}


def _curves_at(P: HomogeneousPoly, mesh: SphereMesh) -> CurveResult:
    V, F = mesh.vertices, mesh.triangles
    v = eval_poly(P, V)
    pos = v + TIE_BREAK * (v == 0) >= 0
    E = mesh.edges
    crossing = pos[E[:, 0]] != pos[E[:, 1]]
    # regions: same-sign vertex components
    same = E[~crossing]
    region = _graph_components(V.shape[0], same)
    n_regions = int(region.max()) + 1
    # curves: crossed triangles joined through their sign-changing sides
    TE = mesh.triangle_edges()
    tri, side = np.nonzero(crossing[TE])
    edge = TE[tri, side]
    order = np.argsort(edge, kind="stable")
    tri, edge = tri[order], edge[order]
    # every sign-changing edge borders exactly two (crossed) triangles
    pairs = tri.reshape(-1, 2)
    n_tri = F.shape[0]
    tri_label = _graph_components(n_tri, pairs)
    crossed_tris = np.unique(tri)
    used, curve_of_tri = np.unique(tri_label[crossed_tris], return_inverse=True)
    n_curves = used.size
    relabel = np.full(n_tri, -1)
    relabel[crossed_tris] = curve_of_tri
    cross_edges = edge[0::2]
    curve_of_edge = relabel[pairs[:, 0]]
    # each curve separates two regions; read them off one edge per curve
    first = np.unique(curve_of_edge, return_index=True)[1]
    ra = region[E[cross_edges[first], 0]]
    rb = region[E[cross_edges[first], 1]]
    tree_edges = sorted({(int(min(x, y)), int(max(x, y))) for x, y in zip(ra, rb)})
    if n_regions != n_curves + 1 or len(tree_edges) != n_curves:
        raise UnresolvedError(
            f"region graph is not a tree at level {mesh.level} ({n_regions} regions, {n_curves} curves)"
        )
    tree = canonical_tree(n_regions, tree_edges)
    # structural antipodal check: the image of a curve is a curve
    lookup = np.full(E.shape[0], -1)
    lookup[cross_edges] = curve_of_edge
    image = lookup[mesh.edge_antipodes()[cross_edges]]
    ok = bool(np.all(image >= 0)) and np.unique(np.stack([curve_of_edge, image], 1), axis=0).shape[0] == n_curves
    return CurveResult(mesh.level, n_curves, n_regions, tree, ok)


def default_curve_level(degree: int) -> int:
    """Icosphere level whose edges are well below the feature size ``1/d``."""
    return max(3, math.ceil(math.log2(2.2 * max(degree, 1))))


@dataclass(frozen=True)
class CurveInvariants:
    components: int
    tree: str
    certified: bool
    results: tuple

    def to_dict(self):
        return {"components": self.components, "tree": self.tree, "certified": self.certified,
                "levels": [r.to_dict() for r in self.results]}


def curve_components_s2(f, level: int | None = None, strict: bool = False, refine: int = 2) -> CurveInvariants:
    """Curves of a scalar function on S^2, certified by agreement of two consecutive levels.

    Starts with levels ``(s, s + 1)``; on disagreement the pair slides up one
    level, at most ``refine`` times.
    """
    P, eff = _scalar(f)
    if P.n_vars != 3:
        raise ValueError("curve_components_s2 needs a function on S^2")
    s = default_curve_level(eff) if level is None else level
    cache = {}

    def at(lv):
        if lv not in cache:
            try:
                cache[lv] = _curves_at(P, icosphere(lv))
            except UnresolvedError:
                if strict:
                    raise
                cache[lv] = None
        return cache[lv]

    for lv in range(s, s + refine + 1):
        a, b = at(lv), at(lv + 1)
        if a is not None and b is not None and a.key() == b.key():
            return CurveInvariants(b.components, b.tree, True, (a, b))
    if strict:
        raise UnresolvedError(f"curve invariants differ between levels {s} and {s + refine + 1}",
                              tuple(cache[k] for k in sorted(cache)))
    best = next((cache[k] for k in sorted(cache, reverse=True) if cache[k] is not None), None)
    if best is None:
        return CurveInvariants(-1, "", False, ())
    return CurveInvariants(best.components, best.tree, False,
                           tuple(cache[k] for k in sorted(cache) if cache[k] is not None))


# ---------------------------------------------------------------------------
# critical points

@dataclass(frozen=True)
class CriticalPointSet:
    points: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    degenerate: np.ndarray
    level: int

    @property
    def clean(self) -> bool:
        return not bool(np.any(self.degenerate))

    def counts(self, n: int) -> tuple:
        return tuple(int(np.sum(self.indices == k)) for k in range(n + 1))

    def euler_sum(self) -> int:
        return int(sum((-1) ** int(k) for k in self.indices))

    def to_dict(self):
        return {"points": self.points.tolist(), "indices": self.indices.tolist(),
                "values": self.values.tolist(), "degenerate": self.degenerate.tolist(),
                "level": self.level}


def critical_point_ceiling(n: int, d: int) -> int:
    """``2 sum_{k=0}^{n} (d-1)^k``."""
    return 2 * sum((d - 1) ** k for k in range(n + 1))


def _newton(ev: JetEvaluator, X: np.ndarray, cap: float, iters: int = 60, tol: float = 1e-12):
    X = X.copy()
    done = np.zeros(len(X), dtype=bool)
    for _ in range(iters):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        F, T = ev.tangential(X[idx], 2)
        g, H = T[1][:, 0], T[2][:, 0]
        try:
            u = -np.linalg.solve(H, g[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            u = -np.stack([np.linalg.lstsq(h, gg, rcond=None)[0] for h, gg in zip(H, g)])
        nrm = np.linalg.norm(u, axis=1)
        u *= np.minimum(1.0, cap / np.maximum(nrm, 1e-300))[:, None]
        X[idx] = exp_map(X[idx], np.einsum("kia,ka->ki", F, u))
        done[idx] = nrm < tol
    F, T = ev.tangential(X, 2)
    return X, T


def _dedup(X: np.ndarray, tol: float) -> np.ndarray:
    keep = []
    for i in range(len(X)):
        if keep:
            # chord length: arccos cannot resolve angles near 1e-8
            if np.any(np.linalg.norm(X[keep] - X[i], axis=1) < tol):
                continue
        keep.append(i)
    return np.array(keep, dtype=int)


def _critical_once(P: HomogeneousPoly, level: int) -> CriticalPointSet:
    nv = P.n_vars
    ev = JetEvaluator(P, 2)
    if nv == 2:
        K = max(64, 16 * P.degree) << level
        th = 2 * np.pi * np.arange(K) / K
        starts = _circle(th)
    else:
        starts = np.array(icosphere(level).vertices)
    X, T = _newton(ev, starts, cap=default_step(P.degree))
    g = T[1][:, 0]
    scale = max(float(np.max(np.abs(T[2]))), 1e-300)
    good = np.linalg.norm(g, axis=1) <= 1e-9 * scale
    X = X[good]
    H = T[2][good, 0]
    vals = T[0][good, 0]
    order = np.lexsort(X.T[::-1])
    X, H, vals = X[order], H[order], vals[order]
    keep = _dedup(X, 1e-8)
    X, H, vals = X[keep], H[keep], vals[keep]
    eig = np.linalg.eigvalsh(H) if len(H) else np.zeros((0, nv - 1))
    idx = np.sum(eig < 0, axis=1)
    degenerate = np.min(np.abs(eig), axis=1) < 1e-10 * scale if len(eig) else np.zeros(0, bool)
    return CriticalPointSet(X, idx, vals, degenerate, level)


def critical_points(f, level: int | None = None, retries: int = 2) -> CriticalPointSet:
    """Critical points of a scalar function on S^1 or S^2 with Morse indices.

    The start set is refined (up to ``retries`` extra levels) while a clean
    result fails the Euler characteristic check.
    """
    P, _ = _scalar(f)
    nv = P.n_vars
    if nv not in (2, 3):
        raise ValueError("critical points are supported on S^1 and S^2")
    d = P.degree
    if level is None:
        level = 0 if nv == 2 else icosphere_level_for(10 * max(d - 1, 1) ** 2)
    chi = 0 if nv == 2 else 2
    cps = None
    for extra in range(retries + 1):
        cps = _critical_once(P, level + extra)
        if not cps.clean:
            return cps
        if cps.euler_sum() == chi:
            break
    else:
        raise UnresolvedError(f"Euler sum {cps.euler_sum()} != {chi} after refinement", cps)
    if len(cps.points) > critical_point_ceiling(nv - 1, d):
        raise RuntimeError(f"{len(cps.points)} critical points exceed the ceiling for degree {d}")
    return cps


def critical_points_s2(f, level: int | None = None) -> CriticalPointSet:
    P, _ = _scalar(f)
    if P.n_vars != 3:
        raise ValueError("critical_points_s2 needs a function on S^2")
    return critical_points(P, level)


# ---------------------------------------------------------------------------
# invariants and comparison

@dataclass(frozen=True)
class LocusInvariants:
    kind: str
    n: int
    data: dict = field(default_factory=dict)

    def key(self):
        if self.kind == "ZeroSet" and self.n == 1:
            return ("zeros", self.data["count"])
        if self.kind == "ZeroSet":
            return ("curves", self.data["components"], self.data["tree"])
        if self.kind == "CriticalPoints":
            return ("critical", tuple(self.data["index_counts"]))
        return ("minima", self.data["minima"])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, **self.data}


def locus_invariants(f, W: SingularityType, level: int | None = None) -> LocusInvariants:
    """Invariants of the type-``W`` locus; raises ``UnresolvedError`` when uncertified."""
    P, _ = _scalar(f)
    n = P.n_vars - 1
    if W.kind == "ZeroSet":
        if n == 1:
            z = zeros_on_circle(f)
            return LocusInvariants("ZeroSet", 1, {"count": int(z.size), "angles": z.tolist()})
        if n == 2:
            c = curve_components_s2(f, level)
            if not c.certified:
                raise UnresolvedError("curve invariants not certified", c)
            return LocusInvariants("ZeroSet", 2, {"components": c.components, "tree": c.tree,
                                                  "certificate": c.to_dict()})
        raise ValueError("zero sets are supported on S^1 and S^2")
    cps = critical_points(P, level)
    if not cps.clean:
        raise UnresolvedError("degenerate critical point", cps)
    counts = cps.counts(n)
    if W.kind == "CriticalPoints":
        return LocusInvariants("CriticalPoints", n, {"index_counts": list(counts),
                                                     "points": cps.points.tolist(),
                                                     "indices": cps.indices.tolist()})
    return LocusInvariants("NondegenerateMinima", n, {"minima": counts[0]})


def betti_statistic(f, W: SingularityType = ZERO_SET, level: int | None = None) -> int:
    """Sum of Betti numbers of the locus: zero count on S^1, twice the curve count on S^2."""
    inv = locus_invariants(f, W, level)
    if W.kind != "ZeroSet":
        raise ValueError("the Betti statistic is defined for zero sets")
    return inv.data["count"] if inv.n == 1 else 2 * inv.data["components"]


CONSISTENT, INCONSISTENT, UNRESOLVED = "Consistent", "Inconsistent", "Unresolved"


@dataclass(frozen=True)
class IsotopyVerdict:
    verdict: str
    p: LocusInvariants | None
    q: LocusInvariants | None
    note: str = ""

    def to_dict(self):
        return {"verdict": self.verdict, "p": self.p.to_dict() if self.p else None,
                "q": self.q.to_dict() if self.q else None, "note": self.note}


def compare_loci(p, q, W: SingularityType, level: int | None = None) -> IsotopyVerdict:
    """Compare the type-``W`` loci of two functions with the same shape."""
    sp, sq = _shape(p), _shape(q)
    if sp != sq:
        raise ValueError(f"functions have different shapes {sp} and {sq}")
    W.check_target(*sp)
    if sp[1] != 1:
        raise NotImplementedError("loci of systems with m > 1 are not supported")
    note = "" if W.kind == "ZeroSet" else "index counts: necessary condition only"
    try:
        ip = locus_invariants(p, W, level)
    except UnresolvedError as e:
        return IsotopyVerdict(UNRESOLVED, None, None, str(e))
    try:
        iq = locus_invariants(q, W, level)
    except UnresolvedError as e:
        return IsotopyVerdict(UNRESOLVED, ip, None, str(e))
    verdict = CONSISTENT if ip.key() == iq.key() else INCONSISTENT
    return IsotopyVerdict(verdict, ip, iq, note)


def _shape(f) -> tuple:
    if isinstance(f, SphereFunction):
        return (f.n, f.m)
    S = as_system(f)
    return (S.n, S.m)
