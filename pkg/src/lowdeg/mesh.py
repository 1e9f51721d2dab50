"""Nested point meshes on S^1 and S^2.

A mesh of level ``s`` carries every coarser level as a prefix of its vertex
array: ``vertices[:level_counts[k]]`` is the level-``k`` mesh and
``level_edges[k]`` its edges.  Searches that take the union of candidates over
all levels therefore only grow under refinement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True, eq=False)
class SphereMesh:
    n: int
    level: int
    vertices: np.ndarray
    level_counts: tuple
    level_edges: tuple
    triangles: np.ndarray | None = None
    base: int = 0
    _nbr: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def edges(self) -> np.ndarray:
        return self.level_edges[-1]

    def spacing(self) -> float:
        """Longest edge, as a geodesic angle."""
        e = self.edges
        c = np.einsum("ij,ij->i", self.vertices[e[:, 0]], self.vertices[e[:, 1]])
        return float(np.arccos(np.clip(c.min(), -1.0, 1.0)))

    def euler_characteristic(self) -> int:
        if self.n != 2:
            raise ValueError("defined for triangulated S^2 only")
        return self.n_vertices - self.edges.shape[0] + self.triangles.shape[0]

    def antipodes(self) -> np.ndarray:
        """Index of ``-v`` for every vertex ``v``."""
        if "anti" not in self._nbr:
            from scipy.spatial import cKDTree

            dist, out = cKDTree(self.vertices).query(-self.vertices)
            if np.any(dist > 1e-9):
                raise ValueError("mesh is not antipodally symmetric")
            self._nbr["anti"] = out
        return self._nbr["anti"]

    def local_extrema(self, values: np.ndarray, level: int | None = None, kind: str = "min") -> np.ndarray:
        """Vertices of the level-``level`` mesh that are no worse than all their neighbours."""
        level = self.level if level is None else level
        cnt = self.level_counts[level]
        v = np.asarray(values)[:cnt]
        if kind == "max":
            v = -v
        e = self.level_edges[level]
        ok = np.ones(cnt, dtype=bool)
        a, b = e[:, 0], e[:, 1]
        np.logical_and.at(ok, a, v[a] <= v[b])
        np.logical_and.at(ok, b, v[b] <= v[a])
        return np.flatnonzero(ok)

    def hierarchy_extrema(self, values: np.ndarray, kind: str = "min") -> np.ndarray:
        """Union of local extrema over every level up to this one."""
        found = [self.local_extrema(values, k, kind) for k in range(self.level + 1)]
        return np.unique(np.concatenate(found))

    def triangle_edges(self) -> np.ndarray:
        """Row ``t`` lists the indices into ``edges`` of the three sides of triangle ``t``."""
        if "tri_edges" not in self._nbr:
            F = self.triangles
            sides = np.stack([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]], axis=1)
            sides.sort(axis=2)
            nv = self.n_vertices
            code = sides[:, :, 0].astype(np.int64) * nv + sides[:, :, 1]
            ecode = self.edges[:, 0].astype(np.int64) * nv + self.edges[:, 1]
            self._nbr["tri_edges"] = np.searchsorted(ecode, code)
        return self._nbr["tri_edges"]

    def edge_antipodes(self) -> np.ndarray:
        if "edge_anti" not in self._nbr:
            a = self.antipodes()
            E = np.sort(a[self.edges], axis=1)
            nv = self.n_vertices
            ecode = self.edges[:, 0].astype(np.int64) * nv + self.edges[:, 1]
            self._nbr["edge_anti"] = np.searchsorted(ecode, E[:, 0].astype(np.int64) * nv + E[:, 1])
        return self._nbr["edge_anti"]

    def neighbors(self) -> list:
        if "fine" not in self._nbr:
            adj = [[] for _ in range(self.n_vertices)]
            for a, b in self.edges:
                adj[a].append(b)
                adj[b].append(a)
            self._nbr["fine"] = [np.array(sorted(x)) for x in adj]
        return self._nbr["fine"]

    def describe(self) -> dict:
        return {"n": self.n, "level": self.level, "vertices": self.n_vertices,
                "spacing": self.spacing()}


@lru_cache(maxsize=32)
def circle_mesh(level: int, base: int = 64) -> SphereMesh:
    """``base * 2**level`` equally spaced points; each level adds the odd multiples."""
    if level < 0 or base < 3:
        raise ValueError("need level >= 0 and base >= 3")
    K = base << level
    order = list(range(0, K, 1 << level))
    counts = [len(order)]
    for k in range(1, level + 1):
        step = 1 << (level - k)
        order += list(range(step, K, 2 * step))
        counts.append(len(order))
    order = np.array(order)
    theta = 2.0 * np.pi * order / K
    V = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    pos = np.empty(K, dtype=np.int64)
    pos[order] = np.arange(K)
    edges = []
    for k in range(level + 1):
        step = 1 << (level - k)
        grid = np.arange(0, K, step)
        e = np.stack([pos[grid], pos[np.roll(grid, -1)]], axis=1)
        edges.append(e)
    V.setflags(write=False)
    return SphereMesh(1, level, V, tuple(counts), tuple(edges), None, base)


_PHI = (1.0 + 5 ** 0.5) / 2.0
_ICO_V = np.array([
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
], dtype=float)
_ICO_F = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def _tri_edges(F: np.ndarray) -> np.ndarray:
    e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    e.sort(axis=1)
    nv = np.int64(e.max()) + 1
    code = np.unique(e[:, 0].astype(np.int64) * nv + e[:, 1])
    return np.stack([code // nv, code % nv], axis=1)


@lru_cache(maxsize=16)
def icosphere(level: int) -> SphereMesh:
    """Icosahedron refined ``level`` times by edge midpoints projected to the sphere."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    V = _ICO_V / np.linalg.norm(_ICO_V, axis=1, keepdims=True)
    F = _ICO_F.copy()
    counts = [len(V)]
    edges = [_tri_edges(F)]
    for _ in range(level):
        E = edges[-1]
        # new vertex for edge k gets index len(V) + k
        sides = np.stack([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]], axis=1)
        sides.sort(axis=2)
        nv = len(V)
        code = sides[:, :, 0].astype(np.int64) * nv + sides[:, :, 1]
        mid = nv + np.searchsorted(E[:, 0].astype(np.int64) * nv + E[:, 1], code)
        M = V[E[:, 0]] + V[E[:, 1]]
        V = np.concatenate([V, M / np.linalg.norm(M, axis=1, keepdims=True)])
        a, b, c = F[:, 0], F[:, 1], F[:, 2]
        ab, bc, ca = mid[:, 0], mid[:, 1], mid[:, 2]
        F = np.stack([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                      np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)], axis=1).reshape(-1, 3)
        counts.append(len(V))
        edges.append(_tri_edges(F))
    V.setflags(write=False)
    return SphereMesh(2, level, V, tuple(counts), tuple(edges), F)


def icosphere_level_for(n_points: int) -> int:
    """Smallest level with at least ``n_points`` vertices."""
    s = 0
    while 10 * 4 ** s + 2 < n_points:
        s += 1
    return s


def make_mesh(n: int, level: int, base: int = 64) -> SphereMesh:
    if n == 1:
        return circle_mesh(level, base)
    if n == 2:
        return icosphere(level)
    raise ValueError(f"meshes exist for n in (1, 2), got n={n}")
