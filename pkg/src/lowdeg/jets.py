"""Jets of sphere maps, residuals to singular fibres, and the stability test.

Jets are taken in normal coordinates: the order-``k`` tensor at ``x`` is the
``k``-th derivative of ``u -> f(exp_x(F u))`` at ``u = 0`` where ``F`` is an
orthonormal tangent frame.  In those coordinates a rotation of the sphere acts
on jets by a rotation of the frame, so Frobenius norms of the tensors are
orthogonally invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .harmonic import SphereFunction, tail
from .mesh import SphereMesh
from .poly import (
    as_system,
    derivative_coeffs,
    monomial_matrix,
    n_monomials,
    power_table,
)

MAX_ORDER = 3


@dataclass(frozen=True)
class SingularityType:
    kind: str
    jet_order: int

    def check_target(self, n: int, m: int):
        if self.kind == "ZeroSet":
            if m > n:
                raise ValueError(f"ZeroSet needs m <= n, got m={m}, n={n}")
        elif m != 1:
            raise ValueError(f"{self.kind} needs a scalar function, got m={m}")

    @staticmethod
    def parse(name: str) -> "SingularityType":
        key = name.replace("_", "").replace("-", "").lower()
        for w in CATALOGUE:
            if w.kind.lower() == key:
                return w
        aliases = {"zeros": ZERO_SET, "critical": CRITICAL_POINTS, "minima": NONDEGENERATE_MINIMA}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown singularity type {name!r}")

    def __str__(self):
        return self.kind


ZERO_SET = SingularityType("ZeroSet", 0)
CRITICAL_POINTS = SingularityType("CriticalPoints", 1)
NONDEGENERATE_MINIMA = SingularityType("NondegenerateMinima", 2)
CATALOGUE = (ZERO_SET, CRITICAL_POINTS, NONDEGENERATE_MINIMA)


# ---------------------------------------------------------------------------
# frames and the exponential map

def tangent_frames(X: np.ndarray) -> np.ndarray:
    """Householder frames: columns 1..n of the reflection taking e_0 to x.  Shape (K, n+1, n)."""
    X = np.atleast_2d(X)
    K, nv = X.shape
    v = X.copy()
    v[:, 0] -= 1.0
    vv = np.einsum("ki,ki->k", v, v)
    safe = vv > 1e-30
    coef = np.where(safe, 2.0 / np.where(safe, vv, 1.0), 0.0)
    H = np.eye(nv)[None] - coef[:, None, None] * v[:, :, None] * v[:, None, :]
    return H[:, :, 1:]


def exp_map(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Geodesic ``x cos|v| + v sin|v|/|v|`` for tangent vectors ``v`` (row-wise)."""
    t = np.linalg.norm(V, axis=-1, keepdims=True)
    sinc = np.where(t > 1e-12, np.sin(t) / np.where(t > 1e-12, t, 1.0), 1.0 - t * t / 6.0)
    Y = X * np.cos(t) + V * sinc
    return Y / np.linalg.norm(Y, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# ambient derivatives

class JetEvaluator:
    """Precomputed derivative coefficients of a system, evaluated at batches of points."""

    def __init__(self, f, order: int = MAX_ORDER):
        if isinstance(f, SphereFunction):
            f = f.representative
        P = as_system(f)
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}")
        self.system = P
        self.order = order
        self.nv = P.n_vars
        self.m = P.m
        # groups[d] = (component indices, [stack_k of shape (N_{d-k}, len(idx), nv**k)])
        self.groups = {}
        for d in sorted(set(P.degrees)):
            idx = [i for i, c in enumerate(P) if c.degree == d]
            C = np.stack([P[i].coeffs for i in idx], axis=1)[:, :, None]
            stacks = [C]
            cur = C
            for k in range(1, order + 1):
                if d - k < 0:
                    break
                cur = np.concatenate(
                    [derivative_coeffs(self.nv, d - k + 1, cur, j)[:, :, :, None] for j in range(self.nv)],
                    axis=3,
                ).reshape(n_monomials(self.nv, d - k), len(idx), -1)
                stacks.append(cur)
            self.groups[d] = (idx, stacks)

    def ambient(self, X: np.ndarray, order: int | None = None) -> list:
        """Ambient derivative tensors: ``out[k]`` has shape ``(K, m) + (n+1,)*k``."""
        order = self.order if order is None else order
        if order > self.order:
            raise ValueError("evaluator built for a lower order")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        K, nv = X.shape[0], self.nv
        out = [np.zeros((K, self.m) + (nv,) * k) for k in range(order + 1)]
        powers = power_table(X, max(self.groups))
        for d, (idx, stacks) in self.groups.items():
            for k in range(min(order, len(stacks) - 1) + 1):
                Mx = monomial_matrix(nv, d - k, X, powers)
                S = stacks[k]
                vals = Mx @ S.reshape(S.shape[0], -1)
                out[k][:, idx] = vals.reshape((K, len(idx)) + (nv,) * k)
        return out

    def tangential(self, X: np.ndarray, order: int | None = None, frames: np.ndarray | None = None):
        """Frames and normal-coordinate tensors ``T[k]`` of shape ``(K, m) + (n,)*k``."""
        order = self.order if order is None else order
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = tangent_frames(X) if frames is None else frames
        A = self.ambient(X, order)
        T = [A[0]]
        n = F.shape[2]
        if order >= 1:
            g = np.einsum("kmi,kia->kma", A[1], F)
            T.append(g)
        if order >= 2:
            radial = np.einsum("kmi,ki->km", A[1], X)
            eye = np.eye(n)
            T2 = np.einsum("kmij,kia,kjb->kmab", A[2], F, F) - radial[:, :, None, None] * eye
            T.append(_symmetrize(T2, 2))
        if order >= 3:
            D3 = np.einsum("kmijl,kia,kjb,klc->kmabc", A[3], F, F, F)
            h = np.einsum("kmij,kia,kj->kma", A[2], F, X)
            corr = g / 3.0 + h
            sym = (np.einsum("ab,kmc->kmabc", eye, corr) + np.einsum("ac,kmb->kmabc", eye, corr)
                   + np.einsum("bc,kma->kmabc", eye, corr))
            T.append(_symmetrize(D3 - sym, 3))
        return F, T


@lru_cache(maxsize=None)
def _canonical_entries(n: int, k: int) -> np.ndarray:
    """For each flat index of an ``(n,)*k`` tensor, the flat index of its sorted multi-index."""
    idx = np.indices((n,) * k).reshape(k, -1)
    return np.ravel_multi_index(tuple(np.sort(idx, axis=0)), (n,) * k)


def _symmetrize(T: np.ndarray, k: int) -> np.ndarray:
    """Copy every entry from its sorted-index representative: exactly symmetric."""
    n = T.shape[-1]
    flat = T.reshape(T.shape[:2] + (-1,))
    return flat[:, :, _canonical_entries(n, k)].reshape(T.shape)


def _evaluator(f, order: int) -> JetEvaluator:
    if isinstance(f, JetEvaluator):
        if f.order < order:
            raise ValueError("evaluator built for a lower order")
        return f
    return JetEvaluator(f, order)


@dataclass(frozen=True, eq=False)
class JetValue:
    base: np.ndarray
    order: int
    frame: np.ndarray
    tensors: tuple

    @property
    def m(self) -> int:
        return self.tensors[0].shape[0]

    @property
    def n(self) -> int:
        return self.frame.shape[1]


def jet_at(f, x, r: int) -> JetValue:
    """Jet of order ``r`` of ``f`` restricted to the sphere, at the unit vector ``x``."""
    if r < 0:
        raise ValueError("jet order must be nonnegative")
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("base point is not on the unit sphere")
    ev = _evaluator(f, r)
    if x.shape != (ev.nv,):
        raise ValueError(f"expected a point in R^{ev.nv}")
    F, T = ev.tangential(x[None, :], r)
    return JetValue(x, r, F[0], tuple(t[0] for t in T))


def nu(jet) -> float:
    """Frobenius norm of all tangential tensors together."""
    tensors = jet.tensors if isinstance(jet, JetValue) else jet
    return math.sqrt(sum(float(np.sum(np.square(t))) for t in tensors))


def _nu_batch(T: list) -> np.ndarray:
    K = T[0].shape[0]
    return np.sqrt(sum(np.sum(np.square(t).reshape(K, -1), axis=1) for t in T))


# ---------------------------------------------------------------------------
# residuals

def _residual_batch(W: SingularityType, T: list) -> np.ndarray:
    if W is ZERO_SET or W.kind == "ZeroSet":
        f, J = T[0], T[1]
        m, n = J.shape[1], J.shape[2]
        if m > n:
            raise ValueError("ZeroSet needs m <= n")
        smin = np.linalg.svd(J, compute_uv=False)[:, -1] if m > 0 else 0.0
        return np.sqrt(np.sum(f * f, axis=1) + smin * smin)
    if T[0].shape[1] != 1:
        raise ValueError(f"{W.kind} needs a scalar function")
    g = T[1][:, 0]
    Hs = T[2][:, 0]
    emin = np.min(np.abs(np.linalg.eigvalsh(Hs)), axis=1)
    return np.sqrt(np.sum(g * g, axis=1) + emin * emin)


def singular_residual(W: SingularityType, jet: JetValue) -> float:
    """Distance surrogate from the jet to the fibre where transversality to ``W`` fails."""
    if jet.order < W.jet_order + 1:
        raise ValueError(f"{W.kind} needs a jet of order {W.jet_order + 1}")
    W.check_target(jet.n, jet.m)
    T = [t[None] for t in jet.tensors]
    return float(_residual_batch(W, T)[0])


# ---------------------------------------------------------------------------
# local search on the sphere

def polish(fun: Callable[[np.ndarray], np.ndarray], X0: np.ndarray, step: float,
           ascent: bool = False, max_steps: int = 100, h: float = 1e-7, min_step: float = 1e-10):
    """Projected gradient descent (or ascent) from each row of ``X0``.

    The gradient is a central difference along the tangent frame; the step is
    an angle along the normalized gradient, halved whenever it fails to improve.
    Returns the final points and their values; values never get worse than at
    the start.
    """
    X = np.array(np.atleast_2d(X0), dtype=float)
    K, nv = X.shape
    if K == 0:
        return X, np.zeros(0)
    sgn = -1.0 if ascent else 1.0
    n = nv - 1

    def objective(Y):
        return sgn * fun(Y)

    def gradient(Y):
        F = tangent_frames(Y)
        probes = []
        for a in range(n):
            probes.append(exp_map(Y, h * F[:, :, a]))
            probes.append(exp_map(Y, -h * F[:, :, a]))
        vals = objective(np.concatenate(probes)).reshape(2 * n, -1)
        g = (vals[0::2] - vals[1::2]).T / (2 * h)
        return np.einsum("kia,ka->ki", F, g)

    val = objective(X)
    G = gradient(X)
    t = np.full(K, float(step))
    active = np.ones(K, dtype=bool)
    for _ in range(max_steps):
        gn = np.linalg.norm(G, axis=1)
        active &= (gn > 0) & (t > min_step) & np.isfinite(gn)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        D = -G[idx] / gn[idx, None]
        trial = exp_map(X[idx], t[idx, None] * D)
        tv = objective(trial)
        ok = tv < val[idx]
        good, bad = idx[ok], idx[~ok]
        t[bad] *= 0.5
        if good.size:
            X[good] = trial[ok]
            val[good] = tv[ok]
            G[good] = gradient(X[good])
            t[good] = np.minimum(t[good] * 1.5, step)
    return X, sgn * val


POLISH_KEEP = 32


def default_step(degree: int) -> float:
    return math.pi / (4.0 * (degree + 1))


@dataclass(frozen=True)
class Estimate:
    """Mesh search result: best value, where it was found, and the mesh used."""

    value: float
    point: tuple
    vertex_value: float
    resolution: dict = field(default_factory=dict)

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "point": list(self.point),
                "vertex_value": self.vertex_value, "resolution": self.resolution}


def _search(fun, mesh: SphereMesh, degree: int, ascent: bool, keep: int = POLISH_KEEP) -> Estimate:
    V = mesh.vertices
    vals = fun(V)
    kind = "max" if ascent else "min"
    cand = mesh.hierarchy_extrema(vals, kind)
    # polish only the most promising basins; stable sort keeps ties in index order
    order = np.argsort(-vals[cand] if ascent else vals[cand], kind="stable")
    cand = cand[order[:keep]]
    best_v = int(np.argmax(vals) if ascent else np.argmin(vals))
    Xp, pv = polish(fun, V[cand], default_step(degree), ascent=ascent)
    allv = np.concatenate([[vals[best_v]], pv])
    allx = np.concatenate([V[best_v][None], Xp])
    j = int(np.argmax(allv) if ascent else np.argmin(allv))
    return Estimate(float(allv[j]), tuple(float(c) for c in allx[j]), float(vals[best_v]),
                    mesh.describe())


def discriminant_distance(P, W: SingularityType, mesh: SphereMesh) -> Estimate:
    """Smallest residual over the sphere, from mesh vertices plus local polishing.

    The candidates are the local minima at every level of the mesh hierarchy,
    so a finer mesh of the same family never reports a larger value.
    """
    ev = _evaluator(P, W.jet_order + 1)
    if ev.nv - 1 != mesh.n:
        raise ValueError("mesh dimension does not match the function")
    W.check_target(ev.nv - 1, ev.m)

    def fun(X):
        return _residual_batch(W, ev.tangential(X, W.jet_order + 1)[1])

    return _search(fun, mesh, ev.system.degree, ascent=False)


def cr_norm_search(f, r: int, mesh: SphereMesh) -> Estimate:
    ev = _evaluator(f, r)
    if ev.nv - 1 != mesh.n:
        raise ValueError("mesh dimension does not match the function")

    def fun(X):
        return _nu_batch(ev.tangential(X, r)[1])

    return _search(fun, mesh, ev.system.degree, ascent=True)


def cr_norm_estimate(f, r: int, mesh: SphereMesh) -> float:
    """Lower bound for ``sup_x nu(j^r f(x))``: mesh maximum improved by local ascent."""
    return cr_norm_search(f, r, mesh).value


@dataclass(frozen=True)
class StabilityMargin:
    lhs: float
    rhs: float
    in_E_L: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "in_E_L": self.in_E_L}


def stability_margin(P, L: int, W: SingularityType, c1: float, mesh: SphereMesh,
                     distance: Estimate | float | None = None, f: SphereFunction | None = None
                     ) -> StabilityMargin:
    """``|p - p|_L|_{C^(r+1)}`` against ``c1`` times the residual distance of ``P``.

    ``distance`` and ``f`` (the decomposition of ``P``) may be passed in to
    reuse work across several ``L``.
    """
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    P = as_system(P)
    if f is None:
        f = SphereFunction.from_poly(P)
    rest = tail(f, L)
    if all(not c for c in rest.coords):
        lhs = 0.0
    else:
        lhs = cr_norm_estimate(rest, W.jet_order + 1, mesh)
    if distance is None:
        distance = discriminant_distance(P, W, mesh)
    rhs = c1 * float(distance)
    return StabilityMargin(float(lhs), float(rhs), bool(lhs < rhs))
