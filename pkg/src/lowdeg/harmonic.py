"""Harmonic decomposition of forms and functions on the sphere.

Every form of degree ``d`` splits uniquely as ``P = sum_l |x|^(d-l) H_l`` with
``H_l`` harmonic of degree ``l`` and ``d - l`` even.  The pieces are found as the
eigenspaces of ``T = (x_0^2 + ... + x_n^2) * Laplacian`` acting on degree-``d``
forms: ``T`` is symmetric in Bombieri-Weyl coordinates and acts on
``|x|^(2j) H_(d-2j)`` by the scalar ``2j (2d - 2j + n - 1)``, so the eigenvalue
clusters are well separated integers.  ``T`` never mixes monomials of different
exponent parity, which splits the eigenproblem into ``2^n``-ish small blocks.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from .poly import (
    HomogeneousPoly,
    PolySystem,
    as_system,
    eval_poly,
    exponents,
    kostlan_weights,
    l2_gram,
    laplacian,
    laplacian_coeffs,
    monomial_matrix,
    mul_norm_sq_coeffs,
    n_monomials,
    shift_map,
    sphere_volume,
)


class DecompositionError(RuntimeError):
    """The eigenvalue clusters did not match the expected harmonic dimensions."""


def dim_harmonic(n: int, l: int) -> int:
    """Dimension of the space of harmonic forms of degree ``l`` in ``n + 1`` variables."""
    if n < 1 or l < 0:
        raise ValueError(f"need n >= 1 and l >= 0, got n={n}, l={l}")
    lower = math.comb(l - 2 + n, n) if l >= 2 else 0
    return math.comb(l + n, n) - lower


def _eigenvalue(n_vars: int, d: int, j: int) -> float:
    return 2.0 * j * (2 * d - 2 * j + n_vars - 2)


class _Basis:
    """Cached orthonormal bases (BW coordinates) of the pieces of degree-``d`` forms."""

    def __init__(self, n_vars: int, d: int):
        self.n_vars = n_vars
        self.d = d
        self.w = kostlan_weights(n_vars, d)
        self.levels = list(range(d % 2, d + 1, 2))
        self.blocks = self._eigenspaces()
        self._extract: dict[int, np.ndarray] = {}

    def _eigenspaces(self) -> dict[int, np.ndarray]:
        nv, d = self.n_vars, self.d
        N = n_monomials(nv, d)
        if d < 2:
            return {d: np.eye(N)}
        E = exponents(nv, d)
        Em = exponents(nv, d - 2)
        # T = U U^T with U[beta + 2e_k, beta] = sqrt((beta_k + 1)(beta_k + 2))
        U = np.zeros((N, Em.shape[0]))
        cols = np.arange(Em.shape[0])
        for k in range(nv):
            U[shift_map(nv, d - 2, k, 2), cols] = np.sqrt((Em[:, k] + 1.0) * (Em[:, k] + 2.0))
        parity = E % 2
        parity_m = Em % 2
        keys_rows = [tuple(r) for r in parity]
        keys_cols = [tuple(r) for r in parity_m]
        classes = sorted(set(keys_rows))
        lam = np.array([_eigenvalue(nv, d, (d - l) // 2) for l in self.levels])
        collected: dict[int, list] = {l: [] for l in self.levels}
        for cls in classes:
            rows = np.array([i for i, key in enumerate(keys_rows) if key == cls])
            cidx = np.array([i for i, key in enumerate(keys_cols) if key == cls], dtype=np.int64)
            Ub = U[np.ix_(rows, cidx)] if cidx.size else np.zeros((rows.size, 0))
            vals, vecs = np.linalg.eigh(Ub @ Ub.T)
            which = np.argmin(np.abs(vals[:, None] - lam[None, :]), axis=1)
            gap = np.abs(vals - lam[which])
            if np.any(gap > 1e-6 * max(1.0, lam.max())):
                raise DecompositionError(f"eigenvalue off the expected spectrum for n_vars={nv}, d={d}")
            for t, l in enumerate(self.levels):
                sel = which == t
                if np.any(sel):
                    full = np.zeros((N, int(sel.sum())))
                    full[rows] = vecs[:, sel]
                    collected[l].append(full)
        out = {}
        for l in self.levels:
            B = np.hstack(collected[l]) if collected[l] else np.zeros((N, 0))
            if B.shape[1] != dim_harmonic(nv - 1, l):
                raise DecompositionError(
                    f"piece l={l} has dimension {B.shape[1]}, expected {dim_harmonic(nv - 1, l)}"
                )
            out[l] = B
        return out

    def extractor(self, l: int) -> np.ndarray:
        """Map from coordinates in ``blocks[l]`` to the coefficients of ``H_l`` (degree ``l``)."""
        K = self._extract.get(l)
        if K is None:
            nv = self.n_vars
            C = self.w[:, None] * self.blocks[l]
            deg = self.d
            for i in range((self.d - l) // 2, 0, -1):
                C = laplacian_coeffs(nv, deg, C) / (2.0 * i * (2 * i + 2 * l + nv - 2))
                deg -= 2
            C.setflags(write=False)
            self._extract[l] = K = C
        return K

    def piece_coords(self, coeffs: np.ndarray) -> dict[int, np.ndarray]:
        a = coeffs / self.w
        return {l: B.T @ a for l, B in self.blocks.items()}


_CACHE: dict[tuple[int, int], _Basis] = {}
_LOCK = threading.Lock()


def _basis(n_vars: int, d: int) -> _Basis:
    key = (n_vars, d)
    b = _CACHE.get(key)
    if b is None:
        with _LOCK:
            b = _CACHE.get(key)
            if b is None:
                b = _CACHE[key] = _Basis(n_vars, d)
    return b


def harmonic_basis(n_vars: int, l: int) -> list[HomogeneousPoly]:
    """A Bombieri-Weyl orthonormal basis of the harmonic forms of degree ``l``."""
    b = _basis(n_vars, l)
    C = b.w[:, None] * b.blocks[l]
    return [HomogeneousPoly(n_vars, l, C[:, i]) for i in range(C.shape[1])]


# ---------------------------------------------------------------------------

def _homogenize(n_vars: int, parts: Mapping[int, HomogeneousPoly], top: int) -> HomogeneousPoly:
    """``sum_l |x|^(top - l) H_l`` by Horner's rule in ``|x|^2``."""
    acc = None
    deg = None
    for l in range(top % 2, top + 1, 2):
        if acc is not None:
            acc = mul_norm_sq_coeffs(n_vars, deg, acc)
            deg += 2
        h = parts.get(l)
        if h is not None:
            if acc is None:
                acc, deg = h.coeffs.copy(), l
            else:
                acc = acc + h.coeffs
    if acc is None:
        return HomogeneousPoly.zero(n_vars, top)
    return HomogeneousPoly(n_vars, deg, acc)


@dataclass(frozen=True, eq=False)
class HarmonicDecomposition:
    """The harmonic pieces ``{l: H_l}`` of one form of degree ``degree``."""

    n_vars: int
    degree: int
    parts: Mapping[int, HomogeneousPoly]

    def reconstruct(self) -> HomogeneousPoly:
        return _homogenize(self.n_vars, self.parts, self.degree)

    def piece(self, l: int) -> HomogeneousPoly:
        """``|x|^(d - l) H_l`` as a degree-``d`` form."""
        return _homogenize(self.n_vars, {l: self.parts[l]}, self.degree)


def decompose(P: HomogeneousPoly) -> HarmonicDecomposition:
    b = _basis(P.n_vars, P.degree)
    coords = b.piece_coords(P.coeffs)
    parts = {l: HomogeneousPoly(P.n_vars, l, b.extractor(l) @ t) for l, t in coords.items()}
    return HarmonicDecomposition(P.n_vars, P.degree, parts)


# ---------------------------------------------------------------------------

def l2_scale(n_vars: int, d: int, l: int) -> float:
    """Ratio of L2 norm on the sphere to Bombieri-Weyl norm on the degree-``d`` piece ``l``.

    Both norms are invariant under rotations and each piece is irreducible, so
    the ratio is a constant.  It follows from the Fischer product:
    ``|x|^(2j) h`` has Fischer norm squared ``prod_i 2i(2i + 2l + n_vars - 2)`` times
    that of ``h``, and a harmonic ``h`` of degree ``l`` has
    ``|h|_L2^2 = vol * Gamma(n_vars/2) / (2^l Gamma(l + n_vars/2)) * |h|_F^2``.
    """
    j = (d - l) // 2
    i = np.arange(1, j + 1)
    log_cj = float(np.sum(np.log(2.0 * i * (2 * i + 2 * l + n_vars - 2))))
    log_k2 = (gammaln(d + 1) + math.log(sphere_volume(n_vars - 1)) + gammaln(n_vars / 2)
              - l * math.log(2.0) - gammaln(l + n_vars / 2) - log_cj)
    return math.exp(0.5 * log_k2)


@dataclass(frozen=True, eq=False)
class SphereFunction:
    """A map ``S^n -> R^m`` stored as a sum of restricted harmonics per component.

    ``degrees[i]`` is the degree of the form component ``i`` came from.  Each
    retained piece ``l`` is kept as its coordinate vector in a fixed orthonormal
    (Bombieri-Weyl) basis of the ``|x|^(d_i - l) H_l`` space.  Values and the
    representative form are computed from those coordinates at degree ``d_i``,
    which stays well conditioned even where the monomial coefficients of a
    high-degree harmonic would not be.  The harmonics themselves are available
    through ``parts``.
    """

    n_vars: int
    degrees: tuple
    coords: tuple

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        coords = tuple(
            {int(l): np.asarray(t, dtype=float) for l, t in sorted(c.items())} for c in self.coords
        )
        if len(coords) != len(degrees):
            raise ValueError("one coordinate dict per component is required")
        for d, comp in zip(degrees, coords):
            for l, t in comp.items():
                if (d - l) % 2 or l > d or l < 0:
                    raise ValueError(f"piece l={l} is not admissible for degree {d}")
                if t.shape != (dim_harmonic(self.n_vars - 1, l),):
                    raise ValueError(f"piece l={l} has the wrong number of coordinates")
                t.setflags(write=False)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_poly(cls, P) -> "SphereFunction":
        P = as_system(P)
        coords = tuple(_basis(P.n_vars, c.degree).piece_coords(c.coeffs) for c in P)
        return cls(P.n_vars, P.degrees, coords)

    @classmethod
    def from_parts(cls, n_vars: int, parts, degrees=None) -> "SphereFunction":
        """Build from harmonic pieces ``[{l: H_l}, ...]``; default degree is the top ``l``."""
        parts = [dict(p) for p in parts]
        if degrees is None:
            degrees = [max(p) if p else 0 for p in parts]
        coords = []
        for d, p in zip(degrees, parts):
            for l, h in p.items():
                if h.degree != l or h.n_vars != n_vars:
                    raise ValueError(f"piece l={l} has the wrong shape")
                if laplacian(h).coeff_norm() > 1e-8 * max(h.coeff_norm(), 1e-300):
                    raise ValueError(f"piece l={l} is not harmonic")
            b = _basis(n_vars, int(d))
            coords.append({l: b.blocks[l].T @ (_homogenize(n_vars, {l: h}, int(d)).coeffs / b.w)
                           for l, h in p.items()})
        return cls(n_vars, tuple(degrees), tuple(coords))

    @property
    def n(self) -> int:
        return self.n_vars - 1

    @property
    def m(self) -> int:
        return len(self.coords)

    @property
    def degree(self) -> int:
        return max(self.degrees)

    def levels(self, i: int = 0) -> list:
        return list(self.coords[i])

    def top_levels(self) -> tuple:
        """Largest retained ``l`` per component (``d mod 2`` when nothing is left)."""
        return tuple(max(c) if c else d % 2 for d, c in zip(self.degrees, self.coords))

    @cached_property
    def parts(self) -> tuple:
        """Harmonic pieces ``{l: H_l}`` per component."""
        out = []
        for d, comp in zip(self.degrees, self.coords):
            b = _basis(self.n_vars, d)
            out.append({l: HomogeneousPoly(self.n_vars, l, b.extractor(l) @ t) for l, t in comp.items()})
        return tuple(out)

    @cached_property
    def representative(self) -> PolySystem:
        """Forms of degree ``degrees`` that agree with this function on the sphere."""
        comps = []
        for d, comp in zip(self.degrees, self.coords):
            b = _basis(self.n_vars, d)
            a = np.zeros(b.w.shape[0])
            for l, t in comp.items():
                a += b.blocks[l] @ t
            comps.append(HomogeneousPoly(self.n_vars, d, b.w * a))
        return PolySystem(tuple(comps))

    def __call__(self, x) -> np.ndarray:
        """Values at unit vectors; shape ``x.shape[:-1] + (m,)``."""
        return np.stack([eval_poly(c, x) for c in self.representative], axis=-1)

    def __sub__(self, other: "SphereFunction") -> "SphereFunction":
        if self.n_vars != other.n_vars or self.degrees != other.degrees:
            raise ValueError("functions have different shapes")
        out = []
        for a, b in zip(self.coords, other.coords):
            comp = dict(a)
            for l, t in b.items():
                comp[l] = comp[l] - t if l in comp else -t
            out.append(comp)
        return SphereFunction(self.n_vars, self.degrees, tuple(out))

    def __add__(self, other: "SphereFunction") -> "SphereFunction":
        return self - other.scaled(-1.0)

    def scaled(self, t: float) -> "SphereFunction":
        return SphereFunction(self.n_vars, self.degrees,
                              tuple({l: t * v for l, v in c.items()} for c in self.coords))

    def piece_norms(self, i: int = 0, kind: str = "l2") -> dict:
        """Norm of each retained ``H_l`` of component ``i`` (``"l2"`` on the sphere or ``"bw"``)."""
        d = self.degrees[i]
        if kind == "bw":
            return {l: float(np.linalg.norm(t)) for l, t in self.coords[i].items()}
        if kind != "l2":
            raise ValueError(f"unknown norm {kind!r}")
        return {l: l2_scale(self.n_vars, d, l) * float(np.linalg.norm(t)) for l, t in self.coords[i].items()}

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "degrees": list(self.degrees),
            "components": [
                [{"l": l, "coeffs": [float(v) for v in h.coeffs]} for l, h in p.items()]
                for p in self.parts
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SphereFunction":
        nv = int(data["n"]) + 1
        parts = [
            {int(e["l"]): HomogeneousPoly(nv, int(e["l"]), e["coeffs"]) for e in comp}
            for comp in data["components"]
        ]
        return cls.from_parts(nv, parts, data.get("degrees"))


def as_sphere_function(f) -> SphereFunction:
    if isinstance(f, SphereFunction):
        return f
    return SphereFunction.from_poly(f)


def truncate(f, L: int) -> SphereFunction:
    """Keep the pieces with ``l <= L``."""
    f = as_sphere_function(f)
    if not 0 <= L <= f.degree:
        raise ValueError(f"truncation level {L} outside [0, {f.degree}]")
    coords = tuple({l: t for l, t in c.items() if l <= L} for c in f.coords)
    return SphereFunction(f.n_vars, f.degrees, coords)


def tail(f, L: int) -> SphereFunction:
    """``f - truncate(f, L)``, computed by selection so no cancellation occurs."""
    f = as_sphere_function(f)
    coords = tuple({l: t for l, t in c.items() if l > L} for c in f.coords)
    return SphereFunction(f.n_vars, f.degrees, coords)


def l2_norm(f) -> float:
    return sobolev_norm(f, 0.0)


def sobolev_norm(f, q: float) -> float:
    """``(|H_0|^2 + sum_{l >= 1} l^(2q) |H_l|^2)^(1/2)`` with L2 norms on the sphere."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    f = as_sphere_function(f)
    total = 0.0
    for i in range(f.m):
        for l, v in f.piece_norms(i).items():
            weight = 1.0 if l == 0 else float(l) ** (2 * q)
            total += weight * v * v
    return math.sqrt(total)


# ---------------------------------------------------------------------------

def l2_orthonormal_harmonics(n_vars: int, l: int) -> np.ndarray:
    """Coefficient columns of an L2-orthonormal basis of degree-``l`` harmonics.

    Modified Gram-Schmidt in the exact L2 product, started from the
    Bombieri-Weyl orthonormal basis.
    """
    b = _basis(n_vars, l)
    C = (b.w[:, None] * b.blocks[l]).copy()
    G = l2_gram(n_vars, l, l)
    for i in range(C.shape[1]):
        for k in range(i):
            C[:, i] -= (C[:, k] @ G @ C[:, i]) * C[:, k]
        nrm2 = C[:, i] @ G @ C[:, i]
        if not nrm2 > 1e-300:
            raise DecompositionError(f"Gram-Schmidt breakdown at column {i} (n_vars={n_vars}, l={l})")
        C[:, i] /= math.sqrt(nrm2)
    return C


def zonal_check(n: int, l: int, x) -> float:
    """Diagonal of the degree-``l`` zonal kernel, ``sum_j y_j(x)^2``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n + 1,):
        raise ValueError(f"expected a point in R^{n + 1}")
    C = l2_orthonormal_harmonics(n + 1, l)
    y = monomial_matrix(n + 1, l, x[None, :])[0] @ C
    return float(y @ y)


def zonal_target(n: int, l: int) -> float:
    return dim_harmonic(n, l) / sphere_volume(n)
