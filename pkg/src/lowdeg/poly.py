"""Dense homogeneous polynomials in ``n + 1`` real variables.

Coefficients of a degree ``d`` form are stored in a flat vector indexed by the
exponent tuples ``alpha`` with ``|alpha| = d``, listed in *descending
lexicographic* order::

    (d, 0, ..., 0), (d-1, 1, 0, ..., 0), (d-1, 0, 1, ..., 0), ..., (0, ..., 0, d)

This order is part of the on-disk JSON format and must not change.

All calculus helpers have a low-level twin (``*_coeffs``) acting on arrays whose
axis 0 runs over monomials, so that many polynomials can be processed in one
numpy call.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

MONOMIAL_ORDER = "lex-desc"


# ---------------------------------------------------------------------------
# monomial tables

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def exponents(n_vars: int, d: int) -> np.ndarray:
    """Exponent table of shape ``(C(d + n, n), n_vars)`` in storage order."""
    if n_vars < 1 or d < 0:
        raise ValueError(f"invalid shape n_vars={n_vars}, d={d}")
    table = np.array(list(_compositions(d, n_vars)), dtype=np.int64)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def _index(n_vars: int, d: int) -> dict:
    return {tuple(int(v) for v in row): i for i, row in enumerate(exponents(n_vars, d))}


def n_monomials(n_vars: int, d: int) -> int:
    if d < 0:
        return 0
    return math.comb(d + n_vars - 1, n_vars - 1)


def monomial_index(n_vars: int, alpha: Sequence[int]) -> int:
    return _index(n_vars, int(sum(alpha)))[tuple(int(a) for a in alpha)]


@lru_cache(maxsize=None)
def shift_map(n_vars: int, d: int, var: int, step: int) -> np.ndarray:
    """Indices (in the degree ``d + step`` table) of ``alpha + step * e_var``."""
    idx = _index(n_vars, d + step)
    out = np.empty(n_monomials(n_vars, d), dtype=np.int64)
    for i, row in enumerate(exponents(n_vars, d)):
        key = list(int(v) for v in row)
        key[var] += step
        out[i] = idx[tuple(key)]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def multinomials(n_vars: int, d: int) -> np.ndarray:
    """``d! / alpha!`` for every monomial, as floats (exact integers before rounding)."""
    fd = math.factorial(d)
    vals = []
    for row in exponents(n_vars, d):
        den = 1
        for a in row:
            den *= math.factorial(int(a))
        vals.append(float(fd // den))
    out = np.array(vals)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def kostlan_weights(n_vars: int, d: int) -> np.ndarray:
    out = np.sqrt(multinomials(n_vars, d))
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# coefficient-array kernels (axis 0 = monomials)

def derivative_coeffs(n_vars: int, d: int, c: np.ndarray, var: int) -> np.ndarray:
    if d == 0:
        return np.zeros((1,) + c.shape[1:])
    up = shift_map(n_vars, d - 1, var, 1)
    factor = (exponents(n_vars, d - 1)[:, var] + 1).astype(float)
    return factor.reshape((-1,) + (1,) * (c.ndim - 1)) * c[up]


def laplacian_coeffs(n_vars: int, d: int, c: np.ndarray) -> np.ndarray:
    if d < 2:
        return np.zeros((1,) + c.shape[1:])
    base = exponents(n_vars, d - 2)
    out = np.zeros((base.shape[0],) + c.shape[1:])
    shape = (-1,) + (1,) * (c.ndim - 1)
    for i in range(n_vars):
        up = shift_map(n_vars, d - 2, i, 2)
        factor = ((base[:, i] + 2) * (base[:, i] + 1)).astype(float)
        out += factor.reshape(shape) * c[up]
    return out


def mul_norm_sq_coeffs(n_vars: int, d: int, c: np.ndarray) -> np.ndarray:
    out = np.zeros((n_monomials(n_vars, d + 2),) + c.shape[1:])
    for k in range(n_vars):
        out[shift_map(n_vars, d, k, 2)] += c
    return out


def mul_linear_coeffs(n_vars: int, d: int, c: np.ndarray, form: np.ndarray) -> np.ndarray:
    """Multiply by the linear form ``sum_j form[j] x_j`` (monomial axis is the LAST axis)."""
    out = np.zeros(c.shape[:-1] + (n_monomials(n_vars, d + 1),))
    for j in range(n_vars):
        if form[j] != 0.0:
            out[..., shift_map(n_vars, d, j, 1)] += form[j] * c
    return out


def power_table(X: np.ndarray, d: int) -> np.ndarray:
    """``out[k, i, j] = X[k, i] ** j`` for ``j <= d``, by repeated multiplication."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    K, nv = X.shape
    powers = np.ones((K, nv, d + 1))
    if d:
        np.cumprod(np.broadcast_to(X[:, :, None], (K, nv, d)), axis=2, out=powers[:, :, 1:])
    return powers


def monomial_matrix(n_vars: int, d: int, X: np.ndarray, powers: np.ndarray | None = None) -> np.ndarray:
    """Values ``x^alpha`` for every point (row of ``X``) and monomial: shape ``(K, N)``.

    ``powers`` may be a precomputed ``power_table`` of degree at least ``d``.
    """
    if powers is None:
        powers = power_table(X, d)
    E = exponents(n_vars, d)
    out = np.take(powers[:, 0, :], E[:, 0], axis=1)
    for i in range(1, n_vars):
        out *= np.take(powers[:, i, :], E[:, i], axis=1)
    return out


def sphere_moments(A: np.ndarray) -> np.ndarray:
    """Exact ``int_{S^n} x^alpha dx`` for exponent rows ``A`` (last axis = variables)."""
    A = np.asarray(A)
    n_vars = A.shape[-1]
    even = np.all(A % 2 == 0, axis=-1)
    logm = np.sum(gammaln((A + 1) / 2.0), axis=-1) - gammaln((A.sum(axis=-1) + n_vars) / 2.0)
    return np.where(even, 2.0 * np.exp(logm), 0.0)


def sphere_volume(n: int) -> float:
    """Volume of the unit sphere ``S^n``."""
    return float(sphere_moments(np.zeros(n + 1, dtype=np.int64)))


@lru_cache(maxsize=64)
def l2_gram(n_vars: int, d: int, e: int) -> np.ndarray:
    Ed = exponents(n_vars, d)
    Ee = exponents(n_vars, e)
    G = sphere_moments(Ed[:, None, :] + Ee[None, :, :])
    G.setflags(write=False)
    return G


# ---------------------------------------------------------------------------
# polynomial objects

@dataclass(frozen=True, eq=False)
class HomogeneousPoly:
    """A real form of degree ``degree`` in ``n_vars`` variables."""

    n_vars: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if self.n_vars < 1 or self.degree < 0:
            raise ValueError(f"invalid shape n_vars={self.n_vars}, degree={self.degree}")
        expected = n_monomials(self.n_vars, self.degree)
        if c.shape[0] != expected:
            raise ValueError(
                f"expected {expected} coefficients for n_vars={self.n_vars}, "
                f"degree={self.degree}, got {c.shape[0]}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, n_vars: int, degree: int) -> "HomogeneousPoly":
        return cls(n_vars, degree, np.zeros(n_monomials(n_vars, degree)))

    @classmethod
    def from_terms(cls, n_vars: int, terms: dict) -> "HomogeneousPoly":
        """Build from ``{exponent tuple: coefficient}``; all exponents share one degree."""
        degrees = {sum(a) for a in terms}
        if len(degrees) != 1:
            raise ValueError("terms must be nonempty and homogeneous")
        d = degrees.pop()
        c = np.zeros(n_monomials(n_vars, d))
        for alpha, v in terms.items():
            if len(alpha) != n_vars:
                raise ValueError(f"exponent {alpha} has wrong length")
            c[monomial_index(n_vars, alpha)] += v
        return cls(n_vars, d, c)

    @classmethod
    def constant(cls, n_vars: int, value: float = 1.0) -> "HomogeneousPoly":
        return cls(n_vars, 0, np.array([value]))

    @classmethod
    def linear(cls, form: Sequence[float]) -> "HomogeneousPoly":
        form = np.asarray(form, dtype=float)
        return cls(len(form), 1, form)

    @classmethod
    def norm_sq_power(cls, n_vars: int, k: int) -> "HomogeneousPoly":
        """``(x_0^2 + ... + x_n^2)^k``."""
        p = cls.constant(n_vars)
        for _ in range(k):
            p = multiply_norm_sq(p)
        return p

    # basic protocol -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.n_vars - 1

    @property
    def exponents(self) -> np.ndarray:
        return exponents(self.n_vars, self.degree)

    def coefficient(self, alpha: Sequence[int]) -> float:
        return float(self.coeffs[monomial_index(self.n_vars, alpha)])

    def __call__(self, x) -> float | np.ndarray:
        return eval_poly(self, x)

    def _check_same(self, other: "HomogeneousPoly"):
        if not isinstance(other, HomogeneousPoly):
            raise TypeError(f"expected HomogeneousPoly, got {type(other).__name__}")
        if other.n_vars != self.n_vars or other.degree != self.degree:
            raise ValueError(
                f"shape mismatch: ({self.n_vars}, {self.degree}) vs ({other.n_vars}, {other.degree})"
            )

    def __add__(self, other):
        self._check_same(other)
        return HomogeneousPoly(self.n_vars, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_same(other)
        return HomogeneousPoly(self.n_vars, self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return HomogeneousPoly(self.n_vars, self.degree, -self.coeffs)

    def __mul__(self, t):
        if isinstance(t, HomogeneousPoly):
            return multiply(self, t)
        return HomogeneousPoly(self.n_vars, self.degree, float(t) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, t):
        return HomogeneousPoly(self.n_vars, self.degree, self.coeffs / float(t))

    def coeff_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def allclose(self, other: "HomogeneousPoly", rtol=1e-9, atol=0.0) -> bool:
        self._check_same(other)
        scale = max(self.coeff_norm(), other.coeff_norm())
        return float(np.linalg.norm(self.coeffs - other.coeffs)) <= rtol * scale + atol

    def __repr__(self):
        return f"HomogeneousPoly(n_vars={self.n_vars}, degree={self.degree}, coeffs={self.coeffs!r})"

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.degree, "order": MONOMIAL_ORDER,
                "coeffs": [float(v) for v in self.coeffs]}

    @classmethod
    def from_dict(cls, data: dict) -> "HomogeneousPoly":
        for key in ("n", "d", "coeffs"):
            if key not in data:
                raise ValueError(f"polynomial record is missing field '{key}'")
        if data.get("order", MONOMIAL_ORDER) != MONOMIAL_ORDER:
            raise ValueError(f"unsupported monomial order {data['order']!r}")
        return cls(int(data["n"]) + 1, int(data["d"]), np.asarray(data["coeffs"], dtype=float))


@dataclass(frozen=True, eq=False)
class PolySystem:
    """An ordered tuple of forms sharing ``n_vars``; degrees may differ."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a polynomial system needs at least one component")
        nv = {c.n_vars for c in comps}
        if len(nv) != 1:
            raise ValueError(f"components disagree on n_vars: {sorted(nv)}")
        object.__setattr__(self, "components", comps)

    @property
    def n_vars(self) -> int:
        return self.components[0].n_vars

    @property
    def n(self) -> int:
        return self.n_vars - 1

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def degrees(self) -> tuple:
        return tuple(c.degree for c in self.components)

    @property
    def degree(self) -> int:
        return max(self.degrees)

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __call__(self, x):
        return np.stack([eval_poly(c, x) for c in self.components], axis=-1)

    def __sub__(self, other: "PolySystem"):
        return PolySystem(tuple(a - b for a, b in zip(self.components, other.components, strict=True)))

    def __mul__(self, t):
        return PolySystem(tuple(float(t) * c for c in self.components))

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"n": self.n, "degrees": list(self.degrees),
                "components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, data: dict) -> "PolySystem":
        if "components" not in data:
            return cls((HomogeneousPoly.from_dict(data),))
        return cls(tuple(HomogeneousPoly.from_dict(c) for c in data["components"]))


def as_system(P) -> PolySystem:
    if isinstance(P, PolySystem):
        return P
    if isinstance(P, HomogeneousPoly):
        return PolySystem((P,))
    return PolySystem(tuple(P))


def dumps(obj) -> str:
    return json.dumps(obj.to_dict())


def loads(text: str):
    data = json.loads(text)
    if "components" in data:
        return PolySystem.from_dict(data)
    return HomogeneousPoly.from_dict(data)


# ---------------------------------------------------------------------------
# operations

def eval_poly(P: HomogeneousPoly, x) -> float | np.ndarray:
    """Evaluate at one point (1-d ``x``) or at every row of a 2-d array."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != P.n_vars:
        raise ValueError(f"point has {x.shape[-1]} coordinates, polynomial has {P.n_vars} variables")
    if x.ndim == 1:
        return float(monomial_matrix(P.n_vars, P.degree, x[None, :])[0] @ P.coeffs)
    flat = x.reshape(-1, P.n_vars)
    vals = monomial_matrix(P.n_vars, P.degree, flat) @ P.coeffs
    return vals.reshape(x.shape[:-1])


def partial_derivative(P: HomogeneousPoly, i: int) -> HomogeneousPoly:
    if not 0 <= i < P.n_vars:
        raise ValueError(f"variable index {i} out of range for {P.n_vars} variables")
    if P.degree == 0:
        return HomogeneousPoly.zero(P.n_vars, 0)
    return HomogeneousPoly(P.n_vars, P.degree - 1, derivative_coeffs(P.n_vars, P.degree, P.coeffs, i))


def laplacian(P: HomogeneousPoly) -> HomogeneousPoly:
    if P.degree < 2:
        return HomogeneousPoly.zero(P.n_vars, 0)
    return HomogeneousPoly(P.n_vars, P.degree - 2, laplacian_coeffs(P.n_vars, P.degree, P.coeffs))


def multiply_norm_sq(P: HomogeneousPoly) -> HomogeneousPoly:
    return HomogeneousPoly(P.n_vars, P.degree + 2, mul_norm_sq_coeffs(P.n_vars, P.degree, P.coeffs))


def multiply(P: HomogeneousPoly, Q: HomogeneousPoly) -> HomogeneousPoly:
    if P.n_vars != Q.n_vars:
        raise ValueError("n_vars mismatch")
    nv, dp, dq = P.n_vars, P.degree, Q.degree
    idx = _index(nv, dp + dq)
    out = np.zeros(n_monomials(nv, dp + dq))
    Eq = exponents(nv, dq)
    for a, ca in zip(exponents(nv, dp), P.coeffs):
        if ca == 0.0:
            continue
        targets = [idx[tuple(int(v) for v in a + b)] for b in Eq]
        out[targets] += ca * Q.coeffs
    return HomogeneousPoly(nv, dp + dq, out)


def sample_kostlan(n: int, d: int, rng: np.random.Generator) -> HomogeneousPoly:
    """Draw a Kostlan form in ``n + 1`` variables: ``xi_alpha * sqrt(d!/alpha!)``."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    w = kostlan_weights(n + 1, d)
    return HomogeneousPoly(n + 1, d, rng.standard_normal(w.shape[0]) * w)


def sample_kostlan_system(n: int, degrees: Iterable[int], rng: np.random.Generator) -> PolySystem:
    return PolySystem(tuple(sample_kostlan(n, d, rng) for d in degrees))


def bw_inner(P, Q) -> float:
    """Bombieri-Weyl inner product; systems combine componentwise."""
    if isinstance(P, PolySystem) or isinstance(Q, PolySystem):
        P, Q = as_system(P), as_system(Q)
        if P.m != Q.m:
            raise ValueError("systems have different lengths")
        return float(sum(bw_inner(a, b) for a, b in zip(P, Q)))
    P._check_same(Q)
    return float(np.sum(P.coeffs * Q.coeffs / multinomials(P.n_vars, P.degree)))


def bw_norm(P) -> float:
    return math.sqrt(max(bw_inner(P, P), 0.0))


def bw_dist(P, Q) -> float:
    return bw_norm(P - Q)


def l2_inner(P: HomogeneousPoly, Q: HomogeneousPoly) -> float:
    """``int_{S^n} P Q dx`` from exact monomial moments."""
    if P.n_vars != Q.n_vars:
        raise ValueError(f"n_vars mismatch: {P.n_vars} vs {Q.n_vars}")
    if (P.degree - Q.degree) % 2:
        return 0.0
    return float(P.coeffs @ l2_gram(P.n_vars, P.degree, Q.degree) @ Q.coeffs)


def l2_norm(P) -> float:
    if isinstance(P, PolySystem):
        return math.sqrt(sum(l2_inner(c, c) for c in P))
    return math.sqrt(max(l2_inner(P, P), 0.0))


def check_orthogonal(R: np.ndarray, n_vars: int, tol: float = 1e-10) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (n_vars, n_vars):
        raise ValueError(f"expected a {n_vars}x{n_vars} matrix, got shape {R.shape}")
    if np.linalg.norm(R.T @ R - np.eye(n_vars)) > tol:
        raise ValueError("matrix is not orthogonal")
    return R


def compose_orthogonal(P, R: np.ndarray):
    """Coefficients of ``x -> P(R x)`` for an orthogonal matrix ``R``.

    Uses the Euler identity on every derivative ``D^beta P``:
    ``(D^beta P)(Rx) = 1/(d-k) sum_i (Rx)_i (D^{beta+e_i} P)(Rx)``, starting
    from the constant top derivatives and working down to ``k = 0``.  Each
    level is one batch of linear-form multiplications.
    """
    if isinstance(P, PolySystem):
        return PolySystem(tuple(compose_orthogonal(c, R) for c in P))
    nv, d = P.n_vars, P.degree
    R = check_orthogonal(R, nv)
    if d == 0:
        return P
    E = exponents(nv, d)
    beta_fact = np.array([math.prod(math.factorial(int(a)) for a in row) for row in E], dtype=float)
    S = (beta_fact * P.coeffs)[:, None]            # rows: beta with |beta| = d, cols: degree-0 poly
    for k in range(d - 1, -1, -1):
        e = d - k - 1                              # degree of the polys in S
        nxt = np.zeros((n_monomials(nv, k), n_monomials(nv, e + 1)))
        for i in range(nv):
            rows = S[shift_map(nv, k, i, 1)]
            nxt += mul_linear_coeffs(nv, e, rows, R[i])
        S = nxt / (d - k)
    return HomogeneousPoly(nv, d, S[0])


def random_orthogonal(n_vars: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix."""
    Z = rng.standard_normal((n_vars, n_vars))
    Q, Rm = np.linalg.qr(Z)
    return Q * np.sign(np.diag(Rm))
