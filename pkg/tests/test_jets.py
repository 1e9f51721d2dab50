import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_poly, sphere_points
from lowdeg.harmonic import SphereFunction
from lowdeg.jets import (
    CATALOGUE,
    CRITICAL_POINTS,
    NONDEGENERATE_MINIMA,
    ZERO_SET,
    JetEvaluator,
    SingularityType,
    cr_norm_estimate,
    discriminant_distance,
    exp_map,
    jet_at,
    nu,
    polish,
    singular_residual,
    stability_margin,
    tangent_frames,
)
from lowdeg.mesh import circle_mesh, icosphere
from lowdeg.poly import HomogeneousPoly, PolySystem, compose_orthogonal, random_orthogonal, sample_kostlan

seeds = st.integers(0, 2**32 - 1)


def lin(*c):
    return HomogeneousPoly.linear(c)


def x0x1():
    return HomogeneousPoly.from_terms(3, {(1, 1, 0): 1.0})


# -- catalogue -------------------------------------------------------------

def test_catalogue():
    assert [(w.kind, w.jet_order) for w in CATALOGUE] == [
        ("ZeroSet", 0), ("CriticalPoints", 1), ("NondegenerateMinima", 2)]
    assert SingularityType.parse("zero_set") is ZERO_SET
    assert SingularityType.parse("minima") is NONDEGENERATE_MINIMA
    with pytest.raises(ValueError):
        SingularityType.parse("cusp")
    ZERO_SET.check_target(2, 2)
    with pytest.raises(ValueError):
        ZERO_SET.check_target(1, 2)
    with pytest.raises(ValueError):
        CRITICAL_POINTS.check_target(2, 2)


# -- frames -------------------------------------------------------------

def test_frames_orthonormal(rng):
    X = np.concatenate([sphere_points(rng, 3, 50), np.eye(3), -np.eye(3)])
    F = tangent_frames(X)
    for x, f in zip(X, F):
        assert np.abs(f.T @ f - np.eye(2)).max() <= 1e-10
        assert np.abs(x @ f).max() <= 1e-10


def test_exp_map_geodesic(rng):
    x = sphere_points(rng, 3, 1)[0]
    F = tangent_frames(x[None])[0]
    v = 0.3 * F[:, 0]
    y = exp_map(x[None], v[None])[0]
    assert np.arccos(np.clip(x @ y, -1, 1)) == pytest.approx(0.3, rel=1e-12)


# -- jets -------------------------------------------------------------------

def test_jet_examples():
    e0 = np.array([1.0, 0.0, 0.0])
    j = jet_at(lin(1, 0, 0), e0, 1)
    assert j.tensors[0][0] == pytest.approx(1.0)
    assert np.abs(j.tensors[1]).max() <= 1e-15
    j = jet_at(lin(0, 1, 0), e0, 1)
    assert j.tensors[0][0] == 0.0
    assert np.linalg.norm(j.tensors[1]) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        jet_at(lin(1, 0, 0), np.array([1.0, 1.0, 0.0]), 1)


def taylor_oracle(P, x, F, h=1e-3):
    """Derivatives of u -> P(exp_x(F u)) at u = 0 by central differences."""
    n = F.shape[1]

    def g(u):
        return P(exp_map(x[None], (F @ u)[None])[0])

    E = np.eye(n) * h
    grad = np.array([(g(E[a]) - g(-E[a])) / (2 * h) for a in range(n)])
    hess = np.array([[(g(E[a] + E[b]) - g(E[a] - E[b]) - g(-E[a] + E[b]) + g(-E[a] - E[b])) / (4 * h * h)
                      for b in range(n)] for a in range(n)])
    third = np.empty((n, n, n))
    for a in range(n):
        for b in range(n):
            for c in range(n):
                s = 0.0
                for sa in (1, -1):
                    for sb in (1, -1):
                        for sc in (1, -1):
                            s += sa * sb * sc * g(sa * E[a] + sb * E[b] + sc * E[c])
                third[a, b, c] = s / (8 * h**3)
    return grad, hess, third


@pytest.mark.parametrize("nv,d", [(2, 5), (3, 4)])
def test_jets_match_normal_coordinate_taylor(rng, nv, d):
    P = random_poly(rng, nv, d)
    x = sphere_points(rng, nv, 1)[0]
    j = jet_at(P, x, 3)
    grad, hess, third = taylor_oracle(P, x, j.frame)
    scale = np.abs(P.coeffs).sum()
    assert np.abs(j.tensors[1][0] - grad).max() <= 1e-6 * scale
    assert np.abs(j.tensors[2][0] - hess).max() <= 1e-5 * scale
    assert np.abs(j.tensors[3][0] - third).max() <= 1e-3 * scale


def test_jet_tensors_symmetric(rng):
    j = jet_at(random_poly(rng, 3, 6), sphere_points(rng, 3, 1)[0], 3)
    T2, T3 = j.tensors[2][0], j.tensors[3][0]
    assert np.array_equal(T2, T2.T)
    for perm in [(0, 2, 1), (1, 0, 2), (2, 1, 0), (1, 2, 0), (2, 0, 1)]:
        assert np.array_equal(T3, T3.transpose(perm))


@given(st.integers(2, 3), st.integers(1, 7), seeds)
def test_nu_frame_invariance(nv, d, seed):
    rng = np.random.default_rng(seed)
    P = random_poly(rng, nv, d)
    X = sphere_points(rng, nv, 3)
    ev = JetEvaluator(P, 3)
    F = tangent_frames(X)
    Q = random_orthogonal(nv - 1, rng)
    _, T = ev.tangential(X, 3)
    _, TQ = ev.tangential(X, 3, frames=F @ Q)
    for k in range(3):
        a = nu([t[k] for t in T])
        b = nu([t[k] for t in TQ])
        assert abs(a - b) <= 1e-10 * max(a, 1.0)


@given(st.integers(2, 3), st.integers(1, 8), seeds)
def test_nu_rotation_equivariance(nv, d, seed):
    rng = np.random.default_rng(seed)
    P = random_poly(rng, nv, d)
    R = random_orthogonal(nv, rng)
    x = sphere_points(rng, nv, 1)[0]
    PR = compose_orthogonal(P, R)
    for r in range(4):
        a, b = nu(jet_at(PR, x, r)), nu(jet_at(P, R @ x, r))
        assert abs(a - b) <= 1e-9 * max(a, 1.0)


@given(st.integers(1, 8), seeds)
def test_residual_equivariance(d, seed):
    rng = np.random.default_rng(seed)
    P = random_poly(rng, 3, d)
    R = random_orthogonal(3, rng)
    x = sphere_points(rng, 3, 1)[0]
    PR = compose_orthogonal(P, R)
    for W in CATALOGUE:
        a = singular_residual(W, jet_at(PR, x, W.jet_order + 1))
        b = singular_residual(W, jet_at(P, R @ x, W.jet_order + 1))
        assert abs(a - b) <= 1e-9 * max(a, 1.0)


def test_jets_of_sphere_function_and_system(rng):
    S = PolySystem((random_poly(rng, 3, 4), random_poly(rng, 3, 3)))
    x = sphere_points(rng, 3, 1)[0]
    a = jet_at(S, x, 2)
    b = jet_at(SphereFunction.from_poly(S), x, 2)
    assert a.m == 2 and a.n == 2
    for s, t in zip(a.tensors, b.tensors):
        assert np.allclose(s, t, rtol=1e-10, atol=1e-12)


# -- residuals ------------------------------------------------------------

def test_residual_examples(rng):
    f = lin(1, 0, 0)
    for x in sphere_points(rng, 3, 10):
        assert singular_residual(ZERO_SET, jet_at(f, x, 1)) == pytest.approx(1.0, rel=1e-12)
    e0 = np.array([1.0, 0.0, 0.0])
    j = jet_at(f, e0, 2)
    assert np.allclose(j.tensors[2][0], -np.eye(2), atol=1e-14)
    assert singular_residual(CRITICAL_POINTS, j) == pytest.approx(1.0, rel=1e-14)
    # zero of f with full-rank tangential Jacobian: the residual is sigma_min
    q = lin(0, 1, 0)
    j = jet_at(q, e0, 1)
    assert singular_residual(ZERO_SET, j) == pytest.approx(np.linalg.svd(j.tensors[1], compute_uv=False).min())


def test_residual_order_and_target_checked(rng):
    with pytest.raises(ValueError):
        singular_residual(CRITICAL_POINTS, jet_at(lin(1, 0, 0), np.eye(3)[0], 1))
    S = PolySystem((lin(1, 0, 0), lin(0, 1, 0)))
    with pytest.raises(ValueError):
        singular_residual(CRITICAL_POINTS, jet_at(S, np.eye(3)[2], 2))


def test_residual_at_circle_zero_is_derivative(rng):
    from lowdeg.topology import zeros_on_circle

    P = sample_kostlan(1, 9, rng)
    for th in zeros_on_circle(P):
        x = np.array([math.cos(th), math.sin(th)])
        j = jet_at(P, x, 1)
        assert abs(singular_residual(ZERO_SET, j) - abs(j.tensors[1][0, 0])) <= 1e-10 * np.abs(P.coeffs).max()


# -- searches ------------------------------------------------------------

def test_discriminant_distance_examples():
    for level in (1, 3):
        assert float(discriminant_distance(lin(1, 0, 0), ZERO_SET, icosphere(level))) == pytest.approx(1.0, abs=1e-6)
    est = discriminant_distance(x0x1(), ZERO_SET, icosphere(2))
    assert est.value <= 1e-6
    assert abs(abs(est.point[2]) - 1) <= 1e-3
    assert est.resolution["level"] == 2


@pytest.mark.parametrize("W", CATALOGUE)
def test_discriminant_distance_monotone(W):
    P = sample_kostlan(2, 10, np.random.default_rng(17))
    a = discriminant_distance(P, W, icosphere(2)).value
    b = discriminant_distance(P, W, icosphere(3)).value
    assert b <= a + 1e-9
    Q = sample_kostlan(1, 10, np.random.default_rng(18))
    a = discriminant_distance(Q, W, circle_mesh(0)).value
    b = discriminant_distance(Q, W, circle_mesh(2)).value
    assert b <= a + 1e-9


def test_polish_never_worsens(rng):
    P = sample_kostlan(2, 8, rng)
    X0 = sphere_points(rng, 3, 30)
    X, v = polish(lambda Y: P(Y), X0, 0.1)
    assert np.all(v <= P(X0) + 1e-15)
    assert np.allclose(P(X), v)


def test_cr_norm_examples():
    c = HomogeneousPoly.constant(3, -2.5)
    for r in range(3):
        assert cr_norm_estimate(c, r, icosphere(1)) == pytest.approx(2.5, rel=1e-14)
    assert cr_norm_estimate(lin(1, 0, 0), 0, icosphere(1)) == pytest.approx(1.0, abs=1e-12)
    S = PolySystem((HomogeneousPoly.constant(3, 3.0), HomogeneousPoly.constant(3, 4.0)))
    assert cr_norm_estimate(S, 1, icosphere(0)) == pytest.approx(5.0, rel=1e-14)


@pytest.mark.parametrize("r", [0, 1, 2])
def test_cr_norm_monotone(r):
    P = sample_kostlan(2, 10, np.random.default_rng(19 + r))
    a = cr_norm_estimate(P, r, icosphere(2))
    b = cr_norm_estimate(P, r, icosphere(3))
    assert b >= a - 1e-9
    grid = sphere_points(np.random.default_rng(0), 3, 5000)
    ev = JetEvaluator(P, r)
    brute = nu([t[0] for t in ev.tangential(grid[:1], r)[1]])
    assert b >= brute - 1e-9


# -- stability margin ---------------------------------------------------

def test_stability_examples():
    P = sample_kostlan(1, 12, np.random.default_rng(4))
    m = stability_margin(P, 12, ZERO_SET, 1.0, circle_mesh(1))
    assert m.lhs == 0.0 and m.in_E_L == (m.rhs > 0) and m.rhs > 0
    m = stability_margin(x0x1(), 0, ZERO_SET, 1.0, icosphere(2))
    assert m.rhs <= 1e-6 and not m.in_E_L
    with pytest.raises(ValueError):
        stability_margin(P, 4, ZERO_SET, 0.0, circle_mesh(1))


@pytest.mark.parametrize("t", [1e-3, 0.5, 7.0])
def test_stability_scale_invariance(t):
    P = sample_kostlan(1, 20, np.random.default_rng(6))
    mesh = circle_mesh(1)
    a = stability_margin(P, 8, ZERO_SET, 1.0, mesh)
    b = stability_margin(t * P, 8, ZERO_SET, 1.0, mesh)
    assert b.lhs == pytest.approx(t * a.lhs, rel=1e-9)
    assert b.rhs == pytest.approx(t * a.rhs, rel=1e-9)
    assert a.in_E_L == b.in_E_L
