import numpy as np
import pytest
from hypothesis import settings

from lowdeg.poly import HomogeneousPoly

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_poly(rng, n_vars, d):
    from lowdeg.poly import n_monomials

    return HomogeneousPoly(n_vars, d, rng.standard_normal(n_monomials(n_vars, d)))


def sphere_points(rng, n_vars, k):
    X = rng.standard_normal((k, n_vars))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
