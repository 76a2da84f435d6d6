import numpy as np
import pytest

from fbmlab.errors import SolverError
from fbmlab.linalg import conjugate_gradient


def test_matches_dense_solver():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((12, 12))
    a = m @ m.T + 12 * np.eye(12)
    b = rng.standard_normal(12)
    x, res, it = conjugate_gradient(lambda v: a @ v, b, tol=1e-12)
    assert np.allclose(x, np.linalg.solve(a, b), atol=1e-9)
    assert res <= 1e-12
    assert it >= 1


def test_zero_rhs():
    x, res, it = conjugate_gradient(lambda v: 2 * v, np.zeros(5))
    assert np.all(x == 0.0)
    assert res == 0.0
    assert it == 0


def test_singular_system_with_projection():
    # path-graph Laplacian: nullspace is the constants
    n = 9
    a = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    a[0, 0] = a[-1, -1] = 1.0
    rng = np.random.default_rng(3)
    b = rng.standard_normal(n)
    b -= b.mean()

    def project(v):
        return v - v.mean()

    x, res, _ = conjugate_gradient(lambda v: a @ v, b, tol=1e-12, project=project)
    assert abs(x.mean()) <= 1e-12
    assert np.allclose(a @ x, b, atol=1e-9)
    assert res <= 1e-12


def test_negative_definite_raises():
    with pytest.raises(SolverError):
        conjugate_gradient(lambda v: -v, np.ones(4))


def test_operates_on_nd_arrays():
    rng = np.random.default_rng(11)
    b = rng.standard_normal((4, 5))
    x, res, _ = conjugate_gradient(lambda v: 3.0 * v, b, tol=1e-14)
    assert np.allclose(x, b / 3.0)
    assert x.shape == (4, 5)
