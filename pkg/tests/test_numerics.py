import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rctnet import numerics
from rctnet.errors import NotPSD, NotSymmetric, SingularMatrix


def test_solve_examples():
    np.testing.assert_allclose(numerics.solve(np.eye(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_allclose(numerics.solve(2 * np.eye(2), [4, 6]), [2, 3])
    np.testing.assert_allclose(numerics.solve([[1, 0.5], [0.5, 1]], [1, 1]), [2 / 3, 2 / 3])


def test_solve_singular():
    with pytest.raises(SingularMatrix):
        numerics.solve([[1, 2], [2, 4]], [1, 1])
    with pytest.raises(SingularMatrix):
        numerics.solve(np.zeros((2, 2)), [1, 1])


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        numerics.solve([[1, np.nan], [0, 1]], [1, 1])


def test_sym_eigen_examples():
    lam, _ = numerics.sym_eigen(np.eye(2))
    np.testing.assert_allclose(lam, [1, 1])
    lam, v = numerics.sym_eigen(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(lam, [3, 1])
    np.testing.assert_allclose(np.abs(v), [[0, 1], [1, 0]])
    lam, v = numerics.sym_eigen([[2, 1], [1, 2]])
    np.testing.assert_allclose(lam, [3, 1])
    np.testing.assert_allclose(np.abs(v[:, 0]), np.full(2, 1 / np.sqrt(2)))


def test_sym_eigen_not_symmetric():
    with pytest.raises(NotSymmetric):
        numerics.sym_eigen([[1, 2], [0, 1]])


def test_psd_sqrt_examples():
    np.testing.assert_allclose(numerics.psd_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(numerics.psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    v = np.array([0.5, 0.5])
    s = 4 * np.outer(v, v)
    r = numerics.psd_sqrt(s)
    np.testing.assert_allclose(r @ r, s, atol=1e-8)


def test_psd_sqrt_rejects_negative():
    with pytest.raises(NotPSD):
        numerics.psd_sqrt(np.diag([1.0, -0.1]))


def test_psd_sqrt_clamps_noise():
    r = numerics.psd_sqrt(np.diag([1.0, -1e-10]))
    np.testing.assert_allclose(r, np.diag([1.0, 0.0]))


def test_least_squares_examples():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(numerics.least_squares(np.eye(3), b), b)
    np.testing.assert_allclose(numerics.least_squares([[1.0], [1.0]], [1, 3]), [2.0])
    np.testing.assert_allclose(numerics.least_squares(np.zeros((3, 2)), b), [0, 0])


def test_least_squares_min_norm():
    # two identical columns: the min-norm solution splits the weight evenly
    a = np.array([[1.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(numerics.least_squares(a, [2, 0]), [1, 1])


sym = arrays(np.float64, (4, 4), elements=st.floats(-10, 10))


@given(sym)
def test_eigen_sum_is_trace(m):
    s = m + m.T
    lam, v = numerics.sym_eigen(s)
    assert abs(lam.sum() - np.trace(s)) <= 1e-8 * max(1, np.abs(s).max())
    np.testing.assert_allclose(s @ v, v * lam, atol=1e-8 * max(1, np.abs(s).max()))
    np.testing.assert_allclose(v.T @ v, np.eye(4), atol=1e-8)
    assert np.all(np.diff(lam) <= 1e-12)


@given(arrays(np.float64, (5, 4), elements=st.floats(-3, 3)))
def test_psd_sqrt_roundtrip(g):
    s = g.T @ g
    r = numerics.psd_sqrt(s)
    np.testing.assert_allclose(r, r.T, atol=1e-12)
    np.testing.assert_allclose(r @ r, s, atol=1e-8 * max(1, np.abs(s).max()))


@given(st.integers(0, 2**32 - 1))
def test_solve_roundtrip(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((6, 6)) + 6 * np.eye(6)
    b = r.standard_normal(6)
    x = numerics.solve(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-9 * np.linalg.norm(b)
