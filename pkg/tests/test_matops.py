import numpy as np
import pytest

from gfgl.matops import (
    group_soft_threshold,
    logdet_prox,
    logdet_prox_eigenvalue_map,
    norms,
    soft_threshold_offdiag,
    sym_eigen,
)


def test_eigen_diagonal():
    pair = sym_eigen(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(pair.values, [1.0, 3.0])
    np.testing.assert_allclose(np.abs(pair.vectors), [[0, 1], [1, 0]])


def test_eigen_swap_matrix():
    np.testing.assert_allclose(sym_eigen([[0.0, 1.0], [1.0, 0.0]]).values, [-1.0, 1.0])


def test_eigen_reconstruction(rng):
    A = rng.standard_normal((5, 5))
    A = A + A.T
    pair = sym_eigen(A)
    assert np.linalg.norm(pair.reconstruct() - A) < 1e-10
    np.testing.assert_allclose(pair.vectors.T @ pair.vectors, np.eye(5), atol=1e-10)


def test_eigen_rejects_nan():
    with pytest.raises(ValueError):
        sym_eigen([[np.nan, 0.0], [0.0, 1.0]])


@pytest.mark.parametrize("eta, expected", [
    (0.0, 0.7071067812),
    (1.0, 0.5),
    (-2.0, 1.3660254038),
])
def test_eigenvalue_map_values(eta, expected):
    assert logdet_prox_eigenvalue_map(eta) == pytest.approx(expected, abs=1e-10)


def test_eigenvalue_map_solves_quadratic():
    eta = np.linspace(-50, 50, 201)
    u = logdet_prox_eigenvalue_map(eta)
    assert np.all(u > 0)
    np.testing.assert_allclose(2 * u * u + eta * u - 1, 0.0, atol=1e-12)


def test_eigenvalue_map_large_eta_precision():
    u = logdet_prox_eigenvalue_map(1e9)
    assert u == pytest.approx(1e-9, rel=1e-12)


def test_logdet_prox_stationarity(rng):
    A = rng.standard_normal((4, 4))
    A = A + A.T
    U = logdet_prox(A)
    assert np.linalg.norm(-np.linalg.inv(U) + 2 * U + A) < 1e-8


def test_soft_threshold_examples():
    A = np.array([[5.0, 0.5], [-0.1, 7.0]])
    out = soft_threshold_offdiag(A, 0.2)
    np.testing.assert_allclose(out, [[5.0, 0.3], [0.0, 7.0]])
    np.testing.assert_array_equal(soft_threshold_offdiag(A, 0.0), A)
    assert soft_threshold_offdiag(A, 100.0)[0, 0] == 5.0
    with pytest.raises(ValueError):
        soft_threshold_offdiag(A, -1.0)


def test_soft_threshold_commutes_with_permutation(rng):
    A = rng.standard_normal((5, 5))
    perm = rng.permutation(5)
    a = soft_threshold_offdiag(A[perm][:, perm], 0.3)
    b = soft_threshold_offdiag(A, 0.3)[perm][:, perm]
    np.testing.assert_array_equal(a, b)


def test_group_threshold_examples():
    eye = np.eye(2)
    out = group_soft_threshold(eye, np.sqrt(2))
    assert np.all(out == 0.0)
    np.testing.assert_array_equal(group_soft_threshold(eye, 0.0), eye)
    Q = np.array([[1.0, 1.0], [1.0, 1.0]])
    out = group_soft_threshold(Q, 1.0)
    np.testing.assert_allclose(out, Q / 2)
    assert np.linalg.norm(out) == pytest.approx(1.0)
    assert np.all(group_soft_threshold(np.zeros((2, 2)), 0.0) == 0.0)
    with pytest.raises(ValueError):
        group_soft_threshold(Q, -0.1)


def test_group_threshold_stack():
    Q = np.stack([np.eye(2), 3 * np.eye(2)])
    out = group_soft_threshold(Q, 2.0)
    assert np.all(out[0] == 0)
    np.testing.assert_allclose(np.linalg.norm(out[1]), 3 * np.sqrt(2) - 2)


def test_norms_examples():
    n = norms([[1.0, -2.0], [3.0, 0.0]])
    assert n["frobenius"] == pytest.approx(np.sqrt(14))
    assert (n["max_abs"], n["l1_offdiag"], n["operator_inf"]) == (3.0, 5.0, 3.0)
    assert all(v == 0 for v in norms(np.zeros((3, 3))).values())
    n = norms(np.eye(3))
    assert n["frobenius"] == pytest.approx(np.sqrt(3))
    assert (n["max_abs"], n["l1_offdiag"], n["operator_inf"]) == (1.0, 0.0, 1.0)
