import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from core.errors import SingularMatrixError
from core.linalg import (
    hermitian_residual,
    inverse,
    is_positive_definite,
    matmul,
    metric_gram_schmidt,
    rank,
    solve,
    to_array,
)
from core.wirtinger import Dual


def test_solve():
    assert np.allclose(solve([[2, 1], [1, 3]], [3, 5]), [0.8, 1.4])


def test_inverse_of_metric():
    assert np.allclose(to_array(inverse([[1, 1], [1, 2]])), [[2, -1], [-1, 1]])


def test_singular_matrix_is_rejected():
    with pytest.raises(SingularMatrixError):
        solve([[1, 2], [2, 4]], [1, 1])


def test_solve_propagates_dual_numbers():
    # d/dt of the solution of [[t, 1], [1, 2]] x = [1, 0] at t = 3
    t = Dual(1, 3.0, 1.0)
    x = solve([[t, 1], [1, 2]], [1, 0])
    # x0 = 2 / (2t - 1), dx0/dt = -4 / (2t - 1)^2
    assert x[0].primal == pytest.approx(0.4)
    assert x[0].eps == pytest.approx(-4 / 25)


@pytest.mark.parametrize("matrix, expected", [
    (np.eye(3), 3),
    ([[1, 2], [2, 4]], 1),
    (np.zeros((2, 3)), 0),
    ([[1, 0, 1], [0, 1, 1]], 2),
])
def test_rank(matrix, expected):
    assert rank(np.array(matrix, dtype=complex)) == expected


def test_hermitian_checks():
    G = np.array([[2, 1j], [-1j, 2]])
    assert hermitian_residual(G) == 0.0
    assert is_positive_definite(G)
    assert not is_positive_definite(np.array([[1, 0], [0, -1]]))


def test_gram_schmidt_identity_metric():
    fixed = np.array([[1], [1]], dtype=complex)
    Y = metric_gram_schmidt(fixed, np.eye(2), 1)
    assert Y.shape == (2, 1)
    assert abs(abs(Y[0, 0]) - 1 / np.sqrt(2)) < 1e-12
    assert abs(Y[0, 0] + Y[1, 0]) < 1e-12


def test_gram_schmidt_weighted_metric():
    G = np.array([[2, 0.5j, 0], [-0.5j, 1, 0], [0, 0, 3]])
    fixed = np.array([[1], [1j], [0.5]], dtype=complex)
    Y = metric_gram_schmidt(fixed, G, 2)
    assert np.max(np.abs(Y.T @ G @ fixed.conj())) < 1e-12
    assert np.max(np.abs(Y.T @ G @ Y.conj() - np.eye(2))) < 1e-12


def test_gram_schmidt_rejects_dependent_columns():
    fixed = np.array([[1, 2], [1, 2]], dtype=complex)
    with pytest.raises(SingularMatrixError):
        metric_gram_schmidt(fixed, np.eye(2), 0)


def test_gram_schmidt_seed_order_without_pivoting():
    Y = metric_gram_schmidt(np.array([[1], [0], [0]], dtype=complex), np.eye(3), 1,
                            seed_order=[2, 1], pivoting=False)
    assert np.allclose(Y[:, 0], [0, 0, 1])


entries = st.floats(min_value=-1, max_value=1, allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, (3, 3), elements=entries), arrays(np.float64, (3,), elements=entries))
def test_solve_on_diagonally_dominant_systems(noise, b):
    A = 4 * np.eye(3) + noise
    x = solve(A.tolist(), b.tolist())
    assert np.allclose(A @ np.array(x), b, atol=1e-10)


@given(arrays(np.float64, (2, 2), elements=entries))
def test_inverse_times_matrix(noise):
    A = (3 * np.eye(2) + noise).tolist()
    assert np.allclose(to_array(matmul(A, inverse(A))), np.eye(2), atol=1e-10)
