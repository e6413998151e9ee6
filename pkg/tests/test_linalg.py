import numpy as np
import pytest

from fwat.linalg import jacobi_eigvalsh, symmetric_eigvalsh, tridiagonal_ql_eigvalsh


def _random_symmetric(n, rng):
    a = rng.standard_normal((n, n))
    return a + a.T


@pytest.mark.parametrize("solver", [jacobi_eigvalsh, tridiagonal_ql_eigvalsh])
@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 31])
def test_matches_numpy_on_random_symmetric(solver, n, rng):
    a = _random_symmetric(n, rng)
    np.testing.assert_allclose(solver(a), np.linalg.eigvalsh(a), atol=1e-10 * max(1.0, np.abs(a).max()))


@pytest.mark.parametrize("solver", [jacobi_eigvalsh, tridiagonal_ql_eigvalsh])
def test_diagonal_and_zero_matrices(solver):
    np.testing.assert_array_equal(solver(np.diag([3.0, -1.0, 2.0])), [-1.0, 2.0, 3.0])
    np.testing.assert_array_equal(solver(np.zeros((4, 4))), np.zeros(4))


@pytest.mark.parametrize("solver", [jacobi_eigvalsh, tridiagonal_ql_eigvalsh])
def test_repeated_eigenvalues(solver):
    # K5 Laplacian: 0 once and 5 four times
    a = 5 * np.eye(5) - np.ones((5, 5))
    np.testing.assert_allclose(solver(a), [0, 5, 5, 5, 5], atol=1e-12)


@pytest.mark.parametrize("solver", [jacobi_eigvalsh, tridiagonal_ql_eigvalsh])
def test_rejects_bad_input(solver):
    with pytest.raises(ValueError):
        solver(np.ones((2, 3)))
    with pytest.raises(ValueError):
        solver(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_dispatch_covers_both_routes(rng):
    for n in (5, 40):
        a = _random_symmetric(n, rng)
        np.testing.assert_allclose(symmetric_eigvalsh(a), np.linalg.eigvalsh(a), atol=1e-10 * np.abs(a).max())


def test_input_not_modified(rng):
    a = _random_symmetric(6, rng)
    before = a.copy()
    jacobi_eigvalsh(a)
    tridiagonal_ql_eigvalsh(a)
    np.testing.assert_array_equal(a, before)
