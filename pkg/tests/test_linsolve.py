import numpy as np
import pytest
import scipy.sparse as sp

from biotiter import linsolve
from biotiter.linsolve import Factorization, SingularMatrixError, spsolve


def test_solve_matches_dense():
    rng = np.random.default_rng(0)
    A = sp.random(40, 40, density=0.2, random_state=1) + 5 * sp.eye(40)
    b = rng.standard_normal(40)
    x = spsolve(A, b)
    assert np.allclose(A @ x, b)
    f = Factorization(A)
    B = rng.standard_normal((40, 3))
    assert np.allclose(A @ f.solve(B), B)
    assert f.condest() >= 1.0


def test_saddle_point_needs_pivoting():
    # zero diagonal block: fails without row pivoting
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(spsolve(A, [3.0, 1.0]), [1.0, 1.0])


def test_singular_matrix_reports_row():
    A = sp.csr_matrix(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 2.0]]))
    with pytest.raises(SingularMatrixError) as info:
        Factorization(A)
    assert info.value.row == 1


def test_rank_deficient():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        Factorization(A)


def test_factor_counter():
    before = linsolve.FACTOR_COUNT
    f = Factorization(sp.eye(5))
    f.solve(np.ones(5))
    f.solve(np.zeros(5))
    assert linsolve.FACTOR_COUNT == before + 1


def test_shape_errors():
    with pytest.raises(ValueError):
        Factorization(sp.csr_matrix(np.ones((2, 3))))
    with pytest.raises(ValueError):
        Factorization(sp.eye(3)).solve(np.ones(4))
