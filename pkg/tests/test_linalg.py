import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskcond.errors import NotSpdError, ShapeError
from maskcond.linalg import cholesky_spd, logdet_spd, solve_spd


def test_cholesky_hand_value():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    lower = cholesky_spd(m)
    expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
    assert np.allclose(lower, expected, atol=1e-12)


def test_logdet_hand_value():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    # det = 4*3 - 2*2 = 8
    assert abs(logdet_spd(m) - np.log(8.0)) < 1e-12


def test_solve_hand_value():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    b = np.array([2.0, 5.0])
    x = solve_spd(m, b)
    assert np.allclose(m @ x, b, atol=1e-12)


def test_not_positive_definite_raises():
    with pytest.raises(NotSpdError):
        cholesky_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_asymmetric_raises():
    with pytest.raises(NotSpdError):
        cholesky_spd(np.array([[1.0, 0.5], [0.1, 1.0]]))


def test_non_square_raises():
    with pytest.raises(ShapeError):
        cholesky_spd(np.zeros((2, 3)))


def test_empty_matrix_conventions():
    empty = np.zeros((0, 0))
    assert cholesky_spd(empty).shape == (0, 0)
    assert logdet_spd(empty) == 0.0
    assert solve_spd(empty, np.zeros(0)).shape == (0,)


def test_min_pivot_flags_near_singular():
    m = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-13]])
    with pytest.raises(NotSpdError):
        cholesky_spd(m, min_pivot=1e-10)


@settings(deadline=None, max_examples=50)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_cholesky_solve_logdet_consistency(d, seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((d, d))
    m = b @ b.T + d * np.eye(d)
    lower = cholesky_spd(m)
    assert np.allclose(lower @ lower.T, m, atol=1e-9 * d)
    rhs = rng.standard_normal(d)
    x = solve_spd(m, rhs)
    assert np.allclose(m @ x, rhs, atol=1e-8)
    sign, ref = np.linalg.slogdet(m)
    assert sign > 0
    assert abs(logdet_spd(m) - ref) < 1e-9 * max(1.0, abs(ref))
