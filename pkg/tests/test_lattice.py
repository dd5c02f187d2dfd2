import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floquet_dirac import lattice

coord = st.floats(-50, 50, allow_nan=False)


def test_duality_and_area():
    G = lattice.DUAL_BASIS.T @ lattice.REAL_BASIS
    assert np.allclose(G, 2 * np.pi * np.eye(2), atol=1e-12)
    assert np.isclose(lattice.CELL_AREA, np.sqrt(3) / 2)
    assert np.isclose(lattice.CELL_AREA * lattice.DUAL_CELL_AREA, 4 * np.pi ** 2)


def test_dirac_points():
    assert np.allclose(lattice.K_POINT, [0, 4 * np.pi / 3], atol=1e-12)
    assert np.allclose(lattice.K_PRIME_POINT, -lattice.K_POINT)
    # both corners are fixed by the rotation up to a dual vector
    for k in lattice.Lattice().dirac_points:
        assert lattice.is_equivalent(lattice.rotate(k), k)


def test_rotation_is_clockwise_third_turn():
    r = lattice.rotate(np.array([1.0, 0.0]))
    assert np.allclose(r, [-0.5, -np.sqrt(3) / 2], atol=1e-12)
    assert np.allclose(np.linalg.matrix_power(lattice.ROTATION, 3), np.eye(2), atol=1e-12)
    assert np.isclose(np.linalg.det(lattice.ROTATION), 1.0)


def test_reduce_dual_vectors_to_origin():
    for m, n in [(1, 0), (0, 1), (-3, 2), (7, -7)]:
        assert np.allclose(lattice.reduce_to_cell(lattice.dual_vector(m, n)), 0, atol=1e-10)
        red, shift = lattice.reduce_with_shift(lattice.dual_vector(m, n))
        assert tuple(shift) == (m, n)


def test_bad_input_rejected():
    with pytest.raises(lattice.LatticeError):
        lattice.reduce_to_cell(np.array([np.nan, 0.0]))
    with pytest.raises(lattice.LatticeError):
        lattice.rotate(np.zeros(3))


@given(coord, coord)
def test_reduce_is_equivalent_and_idempotent(x, y):
    k = np.array([x, y])
    r = lattice.reduce_to_cell(k)
    assert lattice.is_equivalent(r, k, tol=1e-8)
    st_ = lattice.dual_coordinates(r)
    assert np.all(st_ >= -1e-12) and np.all(st_ < 1 + 1e-12)
    assert np.allclose(lattice.reduce_to_cell(r), r, atol=1e-9)


@given(coord, coord)
def test_reduce_with_shift_reconstructs(x, y):
    k = np.array([x, y])
    r, (m, n) = lattice.reduce_with_shift(k)
    assert np.allclose(r + lattice.dual_vector(m, n), k, atol=1e-9)


@given(st.integers(-6, 6), st.integers(-6, 6))
def test_rotation_preserves_dual_lattice_and_norm(m, n):
    a, b = lattice.rotate_index((m, n))
    assert np.isclose(np.linalg.norm(lattice.dual_vector(a, b)), np.linalg.norm(lattice.dual_vector(m, n)))
    assert lattice.rotate_index((a, b), 2) == (m, n)


def test_index_ball_symmetric():
    ball = set(lattice.index_ball(3 * lattice.DUAL_MIN_NORM))
    assert (0, 0) in ball
    assert all((-m, -n) in ball for m, n in ball)
    assert all(lattice.rotate_index(i) in ball for i in ball)
    # the origin and its six nearest neighbours
    assert len(lattice.index_ball(lattice.DUAL_MIN_NORM)) == 7


def test_distance_to_points_periodic():
    K = lattice.K_POINT
    d = lattice.distance_to_points(np.array([K + lattice.K1, K + 0.1 * lattice.K1]), [K])
    assert np.allclose(d, [0, 0.1 * lattice.DUAL_MIN_NORM], atol=1e-12)
