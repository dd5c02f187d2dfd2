"""Triangular lattice geometry, its dual, and the 2π/3 rotation.

Real lattice is spanned by v1, v2; the dual lattice by k1, k2 with
k_m . v_n = 2π δ_mn.  Dual vectors are addressed by integer pairs (m, n)
meaning m k1 + n k2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT3 = np.sqrt(3.0)

V1 = np.array([SQRT3 / 2, 0.5])
V2 = np.array([SQRT3 / 2, -0.5])
K1 = (4 * np.pi / SQRT3) * np.array([0.5, SQRT3 / 2])
K2 = (4 * np.pi / SQRT3) * np.array([0.5, -SQRT3 / 2])

# columns are the basis vectors
REAL_BASIS = np.column_stack([V1, V2])
DUAL_BASIS = np.column_stack([K1, K2])

_DUAL_INV = np.linalg.inv(DUAL_BASIS)

CELL_AREA = abs(np.linalg.det(REAL_BASIS))
DUAL_CELL_AREA = abs(np.linalg.det(DUAL_BASIS))

K_POINT = (K1 - K2) / 3
K_PRIME_POINT = -K_POINT

# clockwise rotation by 2π/3
ROTATION = np.array([[-0.5, SQRT3 / 2], [-SQRT3 / 2, -0.5]])

# shortest nonzero dual vector length
DUAL_MIN_NORM = float(np.linalg.norm(K1))


class LatticeError(ValueError):
    """Raised on malformed lattice input (bad shapes, non-finite entries)."""


@dataclass(frozen=True)
class Lattice:
    """The fixed triangular lattice, bundled for passing around."""

    v1: np.ndarray = V1
    v2: np.ndarray = V2
    k1: np.ndarray = K1
    k2: np.ndarray = K2

    @property
    def cell_area(self) -> float:
        return CELL_AREA

    @property
    def dirac_points(self) -> tuple[np.ndarray, np.ndarray]:
        return K_POINT.copy(), K_PRIME_POINT.copy()


def _as_points(k) -> np.ndarray:
    arr = np.asarray(k, dtype=float)
    if arr.shape[-1:] != (2,):
        raise LatticeError(f"expected trailing dimension 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LatticeError("non-finite coordinates")
    return arr


def dual_vector(m, n) -> np.ndarray:
    """Cartesian coordinates of m k1 + n k2 (broadcasts over arrays)."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    return m[..., None] * K1 + n[..., None] * K2


def dual_coordinates(k) -> np.ndarray:
    """Fractional coordinates (s, t) with k = s k1 + t k2."""
    return _as_points(k) @ _DUAL_INV.T


def _snapped_coordinates(k) -> np.ndarray:
    # coordinates within rounding of an integer are taken as that integer
    st = dual_coordinates(k)
    near = np.rint(st)
    return np.where(np.abs(st - near) <= 1e-12 * np.maximum(1.0, np.abs(near)), near, st)


def reduce_to_cell(k) -> np.ndarray:
    """Map k into the fundamental dual cell {s k1 + t k2 : s, t in [0, 1)}."""
    st = _snapped_coordinates(k)
    st = st - np.floor(st)
    # guard against s == 1.0 after rounding
    st = np.where(st >= 1.0, 0.0, st)
    return st @ DUAL_BASIS.T


def reduce_with_shift(k) -> tuple[np.ndarray, np.ndarray]:
    """Reduce k and also return the integer dual shift (m, n) that was removed."""
    st = _snapped_coordinates(k)
    shift = np.floor(st)
    frac = st - shift
    over = frac >= 1.0
    frac = np.where(over, 0.0, frac)
    shift = shift + over
    return frac @ DUAL_BASIS.T, shift.astype(int)


def rotate(k, times: int = 1) -> np.ndarray:
    """Apply the clockwise 2π/3 rotation `times` times."""
    arr = _as_points(k)
    mat = np.linalg.matrix_power(ROTATION, times % 3)
    return arr @ mat.T


def rotate_index(mn, times: int = 1) -> tuple[int, int]:
    """Rotate an integer dual index; the dual lattice is rotation invariant."""
    m, n = mn
    vec = rotate(dual_vector(m, n), times)
    st = np.linalg.solve(DUAL_BASIS, vec)
    out = np.rint(st).astype(int)
    if np.max(np.abs(st - out)) > 1e-9:
        raise LatticeError(f"rotation left the dual lattice for index {mn}")
    return int(out[0]), int(out[1])


def is_equivalent(k, q, tol: float = 1e-10) -> bool:
    """True when k - q lies on the dual lattice."""
    st = dual_coordinates(np.asarray(k, float) - np.asarray(q, float))
    return bool(np.max(np.abs(st - np.rint(st))) <= tol)


def distance_to_points(k, centres) -> np.ndarray:
    """Distance from k to the nearest dual-lattice image of any centre."""
    arr = _as_points(k)
    shifts = dual_vector(*np.meshgrid(np.arange(-2, 3), np.arange(-2, 3))).reshape(-1, 2)
    best = np.full(arr.shape[:-1], np.inf)
    for centre in centres:
        # reduce the displacement first so a 5x5 block of images suffices
        disp = reduce_to_cell(arr - np.asarray(centre, float))
        d = np.linalg.norm(disp[..., None, :] - shifts, axis=-1).min(axis=-1)
        best = np.minimum(best, d)
    return best


@lru_cache(maxsize=None)
def index_ball(radius: float) -> tuple[tuple[int, int], ...]:
    """Dual indices (m, n) with |m k1 + n k2| <= radius, lexicographic order."""
    # |m k1 + n k2| >= |k1| * max(|m|, |n|) * sin(π/3) bounds the search box
    bound = int(np.ceil(radius / (DUAL_MIN_NORM * SQRT3 / 2))) + 1
    out = []
    for m in range(-bound, bound + 1):
        for n in range(-bound, bound + 1):
            if np.linalg.norm(m * K1 + n * K2) <= radius * (1 + 1e-12):
                out.append((m, n))
    return tuple(out)


def cell_grid(n_s: int, n_t: int | None = None) -> np.ndarray:
    """Uniform sample of the fundamental dual cell, shape (n_s * n_t, 2)."""
    n_t = n_s if n_t is None else n_t
    s, t = np.meshgrid(np.arange(n_s) / n_s, np.arange(n_t) / n_t, indexing="ij")
    return np.stack([s.ravel(), t.ravel()], axis=-1) @ DUAL_BASIS.T
