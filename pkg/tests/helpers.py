"""Shared builders for the randomized tests."""
import numpy as np

from floquet_dirac import lattice
from floquet_dirac.potential import FourierPotential


def random_honeycomb(rng: np.random.Generator, radius_cells: int = 2, scale: float = 5.0) -> FourierPotential:
    """Real, even, rotation-invariant potential with random orbit coefficients."""
    coeffs: dict = {}
    for m, n in lattice.index_ball(radius_cells * lattice.DUAL_MIN_NORM):
        if (m, n) == (0, 0) or (m, n) in coeffs:
            continue
        c = float(rng.normal() * scale)
        idx = (m, n)
        for _ in range(3):
            coeffs[idx] = c
            coeffs[(-idx[0], -idx[1])] = c
            idx = lattice.rotate_index(idx)
    return FourierPotential(coeffs)


def random_field_values(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
