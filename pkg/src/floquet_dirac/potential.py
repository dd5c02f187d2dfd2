"""Honeycomb potentials stored as sparse dual-lattice Fourier coefficients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import lattice

SYMMETRY_TOL = 1e-12

CANONICAL_INDICES = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class SymmetryReport:
    real_valued: bool
    even: bool
    rotation_invariant: bool

    @property
    def honeycomb(self) -> bool:
        return self.real_valued and self.even and self.rotation_invariant

    def as_dict(self) -> dict:
        return {"real_valued": self.real_valued, "even": self.even,
                "R_invariant": self.rotation_invariant}


@dataclass(frozen=True)
class FourierPotential:
    """V(x) = Σ coeffs[(m, n)] exp(i (m k1 + n k2) . x).

    Zero coefficients are dropped on construction so equality and hashing of
    the coefficient table are well defined.
    """

    coeffs: Mapping[tuple[int, int], complex]
    name: str = "custom"
    symmetry: SymmetryReport = field(init=False, compare=False)

    def __post_init__(self):
        clean = {}
        for key, val in dict(self.coeffs).items():
            m, n = (int(key[0]), int(key[1]))
            c = complex(val)
            if not np.isfinite(c.real) or not np.isfinite(c.imag):
                raise PotentialError(f"non-finite coefficient at {(m, n)}")
            if c != 0:
                clean[(m, n)] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))
        object.__setattr__(self, "symmetry", check_symmetries(self))

    @property
    def cutoff(self) -> int:
        """Largest |m| or |n| among stored indices."""
        if not self.coeffs:
            return 0
        return max(max(abs(m), abs(n)) for m, n in self.coeffs)

    @property
    def scale(self) -> float:
        """Sum of coefficient magnitudes, a bound on sup |V|."""
        return float(sum(abs(c) for c in self.coeffs.values()))

    def coeff(self, m: int, n: int) -> complex:
        return self.coeffs.get((m, n), 0j)

    def rows(self) -> list[tuple[int, int, float, float]]:
        """(m, n, re, im) rows, the config-file representation."""
        return [(m, n, c.real, c.imag) for (m, n), c in self.coeffs.items()]


def from_rows(rows: Iterable, name: str = "custom") -> FourierPotential:
    coeffs: dict[tuple[int, int], complex] = {}
    for row in rows:
        if len(row) != 4:
            raise PotentialError(f"coefficient row must be (m, n, re, im), got {row!r}")
        m, n, re, im = row
        if int(m) != m or int(n) != n:
            raise PotentialError(f"non-integer index in row {row!r}")
        key = (int(m), int(n))
        coeffs[key] = coeffs.get(key, 0j) + complex(float(re), float(im))
    return FourierPotential(coeffs, name=name)


def make_canonical_honeycomb(V0: float) -> FourierPotential:
    """V0 [cos(k1.x) + cos(k2.x) + cos((k1+k2).x)]."""
    V0 = float(V0)
    if not np.isfinite(V0):
        raise PotentialError("V0 must be finite")
    return FourierPotential({idx: V0 / 2 for idx in CANONICAL_INDICES},
                            name="canonical")


def check_symmetries(V: FourierPotential, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    coeffs = V.coeffs
    keys = set(coeffs)
    keys |= {(-m, -n) for m, n in coeffs}
    real = even = rot = True
    for m, n in keys:
        c = V.coeffs.get((m, n), 0j)
        c_neg = V.coeffs.get((-m, -n), 0j)
        if abs(c_neg - np.conj(c)) > tol:
            real = False
        if abs(c_neg - c) > tol:
            even = False
        if abs(V.coeffs.get(lattice.rotate_index((m, n)), 0j) - c) > tol:
            rot = False
    return SymmetryReport(real, even, rot)


def evaluate(V: FourierPotential, x) -> np.ndarray | float:
    """Pointwise value of a real potential; x has trailing dimension 2."""
    if not V.symmetry.real_valued:
        raise PotentialError("potential is not real-valued: coefficients lack "
                             "conjugate partners at -index")
    pts = np.asarray(x, dtype=float)
    total = np.zeros(pts.shape[:-1], dtype=complex)
    for (m, n), c in V.coeffs.items():
        g = m * lattice.K1 + n * lattice.K2
        total = total + c * np.exp(1j * (pts @ g))
    imag = np.max(np.abs(total.imag)) if total.size else 0.0
    if imag > 1e-10 * max(V.scale, 1.0):
        raise PotentialError(f"imaginary residue {imag:.3e} exceeds tolerance")
    out = total.real
    return float(out) if out.ndim == 0 else out
