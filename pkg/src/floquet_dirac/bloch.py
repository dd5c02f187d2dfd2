"""Plane-wave Bloch Hamiltonians, band structures and Dirac points.

A k-pseudoperiodic function is stored as coefficients c_g of
exp(i (k + g) . x), g = m k1 + n k2 running over a PlaneWaveBasis.
Coefficient vectors have unit Euclidean norm, which is the L²(Ω)
normalization up to the constant factor |Ω|.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import lattice
from .parallel import pmap
from .potential import FourierPotential

TAU = np.exp(2j * np.pi / 3)


class BlochError(RuntimeError):
    pass


class NoDiracPointError(BlochError):
    def __init__(self, message: str, min_splitting: float):
        super().__init__(message)
        self.min_splitting = min_splitting


class DegenerateConeError(BlochError):
    pass


class NormalizationError(BlochError):
    pass


class ConeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Ordered set of dual indices.  Use `ball` for the standard cutoff basis."""

    index_list: tuple[tuple[int, int], ...]
    cutoff_radius: int | None = None

    def __post_init__(self):
        if len(self.index_list) == 0:
            raise BlochError("empty plane-wave basis")
        if len(set(self.index_list)) != len(self.index_list):
            raise BlochError("duplicate plane-wave indices")

    @classmethod
    def ball(cls, cutoff_radius: int) -> "PlaneWaveBasis":
        """Indices with |m k1 + n k2| <= cutoff_radius * |k1|, lexicographic."""
        if cutoff_radius < 0:
            raise BlochError("cutoff radius must be nonnegative")
        idx = lattice.index_ball(float(cutoff_radius) * lattice.DUAL_MIN_NORM)
        return cls(idx, int(cutoff_radius))

    @property
    def dim(self) -> int:
        return len(self.index_list)

    @property
    def indices(self) -> np.ndarray:
        return _index_array(self.index_list)

    @property
    def gvecs(self) -> np.ndarray:
        return _gvec_array(self.index_list)

    def position(self) -> dict[tuple[int, int], int]:
        return _position_map(self.index_list)


@lru_cache(maxsize=64)
def _index_array(index_list) -> np.ndarray:
    arr = np.array(index_list, dtype=int).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def _gvec_array(index_list) -> np.ndarray:
    arr = _index_array(index_list) @ lattice.DUAL_BASIS.T
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def _position_map(index_list) -> dict:
    return {g: i for i, g in enumerate(index_list)}


@lru_cache(maxsize=32)
def _potential_matrix_cached(coeff_items, index_list) -> np.ndarray:
    idx = _index_array(index_list)
    diff = idx[:, None, :] - idx[None, :, :]
    mat = np.zeros((len(index_list), len(index_list)), dtype=complex)
    for (m, n), c in coeff_items:
        mat[(diff[..., 0] == m) & (diff[..., 1] == n)] = c
    mat.setflags(write=False)
    return mat


def potential_matrix(V: FourierPotential, basis: PlaneWaveBasis) -> np.ndarray:
    """Matrix of multiplication by V: entry (g, g') = coeff(g - g')."""
    return _potential_matrix_cached(tuple(V.coeffs.items()), basis.index_list)


def assemble_hk(V: FourierPotential, k, basis: PlaneWaveBasis) -> np.ndarray:
    kvec = np.asarray(k, dtype=float)
    kin = np.sum((kvec + basis.gvecs) ** 2, axis=1)
    return potential_matrix(V, basis) + np.diag(kin)


@dataclass
class BlochEigenSystem:
    k: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray


def solve_bands(V: FourierPotential, k, n_bands: int | None, basis: PlaneWaveBasis,
                vectors: bool = True) -> BlochEigenSystem:
    n = basis.dim if n_bands is None else int(n_bands)
    if not 1 <= n <= basis.dim:
        raise BlochError(f"n_bands={n} outside [1, {basis.dim}]")
    H = assemble_hk(V, k, basis)
    try:
        if vectors:
            E, U = scipy.linalg.eigh(H, subset_by_index=(0, n - 1))
        else:
            E = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=(0, n - 1))
            U = np.empty((basis.dim, 0), dtype=complex)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(H)
        raise BlochError(f"eigensolver failed at k={k}: {exc}; cond(H)={cond:.3e}") from exc
    return BlochEigenSystem(np.asarray(k, float), E, U)


def band_path(V: FourierPotential, waypoints, samples_per_leg: int, n_bands: int,
              basis: PlaneWaveBasis) -> np.ndarray:
    """Bands along a polyline.  Columns: arclength, kx, ky, E_1..E_n."""
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise BlochError("band_path needs at least two 2-vector waypoints")
    ks, arc = [], []
    s0 = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        length = float(np.linalg.norm(b - a))
        if length == 0.0:
            continue
        ts = np.arange(samples_per_leg) / samples_per_leg
        ks.extend(a + t * (b - a) for t in ts)
        arc.extend(s0 + t * length for t in ts)
        s0 += length
    ks.append(pts[-1])
    arc.append(s0)
    energies = pmap(lambda k: solve_bands(V, k, n_bands, basis, vectors=False).energies, ks)
    return np.column_stack([np.array(arc), np.array(ks), np.array(energies)])


def high_symmetry_path() -> list[np.ndarray]:
    """Γ → K → M → Γ, with M the midpoint of the zone edge through K."""
    gamma = np.zeros(2)
    m_point = lattice.K1 / 2
    return [gamma, lattice.K_POINT, m_point, gamma]


@dataclass
class DiracPointData:
    k_D: np.ndarray
    band_pair: tuple[int, int]
    E_D: float
    v_D: float
    phi1: np.ndarray
    phi2: np.ndarray
    degeneracy_residual: float
    basis: PlaneWaveBasis
    rotation_eigenvalues: tuple[complex, complex] = (TAU, np.conj(TAU))
    velocity_vector: np.ndarray | None = None

    def as_summary(self) -> dict:
        return {
            "k_D": [float(x) for x in self.k_D],
            "band_pair": list(self.band_pair),
            "E_D": float(self.E_D),
            "v_D": float(self.v_D),
            "degeneracy_residual": float(self.degeneracy_residual),
            "basis_dim": self.basis.dim,
        }


def rotation_permutation(k, basis: PlaneWaveBasis) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient map for the symmetry f(x) -> f(R^T x) on k-pseudoperiodic functions.

    R is the clockwise rotation of `lattice.ROTATION`; the function-level
    operator uses its adjoint, which is the convention under which the
    τ-eigenvector Φ1 has <Φ1, -2i∇Φ2> proportional to (1, i).
    Requires R k ≡ k modulo the dual lattice.  Returns (src, dst) index
    arrays: output[dst] = input[src].  Basis elements mapped outside the
    basis are dropped; their weight is a truncation effect.
    """
    kvec = np.asarray(k, dtype=float)
    # exp(i q . R^T x) = exp(i (R q) . x)
    q = kvec + basis.gvecs
    rotated = q @ lattice.ROTATION.T - kvec
    st = rotated @ np.linalg.inv(lattice.DUAL_BASIS).T
    mn = np.rint(st).astype(int)
    if np.max(np.abs(st - mn)) > 1e-8:
        raise BlochError("rotation does not preserve this quasi-momentum")
    pos = basis.position()
    src, dst = [], []
    for i, (m, n) in enumerate(mn):
        j = pos.get((int(m), int(n)))
        if j is not None:
            src.append(i)
            dst.append(j)
    return np.array(src, dtype=int), np.array(dst, dtype=int)


def apply_rotation(vecs: np.ndarray, k, basis: PlaneWaveBasis) -> np.ndarray:
    src, dst = rotation_permutation(k, basis)
    out = np.zeros_like(vecs)
    out[dst] = vecs[src]
    return out


def conjugate_parity(vec: np.ndarray) -> np.ndarray:
    """Coefficients of conj(f(-x)): the same index carries the conjugate."""
    return np.conj(vec)


def gradient_moments(a: np.ndarray, b: np.ndarray, k, basis: PlaneWaveBasis) -> np.ndarray:
    """<a, -i ∇ b> as a complex 2-vector (gradient acts as i(k+g))."""
    q = np.asarray(k, float) + basis.gvecs
    return np.einsum("g,gj,g->j", np.conj(a), q, b)


def fermi_velocity_inner_product(d: DiracPointData, tol: float = 1e-6) -> tuple[float, np.ndarray]:
    """v_D and the vector <Φ1, -2i∇Φ2> for a normalized Dirac pair."""
    vec = 2 * gradient_moments(d.phi1, d.phi2, d.k_D, d.basis)
    v = 0.5 * (vec[0] - 1j * vec[1])
    if abs(v.imag) > tol * max(1.0, abs(v)) or v.real < -tol:
        raise NormalizationError(f"velocity coefficient {v} is not real nonnegative")
    v_D = float(max(v.real, 0.0))
    if np.linalg.norm(vec - v_D * np.array([1, 1j])) > tol * max(1.0, v_D):
        raise NormalizationError(f"<Φ1,-2i∇Φ2> = {vec} not of the form v_D (1, i)")
    return v_D, vec


def _normalize_pair(Q: np.ndarray, k, basis: PlaneWaveBasis):
    """Rotate a 2D eigenspace into the rotation-eigen, conjugate-parity basis."""
    RQ = apply_rotation(Q, k, basis)
    rsub = Q.conj().T @ RQ
    evals, evecs = np.linalg.eig(rsub)
    j = int(np.argmin(np.abs(evals - TAU)))
    phi1 = Q @ evecs[:, j]
    phi1 /= np.linalg.norm(phi1)
    phi2 = conjugate_parity(phi1)
    vec = 2 * gradient_moments(phi1, phi2, k, basis)
    c = 0.5 * (vec[0] - 1j * vec[1])
    # phi1 -> e^{iθ} phi1 sends phi2 -> e^{-iθ} phi2 and c -> e^{-2iθ} c
    theta = 0.5 * np.angle(c) if abs(c) > 0 else 0.0
    phi1 = phi1 * np.exp(1j * theta)
    phi2 = conjugate_parity(phi1)
    return phi1, phi2, (complex(evals[j]), complex(evals[1 - j]))


def find_dirac_point(V: FourierPotential, basis: PlaneWaveBasis, k_guess=None,
                     degeneracy_tol: float = 1e-8, v_min: float = 1e-6,
                     n_search: int = 12) -> DiracPointData:
    """Lowest consecutive band pair degenerate at K, normalized as a Dirac pair."""
    if not V.symmetry.honeycomb:
        raise BlochError(f"potential is not honeycomb-symmetric: {V.symmetry.as_dict()}")
    k = lattice.K_POINT if k_guess is None else np.asarray(k_guess, float)
    n = min(n_search + 1, basis.dim)
    sys = solve_bands(V, k, n, basis)
    E, U = sys.energies, sys.vectors
    gaps = np.diff(E)
    min_split = float(np.min(gaps)) if gaps.size else np.inf
    rejected = []
    for b in range(len(E) - 1):
        if gaps[b] > degeneracy_tol:
            continue
        below = gaps[b - 1] if b > 0 else np.inf
        above = gaps[b + 1] if b + 1 < len(gaps) else np.inf
        if min(below, above) <= 100 * degeneracy_tol:
            rejected.append((b, "multiplicity above two"))
            continue
        Q = U[:, b:b + 2]
        phi1, phi2, rot = _normalize_pair(Q, k, basis)
        vec = 2 * gradient_moments(phi1, phi2, k, basis)
        v = 0.5 * (vec[0] - 1j * vec[1])
        if abs(v) < v_min:
            rejected.append((b, f"velocity {abs(v):.2e} below v_min"))
            continue
        d = DiracPointData(k_D=k.copy(), band_pair=(b + 1, b + 2), E_D=float(E[b:b + 2].mean()),
                           v_D=0.0, phi1=phi1, phi2=phi2, degeneracy_residual=float(gaps[b]),
                           basis=basis, rotation_eigenvalues=rot)
        d.v_D, d.velocity_vector = fermi_velocity_inner_product(d)
        return d
    if any("velocity" in why for _, why in rejected):
        raise DegenerateConeError(f"degenerate pairs found but none conical: {rejected}")
    raise NoDiracPointError(
        f"no Dirac point found among the lowest {n} bands at k={k.tolist()}; "
        f"minimal splitting {min_split:.3e}; rejected {rejected}", min_split)


def dirac_point_at_k_prime(d: DiracPointData) -> DiracPointData:
    """Dirac pair at K' = -K by complex conjugation of the K pair.

    conj(Φ(x)) is (-K)-pseudoperiodic; its coefficient at -K + g is
    conj(c) taken from index -g.  (Conjugate parity maps K to itself.)
    """
    pos = d.basis.position()
    perm = np.array([pos[(-m, -n)] for m, n in d.basis.index_list])
    psi1 = np.conj(d.phi1[perm])
    psi2 = np.conj(d.phi2[perm])
    return DiracPointData(k_D=-d.k_D, band_pair=d.band_pair, E_D=d.E_D, v_D=d.v_D,
                          phi1=psi1, phi2=psi2, degeneracy_residual=d.degeneracy_residual,
                          basis=d.basis, rotation_eigenvalues=d.rotation_eigenvalues,
                          velocity_vector=None)


@dataclass
class ConeFit:
    v_fit: float
    slope_plus: float
    slope_minus: float
    spread: float
    directional: np.ndarray


def fermi_velocity_cone_fit(V: FourierPotential, d: DiracPointData, radii, directions: int,
                            basis: PlaneWaveBasis | None = None) -> ConeFit:
    basis = d.basis if basis is None else basis
    r = np.asarray(radii, dtype=float)
    b = d.band_pair[0] - 1
    angles = 2 * np.pi * (np.arange(directions) + 0.5) / directions
    plus = np.empty((directions, r.size))
    minus = np.empty((directions, r.size))

    def energies(args):
        i, j = args
        k = d.k_D + r[j] * np.array([np.cos(angles[i]), np.sin(angles[i])])
        return solve_bands(V, k, b + 2, basis, vectors=False).energies[b:b + 2]

    jobs = [(i, j) for i in range(directions) for j in range(r.size)]
    for (i, j), e in zip(jobs, pmap(energies, jobs)):
        minus[i, j], plus[i, j] = e[0] - d.E_D, e[1] - d.E_D
    # E - E_D = s r + c r²: the quadratic column absorbs the band curvature
    if r.size >= 2:
        coef = np.linalg.pinv(np.column_stack([r, r ** 2]))[0]
    else:
        coef = r / np.sum(r ** 2)
    s_plus = plus @ coef
    s_minus = minus @ coef
    directional = 0.5 * (s_plus - s_minus)
    spread = float(directional.max() / directional.min() - 1)
    # anisotropy at the smallest radius alone
    small = 0.5 * (plus[:, 0] - minus[:, 0]) / r[0]
    if small.max() / small.min() - 1 > 0.1:
        warnings.warn("cone anisotropy above 10% at the smallest radius", ConeWarning)
    return ConeFit(float(directional.mean()), float(s_plus.mean()), float(s_minus.mean()),
                   spread, directional)


@dataclass
class NoFoldResult:
    holds: bool
    worst_k: np.ndarray
    worst_gap: float
    samples: int


def check_no_fold(V: FourierPotential, E_D: float, delta: float, delta0: float,
                  k_grid_n: int, basis: PlaneWaveBasis, centres=None) -> NoFoldResult:
    """min_b |E_b(k) - E_D| >= delta0 away from discs of radius delta about the centres.

    centres defaults to both Dirac points K and K'.
    """
    if not delta < np.linalg.norm(lattice.K_POINT):
        raise BlochError("delta must be smaller than |K|")
    if centres is None:
        centres = [lattice.K_POINT, lattice.K_PRIME_POINT]
    ks = lattice.cell_grid(k_grid_n)
    dist = lattice.distance_to_points(ks, centres)
    ks = ks[dist > delta]

    def gap(k):
        E = solve_bands(V, k, None, basis, vectors=False).energies
        return float(np.min(np.abs(E - E_D)))

    gaps = np.array(pmap(gap, list(ks)))
    if gaps.size == 0:
        return NoFoldResult(True, np.full(2, np.nan), np.inf, 0)
    i = int(np.argmin(gaps))
    return NoFoldResult(bool(gaps[i] >= delta0), ks[i], float(gaps[i]), int(gaps.size))


def fold_quasi_energies(energies, T_per: float) -> np.ndarray:
    """E mod 2π/T_per, in [0, 2π/T_per)."""
    if not T_per > 0:
        raise ValueError("T_per must be positive")
    period = 2 * np.pi / T_per
    out = np.mod(np.asarray(energies, dtype=float), period)
    return np.where(out >= period, 0.0, out)
