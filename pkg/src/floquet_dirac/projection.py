"""Band-limited Dirac subspaces, energy-window projectors and the effective-gap harness.

A band-limited Dirac packet on an N-cell supercell with envelope period L
(ε = L/N) occupies the fibers K + εξ, ξ on Λ*/L with |ξ| <= d0, and on each
of them lies in span{Φ1, Φ2}.  Projecting onto that subspace is therefore
a 2x2 problem per fiber once the representation is fiber-wise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import lattice
from .bloch import (BlochError, DiracPointData, PlaneWaveBasis, assemble_hk, check_no_fold,
                    potential_matrix)
from .dirac import ForcingProfile, floquet_exponents, monodromy_batch
from .flow import (BlochField, FlowError, SupercellGrid, WaveField, WavePacketEnvelope, dirac_fiber_key,
                   envelope_forcing, envelope_modes, fibers_to_grid, grid_to_fibers,
                   schrodinger_monodromies, supercell_size, wavepacket_fibers)
from .parallel import pmap
from .potential import FourierPotential


class PreconditionError(ValueError):
    pass


class AliasError(PreconditionError):
    def __init__(self, message: str, offending: tuple[int, int]):
        super().__init__(message)
        self.offending = offending


# --------------------------------------------------------------------------
# averaging identity


@dataclass
class TrigPolynomial:
    """q(X) = Σ coeffs[i] exp(i ξ_i . X), ξ_i = (p_i k1 + q_i k2)/L (period L cells)."""

    modes: np.ndarray
    coeffs: np.ndarray
    L: int

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=int).reshape(-1, 2)
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)

    @property
    def xi(self) -> np.ndarray:
        return self.modes @ lattice.DUAL_BASIS.T / self.L

    @property
    def band_radius(self) -> float:
        live = self.coeffs != 0
        if not np.any(live):
            return 0.0
        return float(np.max(np.linalg.norm(self.xi[live], axis=1)))

    def integral(self) -> complex:
        """∫ q over its L x L period cell."""
        zero = np.all(self.modes == 0, axis=1)
        return complex(np.sum(self.coeffs[zero]) * self.L ** 2 * lattice.CELL_AREA)

    def values(self, X) -> np.ndarray:
        return np.exp(1j * np.asarray(X, float) @ self.xi.T) @ self.coeffs


def random_trig_polynomial(L: int, radius: float, rng: np.random.Generator) -> TrigPolynomial:
    modes = envelope_modes(L, radius)
    c = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    return TrigPolynomial(modes, c, L)


def bloch_density(a: np.ndarray, b: np.ndarray, basis: PlaneWaveBasis) -> FourierPotential:
    """conj(Φ_a) Φ_b as a periodic Fourier series (the quasi-momentum phases cancel)."""
    idx = basis.indices
    coeffs: dict[tuple[int, int], complex] = {}
    for i, (m1, n1) in enumerate(idx):
        if a[i] == 0:
            continue
        ca = np.conj(a[i])
        for j, (m2, n2) in enumerate(idx):
            if b[j] != 0:
                key = (int(m2 - m1), int(n2 - n1))
                coeffs[key] = coeffs.get(key, 0j) + ca * b[j]
    return FourierPotential(coeffs, name="density")


def alias_check(band_radius: float, epsilon: float) -> tuple[int, int] | None:
    """Shortest nonzero dual vector n with |n| <= ε·d, or None if there is none."""
    limit = epsilon * band_radius
    if limit < lattice.DUAL_MIN_NORM:
        return None
    for m, n in sorted(lattice.index_ball(limit), key=lambda mn: np.linalg.norm(lattice.dual_vector(*mn))):
        if (m, n) != (0, 0):
            return (m, n)
    return None


@dataclass
class PoissonResult:
    lhs: complex
    rhs: complex
    residual: float
    scale: float


def poisson_average(p: FourierPotential, q: TrigPolynomial, epsilon: float,
                    pts_per_cell: int | None = None) -> PoissonResult:
    """∫ p(x) q(εx) dx by quadrature over the supercell vs ε⁻² |Ω|⁻¹ (∫_Ω p)(∫ q).

    Integrals run over one period of the integrand (N = L/ε cells).  The
    residual is |lhs - rhs| divided by ε⁻²|Ω|⁻¹ (∫_Ω |p|)(∫ |q|), which is
    |rhs| when p and q are nonnegative and stays meaningful when rhs = 0.
    """
    offending = alias_check(q.band_radius, epsilon)
    if offending is not None:
        raise AliasError(f"dual vector n={offending} lies inside the band limit: "
                         f"ε·d = {epsilon * q.band_radius:.4g} >= |n|", offending)
    N = supercell_size(epsilon, q.L)
    M = pts_per_cell or max(4, 2 * p.cutoff + 2)
    # the quadrature is exact once every product mode is resolved
    grid = SupercellGrid(N, M)
    # p is cell-periodic and the grid is commensurate, so one cell is tiled
    cell = SupercellGrid(1, M).points()
    p_cell = np.zeros(cell.shape[:-1], dtype=complex)
    for (m, n), c in p.coeffs.items():
        p_cell += c * np.exp(1j * cell @ lattice.dual_vector(m, n))
    # q(εx) on the grid is a discrete Fourier sum with integer modes (εx in units of L/n)
    spec = np.zeros(grid.shape, dtype=complex)
    np.add.at(spec, (q.modes[:, 0] % grid.n, q.modes[:, 1] % grid.n), q.coeffs)
    qv = np.fft.ifft2(spec) * grid.n ** 2
    lhs = complex(np.sum(np.tile(p_cell, (N, N)) * qv) * grid.dA)
    area = lattice.CELL_AREA
    p_mean = p.coeff(0, 0)
    rhs = complex(epsilon ** -2 / area * (p_mean * area) * q.integral())
    abs_p = float(np.mean(np.abs(p_cell))) * area
    abs_q = float(np.mean(np.abs(q.values(SupercellGrid(q.L, 8).points())))) * q.L ** 2 * area
    scale = epsilon ** -2 / area * abs_p * abs_q
    residual = abs(lhs - rhs) / scale if scale > 0 else abs(lhs - rhs)
    return PoissonResult(lhs, rhs, float(residual), float(scale))


# --------------------------------------------------------------------------
# energy-window projector


@dataclass
class EnergyWindowProjector:
    """Keeps Bloch modes with |E_b(k) - center| < half_width on every fiber it meets."""

    V: FourierPotential
    center: float
    half_width: float
    cache: dict = field(default_factory=dict, repr=False)

    def modes(self, k, basis: PlaneWaveBasis) -> np.ndarray:
        key = (tuple(np.round(np.asarray(k, float), 15)), basis.index_list)
        if key not in self.cache:
            E, Q = np.linalg.eigh(assemble_hk(self.V, k, basis))
            keep = np.abs(E - self.center) < self.half_width
            self.cache[key] = (E, Q[:, keep])
        return self.cache[key][1]

    def energies(self, k, basis: PlaneWaveBasis) -> np.ndarray:
        self.modes(k, basis)
        key = (tuple(np.round(np.asarray(k, float), 15)), basis.index_list)
        return self.cache[key][0]

    def apply_fibers(self, f: BlochField) -> BlochField:
        out = {}
        for key, c in f.fibers.items():
            Q = self.modes(f.momentum(key), f.basis)
            out[key] = Q @ (np.conj(Q.T) @ c)
        return BlochField(f.n_cells, f.basis, out)

    def __call__(self, f):
        if isinstance(f, BlochField):
            return self.apply_fibers(f)
        if isinstance(f, WaveField):
            return fibers_to_grid(self.apply_fibers(grid_to_fibers(f)), f.grid)
        raise TypeError("expected a WaveField or BlochField")


def energy_window_project(f, V: FourierPotential, E_D: float, width: float):
    """Spectral projection onto |H - E_D| < width, fiber by fiber.

    A WaveField is split into all of its supercell fibers using the full
    grid plane-wave box as basis; a BlochField keeps its own basis.
    """
    return EnergyWindowProjector(V, E_D, width)(f)


# --------------------------------------------------------------------------
# band-limited Dirac subspace


@dataclass
class BLDecomposition:
    bl_part: object
    residual: object
    bl_fraction: float
    raw_defect: float = 0.0


def _pair_basis(d: DiracPointData) -> np.ndarray:
    """Orthonormalized [Φ1, Φ2] coefficient columns (one Gram-Schmidt pass)."""
    Q, _ = np.linalg.qr(np.column_stack([d.phi1, d.phi2]))
    # QR may rotate phases; keep the columns aligned with Φ1, Φ2
    ph = np.array([np.vdot(Q[:, 0], d.phi1), np.vdot(Q[:, 1], d.phi2)])
    return Q * (ph / np.abs(ph))


def bl_fiber_keys(n_cells: int, epsilon: float, d0: float) -> list[tuple[int, int]]:
    L = epsilon * n_cells
    if abs(L - round(L)) > 1e-9:
        raise PreconditionError(f"ε·N = {L} is not an integer envelope period")
    return [dirac_fiber_key(n_cells, pq) for pq in envelope_modes(int(round(L)), d0)]


def _bl_project_fibers(psi: BlochField, d: DiracPointData, epsilon: float, d0: float) -> BLDecomposition:
    if psi.basis != d.basis:
        raise PreconditionError("field and Dirac data use different plane-wave bases")
    P = _pair_basis(d)
    bl, res = {}, {}
    for key, c in psi.fibers.items():
        bl[key] = np.zeros_like(c)
        res[key] = c.copy()
    for key in bl_fiber_keys(psi.n_cells, epsilon, d0):
        c = psi.fibers.get(key)
        if c is None:
            continue
        # β_j on this fiber is <Φ_j, ψ> (the low-pass of conj(Φ_j)ψ)
        beta = np.conj(P.T) @ c
        bl[key] = P @ beta
        res[key] = c - bl[key]
    bl_f = BlochField(psi.n_cells, psi.basis, bl)
    res_f = BlochField(psi.n_cells, psi.basis, res)
    total = psi.norm()
    frac = (bl_f.norm() / total) ** 2 if total > 0 else 0.0
    return BLDecomposition(bl_f, res_f, float(frac))


def bl_basis_on_grid(d: DiracPointData, epsilon: float, d0: float, grid: SupercellGrid) -> np.ndarray:
    """Orthonormal columns spanning BL(d0, ε) sampled on the grid (√dA-weighted)."""
    cols = []
    P = _pair_basis(d)
    for key in bl_fiber_keys(grid.n_cells, epsilon, d0):
        for j in range(2):
            f = fibers_to_grid(BlochField(grid.n_cells, d.basis, {key: P[:, j]}), grid)
            cols.append(f.values.ravel() * np.sqrt(grid.dA))
    if not cols:
        return np.zeros((grid.n * grid.n, 0), dtype=complex)
    Q, _ = np.linalg.qr(np.column_stack(cols))
    return Q


def lowpass_coefficients(f: WaveField, radius: float) -> np.ndarray:
    """Zero every Fourier mode of the grid field with |κ| > radius."""
    F = np.fft.fft2(f.values)
    keep = np.linalg.norm(f.grid.wavenumbers(), axis=-1) <= radius * (1 + 1e-12)
    return np.fft.ifft2(F * keep)


def _bl_project_grid(psi: WaveField, d: DiracPointData, epsilon: float, d0: float) -> BLDecomposition:
    grid = psi.grid
    supercell_size(epsilon, int(round(epsilon * grid.n_cells)))
    P = _pair_basis(d)
    K_key = dirac_fiber_key(grid.n_cells)
    raw = np.zeros(grid.shape, dtype=complex)
    for j in range(2):
        phi = fibers_to_grid(BlochField(grid.n_cells, d.basis, {K_key: P[:, j]}), grid)
        beta = lowpass_coefficients(WaveField(grid, np.conj(phi.values) * psi.values), epsilon * d0)
        raw += beta * phi.values
    Q = bl_basis_on_grid(d, epsilon, d0, grid)
    w = np.sqrt(grid.dA)
    bl = (Q @ (np.conj(Q.T) @ (psi.values.ravel() * w))).reshape(grid.shape) / w
    bl_f = WaveField(grid, bl)
    res_f = WaveField(grid, psi.values - bl)
    raw_defect = float(np.sqrt(np.sum(np.abs(raw - bl) ** 2) * grid.dA))
    frac = (bl_f.norm_l2 / psi.norm_l2) ** 2 if psi.norm_l2 > 0 else 0.0
    return BLDecomposition(bl_f, res_f, float(frac), raw_defect)


def bl_project(psi, d: DiracPointData, epsilon: float, d0: float) -> BLDecomposition:
    """Orthogonal split ψ = bl_part + residual with bl_part ∈ BL(d0, ε).

    On a grid the raw low-pass formula Σ_j lowpass(conj(Φ_j)ψ)Φ_j is formed
    first and its distance to the exact projection is kept as raw_defect;
    the returned bl_part is the exact orthogonal projection onto the
    orthonormalized basis {envelope modes x Φ_j}.
    """
    if isinstance(psi, BlochField):
        return _bl_project_fibers(psi, d, epsilon, d0)
    if isinstance(psi, WaveField):
        return _bl_project_grid(psi, d, epsilon, d0)
    raise TypeError("expected a WaveField or BlochField")


# --------------------------------------------------------------------------
# scaling of the out-of-window part


@dataclass
class ScalingTable:
    epsilon: np.ndarray
    residual: np.ndarray
    relative: np.ndarray
    slope: float
    no_fold_gap: float

    def table(self) -> np.ndarray:
        return np.column_stack([self.epsilon, self.residual, self.relative])


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2 or np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def require_no_fold(V: FourierPotential, d: DiracPointData, delta: float = 0.5,
                    delta0: float | None = None, k_grid_n: int = 24) -> float:
    delta0 = 0.25 * d.v_D * delta if delta0 is None else delta0
    r = check_no_fold(V, d.E_D, delta, delta0, k_grid_n, d.basis)
    if not r.holds:
        raise PreconditionError(f"no-fold condition fails: min |E_b(k) - E_D| = {r.worst_gap:.4g} "
                                f"< {delta0:.4g} at k = {r.worst_k.tolist()} (δ = {delta})")
    return r.worst_gap


def projection_scaling_check(alpha0: WavePacketEnvelope, d: DiracPointData, eps_list: Sequence[float],
                             V: FourierPotential, no_fold_delta: float = 0.5) -> ScalingTable:
    """‖Proj(|H - E_D| >= ε) u‖ for u ∈ BL(d0, ε) built from alpha0, per ε."""
    gap = require_no_fold(V, d, no_fold_delta)
    eps = np.asarray(eps_list, dtype=float)
    res, rel = [], []
    for e in eps:
        u = wavepacket_fibers(alpha0, d, e)
        out = 0.0
        for key, c in u.fibers.items():
            E, Q = np.linalg.eigh(assemble_hk(V, u.momentum(key), d.basis))
            far = np.abs(E - d.E_D) >= e
            out += float(np.sum(np.abs(np.conj(Q[:, far].T) @ c) ** 2))
        r = float(np.sqrt(u.area * out))
        res.append(r)
        rel.append(r / u.norm())
    res, rel = np.array(res), np.array(rel)
    return ScalingTable(eps, res, rel, loglog_slope(eps, rel), gap)


@dataclass
class ReconstructionResult:
    epsilon: float
    windowed_norm: float
    residual: float
    relative: float


def window_reconstruction(f: BlochField, V: FourierPotential, d: DiracPointData, d_prime: DiracPointData,
                          epsilon: float, d0: float) -> ReconstructionResult:
    """Window-project f (width ε) and remove its K and K' band-limited packets.

    f is written in the shared plane-wave basis of d and d_prime; fibers near
    K are compared with the pair of d, fibers near K' with the pair of d_prime.
    """
    P = EnergyWindowProjector(V, d.E_D, epsilon)
    g = P.apply_fibers(f)
    N = f.n_cells
    L = int(round(epsilon * N))
    keys_K = set(bl_fiber_keys(N, epsilon, d0))
    # K' = -K: its fibers are keyed (-N/3 + p, N/3 + q)
    keys_Kp = {(-N // 3 + p, N // 3 + q) for p, q in envelope_modes(L, d0)}
    PK, PKp = _pair_basis(d), _pair_basis(d_prime)
    out = 0.0
    for key, c in g.fibers.items():
        r = c
        if key in keys_K:
            r = c - PK @ (np.conj(PK.T) @ c)
        elif key in keys_Kp:
            r = c - PKp @ (np.conj(PKp.T) @ c)
        out += float(np.sum(np.abs(r) ** 2))
    wn = g.norm()
    res = float(np.sqrt(f.area * out))
    return ReconstructionResult(epsilon, wn, res, res / wn if wn > 0 else 0.0)


# --------------------------------------------------------------------------
# effective gap harness


def arc_distance(a, b) -> np.ndarray:
    """Distance on the circle R/2πZ."""
    d = np.mod(np.asarray(a, float) - np.asarray(b, float), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def multiplier_phase(lam) -> np.ndarray:
    """ν in [0, 2π) with λ = e^{-iν}."""
    return np.mod(-np.angle(lam), 2 * np.pi)


@dataclass
class QuasiWindow:
    center: float
    half_width: float

    def contains(self, nu) -> np.ndarray:
        return arc_distance(nu, self.center) < self.half_width


def default_window(d: DiracPointData, forcing: ForcingProfile, epsilon: float, g: float) -> QuasiWindow:
    """Arc of half-width g·T_per about E_D T_per/ε mod 2π."""
    return QuasiWindow(float(np.mod(d.E_D * forcing.T_per / epsilon, 2 * np.pi)), g * forcing.T_per)


@dataclass
class FiberScan:
    key: tuple[int, int]
    xi: np.ndarray
    nu: np.ndarray
    in_window: np.ndarray
    control: np.ndarray
    bl_fraction: np.ndarray
    residual_fraction: np.ndarray
    band_weight: np.ndarray
    predicted: np.ndarray
    prediction_error: np.ndarray
    unitarity_defect: float

    def as_dict(self) -> dict:
        return {"key": list(self.key), "xi": self.xi.tolist(), "mu": self.nu.tolist(),
                "in_window": self.in_window.tolist(), "control": self.control.tolist(),
                "bl_fraction": self.bl_fraction.tolist(),
                "residual_fraction": self.residual_fraction.tolist(),
                "band_weight": self.band_weight.tolist(),
                "predicted": self.predicted.tolist(), "prediction_error": self.prediction_error.tolist(),
                "unitarity_defect": self.unitarity_defect,
                "empty_selection": bool(not np.any(self.in_window))}


@dataclass
class GapScanReport:
    epsilon: float
    window: QuasiWindow
    fibers: list[FiberScan]

    def _pool(self, attr, mask_attr):
        vals = [getattr(f, attr)[getattr(f, mask_attr)] for f in self.fibers]
        return np.concatenate(vals) if vals else np.zeros(0)

    @property
    def in_window_residuals(self) -> np.ndarray:
        return self._pool("residual_fraction", "in_window")

    @property
    def control_residuals(self) -> np.ndarray:
        return self._pool("residual_fraction", "control")

    @property
    def control_bl_fractions(self) -> np.ndarray:
        return self._pool("bl_fraction", "control")

    def summary(self) -> dict:
        inw, ctl, ctl_bl = self.in_window_residuals, self.control_residuals, self.control_bl_fractions
        out = {"epsilon": self.epsilon, "window_center": self.window.center,
               "window_half_width": self.window.half_width, "n_fibers": len(self.fibers),
               "n_in_window": int(inw.size), "n_control": int(ctl.size)}
        if inw.size:
            out.update(in_window_min=float(inw.min()), in_window_median=float(np.median(inw)),
                       in_window_p10=float(np.percentile(inw, 10)))
        if ctl.size:
            out.update(control_max_residual=float(ctl.max()), control_min_bl_fraction=float(ctl_bl.min()))
        if inw.size and ctl.size:
            out["separation_ratio"] = float(inw.min() / ctl.max()) if ctl.max() > 0 else float("inf")
        return out


def _scan_fiber(M: np.ndarray, key, xi, P: np.ndarray, in_bl: bool, band_vecs: np.ndarray,
                window: QuasiWindow, predicted: np.ndarray) -> FiberScan:
    # Schur form of a unitary matrix is diagonal with orthonormal vectors
    Tm, Z = scipy.linalg.schur(M, output="complex")
    nu = multiplier_phase(np.diag(Tm))
    inside = window.contains(nu)
    bl = np.sum(np.abs(np.conj(P.T) @ Z) ** 2, axis=0) if in_bl else np.zeros(len(nu))
    bl = np.clip(bl, 0.0, 1.0)
    band_weight = np.sum(np.abs(np.conj(band_vecs.T) @ Z) ** 2, axis=0)
    control = (band_weight >= 0.5) & ~inside
    err = np.array([float(np.min(arc_distance(predicted, v))) for v in nu[control]])
    defect = float(np.linalg.norm(np.conj(M.T) @ M - np.eye(M.shape[0]), 2))
    return FiberScan(tuple(key), np.asarray(xi, float), nu, inside, control, bl,
                     np.sqrt(1.0 - bl), band_weight, np.asarray(predicted), err, defect)


def effective_gap_scan(V: FourierPotential, d: DiracPointData, forcing: ForcingProfile, epsilon: float,
                       d0: float, window: QuasiWindow, L: int, k_set=None, tol: float = 1e-6) -> GapScanReport:
    """Full monodromy spectra on fibers K + εξ, with each mode's distance from BL(d0, ε).

    k_set lists integer envelope modes (p, q), ξ = (p k1 + q k2)/L; default is
    every mode with |ξ| <= d0.

    The control group on each fiber is the set of Dirac-band modes outside the
    window: eigenvectors of the monodromy carrying at least half their weight
    on the two Dirac bands of H(k) at that same fiber.  This uses the band
    structure at k, not the K-point subspace that defines BL, so selecting
    controls does not presuppose their bl_fraction.  Each control mode's arc
    distance to the effective prediction e^{-i(E_D T/ε - ε<|A|²>T)} e^{±iμ(ξ)T}
    is reported as prediction_error; it is O(ε).
    """
    N = supercell_size(epsilon, L)
    modes = envelope_modes(L, d0) if k_set is None else np.asarray(k_set, dtype=int).reshape(-1, 2)
    xi = modes @ lattice.DUAL_BASIS.T / L
    bl_set = set(map(tuple, envelope_modes(L, d0)))
    keys = [dirac_fiber_key(N, pq) for pq in modes]
    T = forcing.T_per
    env_forcing = envelope_forcing(forcing)
    mats = monodromy_batch(xi, env_forcing, d.v_D)
    mu = floquet_exponents(mats, xi, T)
    ts = np.linspace(0, T, 257)[:-1]
    mean_A2 = float(np.mean(np.sum(forcing(ts) ** 2, axis=-1)))
    base = d.E_D * T / epsilon - epsilon * mean_A2 * T
    P = _pair_basis(d)
    b0 = d.band_pair[0] - 1

    def one(i):
        k = d.k_D + epsilon * xi[i]
        _, Q = np.linalg.eigh(assemble_hk(V, k, d.basis))
        Ms = schrodinger_monodromies(V, forcing, epsilon, [keys[i]], N, d.basis, tol=tol)[0]
        pred = np.mod(base + np.array([-1.0, 1.0]) * mu[i] * T, 2 * np.pi)
        return _scan_fiber(Ms, keys[i], xi[i], P, tuple(modes[i]) in bl_set, Q[:, b0:b0 + 2],
                           window, pred)

    fibers = pmap(one, range(len(keys)))
    return GapScanReport(epsilon, window, fibers)
