"""Driven Schrödinger dynamics on a periodic supercell.

    i ∂t ψ = (-Δ + V(x) + 2iε A(εt).∇) ψ

The supercell holds N x N copies of the unit cell.  Its Fourier modes have
wavevectors (a k1 + b k2)/N, and since the operator commutes with lattice
translations the problem splits exactly into Bloch fibers: fiber (a, b)
carries the quasi-momentum k = (a k1 + b k2)/N and the plane waves
exp(i (k + g).x).  On a fiber the drive acts as the diagonal -2ε A.(k + g).

Two representations are provided:

* WaveField: samples on an (N M) x (N M) real-space grid, evolved by Strang
  splitting (`evolve`).
* BlochField: plane-wave coefficients on a few fibers, evolved exactly fiber
  by fiber with exponential integrator steps (`evolve_fibers`).  This is what
  makes envelopes with fine momentum resolution affordable: only the
  fibers a packet actually occupies are stored.

A Dirac wave packet ε α(εx)^T Φ(x) is periodic on the supercell when
ε N = L is an integer: the envelope is then periodic on L copies of the cell
in the slow variable X = εx, with Fourier modes ξ on the lattice Λ*/L.
Such a mode lives on the fiber K + εξ, which requires N divisible by 3 so
that K itself is a supercell momentum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .bloch import DiracPointData, PlaneWaveBasis, potential_matrix
from .dirac import ForcingProfile, propagate_batch
from .potential import FourierPotential, evaluate


class FlowError(ValueError):
    pass


class AccuracyError(RuntimeError):
    def __init__(self, message: str, achieved: float, recommended_dt: float | None = None):
        super().__init__(message)
        self.achieved = achieved
        self.recommended_dt = recommended_dt


# --------------------------------------------------------------------------
# real-space grids


@dataclass(frozen=True)
class SupercellGrid:
    n_cells: int
    pts_per_cell: int

    def __post_init__(self):
        if self.n_cells < 1 or self.pts_per_cell < 2:
            raise FlowError("need n_cells >= 1 and pts_per_cell >= 2")

    @property
    def n(self) -> int:
        return self.n_cells * self.pts_per_cell

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def area(self) -> float:
        return self.n_cells ** 2 * lattice.CELL_AREA

    @property
    def dA(self) -> float:
        return lattice.CELL_AREA / self.pts_per_cell ** 2

    @property
    def step_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        return lattice.V1 / self.pts_per_cell, lattice.V2 / self.pts_per_cell

    def points(self) -> np.ndarray:
        p = np.arange(self.n)
        P, Q = np.meshgrid(p, p, indexing="ij")
        return (P[..., None] * lattice.V1 + Q[..., None] * lattice.V2) / self.pts_per_cell

    def frequency_indices(self) -> tuple[np.ndarray, np.ndarray]:
        f = np.rint(np.fft.fftfreq(self.n, d=1.0 / self.n)).astype(int)
        return np.meshgrid(f, f, indexing="ij")

    def wavenumbers(self) -> np.ndarray:
        a, b = self.frequency_indices()
        return (a[..., None] * lattice.K1 + b[..., None] * lattice.K2) / self.n_cells


@dataclass
class WaveField:
    grid: SupercellGrid
    values: np.ndarray
    norm_l2: float = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise FlowError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        self.norm_l2 = self.recompute_norm()

    def recompute_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dA))

    def inner(self, other: "WaveField") -> complex:
        return complex(np.vdot(self.values, other.values) * self.grid.dA)

    def __add__(self, other):
        return WaveField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return WaveField(self.grid, self.values - other.values)

    def scaled(self, c) -> "WaveField":
        return WaveField(self.grid, c * self.values)


# --------------------------------------------------------------------------
# fiber representation


@dataclass
class BlochField:
    """Σ_fibers Σ_g c[fiber][g] exp(i ((a k1 + b k2)/N + g).x) on an N-cell supercell."""

    n_cells: int
    basis: PlaneWaveBasis
    fibers: dict[tuple[int, int], np.ndarray]

    @property
    def area(self) -> float:
        return self.n_cells ** 2 * lattice.CELL_AREA

    def momentum(self, key) -> np.ndarray:
        return (key[0] * lattice.K1 + key[1] * lattice.K2) / self.n_cells

    def norm(self) -> float:
        tot = sum(float(np.sum(np.abs(c) ** 2)) for c in self.fibers.values())
        return float(np.sqrt(self.area * tot))

    def inner(self, other: "BlochField") -> complex:
        tot = 0j
        for key, c in self.fibers.items():
            d = other.fibers.get(key)
            if d is not None:
                tot += np.vdot(c, d)
        return complex(self.area * tot)

    def combine(self, other: "BlochField", a: complex = 1.0, b: complex = 1.0) -> "BlochField":
        keys = list(self.fibers) + [k for k in other.fibers if k not in self.fibers]
        zero = np.zeros(self.basis.dim, dtype=complex)
        out = {k: a * self.fibers.get(k, zero) + b * other.fibers.get(k, zero) for k in keys}
        return BlochField(self.n_cells, self.basis, out)

    def keys(self) -> list[tuple[int, int]]:
        return list(self.fibers)

    def stacked(self) -> np.ndarray:
        return np.array([self.fibers[k] for k in self.fibers])


def dirac_fiber_key(n_cells: int, shift=(0, 0)) -> tuple[int, int]:
    """Fiber of K + (p k1 + q k2)/N, written relative to the K-centred plane-wave basis."""
    if n_cells % 3:
        raise FlowError(f"K is a supercell momentum only for N divisible by 3 (N={n_cells})")
    return (n_cells // 3 + int(shift[0]), -n_cells // 3 + int(shift[1]))


def fibers_to_grid(field: BlochField, grid: SupercellGrid) -> WaveField:
    if grid.n_cells != field.n_cells:
        raise FlowError("grid and field have different supercells")
    n, N = grid.n, grid.n_cells
    coeff = np.zeros(grid.shape, dtype=complex)
    idx = field.basis.indices
    for (a, b), c in field.fibers.items():
        fa = a + N * idx[:, 0]
        fb = b + N * idx[:, 1]
        lo, hi = -(n // 2), n - n // 2
        if min(fa.min(), fb.min()) < lo or max(fa.max(), fb.max()) >= hi:
            raise FlowError("grid does not resolve the plane-wave cutoff (Nyquist check)")
        np.add.at(coeff, (fa % n, fb % n), c)
    return WaveField(grid, np.fft.ifft2(coeff) * n * n)


def box_basis(pts_per_cell: int) -> PlaneWaveBasis:
    half = pts_per_cell // 2
    rng = range(-half, pts_per_cell - half)
    return PlaneWaveBasis(tuple((m, n) for m in rng for n in rng))


def grid_to_fibers(f: WaveField) -> BlochField:
    """Every grid mode, grouped by fiber; fibers keyed by (a, b) in [0, N)^2."""
    grid = f.grid
    n, N, M = grid.n, grid.n_cells, grid.pts_per_cell
    if M % 2 and N > 1:
        # box modes of the upper fibers would sit above the grid's Nyquist window
        raise FlowError(f"fiber decomposition needs an even number of points per cell (got {M})")
    coeff = np.fft.fft2(f.values) / (n * n)
    basis = box_basis(M)
    idx = basis.indices
    fibers = {}
    for a in range(N):
        for b in range(N):
            fibers[(a, b)] = coeff[(a + N * idx[:, 0]) % n, (b + N * idx[:, 1]) % n]
    return BlochField(N, basis, fibers)


def bloch_mode_field(vec: np.ndarray, key, n_cells: int, basis: PlaneWaveBasis) -> BlochField:
    return BlochField(n_cells, basis, {tuple(key): np.asarray(vec, dtype=complex)})


# --------------------------------------------------------------------------
# envelopes and wave packets


def envelope_modes(L: int, d0: float) -> np.ndarray:
    """Integer pairs (p, q) with |(p k1 + q k2)/L| <= d0, lexicographic."""
    return np.array(lattice.index_ball(float(d0) * L), dtype=int).reshape(-1, 2)


@dataclass
class WavePacketEnvelope:
    """α(X) = Σ_i coeffs[i] exp(i ξ_i . X), ξ_i = (p_i k1 + q_i k2)/L.

    X ranges over the torus of L x L cells; coeffs has shape (n_modes, 2).
    """

    modes: np.ndarray
    coeffs: np.ndarray
    L: int
    d0: float

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=int).reshape(-1, 2)
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1, 2)
        if self.modes.shape[0] != self.coeffs.shape[0]:
            raise FlowError("modes and coeffs disagree in length")
        if self.leakage() > 1e-12:
            raise FlowError(f"envelope spectrum exceeds band limit d0={self.d0}")

    @property
    def xi(self) -> np.ndarray:
        return self.modes @ lattice.DUAL_BASIS.T / self.L

    @property
    def area(self) -> float:
        return self.L ** 2 * lattice.CELL_AREA

    def norm(self) -> float:
        return float(np.sqrt(self.area * np.sum(np.abs(self.coeffs) ** 2)))

    def leakage(self) -> float:
        """Relative spectral weight outside |ξ| <= d0."""
        tot = np.sum(np.abs(self.coeffs) ** 2)
        if tot == 0:
            return 0.0
        out = np.linalg.norm(self.xi, axis=1) > self.d0 * (1 + 1e-12)
        return float(np.sum(np.abs(self.coeffs[out]) ** 2) / tot)

    def values(self, X) -> np.ndarray:
        """α at slow positions X (..., 2) -> (..., 2)."""
        phase = np.exp(1j * np.asarray(X, float) @ self.xi.T)
        return phase @ self.coeffs

    def with_coeffs(self, coeffs) -> "WavePacketEnvelope":
        return WavePacketEnvelope(self.modes, coeffs, self.L, self.d0)


def gaussian_envelope(L: int, d0: float, width: float, spinor=(1.0, 0.0),
                      centre=(0.0, 0.0), norm: float | None = 1.0) -> WavePacketEnvelope:
    """Gaussian in ξ of standard deviation `width`, truncated to |ξ| <= d0."""
    modes = envelope_modes(L, d0)
    xi = modes @ lattice.DUAL_BASIS.T / L
    amp = np.exp(-np.sum(xi ** 2, axis=1) / (2 * width ** 2) - 1j * xi @ np.asarray(centre, float))
    coeffs = amp[:, None] * np.asarray(spinor, dtype=complex)[None, :]
    env = WavePacketEnvelope(modes, coeffs, L, d0)
    if norm is not None:
        env = env.with_coeffs(env.coeffs * (norm / env.norm()))
    return env


def supercell_size(epsilon: float, L: int) -> int:
    N = L / epsilon
    if abs(N - round(N)) > 1e-9 * max(1.0, N):
        raise FlowError(f"epsilon={epsilon} incompatible with envelope period L={L}: L/epsilon not an integer")
    return int(round(N))


def wavepacket_fibers(env: WavePacketEnvelope, d: DiracPointData, epsilon: float) -> BlochField:
    """ε α(εx)^T Φ(x) as a BlochField."""
    N = supercell_size(epsilon, env.L)
    if env.leakage() > 1e-12:
        raise FlowError("envelope not band-limited to d0")
    fibers = {}
    for (p, q), c in zip(env.modes, env.coeffs):
        fibers[dirac_fiber_key(N, (p, q))] = epsilon * (c[0] * d.phi1 + c[1] * d.phi2)
    return BlochField(N, d.basis, fibers)


def build_wavepacket(env: WavePacketEnvelope, d: DiracPointData, epsilon: float,
                     grid: SupercellGrid) -> WaveField:
    """ε α(εx)^T Φ(x) sampled on a supercell grid (N = L/ε cells)."""
    N = supercell_size(epsilon, env.L)
    if grid.n_cells != N:
        raise FlowError(f"grid has {grid.n_cells} cells but L/epsilon = {N}")
    return fibers_to_grid(wavepacket_fibers(env, d, epsilon), grid)


# --------------------------------------------------------------------------
# split-step propagation on the grid


def drive_symbol(kappa, A, epsilon: float) -> np.ndarray:
    """Fourier symbol of 2iε A.∇ : exp(iκ.x) -> -2ε A.κ exp(iκ.x)."""
    return -2 * epsilon * np.asarray(kappa, float) @ np.asarray(A, float)


def apply_drive(f: WaveField, A, epsilon: float) -> WaveField:
    """2iε A.∇ f, computed spectrally."""
    kappa = f.grid.wavenumbers()
    F = np.fft.fft2(f.values)
    return WaveField(f.grid, np.fft.ifft2(drive_symbol(kappa, A, epsilon) * F))


def _strang(values, Vx, kin, kappa, forcing, epsilon, t0, dt, steps):
    F = np.fft.fft2(values)
    phaseV = np.exp(-1j * dt * Vx)
    for s in range(steps):
        tm = t0 + (s + 0.5) * dt
        A = forcing(epsilon * tm) if forcing is not None else np.zeros(2)
        half = np.exp(-0.5j * dt * (kin + drive_symbol(kappa, A, epsilon)))
        F = np.fft.fft2(phaseV * np.fft.ifft2(half * F)) * half
    return np.fft.ifft2(F)


def evolve(psi0: WaveField, V: FourierPotential, forcing: ForcingProfile | None, epsilon: float,
           t_final: float, dt: float, check_tol: float | None = None) -> WaveField:
    """Strang splitting: kinetic + drive in Fourier space, V in real space.

    With check_tol set the run is repeated at dt/2; a disagreement (scaled as
    the error estimate of the finer run) above check_tol raises with a
    recommended step.
    """
    if not dt > 0:
        raise FlowError("dt must be positive")
    if t_final < 0:
        raise FlowError("t_final must be nonnegative")
    grid = psi0.grid
    steps = int(np.ceil(t_final / dt - 1e-12)) if t_final > 0 else 0
    if steps == 0:
        return WaveField(grid, psi0.values.copy())
    h = t_final / steps
    Vx = evaluate(V, grid.points()) if V.coeffs else np.zeros(grid.shape)
    kappa = grid.wavenumbers()
    kin = np.sum(kappa ** 2, axis=-1)
    out = _strang(psi0.values, Vx, kin, kappa, forcing, epsilon, 0.0, h, steps)
    if check_tol is not None:
        fine = _strang(psi0.values, Vx, kin, kappa, forcing, epsilon, 0.0, h / 2, 2 * steps)
        err = float(np.sqrt(np.sum(np.abs(fine - out) ** 2) * grid.dA)) / 3
        if err > check_tol:
            rec = h * np.sqrt(check_tol / err) * 0.9
            raise AccuracyError(f"step-halving disagreement {err:.3e} > {check_tol:.1e}; "
                                f"recommended dt <= {rec:.3e}", err, rec)
        out = fine
    return WaveField(grid, out)


# --------------------------------------------------------------------------
# fiber-wise propagation


def _fiber_operators(V: FourierPotential, keys, n_cells: int, basis: PlaneWaveBasis):
    ks = np.array([(a * lattice.K1 + b * lattice.K2) / n_cells for a, b in keys])
    return _operators_at(V, ks, basis)


def _operators_at(V: FourierPotential, ks: np.ndarray, basis: PlaneWaveBasis):
    ks = np.atleast_2d(np.asarray(ks, float))
    q = ks[:, None, :] + basis.gvecs[None, :, :]
    H0 = np.broadcast_to(potential_matrix(V, basis), (len(ks), basis.dim, basis.dim)).copy()
    idx = np.arange(basis.dim)
    H0[:, idx, idx] += np.sum(q ** 2, axis=-1)
    return H0, q


_CF4_NODES = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)
_CF4_WEIGHTS = ((0.25 + np.sqrt(3) / 6, 0.25 - np.sqrt(3) / 6),
                (0.25 - np.sqrt(3) / 6, 0.25 + np.sqrt(3) / 6))


def _exp_apply(H, h, Y):
    """exp(-i h H) Y for a stack of Hermitian H; real eigh when H is real."""
    if np.iscomplexobj(H) and not np.any(H.imag):
        H = H.real
    w, Q = np.linalg.eigh(H)
    return Q @ (np.exp(-1j * h * w)[..., None] * (np.conj(np.swapaxes(Q, -1, -2)) @ Y))


def _cf4_run(H0, q, Y, forcing, epsilon, t0, t1, steps):
    """Fourth-order commutator-free exponential integrator from t0 to t1.

    Two exponentials per step, each of H0 plus a weighted average of the
    drive at the two Gauss nodes.  The kinetic part and the drive are both
    diagonal in the plane-wave basis, so only [V, drive] enters the error.
    """
    h = (t1 - t0) / steps
    idx = np.arange(H0.shape[-1])
    H0r = H0.real if not np.any(H0.imag) else H0
    Y = np.asarray(Y, dtype=complex)
    for s in range(steps):
        t = t0 + s * h
        if forcing is None:
            Y = _exp_apply(H0r, h, Y)
            continue
        A1 = forcing(epsilon * (t + _CF4_NODES[0] * h))
        A2 = forcing(epsilon * (t + _CF4_NODES[1] * h))
        for w1, w2 in _CF4_WEIGHTS:
            # weights sum to 1/2: each factor is exp(-i (h/2) H_eff)
            A = 2 * (w1 * A1 + w2 * A2)
            H = H0r.copy()
            H[:, idx, idx] += -2 * epsilon * (q @ A)
            Y = _exp_apply(H, h / 2, Y)
    return Y


def _relative_gap(A, B, ref) -> float:
    """Largest column-wise ‖A - B‖ / ‖ref‖, norms taken over fibers and basis."""
    num = np.sqrt(np.sum(np.abs(A - B) ** 2, axis=(0, 1)))
    den = np.sqrt(np.sum(np.abs(ref) ** 2, axis=(0, 1)))
    return float(np.max(num / np.where(den > 0, den, 1.0)))


def _controlled_fibers(H0, q, Y0, forcing, epsilon, times, steps_per_unit, tol, max_rounds=6):
    """States at each of `times`, refining until the relative error estimate <= tol.

    The error of the finer of two runs (n and 2n steps) is estimated as a
    third of their difference, the second-order Richardson factor.  The
    integrator is fourth order, so this stays conservative even before the
    asymptotic regime.  The next step count is predicted from the fourth-order
    rate.
    """
    def run(spu):
        out, Y, t = [Y0], Y0, times[0]
        for t1 in times[1:]:
            n = max(1, int(np.ceil(spu * (t1 - t))))
            Y = _cf4_run(H0, q, Y, forcing, epsilon, t, t1, n)
            out.append(Y)
            t = t1
        return out

    spu = float(steps_per_unit)
    coarse = run(spu)
    err = np.inf
    for _ in range(max_rounds):
        fine = run(2 * spu)
        err = max(_relative_gap(f, c, Y0) for f, c in zip(fine, coarse)) / 3
        if err <= tol:
            return fine, err, 2 * spu
        growth = min(max(1.2 * (err / tol) ** 0.25, 2.0), 16.0)
        spu *= growth
        coarse = fine if growth == 2.0 else run(spu)
    raise AccuracyError(f"fiber propagation error estimate {err:.3e} above tol {tol:.1e}", err)


def evolve_fibers(psi0: BlochField, V: FourierPotential, forcing: ForcingProfile | None,
                  epsilon: float, times, tol: float = 1e-6,
                  steps_per_unit: float = 4.0) -> list[BlochField]:
    """Fiber decomposition of the driven flow, sampled at `times` (times[0] is the start).

    tol bounds the integration error relative to ‖psi0‖.
    """
    keys = psi0.keys()
    times = np.asarray(times, dtype=float)
    H0, q = _fiber_operators(V, keys, psi0.n_cells, psi0.basis)
    Y0 = psi0.stacked()[..., None]
    if not np.any(Y0):
        return [BlochField(psi0.n_cells, psi0.basis, {k: v.copy() for k, v in psi0.fibers.items()})
                for _ in times]
    states, _, _ = _controlled_fibers(H0, q, Y0, forcing, epsilon, times, steps_per_unit, tol)
    return [BlochField(psi0.n_cells, psi0.basis, {k: Y[i, :, 0] for i, k in enumerate(keys)})
            for Y in states]


def schrodinger_monodromies(V: FourierPotential, forcing: ForcingProfile, epsilon: float,
                            keys, n_cells: int, basis: PlaneWaveBasis, tol: float = 1e-6,
                            steps_per_unit: float = 4.0) -> np.ndarray:
    """Full monodromy over one physical period T_per/ε for each fiber, shape (F, B, B)."""
    return _monodromies_at(V, forcing, epsilon,
                           _fiber_operators(V, keys, n_cells, basis), tol, steps_per_unit)


def _monodromies_at(V, forcing, epsilon, operators, tol, steps_per_unit):
    H0, q = operators
    eye = np.broadcast_to(np.eye(H0.shape[-1], dtype=complex), H0.shape).copy()
    T = forcing.T_per / epsilon
    states, _, _ = _controlled_fibers(H0, q, eye, forcing, epsilon, np.array([0.0, T]),
                                      steps_per_unit, tol)
    return states[-1]


def schrodinger_monodromy_bloch(V: FourierPotential, forcing: ForcingProfile, epsilon: float,
                                k, basis: PlaneWaveBasis, tol: float = 1e-7) -> np.ndarray:
    """B x B monodromy at quasi-momentum k (any real 2-vector)."""
    ops = _operators_at(V, np.asarray(k, float), basis)
    return _monodromies_at(V, forcing, epsilon, ops, tol, 4.0)[0]


# --------------------------------------------------------------------------
# effective Dirac dynamics and the validation harness


def dirac_envelope_evolve(env: WavePacketEnvelope, forcing: ForcingProfile, v_D: float,
                          T_final: float, tol: float = 1e-10) -> WavePacketEnvelope:
    """i ∂T α = D(T) α, solved mode by mode with the 2x2 propagator."""
    if env.modes.shape[0] == 0 or T_final == 0:
        return env.with_coeffs(env.coeffs.copy())
    U, _, _ = propagate_batch(env.xi, forcing, v_D, T_final, tol=tol)
    return env.with_coeffs(np.einsum("nab,nb->na", U, env.coeffs))


@dataclass
class ErrorCurve:
    t: np.ndarray
    error: np.ndarray
    norm: np.ndarray
    reference_norm: np.ndarray
    epsilon: float
    n_cells: int

    def table(self) -> np.ndarray:
        return np.column_stack([self.t, self.error, self.norm])


def envelope_forcing(forcing: ForcingProfile) -> ForcingProfile:
    """Forcing seen by the envelope equation for the drive +2iε A.∇.

    On a fiber the drive shifts the quasi-momentum k -> k - εA, so the
    envelope momentum enters the Dirac generator as ξ - A.  Written in the
    (ξ + A) form of `dirac_hat`, that is the forcing -A.
    """
    if forcing.kind == "circular":
        return ForcingProfile(T_per=forcing.T_per, kind="circular", R=-forcing.R, omega=forcing.omega)
    return ForcingProfile(T_per=forcing.T_per, kind="tabulated", samples=-forcing.samples)


def effective_fibers(env: WavePacketEnvelope, d: DiracPointData, epsilon: float, t: float) -> BlochField:
    """ε α(εt, εx)^T Φ(x) e^{-iE_D t} with α advanced by the effective Dirac flow."""
    out = wavepacket_fibers(env, d, epsilon)
    phase = np.exp(-1j * d.E_D * t)
    for key in out.fibers:
        out.fibers[key] = out.fibers[key] * phase
    return out


def validate_effective_dynamics(V: FourierPotential, d: DiracPointData, forcing: ForcingProfile,
                                epsilon: float, alpha0: WavePacketEnvelope, horizon_periods: int = 1,
                                samples_per_period: int = 1, tol: float = 1e-4) -> ErrorCurve:
    """e(t) = ‖U^ε[ψ_wp](t) - ε α(εt, εx)^T Φ(x) e^{-iE_D t}‖ at multiples of the period."""
    psi0 = wavepacket_fibers(alpha0, d, epsilon)
    T_phys = forcing.T_per / epsilon
    n = horizon_periods * samples_per_period
    times = T_phys * np.arange(n + 1) / samples_per_period
    states = evolve_fibers(psi0, V, forcing, epsilon, times, tol=tol)
    env_forcing = envelope_forcing(forcing)
    err, nrm, ref = [], [], []
    for t, psi in zip(times, states):
        alpha = dirac_envelope_evolve(alpha0, env_forcing, d.v_D, epsilon * t)
        eff = effective_fibers(alpha, d, epsilon, t)
        err.append(psi.combine(eff, 1.0, -1.0).norm())
        nrm.append(psi.norm())
        ref.append(eff.norm())
    return ErrorCurve(times, np.array(err), np.array(nrm), np.array(ref), epsilon, psi0.n_cells)
