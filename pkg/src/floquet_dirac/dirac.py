"""Driven 2x2 Dirac Floquet systems at fixed momentum ξ.

The generator v_D[(ξ1 + A1)σ1 - (ξ2 + A2)σ2] is a real combination of Pauli
matrices, so every step exponential has the closed form
exp(-i a.σ) = cos|a| I - i sin|a| (a.σ)/|a| and propagators stay in SU(2)
to roundoff.  All routines are vectorized over a batch of momenta.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SIGMA0 = np.eye(2, dtype=complex)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA1, SIGMA2, SIGMA3])

TWO_PI = 2 * np.pi

# Gauss nodes and weights of the two-exponential 4th-order commutator-free scheme
_CF4_NODES = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)
_CF4_A = 0.25 + np.sqrt(3) / 6
_CF4_B = 0.25 - np.sqrt(3) / 6


class ForcingError(ValueError):
    pass


class PropagationError(RuntimeError):
    def __init__(self, message: str, achieved: float, steps: int):
        super().__init__(message)
        self.achieved = achieved
        self.steps = steps


@dataclass(frozen=True)
class ForcingProfile:
    """Periodic vector potential A(T) with period T_per.

    kind is "circular" (A = R (cos ωT, sin ωT), ωT_per = 2π) or "tabulated"
    (uniform samples over one period, trigonometric interpolation).
    """

    T_per: float
    kind: str = "circular"
    R: float = 0.0
    omega: float = 1.0
    samples: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.T_per) and self.T_per > 0):
            raise ForcingError("T_per must be finite and positive")
        if self.kind == "circular":
            if not np.isfinite(self.R) or not np.isfinite(self.omega) or self.omega <= 0:
                raise ForcingError("circular forcing needs finite R and omega > 0")
            if abs(self.T_per * self.omega - TWO_PI) > 1e-12 * TWO_PI:
                raise ForcingError("circular forcing requires T_per * omega = 2π")
        elif self.kind == "tabulated":
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 1 or not np.all(np.isfinite(s)):
                raise ForcingError("tabulated forcing needs finite samples of shape (n, 2)")
            object.__setattr__(self, "samples", s)
            object.__setattr__(self, "_spectrum", np.fft.fft(s, axis=0) / s.shape[0])
        else:
            raise ForcingError(f"unknown forcing kind {self.kind!r}")

    @property
    def zero_mean(self) -> bool:
        if self.kind == "circular":
            return True
        mean = np.abs(self.samples.mean(axis=0)) * self.T_per
        return bool(np.all(mean <= 1e-10))

    @property
    def amplitude(self) -> float:
        """sup |A| (exact for circular, over samples for tabulated)."""
        if self.kind == "circular":
            return abs(self.R)
        return float(np.max(np.linalg.norm(self.samples, axis=1)))

    def __call__(self, T) -> np.ndarray:
        """A(T), shape (..., 2)."""
        T = np.asarray(T, dtype=float)
        if self.kind == "circular":
            ph = self.omega * T
            return self.R * np.stack([np.cos(ph), np.sin(ph)], axis=-1)
        spec = self._spectrum
        n = spec.shape[0]
        freqs = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            # split the Nyquist mode so the interpolant stays real
            freqs[n // 2] = 0.0
            nyq = spec[n // 2].real
        phase = np.exp(1j * TWO_PI * np.multiply.outer(T / self.T_per, freqs))
        out = np.real(phase @ spec)
        if n % 2 == 0:
            out = out - nyq + nyq * np.cos(np.pi * n * T / self.T_per)[..., None]
        return out


def circular(R: float, omega: float) -> ForcingProfile:
    return ForcingProfile(T_per=TWO_PI / omega, kind="circular", R=float(R), omega=float(omega))


def unforced(T_per: float) -> ForcingProfile:
    return ForcingProfile(T_per=float(T_per), kind="circular", R=0.0, omega=TWO_PI / T_per)


def tabulated(samples, T_per: float) -> ForcingProfile:
    return ForcingProfile(T_per=float(T_per), kind="tabulated", samples=np.asarray(samples))


def dirac_hat(xi, T, forcing: ForcingProfile, v_D: float) -> np.ndarray:
    """v_D[(ξ1 + A1(T))σ1 - (ξ2 + A2(T))σ2]."""
    a = _pauli_coeffs(np.asarray(xi, float), forcing(T), v_D)
    return np.einsum("...j,jab->...ab", a, PAULI)


def _pauli_coeffs(xi: np.ndarray, A: np.ndarray, v_D) -> np.ndarray:
    p = xi + A
    zero = np.zeros(p.shape[:-1])
    return np.stack([v_D * p[..., 0], -v_D * p[..., 1], zero], axis=-1)


def su2_exp(a: np.ndarray) -> np.ndarray:
    """exp(-i a.σ) for real a of shape (..., 3)."""
    norm = np.linalg.norm(a, axis=-1)
    c = np.cos(norm)
    sinc = np.where(norm > 0, np.sin(norm) / np.where(norm > 0, norm, 1.0), 1.0)
    b = a * sinc[..., None]
    out = np.empty(a.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * b[..., 2]
    out[..., 1, 1] = c + 1j * b[..., 2]
    out[..., 0, 1] = -1j * b[..., 0] - b[..., 1]
    out[..., 1, 0] = -1j * b[..., 0] + b[..., 1]
    return out


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """mats[-1] @ ... @ mats[0] along axis 0, by pairwise reduction."""
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            mats = np.concatenate([mats, np.broadcast_to(SIGMA0, (1,) + mats.shape[1:])])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _integrate(coeff_fn, n_items: int, T_final: float, steps: int, scheme: str,
               block: int = 256) -> np.ndarray:
    """Product of step exponentials over [0, T_final].

    coeff_fn(t) maps an array of times of shape (m,) to Pauli coefficients
    of shape (m, n_items, 3).  Steps are processed in blocks so the step
    exponentials can be formed and multiplied with array operations.
    """
    U = np.broadcast_to(SIGMA0, (n_items, 2, 2)).copy()
    if steps == 0 or T_final == 0:
        return U
    h = T_final / steps
    for start in range(0, steps, block):
        t0 = h * np.arange(start, min(start + block, steps))
        if scheme == "midpoint":
            E = su2_exp(h * coeff_fn(t0 + 0.5 * h))
        elif scheme == "cf4":
            a1 = coeff_fn(t0 + _CF4_NODES[0] * h)
            a2 = coeff_fn(t0 + _CF4_NODES[1] * h)
            E = su2_exp(h * (_CF4_B * a1 + _CF4_A * a2)) @ su2_exp(h * (_CF4_A * a1 + _CF4_B * a2))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        U = _ordered_product(E) @ U
    return U


_ORDER = {"midpoint": 2, "cf4": 4}


def propagate_batch(xi, forcing: ForcingProfile, v_D: float, T_final: float,
                    steps: int | None = None, scheme: str = "cf4", tol: float = 1e-10,
                    max_steps: int = 1 << 18) -> tuple[np.ndarray, float, int]:
    """Propagators U(T_final; ξ) for a batch of momenta.

    With steps=None the step count doubles until the step-halving estimate
    ‖U_n - U_2n‖ / (2^p - 1) is below tol; with fixed steps the estimate is
    still computed and a miss raises.  Returns (U, error_estimate, steps).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[-1] != 2:
        raise ValueError("xi must have trailing dimension 2")
    if T_final < 0:
        raise ValueError("T_final must be nonnegative")
    n = xi.shape[0]
    if T_final == 0:
        return np.broadcast_to(SIGMA0, (n, 2, 2)).copy(), 0.0, 0

    def coeffs(t):
        return _pauli_coeffs(xi[None, :, :], forcing(t)[:, None, :], v_D)

    p = _ORDER[scheme]
    if steps is None:
        scale = abs(v_D) * (np.max(np.linalg.norm(xi, axis=1)) + forcing.amplitude)
        steps = int(max(8, np.ceil(2 * scale * T_final)))
        adaptive = True
    else:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        adaptive = False
    U = _integrate(coeffs, n, T_final, steps, scheme)
    while True:
        U2 = _integrate(coeffs, n, T_final, 2 * steps, scheme)
        err = float(np.max(np.linalg.norm(U2 - U, axis=(1, 2)))) / (2 ** p - 1)
        if err <= tol:
            return U2, err, 2 * steps
        if not adaptive or 4 * steps > max_steps:
            raise PropagationError(
                f"step-halving error {err:.3e} exceeds tol {tol:.1e} at {2 * steps} steps",
                err, 2 * steps)
        steps *= 2
        U = U2


def _controlled(coeffs, n: int, scale: float, p: int, scheme: str, tol: float,
                max_steps: int) -> tuple[np.ndarray, float, int]:
    steps = int(max(8, np.ceil(2 * scale)))
    U = _integrate(coeffs, n, 1.0, steps, scheme)
    while True:
        U2 = _integrate(coeffs, n, 1.0, 2 * steps, scheme)
        err = float(np.max(np.linalg.norm(U2 - U, axis=(1, 2)))) / (2 ** p - 1)
        if err <= tol:
            return U2, err, 2 * steps
        if 4 * steps > max_steps:
            raise PropagationError(
                f"step-halving error {err:.3e} exceeds tol {tol:.1e} at {2 * steps} steps",
                err, 2 * steps)
        steps *= 2
        U = U2


def circular_monodromies(xi, R, omega, v_D, scheme: str = "cf4", tol: float = 1e-10,
                         max_steps: int = 1 << 18) -> np.ndarray:
    """Monodromies for circular forcing with per-item (ξ, R, ω, v_D).

    Arguments broadcast against each other (xi with a trailing axis of 2).
    Time is rescaled to s = T / T_per in [0, 1] so items with different
    periods share one step loop.
    """
    xi = np.asarray(xi, dtype=float)
    R, omega, v_D = (np.asarray(a, dtype=float) for a in (R, omega, v_D))
    shape = np.broadcast_shapes(xi.shape[:-1], R.shape, omega.shape, v_D.shape)
    xi = np.broadcast_to(xi, shape + (2,)).reshape(-1, 2)
    R, omega, v_D = (np.broadcast_to(a, shape).ravel() for a in (R, omega, v_D))
    T_per = TWO_PI / omega

    def coeffs(s):
        ph = TWO_PI * s[:, None]
        A = R[:, None] * np.stack([np.cos(ph), np.sin(ph)], axis=-1)
        return (T_per * v_D)[:, None] * _pauli_coeffs(xi[None], A, 1.0)

    scale = float(np.max(T_per * np.abs(v_D) * (np.linalg.norm(xi, axis=1) + np.abs(R))))
    U, _, _ = _controlled(coeffs, len(R), scale, _ORDER[scheme], scheme, tol, max_steps)
    return U.reshape(shape + (2, 2))


def propagate(xi, forcing: ForcingProfile, v_D: float, T_final: float,
              steps: int | None = None, scheme: str = "cf4", tol: float = 1e-10) -> np.ndarray:
    U, _, _ = propagate_batch(np.asarray(xi, float)[None, :], forcing, v_D, T_final,
                              steps=steps, scheme=scheme, tol=tol)
    return U[0]


@dataclass
class Monodromy2:
    xi: np.ndarray
    matrix: np.ndarray

    def unitarity_defect(self) -> float:
        return float(np.linalg.norm(self.matrix.conj().T @ self.matrix - SIGMA0))


def monodromy_batch(xi, forcing: ForcingProfile, v_D: float, scheme: str = "cf4",
                    tol: float = 1e-10) -> np.ndarray:
    U, _, _ = propagate_batch(xi, forcing, v_D, forcing.T_per, scheme=scheme, tol=tol)
    return U


def monodromy(xi, forcing: ForcingProfile, v_D: float, scheme: str = "cf4",
              tol: float = 1e-10) -> Monodromy2:
    xi = np.asarray(xi, dtype=float)
    return Monodromy2(xi.copy(), monodromy_batch(xi[None, :], forcing, v_D, scheme, tol)[0])


@dataclass
class FloquetSample:
    xi: np.ndarray
    mu: float
    T_per: float
    multipliers: tuple[complex, complex]
    eigvecs: np.ndarray  # columns v_plus, v_minus

    @property
    def arc_gap(self) -> float:
        """Arc distance of the multipliers from 1, divided by T_per."""
        phase = self.mu * self.T_per
        return min(phase, TWO_PI - phase) / self.T_per


def _su2_angles(mats: np.ndarray, xi: np.ndarray):
    """Write M = cos φ I - i sin φ (n.σ) and pick φ in [0, 2π).

    φ is only defined up to φ -> 2π - φ, n -> -n.  The branch is fixed by
    requiring n to point along the unforced generator direction (ξ1, -ξ2, 0);
    this makes φ = v_D|ξ|T_per (mod 2π) exactly when A ≡ 0.  At ξ = 0 or for
    n orthogonal to that direction φ is taken in [0, π].
    """
    c = 0.5 * np.real(np.trace(mats, axis1=-2, axis2=-1))
    s = np.real(0.5j * np.einsum("jab,...ba->...j", PAULI, mats))
    ssize = np.linalg.norm(s, axis=-1)
    phi0 = np.arctan2(ssize, c)
    ref = np.stack([xi[..., 0], -xi[..., 1], np.zeros(xi.shape[:-1])], axis=-1)
    flip = np.einsum("...j,...j->...", s, ref) < 0
    phi = np.where(flip, TWO_PI - phi0, phi0)
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    nvec = np.where(flip[..., None], -s, s)
    return phi, nvec, ssize


def floquet_exponents(mats: np.ndarray, xi: np.ndarray, T_per: float) -> np.ndarray:
    """μ for a batch of monodromies (no eigenvectors)."""
    phi, _, _ = _su2_angles(np.asarray(mats), np.atleast_2d(xi))
    return phi / T_per


def floquet_exponent(M: Monodromy2, T_per: float = TWO_PI) -> FloquetSample:
    mat = np.asarray(M.matrix, dtype=complex)
    xi = np.asarray(M.xi, dtype=float)
    phi, nvec, ssize = _su2_angles(mat[None], xi[None])
    phi, nvec, ssize = float(phi[0]), nvec[0], float(ssize[0])
    if ssize < 1e-14:
        # M = ±I: every vector is an eigenvector
        vecs = np.eye(2, dtype=complex)
    else:
        gen = np.einsum("j,jab->ab", nvec / ssize, PAULI)
        _, vecs = np.linalg.eigh(gen)  # eigenvalue -1 first: that is v_plus
    lam = np.exp(1j * phi)
    return FloquetSample(xi=xi.copy(), mu=phi / T_per, T_per=T_per,
                         multipliers=(lam, np.conj(lam)), eigvecs=vecs)


def exponent_at_zero_analytic(R, omega, v_D):
    """(1/2)(sqrt(ω² + 4R²v_D²) - ω); broadcasts over arrays."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(omega > 0):
        raise ValueError("omega must be positive")
    out = 0.5 * (np.sqrt(omega ** 2 + 4 * np.square(R) * np.square(v_D)) - omega)
    return float(out) if out.ndim == 0 else out


def arc_exponent(mu, T_per: float):
    """min(μT, 2π - μT)/T: the distance of e^{±iμT} from 1, in exponent units."""
    phase = np.mod(np.asarray(mu, dtype=float) * T_per, TWO_PI)
    return np.minimum(phase, TWO_PI - phase) / T_per


def gap_exponent_at_zero(R: float, omega: float, v_D: float) -> float:
    """Arc gap of the analytic ξ = 0 multipliers for circular forcing."""
    return float(arc_exponent(exponent_at_zero_analytic(R, omega, v_D), TWO_PI / omega))


def polar_grid(d0: float, n_radial: int, n_angular: int) -> np.ndarray:
    """ξ = 0 plus n_radial rings of n_angular points, radii d0 * i / n_radial."""
    if not d0 > 0:
        raise ValueError("d0 must be positive")
    r = d0 * np.arange(1, n_radial + 1) / n_radial
    th = TWO_PI * np.arange(n_angular) / n_angular
    ring = np.stack([np.multiply.outer(r, np.cos(th)), np.multiply.outer(r, np.sin(th))], axis=-1)
    return np.vstack([np.zeros((1, 2)), ring.reshape(-1, 2)])


@dataclass
class GapResult:
    g_tilde: float
    argmin_xi: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    d0: float
    T_per: float
    grid: tuple[int, int]

    @property
    def samples(self) -> list[FloquetSample]:
        lam = np.exp(1j * self.mu * self.T_per)
        return [FloquetSample(x, float(m), self.T_per, (l, np.conj(l)), np.eye(2, dtype=complex))
                for x, m, l in zip(self.xi, self.mu, lam)]

    def table(self) -> np.ndarray:
        lam = np.exp(1j * self.mu * self.T_per)
        return np.column_stack([self.xi, self.mu, lam.real, lam.imag])


def _batched_exponents(xi: np.ndarray, forcing: ForcingProfile, v_D: float, tol: float,
                       chunk: int = 4096) -> np.ndarray:
    from .parallel import pmap
    chunks = [xi[i:i + chunk] for i in range(0, len(xi), chunk)]
    mus = pmap(lambda c: floquet_exponents(monodromy_batch(c, forcing, v_D, tol=tol), c,
                                           forcing.T_per), chunks)
    return np.concatenate(mus)


def gap_over_disk(forcing: ForcingProfile, v_D: float, d0: float, n_radial: int,
                  n_angular: int, tol: float = 1e-10) -> GapResult:
    xi = polar_grid(d0, n_radial, n_angular)
    mu = _batched_exponents(xi, forcing, v_D, tol)
    arc = arc_exponent(mu, forcing.T_per)
    i = int(np.argmin(arc))
    return GapResult(float(arc[i]), xi[i], xi, mu, float(d0), forcing.T_per, (n_radial, n_angular))


def wkb_residual(xi_scalar: float, forcing: ForcingProfile, v_D: float = 1.0,
                 tol: float = 1e-10) -> float:
    """Distance of the monodromy at (ξ, 0) from diag(e^{-iξT}, e^{iξT}).

    The comparison is made in the eigenbasis w± of σ1, the basis in which
    the leading-order WKB monodromy is diagonal.
    """
    if not forcing.zero_mean:
        raise ForcingError("WKB residual requires zero-mean forcing")
    if not xi_scalar > 0:
        raise ValueError("xi_scalar must be positive")
    M = monodromy(np.array([xi_scalar, 0.0]), forcing, v_D, tol=tol).matrix
    W = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    phase = v_D * xi_scalar * forcing.T_per
    lead = np.diag([np.exp(-1j * phase), np.exp(1j * phase)])
    return float(np.linalg.norm(W.conj().T @ M @ W - lead))


def coverage_bins(mu: np.ndarray, T_per: float, bins: int = 720) -> np.ndarray:
    """Boolean mask of unit-circle arcs hit by e^{±iμT_per}."""
    phase = np.mod(np.concatenate([mu * T_per, -mu * T_per]), TWO_PI)
    idx = np.minimum((phase / TWO_PI * bins).astype(int), bins - 1)
    hit = np.zeros(bins, dtype=bool)
    hit[idx] = True
    return hit


def circle_coverage(forcing: ForcingProfile, v_D: float, d0: float,
                    grid: tuple[int, int], bins: int = 720, tol: float = 1e-10) -> float:
    xi = polar_grid(d0, *grid)
    mu = _batched_exponents(xi, forcing, v_D, tol)
    return float(coverage_bins(mu, forcing.T_per, bins).mean())


def coverage_ladder(forcing: ForcingProfile, v_D: float, d0_max: float, dr: float,
                    n_angular: int, rungs: int = 16, bins: int = 720,
                    tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Covered fraction on nested grids d0 = d0_max * j / rungs.

    All rungs share the radial spacing dr and the angular set, so each grid
    contains the previous one and the fractions are nondecreasing.
    """
    n_total = int(np.ceil(d0_max / dr))
    xi = polar_grid(n_total * dr, n_total, n_angular)
    mu = _batched_exponents(xi, forcing, v_D, tol)
    radius = np.linalg.norm(xi, axis=1)
    d0s = d0_max * np.arange(1, rungs + 1) / rungs
    fracs = np.array([coverage_bins(mu[radius <= d + 1e-12], forcing.T_per, bins).mean()
                      for d in d0s])
    return d0s, fracs
