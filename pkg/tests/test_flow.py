import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given
from hypothesis import strategies as st

from floquet_dirac import bloch, dirac, flow, lattice
from floquet_dirac.potential import FourierPotential, make_canonical_honeycomb

from helpers import random_field_values


def test_grid_geometry():
    g = flow.SupercellGrid(3, 4)
    assert g.shape == (12, 12)
    assert np.isclose(g.dA * g.n ** 2, g.area)
    a, b = g.frequency_indices()
    assert np.allclose(g.wavenumbers(), (a[..., None] * lattice.K1 + b[..., None] * lattice.K2) / 3)
    with pytest.raises(flow.FlowError):
        flow.SupercellGrid(0, 4)


def test_wavefield_norm_bookkeeping(rng):
    g = flow.SupercellGrid(2, 5)
    f = flow.WaveField(g, random_field_values(rng, g.shape))
    assert f.norm_l2 == pytest.approx(f.recompute_norm(), rel=1e-12)
    assert f.norm_l2 ** 2 == pytest.approx(f.inner(f).real, rel=1e-12)
    with pytest.raises(flow.FlowError):
        flow.WaveField(g, np.zeros((3, 3)))


def test_fiber_grid_round_trip(rng):
    g = flow.SupercellGrid(3, 6)
    f = flow.WaveField(g, random_field_values(rng, g.shape))
    back = flow.fibers_to_grid(flow.grid_to_fibers(f), g)
    assert np.allclose(back.values, f.values, atol=1e-12)
    assert flow.grid_to_fibers(f).norm() == pytest.approx(f.norm_l2, rel=1e-12)


def test_nyquist_refusal(dirac10_small):
    d = dirac10_small
    env = flow.gaussian_envelope(3, 0.5, 1.0)
    with pytest.raises(flow.FlowError):
        flow.build_wavepacket(env, d, 1.0, flow.SupercellGrid(3, 4))


def test_constant_envelope_packet_is_scaled_bloch_mode(dirac10_small):
    d = dirac10_small
    L, eps = 3, 0.5
    N = flow.supercell_size(eps, L)
    env = flow.WavePacketEnvelope(np.zeros((1, 2)), np.array([[1.0, 0.0]]), L, 0.1)
    grid = flow.SupercellGrid(N, 12)
    psi = flow.build_wavepacket(env, d, eps, grid)
    phi1 = flow.fibers_to_grid(flow.bloch_mode_field(d.phi1, flow.dirac_fiber_key(N), N, d.basis), grid)
    assert np.allclose(psi.values, eps * phi1.values, atol=1e-12)
    # ‖Φ1‖² is one per cell; N² cells
    assert psi.norm_l2 == pytest.approx(eps * N * np.sqrt(lattice.CELL_AREA), rel=1e-12)


def test_packet_norm_equals_envelope_norm(dirac10_small):
    d = dirac10_small
    env = flow.gaussian_envelope(3, 2.5, 1.0, spinor=(1.0, 0.5j), centre=(0.3, -0.2))
    eps = 0.5
    grid = flow.SupercellGrid(flow.supercell_size(eps, 3), 12)
    psi = flow.build_wavepacket(env, d, eps, grid)
    assert psi.norm_l2 == pytest.approx(env.norm(), rel=1e-10)


def test_envelope_band_limit():
    env = flow.gaussian_envelope(6, 0.5, 0.3)
    assert env.leakage() <= 1e-12
    assert np.all(np.linalg.norm(env.xi, axis=1) <= 0.5 + 1e-12)
    with pytest.raises(flow.FlowError):
        flow.WavePacketEnvelope(np.array([[3, 0]]), np.array([[1.0, 0.0]]), 6, 0.5)


def test_incompatible_epsilon_refused(dirac10_small):
    env = flow.gaussian_envelope(3, 1.0, 1.0)
    with pytest.raises(flow.FlowError):
        flow.supercell_size(0.4, 3)
    with pytest.raises(flow.FlowError):
        flow.build_wavepacket(env, dirac10_small, 0.5, flow.SupercellGrid(5, 12))


def test_free_plane_wave_phase():
    grid = flow.SupercellGrid(3, 8)
    kappa = (1 * lattice.K1 + 2 * lattice.K2) / 3
    psi = flow.WaveField(grid, np.exp(1j * grid.points() @ kappa))
    out = flow.evolve(psi, FourierPotential({}), None, 0.5, 0.3, 0.01)
    assert np.allclose(out.values, np.exp(-1j * (kappa @ kappa) * 0.3) * psi.values, atol=1e-10)


def test_norm_drift_over_many_steps(V10, circ, rng):
    grid = flow.SupercellGrid(2, 8)
    psi = flow.WaveField(grid, random_field_values(rng, grid.shape))
    out = flow.evolve(psi, V10, circ, 0.5, 10.0, 1e-3)  # 10⁴ steps
    assert abs(out.norm_l2 - psi.norm_l2) <= 1e-10 * psi.norm_l2


def test_bloch_mode_phase_over_one_period(V10):
    # oracle: eigenpair of H(0) in the box basis of the grid; at 12 points per cell the
    # wrap-around of V at the box edge is below the tolerance
    M = 12
    grid = flow.SupercellGrid(1, M)
    basis = flow.box_basis(M)
    s = bloch.solve_bands(V10, np.zeros(2), 2, basis)
    psi = flow.fibers_to_grid(flow.bloch_mode_field(s.vectors[:, 0], (0, 0), 1, basis), grid)
    t = np.pi  # one period T_per/ε at ε = 1 with ω = 2
    out = flow.evolve(psi, V10, None, 1.0, t, 1.5e-5)
    err = (out - psi.scaled(np.exp(-1j * s.energies[0] * t))).norm_l2 / psi.norm_l2
    assert err <= 1e-6


def test_strang_is_second_order(V10, circ, dirac10_small):
    env = flow.gaussian_envelope(3, 2.5, 1.0)
    grid = flow.SupercellGrid(6, 12)
    psi = flow.build_wavepacket(env, dirac10_small, 0.5, grid)
    ref = flow.evolve(psi, V10, circ, 0.5, 0.2, 2.5e-5)
    e1 = (flow.evolve(psi, V10, circ, 0.5, 0.2, 4e-4) - ref).norm_l2
    e2 = (flow.evolve(psi, V10, circ, 0.5, 0.2, 2e-4) - ref).norm_l2
    assert 3.0 <= e1 / e2 <= 5.0


def test_step_halving_refusal(V10, circ, rng):
    grid = flow.SupercellGrid(1, 8)
    psi = flow.WaveField(grid, random_field_values(rng, grid.shape))
    with pytest.raises(flow.AccuracyError) as info:
        flow.evolve(psi, V10, circ, 0.5, 0.5, 0.05, check_tol=1e-10)
    assert info.value.recommended_dt < 0.05


def test_fiber_engine_agrees_with_split_step(V10, circ, dirac10_small):
    env = flow.gaussian_envelope(3, 2.5, 0.8, spinor=(1.0, 0.3))
    eps = 0.5
    grid = flow.SupercellGrid(flow.supercell_size(eps, 3), 12)
    fib = flow.wavepacket_fibers(env, dirac10_small, eps)
    t = 0.5
    a = flow.fibers_to_grid(flow.evolve_fibers(fib, V10, circ, eps, [0.0, t], tol=1e-9)[-1], grid)
    b = flow.evolve(flow.fibers_to_grid(fib, grid), V10, circ, eps, t, 5e-4)
    # the grid carries plane waves the truncated ball basis does not
    assert (a - b).norm_l2 <= 1e-3 * a.norm_l2


def rk4_envelope_pde(env, forcing, v_D, T_final, steps, n):
    """Real-space spectral derivatives + explicit RK4 for i α_T = v[σ1(-i∂1 + A1) - σ2(-i∂2 + A2)]α."""
    grid = flow.SupercellGrid(env.L, n // env.L)
    X = grid.points()
    alpha = env.values(X)  # (n, n, 2)
    kap = grid.wavenumbers()

    def D(T, a):
        A = forcing(T)
        da = [np.fft.ifft2(1j * kap[..., j][..., None] * np.fft.fft2(a, axes=(0, 1)), axes=(0, 1))
              for j in range(2)]
        p1 = -1j * da[0] + A[0] * a
        p2 = -1j * da[1] + A[1] * a
        s1 = p1[..., ::-1]
        s2 = np.stack([-1j * p2[..., 1], 1j * p2[..., 0]], axis=-1)
        return -1j * v_D * (s1 - s2)

    h = T_final / steps
    T = 0.0
    for _ in range(steps):
        k1 = D(T, alpha)
        k2 = D(T + h / 2, alpha + h / 2 * k1)
        k3 = D(T + h / 2, alpha + h / 2 * k2)
        k4 = D(T + h, alpha + h * k3)
        alpha = alpha + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        T += h
    return X, alpha


def test_envelope_evolution_vs_pde_rk4():
    f = dirac.circular(1.0, 2.0)
    rng = np.random.default_rng(5)
    modes = flow.envelope_modes(3, 2.5)
    env = flow.WavePacketEnvelope(modes, random_field_values(rng, (len(modes), 2)), 3, 2.5)
    out = flow.dirac_envelope_evolve(env, f, 1.0, f.T_per)
    X, ref = rk4_envelope_pde(env, f, 1.0, f.T_per, 4000, 24)
    assert np.max(np.abs(out.values(X) - ref)) <= 1e-8 * np.max(np.abs(ref))
    assert out.norm() == pytest.approx(env.norm(), rel=1e-10)


def test_envelope_unforced_eigenmode_and_identity():
    L = 6
    modes = np.array([[1, 0]])
    x = (modes @ lattice.DUAL_BASIS.T / L)[0]
    z = (x[0] - 1j * x[1]) / np.linalg.norm(x)
    env = flow.WavePacketEnvelope(modes, np.array([[1.0, z]]) / np.sqrt(2), L, 2.0)
    out = flow.dirac_envelope_evolve(env, dirac.unforced(2.0), 1.5, 0.7)
    assert np.allclose(out.coeffs, np.exp(-1j * 1.5 * np.linalg.norm(x) * 0.7) * env.coeffs, atol=1e-10)
    same = flow.dirac_envelope_evolve(env, dirac.circular(1, 2), 1.0, 0.0)
    assert np.array_equal(same.coeffs, env.coeffs)


def test_envelope_forcing_is_negated():
    f = dirac.circular(0.7, 2.0)
    g = flow.envelope_forcing(f)
    t = np.linspace(0, 3, 7)
    assert np.allclose(g(t), -f(t))
    tab = dirac.tabulated(np.array([[1.0, 0.0], [-1.0, 0.5], [0.0, -0.5]]), 2.0)
    assert np.allclose(flow.envelope_forcing(tab)(t), -tab(t))


def test_validation_unforced_error_is_order_epsilon(V10, dirac10_small):
    L = 24
    modes = np.array([[1, 0]])
    x = (modes @ lattice.DUAL_BASIS.T / L)[0]
    z = (x[0] - 1j * x[1]) / np.linalg.norm(x)
    env = flow.WavePacketEnvelope(modes, np.array([[1.0, z]]), L, 1.01 * np.linalg.norm(x))
    env = env.with_coeffs(env.coeffs / env.norm())
    for eps in (0.25, 0.125):
        curve = flow.validate_effective_dynamics(V10, dirac10_small, dirac.unforced(np.pi), eps, env, tol=1e-6)
        assert curve.error[0] <= 1e-12
        assert curve.error[-1] <= eps


def test_autonomous_monodromy_is_matrix_exponential(V10):
    basis = bloch.PlaneWaveBasis.ball(2)
    k = np.array([0.3, 0.7])
    f = dirac.unforced(np.pi)
    eps = 0.5
    M = flow.schrodinger_monodromy_bloch(V10, f, eps, k, basis, tol=1e-9)
    ref = sl.expm(-1j * bloch.assemble_hk(V10, k, basis) * f.T_per / eps)
    assert np.max(np.abs(M - ref)) <= 1e-8
    assert np.linalg.norm(M.conj().T @ M - np.eye(basis.dim), 2) <= 1e-8


@given(st.floats(-4, 4), st.floats(-4, 4))
def test_forced_monodromy_unitary(x, y):
    V = make_canonical_honeycomb(10.0)
    M = flow.schrodinger_monodromy_bloch(V, dirac.circular(1.0, 2.0), 0.5, np.array([x, y]),
                                         bloch.PlaneWaveBasis.ball(1), tol=1e-8)
    assert np.linalg.norm(M.conj().T @ M - np.eye(M.shape[0]), 2) <= 1e-8


@pytest.mark.slow
def test_dirac_pair_multipliers_track_effective_prediction(V10, circ, dirac10_small):
    """At k = K the Dirac-pair multipliers match the effective 2x2 prediction to O(ε)."""
    d = dirac10_small
    T = circ.T_per
    P = np.column_stack([d.phi1, d.phi2])
    mu0 = dirac.exponent_at_zero_analytic(circ.R, circ.omega, d.v_D)
    errs = []
    for eps in (0.25, 0.125):
        M = flow.schrodinger_monodromy_bloch(V10, circ, eps, d.k_D, d.basis, tol=1e-8)
        lam, U = np.linalg.eig(M)
        weight = np.linalg.norm(P.conj().T @ U, axis=0) ** 2
        pair = lam[np.argsort(weight)[-2:]]
        assert np.all(np.sort(weight)[-2:] >= 0.99)
        base = np.exp(-1j * (d.E_D / eps + eps * circ.R ** 2) * T)
        pred = base * np.exp(np.array([1j, -1j]) * mu0 * T)
        errs.append(max(np.min(np.abs(pair - p)) for p in pred))
    assert 1.5 <= errs[0] / errs[1] <= 2.5


def test_odd_cell_sampling_refused_for_fibers(rng):
    g = flow.SupercellGrid(2, 5)
    with pytest.raises(flow.FlowError, match="even number"):
        flow.grid_to_fibers(flow.WaveField(g, random_field_values(rng, g.shape)))
