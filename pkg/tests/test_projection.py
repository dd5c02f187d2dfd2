import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floquet_dirac import bloch, dirac, flow, lattice, projection
from floquet_dirac.potential import FourierPotential, make_canonical_honeycomb

from helpers import random_field_values

SEEDS = st.integers(0, 2 ** 32 - 1)


# -- averaging identity ---------------------------------------------------

def test_average_constant_factor():
    q = projection.random_trig_polynomial(3, 2.5, np.random.default_rng(1))
    eps = 0.25
    r = projection.poisson_average(FourierPotential({(0, 0): 1.0}), q, eps)
    # ∫ q(εx) dx over the supercell is ε⁻² ∫ q
    assert r.lhs == pytest.approx(eps ** -2 * q.integral(), rel=1e-12)
    assert r.residual <= 1e-12


def test_average_orthogonal_pair(dirac10):
    q = projection.random_trig_polynomial(3, 2.5, np.random.default_rng(2))
    p = projection.bloch_density(dirac10.phi1, dirac10.phi2, dirac10.basis)
    r = projection.poisson_average(p, q, 0.25)
    assert abs(r.rhs) <= 1e-10
    assert abs(r.lhs) <= 1e-10


@given(SEEDS)
def test_average_density_identity(seed):
    rng = np.random.default_rng(seed)
    basis = bloch.PlaneWaveBasis.ball(3)
    s = bloch.solve_bands(make_canonical_honeycomb(10.0), lattice.K_POINT, 1, basis)
    p = projection.bloch_density(s.vectors[:, 0], s.vectors[:, 0], basis)
    q = projection.random_trig_polynomial(2, 2.0, rng)
    r = projection.poisson_average(p, q, 0.5)
    assert r.residual <= 1e-10


def test_average_alias_refused():
    q = projection.random_trig_polynomial(1, 8.0, np.random.default_rng(0))
    with pytest.raises(projection.AliasError) as info:
        projection.poisson_average(FourierPotential({(0, 0): 1.0}), q, 1.0)
    m, n = info.value.offending
    assert np.linalg.norm(lattice.dual_vector(m, n)) <= 8.0
    assert projection.alias_check(1.0, 0.5) is None


# -- energy window --------------------------------------------------------

def test_window_limits(V10, rng):
    grid = flow.SupercellGrid(3, 6)
    f = flow.WaveField(grid, random_field_values(rng, grid.shape))
    assert np.allclose(projection.energy_window_project(f, V10, 0.0, np.inf).values, f.values, atol=1e-10)
    assert projection.energy_window_project(f, V10, 0.0, 0.0).norm_l2 == 0


def test_window_removes_far_band(V10):
    M, N = 8, 3
    grid = flow.SupercellGrid(N, M)
    basis = flow.box_basis(M)
    key = (1, 2)
    k = (lattice.K1 + 2 * lattice.K2) / N
    s = bloch.solve_bands(V10, k, 12, basis)
    f = flow.fibers_to_grid(flow.bloch_mode_field(s.vectors[:, 10], key, N, basis), grid)
    out = projection.energy_window_project(f, V10, 11.7, 2.0)
    assert out.norm_l2 <= 1e-10 * f.norm_l2


@given(SEEDS, st.floats(5, 40), st.floats(0.5, 20))
def test_window_projector_algebra(seed, centre, width):
    rng = np.random.default_rng(seed)
    V = make_canonical_honeycomb(10.0)
    grid = flow.SupercellGrid(2, 4)
    P = projection.EnergyWindowProjector(V, centre, width)
    f = flow.WaveField(grid, random_field_values(rng, grid.shape))
    g = flow.WaveField(grid, random_field_values(rng, grid.shape))
    Pf = P(f)
    assert (P(Pf) - Pf).norm_l2 <= 1e-10 * f.norm_l2
    assert abs(Pf.inner(g) - f.inner(P(g))) <= 1e-10 * f.norm_l2 * g.norm_l2


# -- band-limited subspace ------------------------------------------------

def _packet(d, eps=0.5, L=3, d0=2.5, M=12, spinor=(1.0, 0.4j)):
    env = flow.gaussian_envelope(L, d0, 1.0, spinor=spinor)
    grid = flow.SupercellGrid(flow.supercell_size(eps, L), M)
    return flow.build_wavepacket(env, d, eps, grid), grid


def test_bl_own_subspace(dirac10_small):
    psi, _ = _packet(dirac10_small)
    dec = projection.bl_project(psi, dirac10_small, 0.5, 2.5)
    assert dec.bl_fraction >= 1 - 1e-8
    assert dec.raw_defect <= 1e-8 * psi.norm_l2


def _far_band_field(V, d, grid, band=20):
    N = grid.n_cells
    key = flow.dirac_fiber_key(N)
    s = bloch.solve_bands(V, d.k_D, band + 1, d.basis)
    return flow.fibers_to_grid(flow.bloch_mode_field(s.vectors[:, band], key, N, d.basis), grid)


def test_bl_far_band_and_mix(V10, dirac10_small):
    d = dirac10_small
    psi, grid = _packet(d)
    far = _far_band_field(V10, d, grid)
    far = far.scaled(1 / far.norm_l2)
    assert projection.bl_project(far, d, 0.5, 2.5).bl_fraction <= 1e-4
    mix = psi.scaled(1 / psi.norm_l2) + far
    assert projection.bl_project(mix, d, 0.5, 2.5).bl_fraction == pytest.approx(0.5, abs=1e-3)


@given(SEEDS)
def test_bl_decomposition_invariants(seed):
    d = _SMALL_DIRAC()
    rng = np.random.default_rng(seed)
    grid = flow.SupercellGrid(6, 12)
    psi = flow.WaveField(grid, random_field_values(rng, grid.shape))
    dec = projection.bl_project(psi, d, 0.5, 2.5)
    assert np.allclose((dec.bl_part + dec.residual).values, psi.values, atol=1e-10)
    assert abs(dec.bl_part.inner(dec.residual)) <= 1e-8 * psi.norm_l2 ** 2
    assert dec.bl_part.norm_l2 ** 2 + dec.residual.norm_l2 ** 2 == pytest.approx(psi.norm_l2 ** 2, rel=1e-8)
    assert 0 <= dec.bl_fraction <= 1


_CACHE = {}


def _SMALL_DIRAC():
    if "d" not in _CACHE:
        _CACHE["d"] = bloch.find_dirac_point(make_canonical_honeycomb(10.0), bloch.PlaneWaveBasis.ball(4))
    return _CACHE["d"]


def test_bl_fiber_path_matches_grid_path(dirac10_small):
    d = dirac10_small
    env = flow.gaussian_envelope(3, 2.5, 1.0, spinor=(1.0, 0.3))
    fib = flow.wavepacket_fibers(env, d, 0.5)
    # add a component off the Dirac pair on one BL fiber
    key = next(iter(fib.fibers))
    extra = np.zeros(d.basis.dim, dtype=complex)
    extra[0] = 0.2
    fib.fibers[key] = fib.fibers[key] + extra
    grid = flow.SupercellGrid(6, 12)
    a = projection.bl_project(fib, d, 0.5, 2.5)
    b = projection.bl_project(flow.fibers_to_grid(fib, grid), d, 0.5, 2.5)
    assert a.bl_fraction == pytest.approx(b.bl_fraction, abs=1e-10)


# -- out-of-window scaling ------------------------------------------------

def test_no_fold_refusal(V10, dirac10_small):
    with pytest.raises(projection.PreconditionError):
        projection.require_no_fold(V10, dirac10_small, delta=0.5, delta0=100.0, k_grid_n=6)


def test_scaling_check_contraction_and_constant_envelope(V10, dirac10_small):
    env = flow.gaussian_envelope(48, 0.2, 0.15, spinor=(1.0, 0.5))
    tab = projection.projection_scaling_check(env, dirac10_small, [0.125, 0.0625], V10)
    assert np.all(tab.relative <= 1)
    const = flow.WavePacketEnvelope(np.zeros((1, 2)), np.array([[1.0, 0.5]]), 3, 0.1)
    tiny = projection.projection_scaling_check(const, dirac10_small, [1 / 300], V10)
    assert tiny.relative[0] <= 1e-12


def test_forward_reconstruction_scaling(V10, dirac10_small):
    """Window projection of a random field = K and K' band-limited packets + residual, slope >= 2.5."""
    d = dirac10_small
    dp = bloch.dirac_point_at_k_prime(d)
    rng = np.random.default_rng(0)
    L, d0 = 48, 0.5
    eps_list = [0.125, 0.0625, 0.03125]
    rel = []
    for eps in eps_list:
        N = flow.supercell_size(eps, L)
        fibers = {}
        # with no-fold the window misses every fiber farther than δ from K and K'
        for p, q in flow.envelope_modes(L, 1.0):
            for key in [(N // 3 + p, -N // 3 + q), (-N // 3 + p, N // 3 + q)]:
                fibers[key] = random_field_values(rng, d.basis.dim)
        r = projection.window_reconstruction(flow.BlochField(N, d.basis, fibers), V10, d, dp, eps, d0)
        rel.append(r.relative)
    slope = projection.loglog_slope(eps_list, rel)
    print(f"forward reconstruction: relative residuals {rel}, slope {slope:.3f}")
    assert slope >= 2.5


# -- effective-gap harness pieces ----------------------------------------

def test_window_geometry(dirac10):
    w = projection.default_window(dirac10, dirac.circular(1, 2), 0.125, 0.3)
    assert 0 <= w.center < 2 * np.pi
    assert w.half_width == pytest.approx(0.3 * np.pi)
    assert w.contains(np.array([w.center + 2 * np.pi - 0.1]))[0]
    assert np.allclose(projection.arc_distance(0.1, 2 * np.pi - 0.1), 0.2)
    assert np.allclose(projection.multiplier_phase(np.exp(-1j * 1.25)), 1.25)


def test_unforced_scan_at_K(V10, dirac10_small):
    d = dirac10_small
    eps = 0.125
    f = dirac.unforced(np.pi)
    w = projection.default_window(d, f, eps, 0.1)
    rep = projection.effective_gap_scan(V10, d, f, eps, 0.2, w, 3, k_set=[(0, 0)], tol=1e-7)
    fib = rep.fibers[0]
    E = bloch.solve_bands(V10, d.k_D, None, d.basis, vectors=False).energies
    expected = np.mod(E * f.T_per / eps, 2 * np.pi)
    assert np.max([np.min(projection.arc_distance(expected, v)) for v in fib.nu]) <= 1e-5
    pair = np.argsort(fib.bl_fraction)[-2:]
    assert np.all(fib.bl_fraction[pair] >= 0.99)
    # the pair sits at the window centre itself
    assert np.all(projection.arc_distance(fib.nu[pair], w.center) <= 1e-5)
    assert fib.unitarity_defect <= 1e-8
