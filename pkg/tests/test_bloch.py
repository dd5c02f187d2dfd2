import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floquet_dirac import bloch, lattice
from floquet_dirac.potential import FourierPotential, make_canonical_honeycomb

from helpers import random_honeycomb

BASIS = bloch.PlaneWaveBasis.ball(4)
kcoord = st.floats(-8, 8, allow_nan=False)


def test_basis_ordering():
    b = bloch.PlaneWaveBasis.ball(3)
    assert list(b.index_list) == sorted(b.index_list)
    assert (0, 0) in b.position()
    assert b.dim == len(b.index_list) == b.gvecs.shape[0]
    assert bloch.PlaneWaveBasis.ball(3).index_list == b.index_list


def test_free_operator_is_kinetic_diagonal():
    k = np.array([0.3, -1.1])
    H = bloch.assemble_hk(FourierPotential({}), k, BASIS)
    assert np.allclose(H, np.diag(np.sum((k + BASIS.gvecs) ** 2, axis=1)))


def test_free_bands_along_path_are_folded_parabolas():
    table = bloch.band_path(FourierPotential({}), bloch.high_symmetry_path(), 6, 5, BASIS)
    for row in table:
        k = row[1:3]
        exact = np.sort(np.sum((k + BASIS.gvecs) ** 2, axis=1))[:5]
        assert np.allclose(row[3:], exact, atol=1e-10)


def test_duplicate_waypoints_are_skipped():
    K = lattice.K_POINT
    a = bloch.band_path(FourierPotential({}), [np.zeros(2), K, K, np.zeros(2)], 4, 2, BASIS)
    b = bloch.band_path(FourierPotential({}), [np.zeros(2), K, np.zeros(2)], 4, 2, BASIS)
    assert np.allclose(a, b)
    assert np.all(np.diff(a[:, 0]) > 0)


def test_canonical_path_has_a_touching_point(V10):
    table = bloch.band_path(V10, bloch.high_symmetry_path(), 40, 3, bloch.PlaneWaveBasis.ball(5))
    gap12 = table[:, 4] - table[:, 3]
    i = int(np.argmin(gap12))
    assert gap12[i] < 1e-8
    assert np.allclose(table[i, 1:3], lattice.K_POINT, atol=1e-12)
    assert np.sum(gap12 < 1e-6) == 1


@given(kcoord, kcoord)
def test_eigensystem_invariants(x, y):
    V = make_canonical_honeycomb(10.0)
    k = np.array([x, y])
    H = bloch.assemble_hk(V, k, BASIS)
    assert np.max(np.abs(H - H.conj().T)) <= 1e-12
    sys_ = bloch.solve_bands(V, k, 6, BASIS)
    assert np.all(np.diff(sys_.energies) >= 0)
    Q = sys_.vectors
    assert np.max(np.abs(Q.conj().T @ Q - np.eye(6))) <= 1e-10
    res = np.linalg.norm(H @ Q - Q * sys_.energies, axis=0)
    assert np.all(res <= 1e-8 * (1 + np.abs(sys_.energies)))


@given(kcoord, kcoord)
def test_spectrum_rotation_and_inversion(x, y):
    # symmetric under R and k -> -k; compare low bands, which are converged in the basis
    V = make_canonical_honeycomb(10.0)
    k = lattice.reduce_to_cell(np.array([x, y]))
    basis = bloch.PlaneWaveBasis.ball(5)
    E = bloch.solve_bands(V, k, 4, basis, vectors=False).energies
    Er = bloch.solve_bands(V, lattice.reduce_to_cell(lattice.rotate(k)), 4, basis, vectors=False).energies
    Em = bloch.solve_bands(V, lattice.reduce_to_cell(-k), 4, basis, vectors=False).energies
    assert np.allclose(E, Er, atol=1e-8 * (1 + np.abs(E).max()))
    assert np.allclose(E, Em, atol=1e-8 * (1 + np.abs(E).max()))


def test_dirac_point_canonical(dirac10):
    d = dirac10
    assert d.degeneracy_residual <= 1e-8
    assert d.v_D > 0
    assert d.band_pair == (1, 2)
    assert abs(np.vdot(d.phi1, d.phi2)) <= 1e-10
    assert np.isclose(np.linalg.norm(d.phi1), 1, atol=1e-10)
    assert np.isclose(np.linalg.norm(d.phi2), 1, atol=1e-10)
    assert np.max(np.abs(d.phi2 - bloch.conjugate_parity(d.phi1))) <= 1e-8
    tau = np.exp(2j * np.pi / 3)
    assert np.max(np.abs(bloch.apply_rotation(d.phi1, d.k_D, d.basis) - tau * d.phi1)) <= 1e-8
    assert np.max(np.abs(bloch.apply_rotation(d.phi2, d.k_D, d.basis) - np.conj(tau) * d.phi2)) <= 1e-8


def test_dirac_energy_reference_value(dirac10):
    # reference: converged eigensolve at the default cutoff
    assert dirac10.E_D == pytest.approx(11.717167730763721, abs=1e-9)
    assert dirac10.v_D == pytest.approx(4.126326457273246, abs=1e-9)


def test_free_operator_has_no_dirac_pair():
    with pytest.raises(bloch.NoDiracPointError) as info:
        bloch.find_dirac_point(FourierPotential({}), BASIS)
    E = bloch.solve_bands(FourierPotential({}), lattice.K_POINT, 4, BASIS, vectors=False).energies
    # |K|² carried by three plane waves
    assert np.allclose(E[:3], np.dot(lattice.K_POINT, lattice.K_POINT))
    assert E[3] > E[2] + 1
    assert "multiplicity" in str(info.value)


def test_asymmetric_potential_refused():
    with pytest.raises(bloch.BlochError):
        bloch.find_dirac_point(FourierPotential({(1, 0): 1.0, (-1, 0): 1.0}), BASIS)


def test_gradient_identities(dirac10):
    d = dirac10
    assert np.linalg.norm(bloch.gradient_moments(d.phi1, d.phi1, d.k_D, d.basis)) <= 1e-8
    v, vec = bloch.fermi_velocity_inner_product(d)
    assert np.allclose(vec, v * np.array([1, 1j]), atol=1e-6)


def test_k_prime_pair(dirac10, V10):
    dp = bloch.dirac_point_at_k_prime(dirac10)
    H = bloch.assemble_hk(V10, dp.k_D, dp.basis)
    for phi in (dp.phi1, dp.phi2):
        assert np.linalg.norm(H @ phi - dp.E_D * phi) <= 1e-8
    assert abs(np.vdot(dp.phi1, dp.phi2)) <= 1e-10


def test_cone_fit(dirac10, V10):
    fit = bloch.fermi_velocity_cone_fit(V10, dirac10, [0.005, 0.01, 0.02], 12)
    assert abs(fit.slope_plus + fit.slope_minus) <= 1e-3 * abs(fit.slope_plus)
    assert abs(fit.v_fit - dirac10.v_D) <= 1e-2 * dirac10.v_D
    coarse = bloch.fermi_velocity_cone_fit(V10, dirac10, [0.04, 0.08], 12)
    fine = bloch.fermi_velocity_cone_fit(V10, dirac10, [0.01, 0.02], 12)
    assert fine.spread <= 0.5 * coarse.spread


def test_no_fold_cases(dirac10, V10):
    b = dirac10.basis
    assert bloch.check_no_fold(V10, dirac10.E_D, 0.5, 0.0, 12, b).holds
    first = bloch.check_no_fold(V10, dirac10.E_D, 0.5, 0.0, 24, b)
    second = bloch.check_no_fold(V10, dirac10.E_D, 0.5, 0.5 * first.worst_gap, 24, b)
    assert second.holds and first.worst_gap > 0
    # the 24-point grid contains K'
    only_K = bloch.check_no_fold(V10, dirac10.E_D, 0.5, 0.5 * first.worst_gap, 24, b,
                                 centres=[lattice.K_POINT])
    assert not only_K.holds


def test_fold_quasi_energies():
    assert np.allclose(bloch.fold_quasi_energies([5.0, 0.0, -0.25], 2 * np.pi), [0, 0, 0.75])
    with pytest.raises(ValueError):
        bloch.fold_quasi_energies([1.0], 0.0)


def test_folded_bands_fill_in(V10):
    basis = bloch.PlaneWaveBasis.ball(8)
    E = bloch.solve_bands(V10, np.array([0.3, 0.2]), 80, basis, vectors=False).energies
    T = 2 * np.pi / 7.0

    def max_spacing(n):
        f = np.sort(bloch.fold_quasi_energies(E[:n], T))
        return np.max(np.diff(np.concatenate([f, [f[0] + 7.0]])))

    assert max_spacing(80) < max_spacing(20)


def test_random_honeycomb_dirac_pair_normalization():
    rng = np.random.default_rng(7)
    V = random_honeycomb(rng, scale=2.0)
    try:
        d = bloch.find_dirac_point(V, bloch.PlaneWaveBasis.ball(5))
    except bloch.BlochError:
        pytest.skip("this draw has no conical pair among the low bands")
    assert np.max(np.abs(d.phi2 - np.conj(d.phi1))) <= 1e-8
    v, vec = bloch.fermi_velocity_inner_product(d)
    assert np.allclose(vec, v * np.array([1, 1j]), atol=1e-6 * max(1, v))
