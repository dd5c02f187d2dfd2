"""The analytic example suite run by `floquet-dirac selftest`.

Each check is a closed-form case (free operator, unforced limit, arithmetic
of the analytic exponent, projector limits ...) that needs no tuning.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import bloch, dirac, flow, lattice, projection
from .potential import FourierPotential, check_symmetries, evaluate, make_canonical_honeycomb

CHECKS: list[tuple[str, Callable[[], float], float]] = []


def check(name: str, tol: float):
    def deco(fn):
        CHECKS.append((name, fn, tol))
        return fn
    return deco


@check("lattice duality", 1e-12)
def _duality():
    return max(abs(lattice.K1 @ lattice.V2), abs(lattice.K1 @ lattice.V1 - 2 * np.pi))


@check("K point", 1e-12)
def _k_point():
    return float(np.max(np.abs(lattice.K_POINT - np.array([0.0, 4 * np.pi / 3]))))


@check("rotation of (1,0)", 1e-12)
def _rotation():
    r = lattice.rotate(np.array([1.0, 0.0]))
    return float(np.max(np.abs(r - np.array([-0.5, -np.sqrt(3) / 2]))))


@check("reduction of k1", 1e-12)
def _reduce():
    return float(np.max(np.abs(lattice.reduce_to_cell(lattice.K1))))


@check("canonical coefficients", 0.0)
def _canonical():
    V = make_canonical_honeycomb(10.0)
    return abs(V.coeff(1, 0) - 5) + abs(V.coeff(-1, -1) - 5) + len(make_canonical_honeycomb(0.0).coeffs)


@check("symmetry reports", 0.0)
def _symmetry():
    ok = check_symmetries(make_canonical_honeycomb(10.0)).honeycomb
    ok &= not check_symmetries(FourierPotential({(1, 0): 1.0})).real_valued
    s = check_symmetries(FourierPotential({(1, 0): 0.1j, (-1, 0): -0.1j}))
    ok &= s.real_valued and not s.even
    return 0.0 if ok else 1.0


@check("V(0) = 3 V0", 1e-12)
def _value_at_origin():
    return abs(evaluate(make_canonical_honeycomb(10.0), np.zeros(2)) - 30.0)


@check("free operator at k=0", 1e-12)
def _free():
    basis = bloch.PlaneWaveBasis.ball(3)
    sys_ = bloch.solve_bands(FourierPotential({}), np.zeros(2), 1, basis)
    e0 = np.zeros(basis.dim)
    e0[basis.position()[(0, 0)]] = 1
    return abs(sys_.energies[0]) + (1 - abs(np.vdot(e0, sys_.vectors[:, 0])))


@check("coupling entry V0/2", 1e-12)
def _coupling():
    basis = bloch.PlaneWaveBasis.ball(2)
    H = bloch.assemble_hk(make_canonical_honeycomb(10.0), np.zeros(2), basis)
    return abs(H[basis.position()[(0, 0)], basis.position()[(1, 0)]] - 5.0)


@check("fold of quasi-energies", 1e-12)
def _fold():
    return float(np.max(np.abs(bloch.fold_quasi_energies([5.0, 0.0], 2 * np.pi))))


@check("unforced Dirac generator", 1e-12)
def _hat():
    return float(np.max(np.abs(dirac.dirac_hat([1.0, 0.0], 0.0, dirac.unforced(1.0), 1.0) - dirac.SIGMA1)))


@check("exp(-i π/2 σ1)", 1e-10)
def _propagate():
    U = dirac.propagate([1.0, 0.0], dirac.unforced(1.0), 1.0, np.pi / 2)
    return float(np.max(np.abs(U + 1j * dirac.SIGMA1)))


@check("analytic exponent values", 1e-12)
def _mult0():
    a = dirac.exponent_at_zero_analytic
    return abs(a(1, 2, 1) - (math.sqrt(2) - 1)) + abs(a(0, 2, 1)) + abs(a(2, 3, 1) - 1)


@check("diagonal monodromy exponent", 1e-12)
def _diag_exponent():
    M = dirac.Monodromy2(np.zeros(2), np.diag([np.exp(0.7j), np.exp(-0.7j)]))
    s = dirac.floquet_exponent(M, 1.0)
    return abs(s.mu - 0.7) + dirac.floquet_exponent(dirac.Monodromy2(np.zeros(2), np.eye(2)), 1.0).mu


@check("unforced gap is zero", 1e-10)
def _unforced_gap():
    return dirac.gap_over_disk(dirac.unforced(np.pi), 1.0, 0.5, 4, 8).g_tilde


@check("free plane-wave split step", 1e-10)
def _free_wave():
    grid = flow.SupercellGrid(3, 8)
    a, b = 1, 2
    kappa = (a * lattice.K1 + b * lattice.K2) / 3
    psi = flow.WaveField(grid, np.exp(1j * grid.points() @ kappa))
    out = flow.evolve(psi, FourierPotential({}), None, 0.5, 0.3, 0.01)
    return float(np.max(np.abs(out.values - np.exp(-1j * (kappa @ kappa) * 0.3) * psi.values)))


@check("envelope evolution at T=0", 1e-14)
def _envelope_identity():
    env = flow.gaussian_envelope(6, 3.0, 1.0, spinor=(1.0, 0.2))
    out = flow.dirac_envelope_evolve(env, dirac.circular(1.0, 2.0), 1.0, 0.0)
    return float(np.max(np.abs(out.coeffs - env.coeffs)))


@check("window projector limits", 1e-10)
def _window_limits():
    rng = np.random.default_rng(0)
    grid = flow.SupercellGrid(3, 6)
    f = flow.WaveField(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
    V = make_canonical_honeycomb(10.0)
    full = projection.energy_window_project(f, V, 0.0, np.inf)
    none = projection.energy_window_project(f, V, 0.0, 0.0)
    return (full - f).norm_l2 / f.norm_l2 + none.norm_l2


@check("averaging with p = 1", 1e-12)
def _average_one():
    q = projection.random_trig_polynomial(3, 2.5, np.random.default_rng(1))
    return projection.poisson_average(FourierPotential({(0, 0): 1.0}), q, 0.25).residual


def run_trivial_suite() -> list[tuple[str, bool, float | str]]:
    out = []
    for name, fn, tol in CHECKS:
        try:
            val = float(fn())
            out.append((name, bool(val <= tol), val))
        except Exception as exc:  # a crash is a failed check, reported by name
            out.append((name, False, repr(exc)))
    return out
