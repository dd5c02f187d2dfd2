"""Periodically driven honeycomb Schrödinger operators and their effective Dirac dynamics."""
from . import bloch, dirac, flow, lattice, parallel, potential, projection
from .bloch import DiracPointData, PlaneWaveBasis, find_dirac_point, solve_bands
from .dirac import ForcingProfile, circular, gap_over_disk, monodromy, propagate, unforced
from .potential import FourierPotential, make_canonical_honeycomb

__version__ = "0.1.0"
