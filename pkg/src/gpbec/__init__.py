"""Exact-diagonalization laboratory for Bose gases on the unit torus."""

from .errors import CapacityError, DomainError, EmptyLatticeError, NumericalError
from .lattice import MomentumLattice, PotentialSpec, enumerate_modes, fourier_coefficient, scaled_coupling
from .fock import FockBasis, FullSectorBasis, build_basis

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DomainError",
    "EmptyLatticeError",
    "NumericalError",
    "MomentumLattice",
    "PotentialSpec",
    "enumerate_modes",
    "fourier_coefficient",
    "scaled_coupling",
    "FockBasis",
    "FullSectorBasis",
    "build_basis",
]
