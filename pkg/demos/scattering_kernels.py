"""
Scattering length and correlation kernels
=========================================

A square well of depth 50 and radius 0.4 is solved at zero energy. The
resulting length then seeds a Neumann problem on a small ball. That
problem produces the kernel eta, and adding a second layer brings it
close to the Bogoliubov angle.
"""

import math

import numpy as np

from gpbec.bogoliubov import kernel_gap
from gpbec.lattice import PotentialSpec, enumerate_modes
from gpbec.scattering import NeumannProblem, scattering_length, solve_neumann

well = PotentialSpec.square_well(50.0, 0.4)

###############################################################################
# The zero-energy solution gives the scattering length.  For a square well it
# has a closed form, so the shooting method can be compared with it directly.

a0 = scattering_length(well)
kappa = math.sqrt(50.0 / 2)
print(f"a0 = {a0:.12f}   closed form {0.4 * (1 - math.tanh(0.4 * kappa) / (0.4 * kappa)):.12f}")

###############################################################################
# The Neumann eigenvalue times N * ell^3 / 3 approaches a0 as N grows.

for N in (50, 100, 200, 400):
    sol = solve_neumann(NeumannProblem(well, N, 0.45))
    print(f"N = {N:4d}   lambda N ell^3 / 3 = {sol.lam * N * 0.45**3 / 3:.6f}")

###############################################################################
# On a lattice the kernel eta decays like 1/|p|^2.  The product stays flat
# across shells.

lattice = enumerate_modes("euclidean", 6)
sol = solve_neumann(NeumannProblem(well, 100, 0.45))
eta = sol.eta(lattice)
for shell in np.unique(lattice.k_squared)[::6]:
    pick = lattice.k_squared == shell
    print(f"|k|^2 = {int(shell):3d}   max |eta| p^2 = {np.max(np.abs(eta[pick]) * lattice.p_squared[pick]):.4f}")

###############################################################################
# Composing eta with the second-layer angle tau leaves a gap to nu that
# shrinks like 1/N.

small = enumerate_modes("euclidean", 2)
for N in (64, 128, 256, 512):
    gap = kernel_gap(solve_neumann(NeumannProblem(well, N, 0.45)), small)
    print(f"N = {N:4d}   max |eta + tau - nu| = {gap.max_gap:.3e}")
