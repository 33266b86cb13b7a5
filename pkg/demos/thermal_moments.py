"""
Exponential moments at positive temperature
===========================================

At a fixed inverse temperature the Gibbs state keeps its exponential
moment of N+ bounded as N grows. The partition function, shifted by the
ground energy, stays pinned between two constants. As the temperature
goes to zero, the moment returns to its ground-state value.
"""

import numpy as np

from gpbec.lattice import PotentialSpec, enumerate_modes
from gpbec.model import ModelConfig, build_excitation_hamiltonian
from gpbec.spectra import dense_spectrum, gibbs
from gpbec.stats import gibbs_exp_moment, state_exp_moment

lattice = enumerate_modes("euclidean", 1)
well = PotentialSpec.square_well(50.0, 0.4)
kappa = 0.2

for N in (3, 4, 5, 6):
    bundle = build_excitation_hamiltonian(ModelConfig(lattice, N, 1.0, well))
    spec = dense_spectrum(bundle.total)
    ground = state_exp_moment(spec.ground_vector, bundle.basis, kappa)
    row = [f"N = {N}"]
    for beta in (0.02, 0.05, 0.2):
        th = gibbs(bundle.total, beta, spectrum=spec)
        row.append(f"beta {beta}: moment {gibbs_exp_moment(th, bundle.basis, kappa):.5f}, Z' {th.z_shifted:.4f}")
    print("   ".join(row) + f"   ground {ground:.5f}")

###############################################################################
# Entropy and free energy along a temperature sweep at N = 5.

bundle = build_excitation_hamiltonian(ModelConfig(lattice, 5, 1.0, well))
spec = dense_spectrum(bundle.total)
for beta in np.geomspace(0.05, 20.0, 7):
    th = gibbs(bundle.total, beta, spectrum=spec)
    print(f"beta = {beta:7.3f}   energy {th.energy:10.4f}   entropy {abs(th.entropy):7.4f}   free energy {th.free_energy:10.4f}")
