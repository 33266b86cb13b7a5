"""
Fluctuations of the quadratic model
===================================

The quadratic Bogoliubov Hamiltonian has an explicit vacuum. Its mean
excitation number is the sum of sinh^2 of the angles. Its variance is
twice the sum of sinh^2 cosh^2, because each pair {p, -p} contributes
through both contractions. Near zero tilt the log-MGF follows a parabola
with that curvature, and this is what turns into a Gaussian Chernoff
bound. Away from zero the pair structure makes it grow faster.
"""

import numpy as np

from gpbec.lattice import PotentialSpec, enumerate_modes
from gpbec.scattering import scattering_length
from gpbec.stats import chernoff, mean_and_variance, mgf, mgf_curvature, quadratic_vacuum

lattice = enumerate_modes("euclidean", 1)
a0 = scattering_length(PotentialSpec.square_well(50.0, 0.4))
vac = quadratic_vacuum(lattice, a0)
model, P = vac.model, vac.distribution

mean, var = mean_and_variance(P)
print(f"cap {model.basis.cap}, dimension {model.basis.dim}, top mass {vac.top_mass:.1e}")
print(f"mean      measured {mean:.9f}   sum sinh^2        {model.mean:.9f}")
print(f"variance  measured {var:.9f}   sum sinh^2 cosh^2 {model.sigma2:.9f}")
print(f"curvature of log-MGF at zero {mgf_curvature(P, mean):.9f}")

###############################################################################
# The log-MGF against the Gaussian parabola, and the Chernoff exponent it gives.

lambdas = np.linspace(-2.0, 2.0, 9)
vals, _ = mgf(P, lambdas, mean)
for lam, v in zip(lambdas, vals):
    print(f"lambda = {lam:+.1f}   log MGF {v:.6f}   parabola {0.5 * lam**2 * var:.6f}")
grid = np.linspace(0.0, 20.0, 2001)
for x in (0.01, 0.05, 0.1):
    bound = chernoff(x, var, grid)
    print(f"P(N+ - mu >= {x}) <= exp({bound.value:.4f}) at lambda {bound.argmin:.2f}")
