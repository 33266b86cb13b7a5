import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from gpbec.errors import NumericalError
from gpbec.lattice import PotentialSpec, enumerate_modes
from gpbec.model import ModelConfig, build_excitation_hamiltonian
from gpbec.spectra import (
    dense_spectrum,
    free_energy,
    gibbs,
    ground_state,
    lanczos,
    low_spectrum,
    von_neumann_entropy,
)


def random_hermitian(n, seed, density=0.05):
    A = sp.random(n, n, density=density, random_state=seed, format="csr")
    return ((A + A.T) * 0.5).tocsr()


@pytest.fixture(scope="module")
def excitation_h():
    config = ModelConfig(enumerate_modes("euclidean", 1), 4, 1.0, PotentialSpec.square_well(50.0, 0.4))
    return build_excitation_hamiltonian(config).total


def test_lanczos_agrees_with_dense_and_finds_degeneracy(excitation_h):
    dense = dense_spectrum(excitation_h, 12)
    it = lanczos(excitation_h, 12, seed=1)
    assert np.allclose(it.eigenvalues, dense.eigenvalues, atol=1e-9)
    assert it.residuals.max() <= 1e-8
    sizes = [len(c) for c in dense.clusters()]
    assert max(sizes) >= 2
    assert [len(c) for c in it.clusters(1e-6)] == [len(c) for c in dense.clusters(1e-6)]
    Q = it.eigenvectors
    assert np.allclose(Q.T @ Q, np.eye(12), atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_lanczos_random_matrices(seed):
    H = random_hermitian(150, seed)
    ref = np.linalg.eigvalsh(H.toarray())[:4]
    got = low_spectrum(H, 4, method="lanczos", seed=seed)
    assert np.allclose(got.eigenvalues, ref, atol=1e-8)


def test_ground_state_methods_and_errors(excitation_h):
    d = ground_state(excitation_h, method="dense")
    i = ground_state(excitation_h, method="lanczos")
    assert d.ground_energy == pytest.approx(i.ground_energy, abs=1e-10)
    assert abs(abs(np.vdot(d.ground_vector, i.ground_vector)) - 1) < 1e-8
    with pytest.raises(ValueError):
        low_spectrum(excitation_h, 0)
    with pytest.raises(ValueError):
        low_spectrum(excitation_h, 1, method="arnoldi")
    assert list(d.rows())[0][0] == 0


def test_gibbs_partition_function_and_free_energy(excitation_h):
    beta = 0.7
    E = np.linalg.eigvalsh(excitation_h.toarray())
    th = gibbs(excitation_h, beta)
    logZ = math.log(np.sum(np.exp(-beta * (E - E[0])))) - beta * E[0]
    assert th.log_partition == pytest.approx(logZ, rel=1e-12)
    assert th.free_energy == pytest.approx(-logZ / beta, rel=1e-10)
    rho = th.density_matrix()
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
    assert free_energy(excitation_h, rho, beta) == pytest.approx(th.free_energy, rel=1e-9)
    assert von_neumann_entropy(rho) == pytest.approx(th.entropy, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0))
def test_gibbs_minimizes_free_energy(seed, beta):
    H = random_hermitian(20, seed, density=0.3).toarray()
    th = gibbs(H, beta)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 20))
    rho = X @ X.T
    rho /= np.trace(rho)
    assert free_energy(H, rho, beta) >= th.free_energy - 1e-10


def test_gibbs_reuses_spectrum_and_cold_limit(excitation_h):
    spec = dense_spectrum(excitation_h)
    warm = gibbs(excitation_h, 2.0, spectrum=spec)
    assert warm.log_z_shifted == gibbs(excitation_h, 2.0).log_z_shifted
    gap = spec.eigenvalues[1] - spec.eigenvalues[0]
    cold = gibbs(excitation_h, 1e6 / gap, spectrum=spec)
    assert cold.weights[0] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        gibbs(excitation_h, 1.0, spectrum=dense_spectrum(excitation_h, 3))
    with pytest.raises(ValueError):
        gibbs(excitation_h, 0.0)


def test_iterative_gibbs_tail_bound(excitation_h):
    dense = gibbs(excitation_h, 50.0)
    it = gibbs(excitation_h, 50.0, method="lanczos", count=6)
    assert it.tail_bound <= 1e-12
    assert it.log_z_shifted == pytest.approx(dense.log_z_shifted, abs=1e-11)
    with pytest.raises(NumericalError):
        gibbs(excitation_h, 1e-3, method="lanczos", count=3)
    with pytest.raises(ValueError):
        gibbs(excitation_h, 1.0, method="lanczos")
