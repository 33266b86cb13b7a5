import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from gpbec.bogoliubov import bogoliubov_angle
from gpbec.errors import DomainError
from gpbec.fock import FockBasis, FullSectorBasis, is_hermitian, max_entry
from gpbec.lattice import MomentumLattice, PotentialSpec, enumerate_modes, radial_fourier
from gpbec.model import (
    ModelConfig,
    build_excitation_hamiltonian,
    build_full_hamiltonian,
    build_renormalized,
    excitation_conjugate,
    kinetic_diagonal,
    quadratic_model,
    renormalized_lower_bound,
    total_momentum,
)

SIX = enumerate_modes("euclidean", 1)
THREE = MomentumLattice.from_vectors([[1, 0, 0], [-1, 0, 0], [0, 1, 0]])
PAIR = MomentumLattice.from_vectors([[1, 0, 0], [-1, 0, 0]])
WELL = PotentialSpec.square_well(50.0, 0.4)


def test_config_validation():
    with pytest.raises(DomainError):
        ModelConfig(SIX, 1)
    with pytest.raises(DomainError):
        ModelConfig(SIX, 3, cap=4)
    with pytest.raises(DomainError):
        ModelConfig(SIX, 3, beta=2.0)
    assert ModelConfig(SIX, 3).cap == 3


def test_interaction_scalings():
    N = 7
    gp = ModelConfig(SIX, N, 1.0, WELL)
    mf = ModelConfig(SIX, N, 0.0, WELL)
    v = lambda q: radial_fourier(WELL, np.array([q]))[0]  # noqa: E731
    assert gp.interaction([1])[0] == pytest.approx(v(2 * math.pi / N), rel=1e-14)
    assert mf.interaction([1])[0] == pytest.approx(N / (N - 1) * v(2 * math.pi), rel=1e-14)
    assert gp.coupling([0])[0] == pytest.approx(v(0.0) / (2 * N), rel=1e-14)


@pytest.mark.parametrize(
    "lattice,beta",
    [(SIX, 1.0), (SIX, 0.0), (THREE, 1.0), (THREE, 0.5)],
)
def test_conjugation_identity(lattice, beta):
    config = ModelConfig(lattice, 3, beta, WELL)
    conj, U = excitation_conjugate(config)
    bundle = build_excitation_hamiltonian(config, U.fock)
    scale = max_entry(conj)
    assert max_entry(conj - bundle.total) <= 1e-12 * max(1.0, scale)


def test_full_hamiltonian_is_hermitian_and_conserves_momentum():
    config = ModelConfig(SIX, 3, 1.0, WELL)
    full = FullSectorBasis(SIX, 3)
    H = build_full_hamiltonian(config, full)
    assert is_hermitian(H)
    for P in total_momentum(full):
        assert max_entry(H @ P - P @ H) < 1e-9


def test_parts_are_hermitian_and_sector_structured():
    bundle = build_excitation_hamiltonian(ModelConfig(SIX, 4, 1.0, WELL))
    n = bundle.basis.totals
    for part, allowed in zip(bundle.parts, ({0}, {0, 2}, {1}, {0})):
        assert is_hermitian(part, atol=1e-12)
        coo = sp.coo_matrix(part)
        coo = coo if coo.nnz else None
        if coo is not None:
            jumps = set(np.abs(n[coo.row] - n[coo.col]).tolist())
            assert jumps <= allowed


def test_free_gas_is_kinetic():
    bundle = build_excitation_hamiltonian(ModelConfig(SIX, 3, 1.0, PotentialSpec.zero()))
    K = kinetic_diagonal(bundle.basis, SIX)
    assert max_entry(bundle.total - sp.diags(K)) == 0.0


def test_cap_below_n_is_a_compression():
    big = build_excitation_hamiltonian(ModelConfig(SIX, 4, 1.0, WELL))
    small = build_excitation_hamiltonian(ModelConfig(SIX, 4, 1.0, WELL, cap=2))
    d = small.basis.dim
    assert max_entry(big.total[:d, :d] - small.total) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.2))
def test_quadratic_angle_and_moments(a0):
    model = quadratic_model(SIX, a0, 2)
    assert np.allclose(model.nu, bogoliubov_angle(SIX.p_squared, a0), rtol=1e-13, atol=0)
    assert np.allclose(np.tanh(2 * model.nu), -model.B / model.A, rtol=1e-9, atol=0)
    assert model.mean == pytest.approx(float(np.sum(np.sinh(model.nu) ** 2)))
    assert model.variance == pytest.approx(2 * model.sigma2)


def test_quadratic_ground_energy_against_diagonalization():
    model = quadratic_model(PAIR, 0.3, 40)
    E = np.linalg.eigvalsh(model.H.toarray())[0]
    assert E == pytest.approx(model.ground_energy, rel=1e-10)


def test_quadratic_model_needs_symmetric_lattice():
    with pytest.raises(DomainError):
        quadratic_model(THREE, 0.1, 2)
    with pytest.raises(DomainError):
        quadratic_model(SIX, -0.1, 2)


def test_renormalized_is_isospectral():
    config = ModelConfig(SIX, 3, 1.0, WELL)
    bundle = build_excitation_hamiltonian(config)
    eta = np.full(SIX.size, -0.2)
    G = build_renormalized(config, eta, bundle)
    a = np.linalg.eigvalsh(bundle.total.toarray())
    b = np.linalg.eigvalsh(G.toarray())
    assert np.allclose(a, b, atol=1e-10)
    diag = renormalized_lower_bound(G, bundle)
    assert diag.constant >= 0
    assert diag.ground_energy == pytest.approx(a[0], abs=1e-10)
