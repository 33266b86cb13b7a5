import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpbec.fock import FockBasis, FullSectorBasis
from gpbec.lattice import MomentumLattice, PotentialSpec, enumerate_modes
from gpbec.model import ModelConfig, build_full_hamiltonian
from gpbec.spectra import ground_state
from gpbec.stats import (
    chernoff,
    depletion_report,
    double_commutator_check,
    exp_moment,
    gronwall_replay,
    exponential_commutator_check,
    markov_violation,
    mean_and_variance,
    mgf,
    mgf_curvature,
    modified_ccr_check,
    nplus_distribution,
    observable_stats,
    onsager_check,
    quadratic_vacuum,
    tail_fit,
    tail_probabilities,
)

SIX = enumerate_modes("euclidean", 1)
PAIR = MomentumLattice.from_vectors([[1, 0, 0], [-1, 0, 0]])
THREE = MomentumLattice.from_vectors([[1, 0, 0], [-1, 0, 0], [0, 1, 0]])
WELL = PotentialSpec.square_well(50.0, 0.4)

distributions = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12).filter(lambda x: sum(x) > 1e-3).map(
    lambda x: np.asarray(x) / sum(x)
)


def test_distribution_of_basis_states():
    basis = FockBasis(SIX, 3)
    psi = (basis.basis_vector([1, 0, 0, 0, 0, 1]) + basis.vacuum()) / math.sqrt(2)
    P = nplus_distribution(psi, basis)
    assert P.tolist() == pytest.approx([0.5, 0.0, 0.5, 0.0])
    with pytest.raises(ValueError, match="normalized"):
        nplus_distribution(2 * psi, basis)


@settings(max_examples=40, deadline=None)
@given(distributions, st.floats(0.0, 2.0))
def test_exp_moment_and_markov(P, kappa):
    n = np.arange(len(P))
    assert exp_moment(P, kappa) == pytest.approx(float(np.exp(kappa * n) @ P), rel=1e-14)
    assert markov_violation(P, [kappa, 0.5 * kappa]) <= 0.0
    T = tail_probabilities(P)
    assert T[0] == pytest.approx(1.0)
    assert np.all(np.diff(T) <= 1e-15)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.9), st.integers(3, 30), st.booleans())
def test_tail_fit_recovers_geometric_rate(r, size, weighted):
    # the last sector carries the leftover mass, so P(N+ >= n) = r^n exactly
    n = np.arange(size)
    P = (1 - r) * r**n
    P[-1] = r ** (size - 1)
    fit = tail_fit(P, floor=0.0, weighted=weighted)
    assert fit.slope == pytest.approx(math.log(r), rel=1e-9)
    assert fit.intercept == pytest.approx(0.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)


def test_tail_fit_degenerate():
    assert tail_fit(np.array([1.0, 0.0, 0.0])).degenerate


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-3, 3))
def test_mgf_bernoulli_closed_form(q, lam):
    P = np.array([1 - q, q])
    vals, bad = mgf(P, [lam], q)
    assert not bad.any()
    assert vals[0] == pytest.approx(math.log(1 - q + q * math.exp(lam)) - lam * q, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(distributions)
def test_mgf_curvature_is_variance(P):
    mean, var = mean_and_variance(P)
    assert mgf_curvature(P, mean, h=1e-3) == pytest.approx(var, rel=1e-4, abs=1e-8)


def test_chernoff_quadratic_optimum():
    lam = np.linspace(0, 4, 401)
    b = chernoff(2.0, 1.0, lam)
    assert b.argmin == pytest.approx(2.0)
    assert b.value == pytest.approx(-2.0)


def test_gronwall_replay():
    P = np.array([0.6, 0.3, 0.1])
    rep = gronwall_replay(P, 0.4)
    assert rep.derivative_error < 1e-6
    assert rep.holds
    assert rep.norm_at_one == pytest.approx(exp_moment(P, 0.8))


def test_depletion_report_is_serializable():
    basis = FockBasis(PAIR, 6)
    psi = np.zeros(basis.dim)
    psi[0] = math.sqrt(0.9)
    psi[basis.rank_of([1, 1])] = math.sqrt(0.1)
    rep = depletion_report(psi, basis, nu=np.array([-0.1, -0.1]))
    assert rep.mean == pytest.approx(0.2)
    assert rep.predicted_mean == pytest.approx(2 * math.sinh(0.1) ** 2)
    json.dumps(rep.to_dict())


def test_quadratic_vacuum_moments():
    vac = quadratic_vacuum(SIX, 0.05)
    mean, var = mean_and_variance(vac.distribution)
    assert vac.top_mass < 1e-10
    assert mean == pytest.approx(vac.model.mean, abs=1e-8)
    assert var == pytest.approx(vac.model.variance, abs=1e-8)
    # odd sectors are empty: excitations come in {p, -p} pairs
    assert np.all(vac.distribution[1::2] < 1e-20)


def test_observable_stats_for_number_operator():
    vac = quadratic_vacuum(PAIR, 0.2, start_cap=10)
    st_ = observable_stats(vac.state / np.linalg.norm(vac.state), vac.model.basis, np.eye(2), vac.model.nu)
    assert st_.measured_mean == pytest.approx(st_.mu_sinh2, abs=1e-8)
    assert st_.measured_variance == pytest.approx(st_.sigma2_exact, abs=1e-8)
    assert st_.sigma2_exact == pytest.approx(2 * st_.sigma2_diagonal, rel=1e-12)


def test_modified_ccr_needs_inverse_n():
    for lat in (THREE, SIX):
        rep = modified_ccr_check(FockBasis(lat, 3), 3)
        assert max(rep.mixed, rep.annihilators, rep.creators) < 1e-13
        assert rep.mixed_without_inverse_n > 0.5


@pytest.mark.parametrize("word", [[("B", 0), ("B", 1)], [("b", 0)], [("A", 0), ("a", 1)], [("a", 0), ("a", 1), ("A", 1)]])
def test_exponential_commutator_identities(word):
    rep = exponential_commutator_check(FockBasis(SIX, 3), word, 0.3, 3)
    assert max(rep.single_left, rep.single_right, rep.double) < 1e-12


def test_double_commutator_derived_form():
    rep = double_commutator_check(ModelConfig(THREE, 3, 0.0, WELL), 1.0, 0.4)
    assert rep.derived < 1e-12 * max(1.0, rep.scale)


def test_onsager_free_gas_is_exact():
    full = FullSectorBasis(SIX, 4)
    H = build_full_hamiltonian(ModelConfig(SIX, 4, 0.0, PotentialSpec.zero()), full)
    rep = onsager_check(H, full.excitations)
    assert rep.inverse_c == (2 * math.pi) ** 2
    assert rep.certificate >= 0.0


def test_onsager_interacting_certificate():
    full = FullSectorBasis(SIX, 3)
    H = build_full_hamiltonian(ModelConfig(SIX, 3, 0.0, WELL), full)
    rep = onsager_check(H, full.excitations, c=1.0)
    assert rep.inverse_c > 0
    assert rep.certificate >= -1e-10
    with pytest.raises(ValueError):
        onsager_check(H, full.excitations, c=-1.0)
    gs = ground_state(H)
    assert gs.ground_energy == pytest.approx(rep.ground_energy, abs=1e-10)
