"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.  Each
criterion is pinned to a fixed tolerance and a wall-clock budget.
"""

import json
import math
import time

import numpy as np
import pytest

from gpbec.bogoliubov import build_generator, exponential, kernel_gap, remainder_d, unitarity_drift
from gpbec.cli import main
from gpbec.fock import FockBasis, FullSectorBasis, max_entry
from gpbec.lattice import MomentumLattice, PotentialSpec, enumerate_modes, radial_fourier
from gpbec.model import ModelConfig, build_excitation_hamiltonian, build_full_hamiltonian, excitation_conjugate
from gpbec.scattering import NeumannProblem, scattering_length, solve_neumann, square_well_length
from gpbec.spectra import dense_spectrum, gibbs, ground_state
from gpbec.stats import (
    double_commutator_check,
    gibbs_exp_moment,
    exponential_commutator_check,
    markov_violation,
    mean_and_variance,
    mgf_curvature,
    modified_ccr_check,
    nplus_distribution,
    onsager_check,
    quadratic_vacuum,
    state_exp_moment,
    tail_fit,
)

SIX = enumerate_modes("euclidean", 1)
THREE = MomentumLattice.from_vectors([[1, 0, 0], [-1, 0, 0], [0, 1, 0]])
PAIR = MomentumLattice.from_vectors([[1, 0, 0], [-1, 0, 0]])
V0, R, ELL = 50.0, 0.4, 0.45
WELL = PotentialSpec.square_well(V0, R)

EXACT_TOL = 1e-10
CLOSED_FORM_RTOL = 1e-8
NO_GROWTH = 1.1
HALVING = (0.3, 0.7)
QUADRATIC_TOL = 1e-6
CURVATURE_RTOL = 1e-4
KERNEL_FACTOR = (1.7, 2.3)
TAIL_R2_MIN = 0.95
GIBBS_SPREAD = 1.5
GROUND_LIMIT_TOL = 1e-6
SANDWICH_SPREAD = 1.25
PSD_TOL = -1e-10


def verdict(criterion: int, label: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {label} ({detail})")
    return ok


class Clock:
    def __init__(self, budget: float):
        self.budget = budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False

    def check(self):
        assert self.elapsed < self.budget, f"took {self.elapsed:.1f} s, budget {self.budget} s"


def _words(lattice):
    p = lattice.index((1, 0, 0))
    m = int(lattice.negate[p])
    return [[("B", p), ("B", m)], [("b", p)], [("A", p), ("a", m)], [("A", p), ("A", m), ("a", p)]]


# 1: exact algebra


def test_exact_algebra_identities():
    with Clock(10.0) as clock:
        worst = 0.0
        for lattice in (THREE, SIX):
            basis = FockBasis(lattice, 3)
            ccr = modified_ccr_check(basis, 3)
            worst = max(worst, ccr.mixed, ccr.annihilators, ccr.creators)
            for word in _words(lattice):
                for kappa in (0.1, 0.5):
                    rep = exponential_commutator_check(basis, word, kappa, 3)
                    worst = max(worst, rep.single_left, rep.single_right, rep.double)
            dc = double_commutator_check(ModelConfig(lattice, 3, 0.0, WELL), 1.0, 0.3)
            worst = max(worst, dc.derived)
    ok = verdict(1, "commutation, exponential and double-commutator identities", worst <= EXACT_TOL,
                 f"max deviation {worst:.2e} <= {EXACT_TOL:.0e}, {clock.elapsed:.1f} s")
    assert ok
    clock.check()


def test_exact_algebra_three_sum_double_commutator():
    # the three-sum form as written, kept faithful; the derived form above is the one that holds
    worst, scale = 0.0, 0.0
    for lattice in (THREE, SIX):
        dc = double_commutator_check(ModelConfig(lattice, 3, 0.0, WELL), 1.0, 0.3)
        worst, scale = max(worst, dc.printed), max(scale, dc.scale)
    ok = verdict(1, "double commutator in the three-sum form", worst <= EXACT_TOL,
                 f"max deviation {worst:.2e} against entries of size {scale:.2e}")
    assert ok


# 2: conjugation


def test_excitation_conjugation_identity():
    with Clock(10.0) as clock:
        config = ModelConfig(SIX, 3, 1.0, WELL)
        conj, U = excitation_conjugate(config)
        bundle = build_excitation_hamiltonian(config, U.fock)
        dev = max_entry(conj - bundle.total)
    ok = verdict(2, "U H U* equals the excitation Hamiltonian", dev <= EXACT_TOL and bundle.basis.dim == 84,
                 f"dim {bundle.basis.dim}, max deviation {dev:.2e} <= {EXACT_TOL:.0e}")
    assert ok
    clock.check()


# 3: scattering


def test_scattering_oracles():
    with Clock(30.0) as clock:
        exact = square_well_length(V0, R)
        kappa = math.sqrt(V0 / 2)
        closed = R * (1 - math.tanh(kappa * R) / (kappa * R))
        a0_err = abs(scattering_length(WELL) - closed) / closed

        born = 3 * float(radial_fourier(WELL, np.array([0.0]))[0]) / (8 * math.pi * ELL**3)
        lattice6 = enumerate_modes("euclidean", 6)
        scaled, sups = [], []
        for N in (50, 100, 200):
            sol = solve_neumann(NeumannProblem(WELL, N, ELL))
            scaled.append(abs(sol.lam - born / N) * N)
            sups.append(float(np.max(np.abs(sol.eta(lattice6)) * lattice6.p_squared)))
    dev_growth = max(scaled) / min(scaled)
    eta_growth = max(sups) / min(sups)
    ok_a = verdict(3, "square-well scattering length", a0_err <= CLOSED_FORM_RTOL and exact == pytest.approx(closed),
                   f"relative error {a0_err:.2e} <= {CLOSED_FORM_RTOL:.0e}")
    ok_l = verdict(3, "Neumann eigenvalue deviation times N stays bounded", dev_growth <= NO_GROWTH,
                   f"|dev|*N = {', '.join(f'{x:.3f}' for x in scaled)}, spread {dev_growth:.3f} <= {NO_GROWTH}")
    ok_e = verdict(3, "|eta_p| |p|^2 bounded on the cutoff-6 lattice", eta_growth <= NO_GROWTH and max(sups) < 10,
                   f"sup = {', '.join(f'{x:.3f}' for x in sups)}, spread {eta_growth:.3f} <= {NO_GROWTH}")
    assert ok_a and ok_l and ok_e
    clock.check()


# 4: Bogoliubov action


def test_bogoliubov_remainder_halves():
    with Clock(60.0) as clock:
        eta = np.array([-0.3, -0.3])
        norms, drift = [], 0.0
        for N in (8, 16, 32):
            basis = FockBasis(PAIR, N)
            psi = basis.vacuum() + basis.basis_vector([1, 1])
            psi /= np.linalg.norm(psi)
            B = build_generator(basis, eta, N)
            U = exponential(B)
            drift = max(drift, max_entry(U.conj().T @ U - np.eye(basis.dim)), unitarity_drift(B))
            norms.append(float(np.linalg.norm(remainder_d(basis, 0, eta, N, dagger=True, generator=B) @ psi)))
    ratios = [norms[1] / norms[0], norms[2] / norms[1]]
    lo, hi = HALVING
    ok_r = verdict(4, "remainder norm halves as N doubles", all(lo <= r <= hi for r in ratios),
                   f"ratios {ratios[0]:.3f}, {ratios[1]:.3f} in [{lo}, {hi}]")
    ok_u = verdict(4, "exponential of the generator is unitary", drift <= EXACT_TOL,
                   f"drift {drift:.2e} <= {EXACT_TOL:.0e}")
    assert ok_r and ok_u
    clock.check()


# 5: quadratic-model statistics


@pytest.fixture(scope="module")
def vacuum():
    start = time.perf_counter()
    vac = quadratic_vacuum(SIX, scattering_length(WELL))
    return vac, time.perf_counter() - start


def test_quadratic_vacuum_mean(vacuum):
    vac, elapsed = vacuum
    mean, _ = mean_and_variance(vac.distribution)
    predicted = float(np.sum(np.sinh(vac.model.nu) ** 2))
    err = abs(mean - predicted)
    ok = verdict(5, "vacuum mean matches sum of sinh^2", err <= QUADRATIC_TOL and vac.top_mass < 1e-10,
                 f"|{mean:.9f} - {predicted:.9f}| = {err:.2e}, top mass {vac.top_mass:.1e}")
    assert ok
    assert elapsed < 60.0


def test_quadratic_vacuum_variance_against_diagonal_sum(vacuum):
    vac, _ = vacuum
    _, var = mean_and_variance(vac.distribution)
    sigma2 = float(np.sum(np.sinh(vac.model.nu) ** 2 * np.cosh(vac.model.nu) ** 2))
    err = abs(var - sigma2)
    ok = verdict(5, "vacuum variance matches sum of sinh^2 cosh^2", err <= QUADRATIC_TOL,
                 f"measured {var:.9f}, sum {sigma2:.9f}, ratio {var / sigma2:.6f}")
    assert ok


def test_quadratic_vacuum_mgf_curvature(vacuum):
    vac, _ = vacuum
    mean, _ = mean_and_variance(vac.distribution)
    sigma2 = float(np.sum(np.sinh(vac.model.nu) ** 2 * np.cosh(vac.model.nu) ** 2))
    curv = mgf_curvature(vac.distribution, mean)
    rel = abs(curv - sigma2) / sigma2
    ok = verdict(5, "log-MGF curvature at zero matches sum of sinh^2 cosh^2", rel <= CURVATURE_RTOL,
                 f"curvature {curv:.9f}, sum {sigma2:.9f}, relative gap {rel:.2e}")
    assert ok


def test_quadratic_vacuum_variance_with_pairing(vacuum):
    # both members of each {p, -p} pair contribute, which doubles the diagonal sum
    vac, _ = vacuum
    mean, var = mean_and_variance(vac.distribution)
    exact = 2 * float(np.sum(np.sinh(vac.model.nu) ** 2 * np.cosh(vac.model.nu) ** 2))
    curv = mgf_curvature(vac.distribution, mean)
    ok = verdict(5, "vacuum variance and curvature match twice the sum",
                 abs(var - exact) <= QUADRATIC_TOL and abs(curv - exact) / exact <= CURVATURE_RTOL,
                 f"measured {var:.9f}, curvature {curv:.9f}, twice the sum {exact:.9f}")
    assert ok


# 6: second-layer kernels


def test_second_layer_kernel_gap_shrinks():
    lattice = enumerate_modes("euclidean", 2)
    solutions = [solve_neumann(NeumannProblem(WELL, N, ELL)) for N in (64, 128, 256)]
    with Clock(5.0) as clock:
        gaps = [kernel_gap(sol, lattice).max_gap for sol in solutions]
    factors = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    lo, hi = KERNEL_FACTOR
    ok = verdict(6, "max |eta + tau - nu| shrinks with N", all(lo <= f <= hi for f in factors),
                 f"gaps {', '.join(f'{g:.3e}' for g in gaps)}, factors {factors[0]:.3f}, {factors[1]:.3f}")
    assert ok
    clock.check()


# 7: exponential tail


def test_exponential_tail_of_ground_state():
    with Clock(120.0) as clock:
        bundle = build_excitation_hamiltonian(ModelConfig(SIX, 6, 1.0, WELL))
        gs = ground_state(bundle.total)
        P = nplus_distribution(gs.ground_vector, bundle.basis)
        fit = tail_fit(P)
        viol = markov_violation(P, np.linspace(0.05, 2.0, 40))
    ok_f = verdict(7, "tail of the excitation number decays exponentially",
                   bundle.basis.dim == 924 and not fit.degenerate and fit.slope < 0 and fit.r_squared >= TAIL_R2_MIN,
                   f"dim {bundle.basis.dim}, slope {fit.slope:.3f}, R^2 {fit.r_squared:.4f} >= {TAIL_R2_MIN}")
    ok_m = verdict(7, "exponential Markov chain holds for every probe", viol <= 0.0,
                   f"largest violation {viol:.2e} <= 0")
    assert ok_f and ok_m
    clock.check()


# 8: Gibbs states


def test_gibbs_moments_are_uniform():
    beta, kappa = 2.0, 0.2
    with Clock(180.0) as clock:
        moments, zs, limits = [], [], []
        for N in (4, 6, 8):
            bundle = build_excitation_hamiltonian(ModelConfig(SIX, N, 1.0, WELL))
            spec = dense_spectrum(bundle.total)
            th = gibbs(bundle.total, beta, spectrum=spec)
            moments.append(gibbs_exp_moment(th, bundle.basis, kappa))
            zs.append(th.z_shifted)
            E = spec.eigenvalues
            gap = float(E[np.argmax(E > E[0] + 1e-8)] - E[0])
            cold = gibbs(bundle.total, 1e6 / gap, spectrum=spec)
            ground = state_exp_moment(spec.ground_vector, bundle.basis, kappa)
            limits.append(abs(gibbs_exp_moment(cold, bundle.basis, kappa) - ground))
    spread, zspread, worst = max(moments) / min(moments), max(zs) / min(zs), max(limits)
    ok_m = verdict(8, "Gibbs exponential moment uniform in N", spread <= GIBBS_SPREAD,
                   f"moments {', '.join(f'{m:.4f}' for m in moments)}, spread {spread:.3f} <= {GIBBS_SPREAD}")
    ok_c = verdict(8, "zero-temperature limit is the ground-state moment", worst <= GROUND_LIMIT_TOL,
                   f"largest gap {worst:.2e} <= {GROUND_LIMIT_TOL:.0e}")
    ok_z = verdict(8, "shifted partition function stable in N", zspread <= SANDWICH_SPREAD,
                   f"values {', '.join(f'{z:.4f}' for z in zs)}, spread {zspread:.3f} <= {SANDWICH_SPREAD}")
    assert ok_m and ok_c and ok_z
    clock.check()


# 9: Onsager bound


def test_onsager_certificate():
    with Clock(30.0) as clock:
        full = FullSectorBasis(SIX, 4)
        H = build_full_hamiltonian(ModelConfig(SIX, 4, 0.0, WELL), full)
        rep = onsager_check(H, full.excitations, c=1.0)
        free = build_full_hamiltonian(ModelConfig(SIX, 4, 0.0, PotentialSpec.zero()), full)
        control = onsager_check(free, full.excitations)
    ok_i = verdict(9, "interacting bound with positive constant", rep.inverse_c > 0 and rep.certificate >= PSD_TOL,
                   f"C^-1 = {rep.inverse_c:.4f}, certificate {rep.certificate:.2e} >= {PSD_TOL:.0e}")
    ok_f = verdict(9, "free gas gives exactly (2 pi)^2", control.inverse_c == (2 * math.pi) ** 2,
                   f"C^-1 = {control.inverse_c!r}")
    assert ok_i and ok_f
    clock.check()


# 10: determinism


def _snapshot(out):
    files = {}
    for path in sorted(out.iterdir()):
        if path.name == "report.json":
            data = json.loads(path.read_text())
            data.pop("timing_ms")
            files[path.name] = json.dumps(data, sort_keys=True).encode()
        else:
            files[path.name] = path.read_bytes()
    return files


def test_cli_artifacts_are_byte_identical(tmp_path):
    mismatched = []
    for experiment in ("scatter", "spectrum", "decay", "ldp", "gibbs", "verify"):
        out = tmp_path / experiment
        snaps = []
        for _ in range(2):
            main([experiment, "--out", str(out), "--seed", "5"])
            snaps.append(_snapshot(out))
        assert snaps[0].keys() == snaps[1].keys()
        mismatched += [f"{experiment}/{k}" for k in snaps[0] if snaps[0][k] != snaps[1][k]]
    ok = verdict(10, "repeated seeded runs give identical artifacts", not mismatched,
                 "all artifacts match" if not mismatched else f"differ: {', '.join(mismatched)}")
    assert ok
