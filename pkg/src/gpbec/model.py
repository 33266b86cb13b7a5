"""Hamiltonians: full N-body, excitation parts, quadratic model, renormalized.

The pair interaction is written ``(1/2N) sum W(l) a*_{p-l} a*_{q+l} a_p a_q``
with ``W(l) = 2N * scaled_coupling(l)``; in the Gross-Pitaevskii regime
``W(l) = v_hat(l/N)``.  The excitation parts are assembled term by term
from their normal-ordered formulas in ``W``, so the identity
``U H U* = L0 + L2 + L3 + L4`` is a genuine two-sided check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .fock import (
    DEFAULT_BUDGET,
    FockBasis,
    FullSectorBasis,
    excitation_map,
    excitation_number,
)
from .lattice import MomentumLattice, PotentialSpec, TWO_PI, coupling_scale, radial_fourier


@dataclass(frozen=True)
class ModelConfig:
    """Model parameters.

    Attributes
    ----------
    lattice : MomentumLattice
    N : int
        Particle number, at least 2.
    beta : float
        Scaling exponent: ``1`` is the Gross-Pitaevskii regime, ``0`` mean field.
    spec : PotentialSpec
    mean_field : bool or None
        Use the ``1/(2(N-1))`` prefactor; ``None`` selects it when ``beta == 0``.
    cap : int or None
        Excitation cap, ``N`` by default.
    """

    lattice: MomentumLattice
    N: int
    beta: float = 1.0
    spec: PotentialSpec = field(default_factory=PotentialSpec.zero)
    mean_field: bool | None = None
    cap: int | None = None
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("N must be at least 2")
        if self.cap is None:
            object.__setattr__(self, "cap", self.N)
        if not (0 <= self.cap <= self.N):
            raise DomainError(f"cap {self.cap} must lie in [0, N={self.N}]")
        coupling_scale(self.N, self.beta, self.mean_field)

    @cached_property
    def _scale(self) -> tuple[float, float]:
        return coupling_scale(self.N, self.beta, self.mean_field)

    def interaction(self, k2) -> np.ndarray:
        """``W(l)`` as a function of the integer squared norm of ``l / 2 pi``."""
        pref, div = self._scale
        k2 = np.asarray(k2, dtype=float)
        return 2.0 * self.N * pref * radial_fourier(self.spec, TWO_PI * np.sqrt(k2) / div)

    def coupling(self, k2) -> np.ndarray:
        """Pair coefficient ``W(l) / (2N)``."""
        return self.interaction(k2) / (2.0 * self.N)


class _Couplings:
    """Cache of ``W`` keyed by integer squared norm."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self._cache: dict[int, float] = {}

    def __call__(self, dk) -> float:
        k2 = int(dk[0] * dk[0] + dk[1] * dk[1] + dk[2] * dk[2])
        if k2 not in self._cache:
            self._cache[k2] = float(self.config.interaction(np.array([k2]))[0])
        return self._cache[k2]


def _mode_vectors(lattice: MomentumLattice, with_zero: bool):
    vecs = [tuple(int(c) for c in k) for k in lattice.k]
    if with_zero:
        vecs = [(0, 0, 0)] + vecs
    return vecs


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _neg(a):
    return (-a[0], -a[1], -a[2])


def _pair_terms(vectors, index, W, pref):
    """``pref * W(l) a*_{p-l} a*_{q+l} a_p a_q`` for every admissible index set."""
    terms = []
    for p in vectors:
        for q in vectors:
            for pl in vectors:
                ell = _sub(p, pl)
                ql = _add(q, ell)
                if ql not in index:
                    continue
                w = W(ell)
                if w == 0:
                    continue
                terms.append((pref * w, [("A", index[pl]), ("A", index[ql]), ("a", index[p]), ("a", index[q])]))
    return terms


def kinetic_diagonal(basis, lattice: MomentumLattice) -> np.ndarray:
    occ = basis.occ[:, 1:] if isinstance(basis, FullSectorBasis) else basis.occ
    return occ @ lattice.p_squared


def build_full_hamiltonian(config: ModelConfig, full: FullSectorBasis | None = None) -> sp.csr_matrix:
    """``H_N`` on the ``N``-particle sector (zero mode included).

    Kinetic energy plus the momentum-conserving pair sum over all modes,
    keeping only terms whose four momenta lie in the truncated mode set.
    """
    if full is None:
        full = FullSectorBasis(config.lattice, config.N, config.budget)
    vectors = _mode_vectors(config.lattice, with_zero=True)
    index = {v: i for i, v in enumerate(vectors)}
    W = _Couplings(config)
    terms = _pair_terms(vectors, index, W, 1.0 / (2.0 * config.N))
    H = full.operator(terms)
    K = sp.diags(kinetic_diagonal(full, config.lattice), format="csr")
    return (H + K).tocsr()


@dataclass(frozen=True, eq=False)
class HamiltonianBundle:
    """Excitation Hamiltonian split into its parts on a capped Fock basis.

    ``V`` is the quartic excitation interaction, identical to ``L4``.
    """

    config: ModelConfig
    basis: FockBasis
    L0: sp.csr_matrix
    L2: sp.csr_matrix
    L3: sp.csr_matrix
    L4: sp.csr_matrix
    K: sp.csr_matrix

    @property
    def V(self) -> sp.csr_matrix:
        return self.L4

    @property
    def parts(self) -> tuple:
        return self.L0, self.L2, self.L3, self.L4

    @cached_property
    def total(self) -> sp.csr_matrix:
        return (self.L0 + self.L2 + self.L3 + self.L4).tocsr()


def build_excitation_hamiltonian(config: ModelConfig, basis: FockBasis | None = None) -> HamiltonianBundle:
    """Assemble ``L0, L2, L3, L4`` from their normal-ordered formulas.

    With ``W = W(l)`` and ``n = N+``::

        L0 = (N-1)/(2N) W(0) (N - n) + W(0)/(2N) n (N - n)
        L2 = K + sum_p W(p) (b*_p b_p - a*_p a_p / N)
               + 1/2 sum_p W(p) (b*_p b*_{-p} + b_p b_{-p})
        L3 = N^{-1/2} sum_{p,q; p+q != 0} W(p) (b*_{p+q} a*_{-p} a_q + h.c.)
        L4 = (2N)^{-1} sum_{p,q,r} W(r) a*_{p+r} a*_q a_p a_{q+r}

    With ``cap < N`` the result is the compression to sectors ``n <= cap``:
    every word is normal ordered, so truncating after each creator is the
    same as projecting at the end.
    """
    N = config.N
    lattice = config.lattice
    if basis is None:
        basis = FockBasis(lattice, config.cap, config.budget)
    vectors = _mode_vectors(lattice, with_zero=False)
    index = {v: i for i, v in enumerate(vectors)}
    W = _Couplings(config)
    W0 = W((0, 0, 0))
    n = basis.totals.astype(float)

    L0 = sp.diags((N - 1) / (2.0 * N) * W0 * (N - n) + W0 / (2.0 * N) * n * (N - n), format="csr")

    K = sp.diags(kinetic_diagonal(basis, lattice), format="csr")
    quad = []
    for p in vectors:
        i = index[p]
        w = W(p)
        quad.append((w, [("B", i), ("b", i)]))
        quad.append((-w / N, [("A", i), ("a", i)]))
        m = index.get(_neg(p))
        if m is not None:
            quad.append((0.5 * w, [("B", i), ("B", m)]))
            quad.append((0.5 * w, [("b", i), ("b", m)]))
    L2 = (K + basis.operator(quad, N)).tocsr()

    cubic = []
    scale = 1.0 / math.sqrt(N)
    for p in vectors:
        mp = index.get(_neg(p))
        if mp is None:
            continue
        w = W(p)
        for q in vectors:
            pq = _add(p, q)
            if pq == (0, 0, 0) or pq not in index:
                continue
            iq, ipq = index[q], index[pq]
            cubic.append((scale * w, [("B", ipq), ("A", mp), ("a", iq)]))
            cubic.append((scale * w, [("A", iq), ("a", mp), ("b", ipq)]))
    L3 = basis.operator(cubic, N)

    L4 = basis.operator(_pair_terms(vectors, index, W, 1.0 / (2.0 * N)))
    return HamiltonianBundle(config, basis, L0, L2, L3, L4, K)


def total_momentum(basis) -> list[sp.csr_matrix]:
    """Diagonal operators for the three components of the total momentum."""
    occ = basis.occ[:, 1:] if isinstance(basis, FullSectorBasis) else basis.occ
    P = occ @ basis.lattice.p
    return [sp.diags(P[:, j], format="csr") for j in range(3)]


# ---------------------------------------------------------------------------
# quadratic model


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """``sum_p [A_p a*_p a_p + B_p/2 (a*_p a*_{-p} + a_p a_{-p})]`` with kernels.

    ``A_p = p^2 + 8 pi a0`` and ``B_p = 8 pi a0``; ``nu`` is the Bogoliubov
    angle with ``tanh(2 nu) = -B/A``.
    """

    basis: FockBasis
    a0: float
    H: sp.csr_matrix
    A: np.ndarray
    B: np.ndarray
    nu: np.ndarray

    @property
    def sinh(self) -> np.ndarray:
        return np.sinh(self.nu)

    @property
    def cosh(self) -> np.ndarray:
        return np.cosh(self.nu)

    @property
    def ground_energy(self) -> float:
        """``sum_p (sqrt(A_p^2 - B_p^2) - A_p) / 2`` (untruncated)."""
        return float(0.5 * np.sum(np.sqrt(self.A**2 - self.B**2) - self.A))

    @property
    def mean(self) -> float:
        """``sum_p sinh^2 nu_p``."""
        return float(np.sum(self.sinh**2))

    @property
    def sigma2(self) -> float:
        """``sum_p sinh^2 nu_p cosh^2 nu_p``."""
        return float(np.sum(self.sinh**2 * self.cosh**2))

    @property
    def variance(self) -> float:
        """Exact ``N+`` variance of the untruncated vacuum: ``2 sum_p sinh^2 cosh^2``.

        Each ``{p, -p}`` pair carries ``2 n`` excitations with ``n``
        geometric of mean ``sinh^2``, hence the factor two over ``sigma2``.
        """
        return 2.0 * self.sigma2


def quadratic_model(lattice: MomentumLattice, a0: float, cap: int, budget: int = DEFAULT_BUDGET) -> QuadraticModel:
    """Quadratic Bogoliubov Hamiltonian on ``FockBasis(lattice, cap)``."""
    if a0 < 0:
        raise DomainError("scattering length must be nonnegative")
    if not lattice.symmetric:
        raise DomainError("the quadratic model needs a negation-closed lattice")
    basis = FockBasis(lattice, cap, budget)
    p2 = lattice.p_squared
    A = p2 + 8.0 * math.pi * a0
    B = np.full(lattice.size, 8.0 * math.pi * a0)
    nu = -0.25 * np.log1p(2.0 * B / (A - B))
    neg = lattice.negate
    terms = []
    for i in range(lattice.size):
        terms.append((A[i], [("A", i), ("a", i)]))
        if B[i] != 0:
            terms.append((0.5 * B[i], [("A", i), ("A", int(neg[i]))]))
            terms.append((0.5 * B[i], [("a", i), ("a", int(neg[i]))]))
    H = basis.operator(terms)
    return QuadraticModel(basis, float(a0), H, A, B, nu)


# ---------------------------------------------------------------------------
# renormalized Hamiltonian


def build_renormalized(config: ModelConfig, eta, bundle: HamiltonianBundle | None = None, tolerance: float = 1e-10):
    """``G_N = exp(-B(eta)) L_N exp(B(eta))``.

    Uses the same conjugation direction as the action formula for ``b_p``,
    so ``G_N`` expresses ``L_N`` in the correlated frame.
    """
    from .bogoliubov import build_generator, conjugate

    if bundle is None:
        bundle = build_excitation_hamiltonian(config)
    gen = build_generator(bundle.basis, eta, config.N)
    return conjugate(bundle.total, gen, tolerance)


@dataclass(frozen=True)
class LowerBoundDiagnostic:
    """Smallest ``C`` with ``G - E - (K + V)/2 + C >= 0``; ``E`` is the computed ground energy."""

    ground_energy: float
    constant: float
    min_eigenvalue: float


def renormalized_lower_bound(G, bundle: HamiltonianBundle) -> LowerBoundDiagnostic:
    """Fit the additive constant of the coercivity bound (dense; reported, not asserted)."""
    Gd = G.toarray() if sp.issparse(G) else np.asarray(G)
    E = float(np.linalg.eigvalsh(Gd)[0])
    M = Gd - E * np.eye(len(Gd)) - 0.5 * (bundle.K + bundle.V).toarray()
    lo = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
    return LowerBoundDiagnostic(E, max(0.0, -lo), lo)


def excitation_conjugate(config: ModelConfig):
    """``U_N H_N U_N*`` together with the map (for the conjugation identity)."""
    full = FullSectorBasis(config.lattice, config.N, config.budget)
    H = build_full_hamiltonian(config, full)
    U = excitation_map(full, config.budget)
    return U.conjugate(H), U


__all__ = [
    "ModelConfig",
    "HamiltonianBundle",
    "QuadraticModel",
    "build_full_hamiltonian",
    "build_excitation_hamiltonian",
    "build_renormalized",
    "quadratic_model",
    "renormalized_lower_bound",
    "total_momentum",
    "excitation_conjugate",
    "excitation_number",
]
