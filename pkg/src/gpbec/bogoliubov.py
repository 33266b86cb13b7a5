"""Generalized Bogoliubov transformations on the capped Fock space.

The generator ``B(eta) = 1/2 sum_p eta_p (b*_p b*_{-p} - b_p b_{-p})`` is
built from the modified operators, so ``exp(B)`` keeps the cap ``N``
invariant.  Conjugation is done with exact matrix exponentials; the
remainder ``d_p`` is whatever is left after subtracting the hyperbolic
rotation ``cosh(eta_p) b_p + sinh(eta_p) b*_{-p}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalError
from .fock import FockBasis, _check_modified, adjoint, max_entry
from .lattice import MomentumLattice
from .scattering import ScatteringSolution

DENSE_LIMIT = 4096
TOLERANCE = 1e-10


# ---------------------------------------------------------------------------
# kernel tables


def _check_even(lattice: MomentumLattice, eta: np.ndarray, atol: float = 0.0) -> None:
    eta = np.asarray(eta)
    if eta.shape != (lattice.size,):
        raise ValueError(f"kernel must have one entry per mode ({lattice.size})")
    neg = lattice.negate
    missing = (neg < 0) & (eta != 0)
    if np.any(missing):
        raise ValueError("kernel is nonzero on a mode whose negative is absent")
    paired = neg >= 0
    if np.any(np.abs(eta[paired] - eta[neg[paired]]) > atol):
        raise ValueError("kernel is not even under p -> -p")


@dataclass(frozen=True)
class KernelTable:
    """Per-mode hyperbolic kernels derived from ``eta``.

    Attributes
    ----------
    eta, sigma, gamma : ndarray
        ``eta_p``, ``sinh(eta_p)``, ``cosh(eta_p)``.
    alpha, beta : ndarray
        Splitting ``gamma = 1 + alpha``, ``sigma = eta + beta``.
    tau, nu : ndarray or None
        Second-layer angle and target angle, when computed.
    """

    lattice: MomentumLattice = field(repr=False)
    eta: np.ndarray
    tau: np.ndarray | None = None
    nu: np.ndarray | None = None

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        _check_even(self.lattice, eta)
        object.__setattr__(self, "eta", eta)

    @property
    def sigma(self) -> np.ndarray:
        return np.sinh(self.eta)

    @property
    def gamma(self) -> np.ndarray:
        return np.cosh(self.eta)

    @property
    def alpha(self) -> np.ndarray:
        # cosh(x) - 1 without cancellation
        return 2.0 * np.sinh(0.5 * self.eta) ** 2

    @property
    def beta(self) -> np.ndarray:
        return self.sigma - self.eta

    def rows(self):
        """Export rows ``(k, eta, sigma, gamma, tau, nu)``."""
        tau = self.tau if self.tau is not None else np.full(self.lattice.size, np.nan)
        nu = self.nu if self.nu is not None else np.full(self.lattice.size, np.nan)
        for i, k in enumerate(self.lattice.k):
            yield tuple(int(c) for c in k), self.eta[i], self.sigma[i], self.gamma[i], tau[i], nu[i]


# ---------------------------------------------------------------------------
# generator and exponentials


def build_generator(basis: FockBasis, eta, N: int) -> sp.csr_matrix:
    """Skew-hermitian ``B(eta)`` on a capped basis (``cap <= N``).

    Raises
    ------
    ValueError
        If ``eta`` is not even.
    """
    eta = np.asarray(eta, dtype=float)
    _check_even(basis.lattice, eta)
    _check_modified(basis, N)
    neg = basis.lattice.negate
    terms = []
    for p in range(basis.n_modes):
        if eta[p] == 0:
            continue
        m = int(neg[p])
        terms.append((0.5 * eta[p], [("B", p), ("B", m)]))
        terms.append((-0.5 * eta[p], [("b", p), ("b", m)]))
    return basis.operator(terms, N)


def exponential(generator, tolerance: float = TOLERANCE) -> np.ndarray:
    """Dense ``exp(B)`` for a skew-hermitian ``B``; checks unitarity."""
    dense = generator.toarray() if sp.issparse(generator) else np.asarray(generator)
    if dense.shape[0] > DENSE_LIMIT:
        raise DomainError(f"dense exponential limited to dimension {DENSE_LIMIT}")
    U = sla.expm(dense)
    drift = max_entry(U.conj().T @ U - np.eye(len(U)))
    if drift > tolerance:
        raise NumericalError("exponential of the generator is not unitary", residual=drift)
    return U


def unitarity_drift(generator) -> float:
    U = sla.expm(generator.toarray() if sp.issparse(generator) else generator)
    return max_entry(U.conj().T @ U - np.eye(len(U)))


def conjugate(op, generator, tolerance: float = TOLERANCE):
    """``exp(-B) op exp(B)``.

    Below dimension 4096 the result is a dense-backed sparse matrix.  Above
    it a :class:`scipy.sparse.linalg.LinearOperator` applying the
    conjugation through Krylov exponential actions is returned.
    """
    dim = generator.shape[0]
    if dim <= DENSE_LIMIT:
        U = exponential(generator, tolerance)
        opd = op.toarray() if sp.issparse(op) else np.asarray(op)
        out = U.conj().T @ opd @ U
        return sp.csr_matrix(out)
    return _conjugation_action(op, generator, tolerance)


def _conjugation_action(op, generator, tolerance):
    gen = sp.csr_matrix(generator)
    probe = np.random.default_rng(0).standard_normal(gen.shape[0])
    probe /= np.linalg.norm(probe)
    drift = abs(np.linalg.norm(spla.expm_multiply(gen, probe)) - 1.0)
    if drift > tolerance:
        raise NumericalError("exponential action lost norm", residual=drift)
    neg = (-gen).tocsr()

    def matvec(v):
        v = np.asarray(v).ravel()
        return spla.expm_multiply(neg, op @ spla.expm_multiply(gen, v))

    dtype = np.result_type(op.dtype, gen.dtype)
    return spla.LinearOperator(gen.shape, matvec=matvec, rmatvec=None, dtype=dtype)


def apply_exponential(generator, vec: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """``exp(sign * B) vec`` by Krylov exponential action."""
    return spla.expm_multiply(sign * sp.csr_matrix(generator), vec)


def rotated_b(basis: FockBasis, p: int, eta, N: int, dagger: bool = False) -> sp.csr_matrix:
    """Principal part ``gamma_p b_p + sigma_p b*_{-p}`` (or its adjoint)."""
    eta = np.asarray(eta, dtype=float)
    m = int(basis.lattice.negate[p])
    g, s = math.cosh(eta[p]), math.sinh(eta[p])
    if dagger:
        terms = [(g, [("B", p)]), (s, [("b", m)])]
    else:
        terms = [(g, [("b", p)]), (s, [("B", m)])]
    return basis.operator(terms, N)


def remainder_d(basis: FockBasis, p, eta, N: int, dagger: bool = False, generator=None) -> sp.csr_matrix:
    """``d_p = exp(-B) b_p exp(B) - gamma_p b_p - sigma_p b*_{-p}`` (dense, exact)."""
    pi = basis.mode_index(p)
    if generator is None:
        generator = build_generator(basis, eta, N)
    b = basis.word([("B" if dagger else "b", pi)], N)
    conj = conjugate(b, generator)
    return (conj - rotated_b(basis, pi, eta, N, dagger)).tocsr()


# ---------------------------------------------------------------------------
# second-layer kernels


def bogoliubov_angle(p_squared, a0: float) -> np.ndarray:
    """``nu_p = log(p^2 / (p^2 + 16 pi a0)) / 4``."""
    p2 = np.asarray(p_squared, dtype=float)
    return -0.25 * np.log1p(16.0 * math.pi * a0 / p2)


def second_layer_kernels(F, G) -> np.ndarray:
    """Angle ``tau`` solving ``tanh(2 tau) = -G / F``.

    Raises
    ------
    DomainError
        Unless ``|G| < F`` for every entry.
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if np.any(np.abs(G) >= F):
        raise DomainError("second-layer kernel needs |G_p| < F_p")
    return 0.5 * np.arctanh(-G / F)


def renormalized_kernels(
    solution: ScatteringSolution,
    lattice: MomentumLattice,
    variant: str = "rotation",
    radius: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic coefficients ``(F_p, G_p)`` after the ``eta`` rotation.

    ``variant="rotation"`` rotates ``(p^2 + w_p, w_p)`` by ``eta``:
    ``F = p^2 (gamma^2 + sigma^2) + w (gamma + sigma)^2`` and
    ``G = 2 p^2 gamma sigma + w (gamma + sigma)^2``, with the renormalized
    interaction ``w_p`` evaluated exactly.  ``variant="printed"`` uses
    ``F = (p^2 + v)(gamma^2 + sigma^2) + 2 gamma sigma v`` and
    ``G = (gamma^2 + sigma^2)(v - (2N)^-1 sum_q v_hat((p-q)/N) eta_q)
    + 2 gamma sigma (p^2 + v)`` with ``v = v_hat(p/N)`` and the sum
    truncated at ``radius`` (default twice the cutoff, ``q != 0``).
    """
    from .lattice import radial_fourier, TWO_PI
    from .scattering import _lattice_ball

    N = solution.N
    p2 = lattice.p_squared
    pn = np.sqrt(p2)
    eta = solution.eta(lattice)
    g, s = np.cosh(eta), np.sinh(eta)
    if variant == "rotation":
        w = solution.interaction_kernel(pn)
        F = p2 * (g * g + s * s) + w * (g + s) ** 2
        G = 2.0 * p2 * g * s + w * (g + s) ** 2
        return F, G
    if variant != "printed":
        raise ValueError("variant must be 'rotation' or 'printed'")
    if radius is None:
        radius = 2 * max(1, int(np.ceil(np.sqrt(lattice.k_squared.max()))))
    v = radial_fourier(solution.spec, pn / N)
    Q = _lattice_ball(radius)
    Q = Q[np.any(Q != 0, axis=1)]
    q2 = np.einsum("ij,ij->i", Q, Q)
    uq2, inv = np.unique(q2, return_inverse=True)
    eta_q = solution.eta_of_k2(uq2)[inv]
    diff = lattice.k[:, None, :] - Q[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    ud2, dinv = np.unique(d2, return_inverse=True)
    conv = radial_fourier(solution.spec, TWO_PI * np.sqrt(ud2.astype(float)) / N)[dinv].reshape(d2.shape) @ eta_q
    F = (p2 + v) * (g * g + s * s) + 2.0 * g * s * v
    G = (g * g + s * s) * (v - conv / (2.0 * N)) + 2.0 * g * s * (p2 + v)
    return F, G


@dataclass(frozen=True)
class KernelGap:
    """``eta + tau`` next to ``nu`` with per-mode gaps."""

    table: KernelTable
    composed: np.ndarray
    gap: np.ndarray

    @property
    def max_gap(self) -> float:
        return float(np.max(np.abs(self.gap)))


def kernel_gap(solution: ScatteringSolution, lattice: MomentumLattice, variant: str = "rotation") -> KernelGap:
    """Compose the scattering kernel with the second-layer angle and compare to ``nu``."""
    F, G = renormalized_kernels(solution, lattice, variant)
    tau = second_layer_kernels(F, G)
    eta = solution.eta(lattice)
    nu = bogoliubov_angle(lattice.p_squared, solution.a0)
    table = KernelTable(lattice, eta, tau, nu)
    composed = eta + tau
    return KernelGap(table, composed, composed - nu)
