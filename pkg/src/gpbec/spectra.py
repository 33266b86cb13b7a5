"""Eigensolvers and Gibbs states.

Dense problems go to ``numpy.linalg.eigh``.  The iterative path is a
thick-restart Lanczos method with full reorthogonalization; degenerate
levels are completed by deflated restarts from fresh random vectors, since a
single Krylov sequence only sees one direction per eigenspace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .errors import NumericalError

DENSE_TOL = 1e-9
ITERATIVE_TOL = 1e-8
CLUSTER_GAP = 1e-8
DENSE_AUTO_LIMIT = 3500


def _as_dense(H) -> np.ndarray:
    return H.toarray() if sp.issparse(H) else np.asarray(H)


def _matvec(H):
    if sp.issparse(H) or isinstance(H, np.ndarray):
        return lambda x: H @ x
    return H.matvec


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Eigenpairs in ascending order.

    ``eigenvectors[:, j]`` belongs to ``eigenvalues[j]``; ``residuals[j]`` is
    ``||H psi_j - E_j psi_j||``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residuals: np.ndarray
    method: str

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_vector(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def clusters(self, gap: float = CLUSTER_GAP) -> list[np.ndarray]:
        """Index groups of eigenvalues closer than ``gap``."""
        breaks = np.flatnonzero(np.diff(self.eigenvalues) >= gap) + 1
        return np.split(np.arange(len(self.eigenvalues)), breaks)

    def rows(self):
        for j, (e, r) in enumerate(zip(self.eigenvalues, self.residuals)):
            yield j, float(e), float(r)


def _residuals(H, vals, vecs) -> np.ndarray:
    mv = _matvec(H)
    HV = np.column_stack([mv(vecs[:, j]) for j in range(vecs.shape[1])]) if vecs.size else vecs
    return np.linalg.norm(HV - vecs * vals, axis=0)


def dense_spectrum(H, count: int | None = None) -> SpectralResult:
    Hd = _as_dense(H)
    Hd = 0.5 * (Hd + Hd.conj().T)
    vals, vecs = np.linalg.eigh(Hd)
    if count is not None:
        vals, vecs = vals[:count], vecs[:, :count]
    return SpectralResult(vals, vecs, _residuals(Hd, vals, vecs), "dense")


def _orthonormalize_against(x, blocks, passes: int = 2):
    for _ in range(passes):
        for Q in blocks:
            if Q is not None and Q.shape[1]:
                x = x - Q @ (Q.conj().T @ x)
    return x


def _thick_restart(mv, n, want, start, locked, tol, krylov_dim, max_restarts, rng):
    """Lowest ``want`` eigenpairs of ``H`` restricted to the complement of ``locked``."""
    m = min(max(krylov_dim, 2 * want + 10), n - (locked.shape[1] if locked is not None else 0))
    m = max(m, 1)
    keep = min(max(want + 5, m // 2), m - 1) if m > 1 else 0
    V = np.zeros((n, 0), dtype=start.dtype)
    HV = np.zeros((n, 0), dtype=start.dtype)
    x = start
    best = np.inf
    for _ in range(max_restarts):
        while V.shape[1] < m:
            x = _orthonormalize_against(x, [locked, V])
            nrm = np.linalg.norm(x)
            if nrm < 1e-10:
                # invariant subspace reached: continue with a fresh direction
                x = _orthonormalize_against(rng.standard_normal(n).astype(start.dtype), [locked, V])
                nrm = np.linalg.norm(x)
                if nrm < 1e-10:
                    break
            v = x / nrm
            hv = mv(v)
            V = np.column_stack([V, v])
            HV = np.column_stack([HV, hv])
            x = hv
        T = V.conj().T @ HV
        T = 0.5 * (T + T.conj().T)
        theta, Y = np.linalg.eigh(T)
        k = min(want, len(theta))
        ritz = V @ Y
        hritz = HV @ Y
        res = np.linalg.norm(hritz[:, :k] - ritz[:, :k] * theta[:k], axis=0)
        best = float(res.max()) if k else 0.0
        if k == 0 or best <= tol or V.shape[1] < m:
            return theta[:k], ritz[:, :k], res
        # thick restart: keep the lowest Ritz vectors, continue from a residual
        j = int(np.argmax(res > tol))
        x = hritz[:, j] - theta[j] * ritz[:, j]
        V = ritz[:, :keep]
        HV = hritz[:, :keep]
    raise NumericalError("Lanczos did not converge", residual=best)


def lanczos(
    H,
    count: int = 1,
    tol: float = ITERATIVE_TOL,
    seed: int = 0,
    krylov_dim: int = 60,
    max_restarts: int = 500,
) -> SpectralResult:
    """Lowest ``count`` eigenpairs by thick-restart Lanczos.

    Parameters
    ----------
    H : sparse matrix, ndarray or LinearOperator
        Hermitian operator.
    count : int
    tol : float
        Absolute residual target.
    seed : int
        Seed for the start vectors.
    """
    n = H.shape[0]
    count = min(count, n)
    mv = _matvec(H)
    rng = np.random.default_rng(seed)
    dtype = np.result_type(H.dtype, np.float64)
    locked = np.zeros((n, 0), dtype=dtype)
    vals = np.zeros(0)
    while True:
        need = count - locked.shape[1]
        probing = need <= 0
        want = 1 if probing else need
        if locked.shape[1] >= n:
            break
        start = rng.standard_normal(n).astype(dtype)
        theta, ritz, _ = _thick_restart(mv, n, want, start, locked, tol, krylov_dim, max_restarts, rng)
        if probing:
            if len(theta) == 0 or theta[0] >= vals.max() - tol:
                break
            theta, ritz = theta[:1], ritz[:, :1]
        locked = np.column_stack([locked, ritz])
        vals = np.concatenate([vals, theta])
    # final Rayleigh-Ritz on the locked space
    Q, _ = np.linalg.qr(locked)
    HQ = np.column_stack([mv(Q[:, j]) for j in range(Q.shape[1])])
    T = Q.conj().T @ HQ
    theta, Y = np.linalg.eigh(0.5 * (T + T.conj().T))
    vecs = (Q @ Y)[:, :count]
    theta = theta[:count]
    res = _residuals(H, theta, vecs)
    if res.max(initial=0.0) > tol:
        raise NumericalError("Lanczos residual above tolerance after deflation", residual=float(res.max()))
    return SpectralResult(theta, vecs, res, "lanczos")


def low_spectrum(H, count: int, method: str = "auto", tol: float | None = None, seed: int = 0) -> SpectralResult:
    """Lowest ``count`` eigenpairs, orthonormal and ascending.

    ``method`` is ``"dense"``, ``"lanczos"`` or ``"auto"`` (dense up to
    dimension 3500).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if method == "auto":
        method = "dense" if H.shape[0] <= DENSE_AUTO_LIMIT else "lanczos"
    if method == "dense":
        result = dense_spectrum(H, count)
        limit = DENSE_TOL if tol is None else tol
    elif method == "lanczos":
        limit = ITERATIVE_TOL if tol is None else tol
        result = lanczos(H, count, tol=limit, seed=seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    if result.residuals.max() > limit:
        raise NumericalError("eigenpair residual above tolerance", residual=float(result.residuals.max()))
    return result


def ground_state(H, method: str = "auto", tol: float | None = None, seed: int = 0) -> SpectralResult:
    """Lowest eigenpair (residual <= 1e-9 dense, 1e-8 iterative)."""
    return low_spectrum(H, 1, method, tol, seed)


# ---------------------------------------------------------------------------
# thermal states


@dataclass(frozen=True, eq=False)
class ThermalState:
    """Gibbs state ``exp(-beta H) / Z`` in the eigenbasis of ``H``.

    Attributes
    ----------
    beta : float
    energies : ndarray
        Spectrum used (possibly truncated).
    vectors : ndarray
        Matching eigenvectors as columns.
    shift : float
        Energy shift ``E_0``; ``Z = exp(-beta shift) * Z_shifted``.
    log_z_shifted : float
        ``log sum_j exp(-beta (E_j - E_0))``.
    """

    beta: float
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)
    shift: float
    log_z_shifted: float
    tail_bound: float = 0.0

    @property
    def z_shifted(self) -> float:
        """``exp(beta E_0) Z(beta)``."""
        return math.exp(self.log_z_shifted)

    @property
    def log_partition(self) -> float:
        return self.log_z_shifted - self.beta * self.shift

    @property
    def weights(self) -> np.ndarray:
        return np.exp(-self.beta * (self.energies - self.shift) - self.log_z_shifted)

    @property
    def energy(self) -> float:
        return float(self.weights @ self.energies)

    @property
    def entropy(self) -> float:
        w = self.weights
        w = w[w > 0]
        return float(-(w @ np.log(w)))

    @property
    def free_energy(self) -> float:
        """``Tr[H Gamma] - S / beta``; equals ``-log Z / beta``."""
        return self.energy - self.entropy / self.beta

    def density_matrix(self) -> np.ndarray:
        return (self.vectors * self.weights) @ self.vectors.conj().T

    def expectation_diagonal(self, diag: np.ndarray) -> float:
        """``Tr[D Gamma]`` for a diagonal operator given by its diagonal."""
        probs = np.abs(self.vectors) ** 2
        return float(self.weights @ (probs.T @ diag))


def gibbs(
    H,
    beta: float,
    method: str = "dense",
    count: int | None = None,
    tail_tol: float = 1e-12,
    seed: int = 0,
    spectrum: SpectralResult | None = None,
) -> ThermalState:
    """Gibbs state at inverse temperature ``beta``.

    The dense path uses the whole spectrum (pass ``spectrum`` to reuse a
    full diagonalization across temperatures).  The iterative path sums the
    lowest ``count`` levels and bounds the rest by
    ``(dim - count) exp(-beta (E_count - E_0))``; a bound above ``tail_tol``
    raises :class:`NumericalError`.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    n = H.shape[0]
    if method == "dense":
        spec = dense_spectrum(H) if spectrum is None else spectrum
        if len(spec.eigenvalues) != n:
            raise ValueError("the dense path needs the full spectrum")
        tail = 0.0
    else:
        if count is None:
            raise ValueError("the iterative path needs a level count")
        spec = lanczos(H, count + 1, seed=seed)
        top = spec.eigenvalues[-1]
        tail = (n - count) * math.exp(-beta * (top - spec.eigenvalues[0]))
        if tail > tail_tol:
            raise NumericalError(f"spectral tail too heavy; raise count above {count}", residual=tail)
        spec = SpectralResult(spec.eigenvalues[:count], spec.eigenvectors[:, :count], spec.residuals[:count], spec.method)
    E = spec.eigenvalues
    E0 = float(E[0])
    logz = float(logsumexp(-beta * (E - E0)))
    return ThermalState(beta, E, spec.eigenvectors, E0, logz, tail)


def von_neumann_entropy(rho: np.ndarray) -> float:
    p = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    p = p[p > 1e-300]
    return float(-(p @ np.log(p)))


def free_energy(H, rho: np.ndarray, beta: float) -> float:
    """``Tr[H rho] - S(rho) / beta`` for a density matrix."""
    Hd = _as_dense(H)
    return float(np.real(np.trace(Hd @ rho))) - von_neumann_entropy(rho) / beta
