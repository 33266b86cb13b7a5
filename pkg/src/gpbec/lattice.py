"""Momentum lattices on the unit torus and the pair-potential catalog.

Momenta live on ``2*pi*Z^3``; a lattice here is a finite, negation-closed
subset with the zero mode removed.  Potentials are radial, nonnegative and
compactly supported; their Fourier coefficients feed every Hamiltonian in
the package.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import DomainError, EmptyLatticeError

TWO_PI = 2.0 * math.pi

CUTOFF_KINDS = ("euclidean", "sup")


@dataclass(frozen=True)
class MomentumLattice:
    """Finite negation-symmetric set of nonzero lattice momenta.

    Attributes
    ----------
    cutoff_kind : str
        ``"euclidean"`` or ``"sup"``; ``"custom"`` for hand-picked sets.
    cutoff_value : int
        Bound on the integer norm of ``k``.
    k : ndarray of int, shape (M, 3)
        Integer coordinates, lexicographically sorted.
    """

    cutoff_kind: str
    cutoff_value: int
    k: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = np.asarray(self.k, dtype=np.int64).reshape(-1, 3)
        if len(k) == 0:
            raise EmptyLatticeError("lattice has no modes")
        if np.any(np.all(k == 0, axis=1)):
            raise ValueError("the zero mode cannot be part of a momentum lattice")
        order = np.lexsort(k.T[::-1])
        k = k[order]
        if len({tuple(row) for row in k}) != len(k):
            raise ValueError("duplicate modes")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @classmethod
    def from_vectors(cls, vectors) -> "MomentumLattice":
        """Lattice from explicit integer vectors; need not be negation-closed.

        Useful for tiny test spaces (for instance three modes).  Modes whose
        negative is absent get ``negate == -1``.
        """
        vectors = np.asarray(vectors, dtype=np.int64).reshape(-1, 3)
        bound = int(np.abs(vectors).max()) if len(vectors) else 0
        return cls("custom", bound, vectors)

    def __len__(self) -> int:
        return len(self.k)

    @property
    def size(self) -> int:
        return len(self.k)

    @cached_property
    def p(self) -> np.ndarray:
        """Physical momenta ``2*pi*k``."""
        return TWO_PI * self.k

    @cached_property
    def k_squared(self) -> np.ndarray:
        """Integer squared norms ``|k|^2``."""
        return np.einsum("ij,ij->i", self.k, self.k)

    @cached_property
    def p_squared(self) -> np.ndarray:
        # 4 pi^2 |k|^2 from the exact integer norm, no cancellation
        return (TWO_PI**2) * self.k_squared.astype(float)

    @cached_property
    def index_of(self) -> dict:
        return {tuple(int(c) for c in row): i for i, row in enumerate(self.k)}

    @cached_property
    def negate(self) -> np.ndarray:
        """Index of ``-k`` for each mode (``-1`` if absent)."""
        idx = self.index_of
        return np.array([idx.get(tuple(int(-c) for c in row), -1) for row in self.k], dtype=np.int64)

    @property
    def symmetric(self) -> bool:
        return bool(np.all(self.negate >= 0))

    def index(self, k) -> int:
        """Ordinal of the integer vector ``k``; raises ``IndexError`` if absent."""
        key = tuple(int(c) for c in k)
        try:
            return self.index_of[key]
        except KeyError:
            raise IndexError(f"mode {key} not in lattice") from None

    def lookup(self, k) -> int:
        """Ordinal of ``k``; ``-1`` for absent modes and ``-2`` for the zero mode."""
        key = tuple(int(c) for c in k)
        if key == (0, 0, 0):
            return -2
        return self.index_of.get(key, -1)

    def shortest_modes(self) -> np.ndarray:
        """Indices of the modes of minimal ``|k|``."""
        return np.flatnonzero(self.k_squared == self.k_squared.min())


def enumerate_modes(cutoff_kind: str = "euclidean", cutoff_value: int = 1) -> MomentumLattice:
    """All nonzero integer vectors within a norm ball.

    Parameters
    ----------
    cutoff_kind : {"euclidean", "sup"}
        Euclidean keeps ``|k|^2 <= cutoff^2``; sup keeps ``max|k_i| <= cutoff``.
    cutoff_value : int
        Must be at least one.

    Examples
    --------
    >>> len(enumerate_modes("sup", 1)), len(enumerate_modes("euclidean", 1))
    (26, 6)
    """
    kind = cutoff_kind.lower()
    if kind in ("sup-norm", "sup_norm", "supnorm", "max"):
        kind = "sup"
    if kind not in CUTOFF_KINDS:
        raise ValueError(f"unknown cutoff kind {cutoff_kind!r}; expected one of {CUTOFF_KINDS}")
    cutoff = int(cutoff_value)
    if cutoff != cutoff_value or cutoff < 0:
        raise ValueError("cutoff_value must be a nonnegative integer")
    if cutoff == 0:
        raise EmptyLatticeError("cutoff 0 leaves no nonzero modes")
    rng = range(-cutoff, cutoff + 1)
    pts = np.array(list(itertools.product(rng, rng, rng)), dtype=np.int64)
    nonzero = np.any(pts != 0, axis=1)
    if kind == "euclidean":
        keep = nonzero & (np.einsum("ij,ij->i", pts, pts) <= cutoff * cutoff)
    else:
        keep = nonzero
    return MomentumLattice(kind, cutoff, pts[keep])


# ---------------------------------------------------------------------------
# potentials

POTENTIAL_KINDS = ("zero", "square_well", "cosine_bump", "table")


@dataclass(frozen=True)
class PotentialSpec:
    """Radial nonnegative pair potential.

    ``square_well``: ``v = V0`` on ``|x| < R``.
    ``cosine_bump``: ``v = V0 (1 + cos(pi r / R)) / 2`` on ``|x| < R``.
    ``table``: Fourier coefficients given directly as a map from the integer
    squared norm ``|k|^2`` to ``v_hat(2 pi k)``; only usable with unscaled
    (mean-field) couplings, since it has no position-space profile.
    """

    kind: str = "zero"
    V0: float = 0.0
    R: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if self.kind in ("square_well", "cosine_bump"):
            if not (self.V0 >= 0 and math.isfinite(self.V0)):
                raise ValueError("V0 must be finite and nonnegative")
            if not (0 < self.R < 0.5):
                raise ValueError("R must lie in (0, 1/2) so the support fits in the torus")
        if self.kind == "table":
            table = tuple(sorted((int(k2), float(val)) for k2, val in dict(self.table).items()))
            object.__setattr__(self, "table", table)

    @classmethod
    def square_well(cls, V0: float, R: float) -> "PotentialSpec":
        return cls("square_well", float(V0), float(R))

    @classmethod
    def cosine_bump(cls, V0: float, R: float) -> "PotentialSpec":
        return cls("cosine_bump", float(V0), float(R))

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("zero")

    @classmethod
    def from_table(cls, values: dict) -> "PotentialSpec":
        return cls("table", table=tuple(values.items()))

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "table":
            return all(val == 0 for _, val in self.table)
        return self.V0 == 0

    @property
    def support_radius(self) -> float:
        return self.R if self.kind in ("square_well", "cosine_bump") else 0.0

    @property
    def has_profile(self) -> bool:
        return self.kind != "table"

    def radial(self, r) -> np.ndarray:
        """Position-space profile ``v(r)``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "square_well":
            return np.where(r < self.R, self.V0, 0.0)
        if self.kind == "cosine_bump":
            return np.where(r < self.R, 0.5 * self.V0 * (1.0 + np.cos(np.pi * r / self.R)), 0.0)
        raise DomainError("table potentials have no position-space profile")

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "table": {str(k): v for k, v in self.table}}
        if self.kind == "zero":
            return {"kind": "zero"}
        return {"kind": self.kind, "V0": self.V0, "R": self.R}


def ball_transform(q, radius: float) -> np.ndarray:
    """Fourier transform of the indicator of a ball, as a function of ``|q|``.

    ``4 pi (sin x - x cos x) / q^3`` with ``x = |q| radius``; a Taylor
    branch is used for ``x < 1e-3``.
    """
    q = np.abs(np.asarray(q, dtype=float))
    x = q * radius
    small = x < 1e-3
    out = np.empty_like(x)
    xs = x[small]
    x2 = xs * xs
    out[small] = (4.0 * math.pi / 3.0) * radius**3 * (1.0 - x2 / 10.0 + x2 * x2 / 280.0)
    xl = x[~small]
    ql = q[~small]
    out[~small] = 4.0 * math.pi * (np.sin(xl) - xl * np.cos(xl)) / ql**3
    return out


def _cosine_bump_hat(qnorm: float, V0: float, R: float) -> float:
    prof = lambda r: 0.5 * V0 * (1.0 + math.cos(math.pi * r / R))  # noqa: E731
    if qnorm == 0.0:
        f = lambda r: 4.0 * math.pi * prof(r) * r * r  # noqa: E731
    else:
        f = lambda r: 4.0 * math.pi * prof(r) * r * math.sin(qnorm * r) / qnorm  # noqa: E731
    val, _ = integrate.quad(f, 0.0, R, epsabs=1e-12, epsrel=1e-13, limit=200)
    return val


def radial_fourier(spec: PotentialSpec, qnorm) -> np.ndarray:
    """``v_hat`` as a function of ``|q|`` (array in, array out)."""
    qnorm = np.abs(np.asarray(qnorm, dtype=float))
    if spec.kind == "zero":
        return np.zeros_like(qnorm)
    if spec.kind == "square_well":
        return spec.V0 * ball_transform(qnorm, spec.R)
    if spec.kind == "cosine_bump":
        flat = qnorm.ravel()
        cache: dict = {}
        out = np.empty_like(flat)
        for i, q in enumerate(flat):
            if q not in cache:
                cache[q] = _cosine_bump_hat(float(q), spec.V0, spec.R)
            out[i] = cache[q]
        return out.reshape(qnorm.shape)
    # table: keyed by integer |k|^2 of q = 2 pi k
    lookup = dict(spec.table)
    k2 = qnorm**2 / TWO_PI**2
    k2i = np.rint(k2)
    if np.any(np.abs(k2 - k2i) > 1e-8 * np.maximum(1.0, k2)):
        raise DomainError("table potentials are only defined on lattice momenta")
    return np.vectorize(lambda n: lookup.get(int(n), 0.0), otypes=[float])(k2i)


def fourier_coefficient(spec: PotentialSpec, q) -> float:
    """``v_hat(q) = int v(x) exp(-i q.x) dx`` for a real 3-vector ``q``.

    Real and even in ``q`` by radial symmetry.
    """
    q = np.asarray(q, dtype=float)
    qnorm = math.sqrt(float(np.dot(q, q))) if q.ndim else abs(float(q))
    return float(radial_fourier(spec, np.array([qnorm]))[0])


def mean_field_default(beta: float) -> bool:
    """Mean-field ``1/(2(N-1))`` prefactor is the default only at ``beta == 0``."""
    return beta == 0


def coupling_scale(N: int, beta: float, mean_field: bool | None = None) -> tuple[float, float]:
    """Return ``(prefactor, momentum_divisor)`` of the scaled pair coupling.

    The coupling is ``prefactor * v_hat(l / momentum_divisor)``.
    """
    if N < 2:
        raise DomainError("scaled couplings need N >= 2")
    if not (0.0 <= beta <= 1.0):
        raise DomainError("scaling exponent must lie in [0, 1]")
    if mean_field is None:
        mean_field = mean_field_default(beta)
    pref = 1.0 / (2.0 * (N - 1)) if mean_field else 1.0 / (2.0 * N)
    return pref, float(N) ** beta


def scaled_coupling(spec: PotentialSpec, N: int, beta: float, ell, mean_field: bool | None = None) -> float:
    """Coefficient of ``a*_{p-l} a*_{q+l} a_p a_q`` in the pair sum.

    Parameters
    ----------
    spec : PotentialSpec
    N : int
        Particle number, at least 2.
    beta : float
        Scaling exponent in ``[0, 1]``; the interaction is
        ``N^{3 beta - 1} v(N^beta x)``.
    ell : array_like
        Momentum transfer (physical units).
    mean_field : bool, optional
        Use ``1/(2(N-1))`` instead of ``1/(2N)``.  Defaults to ``beta == 0``.
    """
    pref, div = coupling_scale(N, beta, mean_field)
    return pref * fourier_coefficient(spec, np.asarray(ell, dtype=float) / div)
