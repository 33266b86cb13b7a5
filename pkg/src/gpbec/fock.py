"""Occupation-number bases and sparse second-quantized operators.

Two bases are provided.  :class:`FockBasis` holds excitation occupations
``n_p`` over the lattice modes with ``sum n_p <= cap``; this is the
excitation Fock space with a hard particle cap.  :class:`FullSectorBasis`
holds ``N``-particle states including the zero mode.  Both index states by
perfect ranking (combinatorial number system) so no hash maps are needed.

Operators are ``scipy.sparse.csr_matrix`` objects.  Products of ladder
operators are assembled as *words*: sequences of ``(kind, mode)`` pairs
applied right to left, with kinds

``"a"``  annihilation, ``"A"``  creation,
``"b"``  modified annihilation ``sqrt(1 - N+/N) a``,
``"B"``  modified creation ``a* sqrt(1 - N+/N)``.

Each letter acts like the corresponding truncated matrix, so a word equals
the matrix product of its letters.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import comb

from .errors import CapacityError, DomainError
from .lattice import MomentumLattice

DEFAULT_BUDGET = 4_000_000

Word = Sequence[tuple[str, int]]


def _binomial_table(n_max: int, k_max: int) -> np.ndarray:
    table = np.zeros((n_max + 1, k_max + 1), dtype=np.int64)
    for n in range(n_max + 1):
        for k in range(min(n, k_max) + 1):
            table[n, k] = math.comb(n, k)
    return table


def _compositions(total: int, parts: int) -> np.ndarray:
    """All compositions of ``total`` into ``parts`` nonnegative parts, lex ascending."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    slots = total + parts - 1
    bars = np.array(list(itertools.combinations(range(slots), parts - 1)), dtype=np.int64)
    bars = bars.reshape(-1, parts - 1)
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), slots)])
    return np.diff(edges, axis=1) - 1


class _OccupationSpace:
    """Shared machinery: ranking and vectorized word application."""

    occ: np.ndarray
    n_modes: int
    _binom: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.occ)

    def __len__(self) -> int:
        return len(self.occ)

    @cached_property
    def totals(self) -> np.ndarray:
        return self.occ.sum(axis=1)

    def _sector_rank(self, occ: np.ndarray, totals: np.ndarray) -> np.ndarray:
        """Rank of each row among compositions of its own total (lex ascending)."""
        M = self.n_modes
        B = self._binom
        rank = np.zeros(len(occ), dtype=np.int64)
        rem = totals.copy()
        for i in range(M - 1):
            m = M - 1 - i
            n_i = occ[:, i]
            rank += B[rem + m, m] - B[rem - n_i + m, m]
            rem = rem - n_i
        return rank

    def _rank_valid(self, occ: np.ndarray, totals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def rank(self, occ) -> np.ndarray:
        """Ordinals of occupation vectors (rows); raises ``KeyError`` if any is outside the basis."""
        occ = np.atleast_2d(np.asarray(occ, dtype=np.int64))
        if occ.shape[1] != self.n_modes:
            raise ValueError(f"expected {self.n_modes} occupations per state")
        if np.any(occ < 0):
            raise KeyError("negative occupation")
        ranks, valid = self._rank_valid(occ, occ.sum(axis=1))
        if not np.all(valid):
            raise KeyError("state outside the basis")
        return ranks

    def rank_of(self, state) -> int:
        return int(self.rank(state)[0])

    # -- operator assembly -------------------------------------------------

    def _apply_word(self, word: Word, N: int | None):
        occ = self.occ.copy()
        tot = self.totals.copy()
        amp = np.ones(self.dim)
        alive = np.ones(self.dim, dtype=bool)
        for kind, mode in reversed(list(word)):
            col = occ[:, mode]
            if kind in ("a", "b"):
                alive &= col > 0
                amp *= np.sqrt(np.maximum(col, 0))
                col -= 1
                if self._counts_excitation(mode):
                    tot -= 1
                if kind == "b":
                    amp *= self._b_factor(tot, N)
            elif kind in ("A", "B"):
                if kind == "B":
                    amp *= self._b_factor(tot, N)
                col += 1
                amp *= np.sqrt(np.maximum(col, 0))
                if self._counts_excitation(mode):
                    tot += 1
                alive &= self._within_cap(tot)
            else:
                raise ValueError(f"unknown ladder kind {kind!r}")
            occ[:, mode] = col
        alive &= amp != 0
        ranks, valid = self._rank_valid(np.where(alive[:, None], occ, 0), np.where(alive, occ.sum(axis=1), 0))
        keep = alive & valid
        cols = np.flatnonzero(keep)
        return ranks[keep], cols, amp[keep]

    def _counts_excitation(self, mode: int) -> bool:
        return True

    def _within_cap(self, tot: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _b_factor(self, tot: np.ndarray, N: int | None) -> np.ndarray:
        if N is None:
            raise DomainError("modified operators need the particle number N")
        return np.sqrt(np.maximum(N - tot, 0) / N)

    def word_triplets(self, word: Word, coeff: complex = 1.0, N: int | None = None):
        rows, cols, amp = self._apply_word(word, N)
        return rows, cols, coeff * amp

    def operator(self, terms: Iterable[tuple[complex, Word]], N: int | None = None) -> sp.csr_matrix:
        """Sparse matrix of ``sum coeff * word`` over ``terms``."""
        rows, cols, vals = [], [], []
        for coeff, word in terms:
            if coeff == 0:
                continue
            r, c, v = self.word_triplets(word, coeff, N)
            rows.append(r)
            cols.append(c)
            vals.append(v)
        return _assemble(rows, cols, vals, self.dim)

    def word(self, word: Word, N: int | None = None) -> sp.csr_matrix:
        return self.operator([(1.0, word)], N)


def _assemble(rows, cols, vals, dim) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix((dim, dim))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    if not np.iscomplexobj(v) or np.all(np.imag(v) == 0):
        v = np.real(v).astype(float)
    mat = sp.coo_matrix((v, (r, c)), shape=(dim, dim)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


class FockBasis(_OccupationSpace):
    """Excitation occupations over lattice modes with ``sum n_p <= cap``.

    States are ordered by total excitation number, then lexicographically.

    Parameters
    ----------
    lattice : MomentumLattice
    cap : int
        Maximal number of excitations.
    budget : int
        Largest admissible dimension; larger requests raise
        :class:`CapacityError`.
    """

    def __init__(self, lattice: MomentumLattice, cap: int, budget: int = DEFAULT_BUDGET):
        if cap < 0:
            raise DomainError("cap must be nonnegative")
        self.lattice = lattice
        self.cap = int(cap)
        self.n_modes = lattice.size
        M = self.n_modes
        dimension = math.comb(cap + M, M)
        if dimension > budget:
            raise CapacityError(dimension, budget)
        self._binom = _binomial_table(cap + M + 1, M + 1)
        blocks = [_compositions(t, M) for t in range(cap + 1)]
        self.occ = np.vstack(blocks)
        self.occ.setflags(write=False)
        # offsets[t] = first ordinal of sector t; offsets[cap+1] = dim
        self.sector_offsets = np.array([math.comb(t + M - 1, M) if t > 0 else 0 for t in range(cap + 2)], dtype=np.int64)

    def __repr__(self) -> str:
        return f"FockBasis(modes={self.n_modes}, cap={self.cap}, dim={self.dim})"

    def _rank_valid(self, occ, totals):
        valid = (totals <= self.cap) & np.all(occ >= 0, axis=1)
        t = np.where(valid, totals, 0)
        safe = np.where(valid[:, None], occ, 0)
        offs = self.sector_offsets[t]
        return offs + self._sector_rank(safe, t), valid

    def _within_cap(self, tot):
        return tot <= self.cap

    def sector(self, n: int) -> slice:
        """Index range of states with exactly ``n`` excitations."""
        return slice(int(self.sector_offsets[n]), int(self.sector_offsets[n + 1]))

    def vacuum(self) -> np.ndarray:
        vec = np.zeros(self.dim)
        vec[0] = 1.0
        return vec

    def basis_vector(self, occ) -> np.ndarray:
        vec = np.zeros(self.dim)
        vec[self.rank_of(occ)] = 1.0
        return vec

    def mode_index(self, p) -> int:
        """Accept an ordinal or an integer 3-vector."""
        if np.ndim(p) == 0:
            i = int(p)
            if not 0 <= i < self.n_modes:
                raise IndexError(f"mode ordinal {i} out of range")
            return i
        return self.lattice.index(p)


class FullSectorBasis(_OccupationSpace):
    """All ``N``-particle occupations of the zero mode plus the lattice modes.

    Column 0 of :attr:`occ` is the condensate occupation ``n_0``; column
    ``i + 1`` belongs to lattice mode ``i``.  States are ordered
    lexicographically on the full vector.
    """

    def __init__(self, lattice: MomentumLattice, N: int, budget: int = DEFAULT_BUDGET):
        if N < 0:
            raise DomainError("N must be nonnegative")
        self.lattice = lattice
        self.N = int(N)
        self.n_modes = lattice.size + 1
        M = self.n_modes
        dimension = math.comb(N + M - 1, M - 1)
        if dimension > budget:
            raise CapacityError(dimension, budget)
        self._binom = _binomial_table(N + M + 1, M + 1)
        self.occ = _compositions(N, M)
        self.occ.setflags(write=False)

    def __repr__(self) -> str:
        return f"FullSectorBasis(modes={self.n_modes - 1}+1, N={self.N}, dim={self.dim})"

    def _rank_valid(self, occ, totals):
        valid = (totals == self.N) & np.all(occ >= 0, axis=1)
        safe = np.where(valid[:, None], occ, 0)
        safe[~valid, 0] = self.N
        return self._sector_rank(safe, np.full(len(occ), self.N)), valid

    def _within_cap(self, tot):
        # intermediate totals are unrestricted; validity is checked at the end
        return np.ones_like(tot, dtype=bool)

    @cached_property
    def excitations(self) -> np.ndarray:
        """Excitation number ``N - n_0`` of each state."""
        return self.N - self.occ[:, 0]

    def mode_index(self, k) -> int:
        """Column of an integer 3-vector; the zero vector maps to column 0."""
        key = tuple(int(c) for c in k)
        if key == (0, 0, 0):
            return 0
        return self.lattice.index(key) + 1


# ---------------------------------------------------------------------------
# public constructors


def build_basis(lattice: MomentumLattice, cap: int, budget: int = DEFAULT_BUDGET) -> FockBasis:
    """Enumerate the capped excitation Fock basis; dimension ``C(cap + M, M)``."""
    return FockBasis(lattice, cap, budget)


def creation(basis: FockBasis, p) -> sp.csr_matrix:
    """``a*_p`` with hard truncation: the top sector is sent to zero."""
    return basis.word([("A", basis.mode_index(p))])


def annihilation(basis: FockBasis, p) -> sp.csr_matrix:
    return basis.word([("a", basis.mode_index(p))])


def _check_modified(basis: FockBasis, N: int):
    if N < 1:
        raise DomainError("N must be positive")
    if basis.cap > N:
        raise DomainError(f"cap {basis.cap} exceeds N = {N}; sqrt(1 - N+/N) would be imaginary")


def modified_b(basis: FockBasis, p, N: int, dagger: bool = False) -> sp.csr_matrix:
    """``b_p = sqrt(1 - N+/N) a_p`` or its adjoint ``b*_p = a*_p sqrt(1 - N+/N)``."""
    _check_modified(basis, N)
    return basis.word([("B" if dagger else "b", basis.mode_index(p))], N)


def excitation_number(basis: _OccupationSpace) -> sp.csr_matrix:
    """Diagonal operator ``N+`` (for a full sector: particles outside the zero mode)."""
    diag = basis.excitations if isinstance(basis, FullSectorBasis) else basis.totals
    return sp.diags(diag.astype(float), format="csr")


def dGamma(basis: FockBasis, O, hermitian: bool | None = None, atol: float = 1e-12) -> sp.csr_matrix:
    """Second quantization ``sum_{p,q} O[p, q] a*_p a_q`` of a one-body table.

    Raises
    ------
    ValueError
        If ``hermitian`` is requested but ``O`` is not hermitian.
    """
    O = np.asarray(O)
    M = basis.n_modes
    if O.shape != (M, M):
        raise ValueError(f"one-body table must have shape ({M}, {M})")
    if hermitian and np.max(np.abs(O - O.conj().T), initial=0.0) > atol:
        raise ValueError("one-body table is not hermitian")
    terms = [(O[p, q], [("A", p), ("a", q)]) for p in range(M) for q in range(M) if O[p, q] != 0]
    return basis.operator(terms)


def adjoint(op: sp.spmatrix) -> sp.csr_matrix:
    return op.conj().T.tocsr()


def max_entry(op) -> float:
    """Largest absolute entry of a sparse or dense matrix."""
    if sp.issparse(op):
        op = op.tocoo()
        return float(np.max(np.abs(op.data), initial=0.0))
    return float(np.max(np.abs(op), initial=0.0))


def is_hermitian(op, atol: float = 1e-12) -> bool:
    return max_entry(op - adjoint(op) if sp.issparse(op) else op - op.conj().T) <= atol


def commutator(x, y):
    return x @ y - y @ x


@dataclass(frozen=True)
class ExcitationMap:
    """Permutation ``U_N`` from the ``N``-particle sector to the capped Fock space.

    ``matrix[rank_fock(n_+), rank_full(n_0, n_+)] = 1``; dropping ``n_0`` is
    a bijection because ``n_0 = N - sum n_p``.
    """

    full: FullSectorBasis
    fock: FockBasis
    matrix: sp.csr_matrix

    def to_fock(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def to_full(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix.T @ vec

    def conjugate(self, op) -> sp.csr_matrix:
        """``U op U*`` for an operator on the full sector."""
        return (self.matrix @ op @ self.matrix.T).tocsr()


def excitation_map(full: FullSectorBasis, budget: int = DEFAULT_BUDGET) -> ExcitationMap:
    """Build ``U_N`` together with ``FockBasis(cap=N)`` on the same lattice."""
    fock = FockBasis(full.lattice, full.N, budget)
    rows = fock.rank(full.occ[:, 1:])
    cols = np.arange(full.dim)
    mat = sp.csr_matrix((np.ones(full.dim), (rows, cols)), shape=(fock.dim, full.dim))
    return ExcitationMap(full, fock, mat)


def export_triplets(op, stream) -> None:
    """Write ``row col value`` lines (17 significant digits) to a text stream."""
    coo = sp.coo_matrix(op)
    order = np.lexsort((coo.col, coo.row))
    for i in order:
        val = coo.data[i]
        if np.iscomplexobj(coo.data):
            stream.write(f"{coo.row[i]} {coo.col[i]} {val.real:.17g} {val.imag:.17g}\n")
        else:
            stream.write(f"{coo.row[i]} {coo.col[i]} {val:.17g}\n")


def n_states(modes: int, cap: int) -> int:
    """``C(cap + modes, modes)``."""
    return int(comb(cap + modes, modes, exact=True))
