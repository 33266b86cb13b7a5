"""Excitation-number statistics and exact operator-identity checks.

Everything here is a pure function of states, distributions or small
matrices.  Moments are computed sector by sector from ``P(N+ = n)``; the
exponential of ``N+`` is never formed densely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .errors import DomainError
from .fock import FockBasis, FullSectorBasis, _check_modified, adjoint, commutator, max_entry
from .model import ModelConfig, build_full_hamiltonian, quadratic_model, QuadraticModel
from .spectra import ThermalState, dense_spectrum, low_spectrum

TAIL_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# distributions and moments


def _sector_totals(basis) -> np.ndarray:
    return basis.excitations if isinstance(basis, FullSectorBasis) else basis.totals


def nplus_distribution(state: np.ndarray, basis, atol: float = 1e-10) -> np.ndarray:
    """``P(N+ = n) = ||Pi_n state||^2`` for ``n = 0..cap``.

    Raises
    ------
    ValueError
        If ``state`` is not normalized within ``atol``.
    """
    state = np.asarray(state)
    norm2 = float(np.vdot(state, state).real)
    if abs(norm2 - 1.0) > atol:
        raise ValueError(f"state is not normalized (norm^2 = {norm2:.6g})")
    weights = np.abs(state) ** 2
    totals = _sector_totals(basis)
    top = basis.cap if isinstance(basis, FockBasis) else basis.N
    return np.bincount(totals, weights=weights, minlength=top + 1)


def tail_probabilities(P: np.ndarray) -> np.ndarray:
    """``P(N+ >= n)`` for each ``n``."""
    return np.cumsum(np.asarray(P)[::-1])[::-1]


def exp_moment(P: np.ndarray, kappa) -> np.ndarray | float:
    """``<exp(kappa N+)> = sum_n exp(kappa n) P(n)``."""
    P = np.asarray(P, dtype=float)
    n = np.arange(len(P))
    k = np.asarray(kappa, dtype=float)
    vals = np.exp(np.multiply.outer(k, n)) @ P
    return float(vals) if np.ndim(vals) == 0 else vals


def state_exp_moment(state: np.ndarray, basis, kappa) -> np.ndarray | float:
    return exp_moment(nplus_distribution(state, basis), kappa)


def mean_and_variance(P: np.ndarray) -> tuple[float, float]:
    n = np.arange(len(P))
    mean = float(n @ P)
    return mean, float(((n - mean) ** 2) @ P)


@dataclass(frozen=True)
class TailFit:
    """Weighted least-squares line through ``log P(N+ >= n)``."""

    slope: float
    intercept: float
    r_squared: float
    points: int
    degenerate: bool


def tail_fit(P: np.ndarray, floor: float = TAIL_FLOOR, weighted: bool = True) -> TailFit:
    """Fit ``log P(N+ >= n) ~ intercept + slope * n``.

    Only ``n`` with ``P(n) >= floor`` enter; with ``weighted`` each point is
    weighted by ``P(n)`` so the noise floor cannot dominate.  Sectors that
    are empty (for instance odd ``n`` under pair creation) drop out.  Fewer
    than two usable points gives a degenerate fit.
    """
    P = np.asarray(P, dtype=float)
    T = tail_probabilities(P)
    n = np.arange(len(P))
    use = (P >= floor) & (T >= floor)
    if use.sum() < 2:
        return TailFit(math.nan, math.nan, math.nan, int(use.sum()), True)
    x, y = n[use].astype(float), np.log(T[use])
    w = P[use] if weighted else np.ones_like(x)
    w = w / w.sum()
    xm, ym = w @ x, w @ y
    sxx = w @ (x - xm) ** 2
    slope = float((w @ ((x - xm) * (y - ym))) / sxx)
    intercept = float(ym - slope * xm)
    ss_res = w @ (y - intercept - slope * x) ** 2
    ss_tot = w @ (y - ym) ** 2
    r2 = float(1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0
    return TailFit(slope, intercept, r2, int(use.sum()), False)


def markov_violation(P: np.ndarray, kappas) -> float:
    """Largest ``P(N+ >= n) - exp(-kappa n) <exp(kappa N+)>`` over ``n`` and ``kappa``.

    The right side is accumulated as the tail itself plus nonnegative
    terms, so in floating point the result is never positive.
    """
    P = np.asarray(P, dtype=float)
    T = tail_probabilities(P)
    n = np.arange(len(P))
    worst = -math.inf
    for kappa in np.atleast_1d(kappas):
        for j in n:
            up = n >= j
            extra = (np.exp(kappa * (n[up] - j)) - 1.0) @ P[up] + np.exp(kappa * (n[~up] - j)) @ P[~up]
            worst = max(worst, T[j] - (T[j] + extra))
    return float(worst)


def mgf(P: np.ndarray, lambdas, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """``log <exp(lambda (N+ - mu))>`` per ``lambda``.

    Returns the values and a mask of entries that overflowed (set to nan).
    """
    P = np.asarray(P, dtype=float)
    n = np.arange(len(P))
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    keep = P > 0
    # weights enter as log P so subnormal probabilities stay finite
    with np.errstate(over="ignore", invalid="ignore"):
        vals = logsumexp(np.multiply.outer(lam, n[keep] - mu) + np.log(P[keep]), axis=1)
    bad = ~np.isfinite(vals)
    vals = np.where(bad, np.nan, vals)
    return vals, bad


def mgf_curvature(P: np.ndarray, mu: float, h: float = 1e-3) -> float:
    """Central second difference of the log-MGF at ``lambda = 0``."""
    vals, _ = mgf(P, [-h, 0.0, h], mu)
    return float((vals[0] - 2.0 * vals[1] + vals[2]) / h**2)


@dataclass(frozen=True)
class ChernoffBound:
    value: float
    argmin: float


def chernoff(x: float, sigma2: float, lambdas) -> ChernoffBound:
    """``min over the grid of (-lambda x + lambda^2 sigma2 / 2)``."""
    lam = np.asarray(lambdas, dtype=float)
    vals = -lam * x + 0.5 * lam**2 * sigma2
    j = int(np.argmin(vals))
    return ChernoffBound(float(vals[j]), float(lam[j]))


@dataclass(frozen=True)
class DepletionReport:
    """Excitation statistics of one state.

    ``predicted_mean``/``predicted_sigma2`` hold the kernel predictions
    ``sum sinh^2 nu`` and ``sum sinh^2 nu cosh^2 nu`` when supplied.
    """

    distribution: np.ndarray
    mean: float
    variance: float
    exp_moments: dict
    tail: TailFit
    mgf_lambdas: np.ndarray = field(repr=False)
    mgf_values: np.ndarray = field(repr=False)
    predicted_mean: float | None = None
    predicted_sigma2: float | None = None

    def to_dict(self) -> dict:
        return {
            "distribution": [float(x) for x in self.distribution],
            "mean": self.mean,
            "variance": self.variance,
            "exp_moments": {f"{k:.6g}": float(v) for k, v in self.exp_moments.items()},
            "tail_fit": {
                "slope": self.tail.slope,
                "intercept": self.tail.intercept,
                "r_squared": self.tail.r_squared,
                "points": self.tail.points,
                "degenerate": self.tail.degenerate,
            },
            "predicted_mean": self.predicted_mean,
            "predicted_sigma2": self.predicted_sigma2,
        }


def depletion_report(state, basis, kappas=(0.1, 0.2, 0.5, 1.0), lambdas=None, nu=None) -> DepletionReport:
    P = nplus_distribution(state, basis)
    mean, var = mean_and_variance(P)
    kappas = [float(k) for k in kappas]
    moments = dict(zip(kappas, np.atleast_1d(exp_moment(P, kappas))))
    if lambdas is None:
        lambdas = np.linspace(-0.5, 0.5, 11)
    lambdas = np.asarray(lambdas, dtype=float)
    vals, _ = mgf(P, lambdas, mean)
    pm = ps = None
    if nu is not None:
        s2 = np.sinh(nu) ** 2
        pm, ps = float(s2.sum()), float((s2 * np.cosh(nu) ** 2).sum())
    return DepletionReport(P, mean, var, moments, tail_fit(P), lambdas, vals, pm, ps)


def gibbs_exp_moment(thermal: ThermalState, basis, kappa: float) -> float:
    """``Tr[exp(kappa N+) Gamma] = sum_j w_j <psi_j, exp(kappa N+) psi_j>``."""
    return thermal.expectation_diagonal(np.exp(kappa * _sector_totals(basis)))


# ---------------------------------------------------------------------------
# quadratic model vacuum


@dataclass(frozen=True, eq=False)
class QuadraticVacuum:
    model: QuadraticModel
    state: np.ndarray = field(repr=False)
    distribution: np.ndarray
    top_mass: float


def quadratic_vacuum(lattice, a0: float, top_mass: float = 1e-10, start_cap: int = 2, max_cap: int = 24, seed: int = 0) -> QuadraticVacuum:
    """Ground state of the quadratic model, raising the cap until ``P(N+ = cap) < top_mass``."""
    cap = start_cap
    while True:
        model = quadratic_model(lattice, a0, cap)
        gs = low_spectrum(model.H, 1, seed=seed)
        psi = gs.ground_vector
        P = nplus_distribution(psi / np.linalg.norm(psi), model.basis)
        # the top sector can be empty by parity; use the last two sectors
        mass = float(P[-2:].sum()) if len(P) > 1 else float(P[-1])
        if mass < top_mass:
            return QuadraticVacuum(model, psi, P, mass)
        if cap >= max_cap:
            raise DomainError(f"cap {cap} reached with top-sector mass {mass:.3e}")
        cap += 2


@dataclass(frozen=True)
class ObservableStats:
    """Measured and predicted moments of ``dGamma(O)``.

    ``mu_sinh`` is ``sum sinh(nu_p) O_pp`` and ``mu_sinh2`` is
    ``sum sinh^2(nu_p) O_pp``; ``sigma2_diagonal`` keeps only
    ``sum |O_pq|^2 cosh^2 nu_q sinh^2 nu_p`` while ``sigma2_exact`` adds the
    pairing contraction ``sum O_pq O_{-p,-q} c_p s_p c_q s_q``.
    """

    measured_mean: float
    measured_variance: float
    mu_sinh: float
    mu_sinh2: float
    sigma2_diagonal: float
    sigma2_exact: float
    mgf_lambdas: np.ndarray = field(repr=False)
    mgf_values: np.ndarray = field(repr=False)


def observable_stats(state: np.ndarray, basis: FockBasis, O: np.ndarray, nu: np.ndarray, lambdas=(-0.1, 0.0, 0.1)) -> ObservableStats:
    """Compare moments of ``dGamma(O)`` in ``state`` with kernel predictions."""
    from .fock import dGamma

    O = np.asarray(O)
    nu = np.asarray(nu, dtype=float)
    s, c = np.sinh(nu), np.cosh(nu)
    neg = basis.lattice.negate
    D = dGamma(basis, O)
    Dv = D @ state
    mean = float(np.vdot(state, Dv).real)
    second = float(np.vdot(Dv, Dv).real)
    var = second - mean**2
    diag = np.real(np.diag(O))
    mu1 = float(s @ diag)
    mu2 = float((s**2) @ diag)
    sig_d = float(np.sum(np.abs(O) ** 2 * np.outer(s**2, c**2)))
    Oneg = O[np.ix_(neg, neg)]
    sig_x = sig_d + float(np.real(np.sum(O * Oneg * np.outer(c * s, c * s))))
    # mgf from the spectral resolution of dGamma(O)
    lam = np.asarray(lambdas, dtype=float)
    if basis.dim <= 4096:
        w, V = np.linalg.eigh(0.5 * (D + adjoint(D)).toarray())
        amp = np.abs(V.conj().T @ state) ** 2
        keep = amp > 0
        vals = logsumexp(np.multiply.outer(lam, w[keep] - mean), b=amp[keep], axis=1)
    else:
        vals = np.full(len(lam), np.nan)
    return ObservableStats(mean, var, mu1, mu2, sig_d, sig_x, lam, vals)


# ---------------------------------------------------------------------------
# exact identities


def _exp_diag(basis, kappa: float) -> sp.csr_matrix:
    return sp.diags(np.exp(kappa * _sector_totals(basis).astype(float)), format="csr")


@dataclass(frozen=True)
class CCRReport:
    """Max-entry deviations of the modified commutation relations."""

    mixed: float
    mixed_without_inverse_n: float
    annihilators: float
    creators: float


def modified_ccr_check(basis: FockBasis, N: int) -> CCRReport:
    """Deviations of ``[b_p, b*_q] = delta_pq (1 - N+/N) - a*_q a_p / N`` and the
    vanishing commutators, over all mode pairs.

    ``mixed_without_inverse_n`` tests the same identity with the last term
    taken as ``a*_q a_p`` (no ``1/N``).
    """
    _check_modified(basis, N)
    M = basis.n_modes
    b = [basis.word([("b", p)], N) for p in range(M)]
    bd = [basis.word([("B", p)], N) for p in range(M)]
    one_minus = sp.diags(1.0 - basis.totals / N, format="csr")
    mixed = plain = ann = cre = 0.0
    for p in range(M):
        for q in range(M):
            lhs = commutator(b[p], bd[q])
            hop = basis.word([("A", q), ("a", p)])
            target = (one_minus if p == q else 0 * one_minus) - hop / N
            mixed = max(mixed, max_entry(lhs - target))
            plain = max(plain, max_entry(lhs - ((one_minus if p == q else 0 * one_minus) - hop)))
            ann = max(ann, max_entry(commutator(b[p], b[q])))
            cre = max(cre, max_entry(commutator(bd[p], bd[q])))
    return CCRReport(mixed, plain, ann, cre)


@dataclass(frozen=True)
class ExponentialCommutatorReport:
    """Deviations of the single and double exponential-commutator identities."""

    charge: int
    single_left: float
    single_right: float
    double: float


def exponential_commutator_check(basis: FockBasis, word, kappa: float, N: int | None = None) -> ExponentialCommutatorReport:
    """Check ``[e^{kN+}, B] = (1 - e^{-c k}) e^{kN+} B = (e^{c k} - 1) B e^{kN+}`` and
    ``[e^{kN+}, [e^{kN+}, B]] = 4 sinh^2(c k / 2) e^{kN+} B e^{kN+}``,
    where ``c`` is the number of creators minus annihilators in ``word``.
    """
    B = basis.word(word, N)
    charge = sum(1 if kind in ("A", "B") else -1 for kind, _ in word)
    E = _exp_diag(basis, kappa)
    single = commutator(E, B)
    left = max_entry(single - (1.0 - math.exp(-charge * kappa)) * (E @ B))
    right = max_entry(single - (math.exp(charge * kappa) - 1.0) * (B @ E))
    double = commutator(E, single)
    dd = max_entry(double - 4.0 * math.sinh(charge * kappa / 2.0) ** 2 * (E @ B @ E))
    return ExponentialCommutatorReport(charge, left, right, dd)


@dataclass(frozen=True)
class DoubleCommutatorReport:
    """Deviation of ``[E, [E, H]]`` (``E = exp(s kappa N+)``) from closed forms.

    ``derived`` uses ``4 sinh^2(s kappa) E X2 E + 4 sinh^2(s kappa/2) E X1 E``
    where ``X2``/``X1`` collect the pair terms changing ``N+`` by two/one.
    ``printed`` is the alternative three-sum expression (mean-field only).
    """

    derived: float
    printed: float
    scale: float


def _charge_parts(config: ModelConfig, full: FullSectorBasis):
    """Pair-sum terms of ``H`` changing ``N+`` by +-2 and by +-1."""
    from .model import _Couplings, _add, _mode_vectors, _sub

    vectors = _mode_vectors(config.lattice, with_zero=True)
    index = {v: i for i, v in enumerate(vectors)}
    W = _Couplings(config)
    pref = 1.0 / (2.0 * config.N)
    two, one = [], []
    zero = (0, 0, 0)
    for p in vectors:
        for q in vectors:
            for pl in vectors:
                ell = _sub(p, pl)
                ql = _add(q, ell)
                if ql not in index:
                    continue
                charge = sum(v != zero for v in (pl, ql)) - sum(v != zero for v in (p, q))
                term = (pref * W(ell), [("A", index[pl]), ("A", index[ql]), ("a", index[p]), ("a", index[q])])
                if abs(charge) == 2:
                    two.append(term)
                elif abs(charge) == 1:
                    one.append(term)
    return full.operator(two), full.operator(one)


def _printed_rhs(config: ModelConfig, full: FullSectorBasis, s: float, kappa: float):
    from .lattice import radial_fourier, TWO_PI

    lattice = config.lattice
    vecs = [tuple(int(c) for c in k) for k in lattice.k]
    index = {v: i + 1 for i, v in enumerate(vecs)}
    vhat = lambda k: float(radial_fourier(config.spec, np.array([TWO_PI * math.sqrt(sum(c * c for c in k))]))[0])  # noqa: E731
    c = 1.0 / (config.N - 1)
    neg = lambda k: (-k[0], -k[1], -k[2])  # noqa: E731
    add = lambda a, b: (a[0] + b[0], a[1] + b[1], a[2] + b[2])  # noqa: E731
    sub = lambda a, b: (a[0] - b[0], a[1] - b[1], a[2] - b[2])  # noqa: E731
    first, second, third = [], [], []
    for ell in vecs:
        if neg(ell) not in index:
            continue
        v = vhat(ell)
        first.append((v, [("A", index[neg(ell)]), ("A", index[ell]), ("a", 0), ("a", 0)]))
        first.append((-v, [("A", 0), ("A", 0), ("a", index[ell]), ("a", index[neg(ell)])]))
    for p in vecs:
        for ell in vecs:
            if p == ell or sub(p, ell) not in index:
                continue
            v = vhat(ell)
            pl = index[sub(p, ell)]
            second.append((v, [("A", pl), ("A", 0), ("a", index[p]), ("a", index[ell])]))
            if neg(ell) in index:
                second.append((v, [("A", pl), ("A", index[neg(ell)]), ("a", index[p]), ("a", 0)]))
    for ell in vecs:
        for q in vecs:
            if q == neg(ell) or add(q, ell) not in index:
                continue
            v = vhat(ell)
            qe = index[add(q, ell)]
            third.append((v, [("A", 0), ("A", qe), ("a", index[ell]), ("a", index[q])]))
            if neg(ell) in index:
                third.append((v, [("A", index[neg(ell)]), ("A", qe), ("a", 0), ("a", index[q])]))
    X = (2.0 * c * math.sinh(s * kappa) ** 2) * full.operator(first)
    X = X + (c * math.sinh(s * kappa / 2.0) ** 2) * (full.operator(second) + full.operator(third))
    return X


def double_commutator_check(config: ModelConfig, s: float, kappa: float) -> DoubleCommutatorReport:
    """Build ``[E, [E, H]]`` directly and compare with its closed forms."""
    full = FullSectorBasis(config.lattice, config.N, config.budget)
    H = build_full_hamiltonian(config, full)
    E = _exp_diag(full, s * kappa)
    lhs = commutator(E, commutator(E, H))
    X2, X1 = _charge_parts(config, full)
    derived = 4.0 * math.sinh(s * kappa) ** 2 * (E @ X2 @ E) + 4.0 * math.sinh(s * kappa / 2.0) ** 2 * (E @ X1 @ E)
    printed = E @ _printed_rhs(config, full, s, kappa) @ E
    return DoubleCommutatorReport(max_entry(lhs - derived), max_entry(lhs - printed), max_entry(lhs))


# ---------------------------------------------------------------------------
# Onsager bound


@dataclass(frozen=True)
class OnsagerReport:
    """Largest ``t = 1/C`` with ``H - E - t N+ + c >= 0`` and its certificate."""

    inverse_c: float
    c: float
    ground_energy: float
    certificate: float


def onsager_check(H, nplus: np.ndarray, c: float = 0.0, rtol: float = 0.0, max_iter: int = 200) -> OnsagerReport:
    """Bisection on ``t`` for the operator inequality ``H - E >= t N+ - c``.

    Parameters
    ----------
    H : sparse or dense hermitian matrix
    nplus : ndarray
        Diagonal of ``N+`` in the same basis.
    c : float
        Additive constant (nonnegative).
    rtol : float
        Relative bracket width at which to stop; ``0`` bisects down to
        adjacent floats.

    Returns the lower end of the final bracket, so the reported certificate
    ``min eig(H - E - t N+ + c)`` is nonnegative up to rounding.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    Hd = 0.5 * (Hd + Hd.conj().T)
    E = float(np.linalg.eigvalsh(Hd)[0])
    base = Hd - E * np.eye(len(Hd))
    D = np.diag(np.asarray(nplus, dtype=float))
    lowest = lambda t: float(np.linalg.eigvalsh(base - t * D)[0]) + c  # noqa: E731
    lo, hi = 0.0, 1.0
    while lowest(hi) >= 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            break
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * hi or mid in (lo, hi):
            break
        if lowest(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return OnsagerReport(lo, c, E, lowest(lo))


# ---------------------------------------------------------------------------
# Gronwall replay


@dataclass(frozen=True)
class GronwallReport:
    """Mechanical replay of ``d/ds ||exp(s kappa N+) psi||^2 = 2 kappa <N+>_s``."""

    derivative_error: float
    norm_at_one: float
    gronwall_bound: float

    @property
    def holds(self) -> bool:
        return self.norm_at_one <= self.gronwall_bound * (1.0 + 1e-12)


def gronwall_replay(P: np.ndarray, kappa: float, s_grid=None, h: float = 1e-5) -> GronwallReport:
    """Replay the Gronwall argument for ``xi(s) = exp(s kappa N+) psi`` from ``P(N+ = n)``."""
    P = np.asarray(P, dtype=float)
    n = np.arange(len(P))
    if s_grid is None:
        s_grid = np.linspace(0.0, 1.0, 101)
    s_grid = np.asarray(s_grid, dtype=float)
    norm2 = lambda s: float(np.exp(2.0 * s * kappa * n) @ P)  # noqa: E731
    direct = lambda s: float(2.0 * kappa * (n * np.exp(2.0 * s * kappa * n)) @ P)  # noqa: E731
    err = 0.0
    ratios = []
    for s in s_grid:
        fd = (norm2(s + h) - norm2(s - h)) / (2.0 * h)
        d = direct(s)
        err = max(err, abs(fd - d) / max(1.0, abs(d)))
        ratios.append(d / (2.0 * kappa * norm2(s)) if kappa != 0 else 0.0)
    bound = math.exp(2.0 * kappa * max(ratios))
    return GronwallReport(err, norm2(1.0), bound)
