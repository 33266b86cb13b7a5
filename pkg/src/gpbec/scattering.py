"""Radial scattering solvers.

Two problems are solved for a radial potential ``v``:

* the zero-energy equation ``(-Laplace + v/2) f = 0`` with ``f -> 1`` at
  infinity, giving the scattering length;
* the Neumann problem on the ball ``B_ell``:
  ``(-Laplace + N^2 v(N r) / 2) f = lam f``, ``f(ell) = 1``, ``f'(ell) = 0``,
  whose solution defines the correlation kernel ``eta_p = -N omega_hat(p)``
  with ``omega = 1 - f``.

Both use the substitution ``u = r f``.  Inside the potential support the
ODE is integrated numerically; outside it the solution is a free wave and
is written down in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError
from .lattice import MomentumLattice, PotentialSpec, TWO_PI, ball_transform, radial_fourier

RTOL = 1e-12
ATOL = 1e-12
GRID_POINTS = 2048
QUAD_NODES = 512


def _shoot(spec: PotentialSpec, shift: float = 0.0, dense: bool = False, integral: bool = False):
    """Integrate ``U'' = (v(s)/2 - shift) U`` on ``[0, R]`` from ``U(0)=0, U'(0)=1``.

    With ``integral`` a third component accumulates ``int_0^s v U s' ds'``.
    """
    R = spec.support_radius

    def rhs(s, y):
        vs = float(spec.radial(s))
        dy = [y[1], (0.5 * vs - shift) * y[0]]
        if integral:
            dy.append(vs * y[0] * s)
        return dy

    y0 = [0.0, 1.0] + ([0.0] if integral else [])
    # the square-well edge sits at s = R; stop just inside it
    sol = integrate.solve_ivp(rhs, (0.0, R), y0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=dense)
    if not sol.success:
        raise NumericalError(f"radial integration failed: {sol.message}")
    return sol


@dataclass(frozen=True)
class ZeroEnergySolution:
    """Zero-energy scattering data.

    ``a0`` is the length read off ``f = 1 - a0 / r`` outside the support and
    ``vf_integral`` is ``int v f dx``, which equals ``8 pi a0``.
    """

    a0: float
    vf_integral: float


def zero_energy(spec: PotentialSpec) -> ZeroEnergySolution:
    if spec.is_zero:
        return ZeroEnergySolution(0.0, 0.0)
    if not spec.has_profile:
        raise DomainError("scattering needs a position-space potential")
    sol = _shoot(spec, integral=True)
    R = spec.support_radius
    u, du, acc = sol.y[:, -1]
    if not (du > 0 and np.isfinite(u)):
        raise NumericalError("zero-energy solution is not increasing at the support edge", residual=float(du))
    a0 = R - u / du
    return ZeroEnergySolution(float(a0), float(4.0 * math.pi * acc / du))


def scattering_length(spec: PotentialSpec) -> float:
    """Scattering length ``a0`` of a radial potential (physical normalization).

    Examples
    --------
    >>> round(scattering_length(PotentialSpec.square_well(50.0, 0.4)), 6)
    0.207194
    """
    return zero_energy(spec).a0


def square_well_length(V0: float, R: float) -> float:
    """Closed form ``R (1 - tanh(kR)/(kR))`` with ``k = sqrt(V0/2)``."""
    if V0 == 0:
        return 0.0
    x = math.sqrt(V0 / 2.0) * R
    return R * (1.0 - math.tanh(x) / x)


@dataclass(frozen=True)
class NeumannProblem:
    """Neumann ball problem at particle number ``N`` and radius ``ell``."""

    spec: PotentialSpec
    N: int
    ell: float

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("N must be positive")
        if not (self.spec.support_radius < self.ell < 0.5):
            raise DomainError(
                f"ball radius ell={self.ell} must satisfy R={self.spec.support_radius} < ell < 1/2"
            )
        if not self.spec.has_profile:
            raise DomainError("the Neumann problem needs a position-space potential")


def born_eigenvalue(spec: PotentialSpec, N: int, ell: float) -> float:
    """Leading-order guess ``3 v_hat(0) / (8 pi N ell^3)``."""
    return 3.0 * float(radial_fourier(spec, np.array([0.0]))[0]) / (8.0 * math.pi * N * ell**3)


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    """Solution of the Neumann problem with the derived kernels.

    Attributes
    ----------
    problem : NeumannProblem
    lam : float
        Lowest Neumann eigenvalue.
    a0 : float
        Scattering length of the unscaled potential.
    radial_grid, f_values : ndarray
        Chebyshev-spaced samples of ``f`` on ``[0, ell]``.
    """

    problem: NeumannProblem
    lam: float
    a0: float
    radial_grid: np.ndarray = field(repr=False)
    f_values: np.ndarray = field(repr=False)
    _inner: object = field(repr=False, default=None)
    _edge: tuple = field(repr=False, default=(0.0, 0.0, 1.0))
    _norm: float = field(repr=False, default=1.0)

    @property
    def N(self) -> int:
        return self.problem.N

    @property
    def ell(self) -> float:
        return self.problem.ell

    @property
    def spec(self) -> PotentialSpec:
        return self.problem.spec

    @property
    def trivial(self) -> bool:
        return self._inner is None

    def _u(self, r: np.ndarray) -> np.ndarray:
        """Unnormalized ``u = r f`` and its derivative."""
        r = np.asarray(r, dtype=float)
        rR, uR, duR = self._edge
        u = np.empty_like(r)
        du = np.empty_like(r)
        inside = r < rR
        if np.any(inside):
            s = self.N * r[inside]
            Y = self._inner.sol(s)
            u[inside] = Y[0] / self.N
            du[inside] = Y[1]
        out = ~inside
        k = math.sqrt(self.lam)
        x = r[out] - rR
        if k > 0:
            u[out] = uR * np.cos(k * x) + duR * np.sin(k * x) / k
            du[out] = -uR * k * np.sin(k * x) + duR * np.cos(k * x)
        else:
            u[out] = uR + duR * x
            du[out] = duR
        return u, du

    def f(self, r) -> np.ndarray:
        """``f(r)``, equal to one for ``r >= ell``."""
        r = np.asarray(r, dtype=float)
        if self.trivial:
            return np.ones_like(r)
        out = np.ones_like(r)
        inside = r < self.ell
        ri = r[inside]
        u, du = self._u(ri)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(ri > 0, u / np.where(ri > 0, ri, 1.0), du)
        out[inside] = val / self._norm
        return out

    def omega(self, r) -> np.ndarray:
        return 1.0 - self.f(r)

    @cached_property
    def _quadrature(self):
        """Gauss-Legendre nodes/weights on ``[0, R/N]`` and ``[R/N, ell]``."""
        x, w = np.polynomial.legendre.leggauss(QUAD_NODES)
        rR = self._edge[0]
        pieces = []
        for lo, hi in ((0.0, rR), (rR, self.ell)):
            if hi > lo:
                pieces.append((0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w))
        r = np.concatenate([p[0] for p in pieces])
        wts = np.concatenate([p[1] for p in pieces])
        return r, wts, self.omega(r)

    def omega_hat(self, pnorm) -> np.ndarray:
        """``4 pi int_0^ell omega(r) r sin(|p| r)/|p| dr`` for an array of ``|p|``."""
        pnorm = np.abs(np.asarray(pnorm, dtype=float))
        if self.trivial:
            return np.zeros_like(pnorm)
        r, w, om = self._quadrature
        # evaluate once per distinct |p| so equal norms give identical values
        flat, inv = np.unique(pnorm.ravel(), return_inverse=True)
        kern = np.where(flat[None, :] > 0, np.sinc(np.outer(r, flat) / math.pi) * r[:, None] ** 2, r[:, None] ** 2)
        return (4.0 * math.pi * (w * om) @ kern)[inv].reshape(pnorm.shape)

    def eta(self, lattice: MomentumLattice) -> np.ndarray:
        """``eta_p = -N omega_hat(p)`` on the lattice modes."""
        k2, inv = np.unique(lattice.k_squared, return_inverse=True)
        return self.eta_of_k2(k2)[inv]

    def eta_of_k2(self, k2) -> np.ndarray:
        """``eta`` as a function of the integer squared norm ``|k|^2``."""
        return -self.N * self.omega_hat(TWO_PI * np.sqrt(np.asarray(k2, dtype=float)))

    def interaction_kernel(self, pnorm) -> np.ndarray:
        """``w_hat(p) = int v_N f e^{-ipx} dx`` with ``v_N = N^3 v(N x)``.

        Equals ``v_hat(p/N) + (1/N) sum_q v_hat((p-q)/N) eta_q`` with the
        momentum sum taken over the whole dual lattice, evaluated exactly as
        a radial integral over the potential support.
        """
        pnorm = np.abs(np.asarray(pnorm, dtype=float))
        flat, inv = np.unique(pnorm.ravel(), return_inverse=True)
        R = self.spec.support_radius
        if self.spec.is_zero:
            return np.zeros_like(pnorm)
        x, w = np.polynomial.legendre.leggauss(QUAD_NODES)
        s = 0.5 * R * (x + 1.0)
        w = 0.5 * R * w
        weight = w * self.spec.radial(s) * self.f(s / self.N)
        q = flat / self.N
        kern = np.where(q[None, :] > 0, np.sinc(np.outer(s, q) / math.pi) * s[:, None] ** 2, s[:, None] ** 2)
        return (4.0 * math.pi * weight @ kern)[inv].reshape(pnorm.shape)

    def eta_table(self, lattice: MomentumLattice) -> dict:
        """Integer vector ``k`` to ``eta_p``, for export."""
        values = self.eta(lattice)
        return {tuple(int(c) for c in k): float(e) for k, e in zip(lattice.k, values)}


def _mismatch_factory(problem: NeumannProblem):
    spec, N, ell = problem.spec, problem.N, problem.ell
    rR = spec.support_radius / N

    def edge(lam: float):
        sol = _shoot(spec, shift=lam / N**2)
        U, dU = sol.y[0, -1], sol.y[1, -1]
        return U / N, dU

    def mismatch(lam: float) -> float:
        uR, duR = edge(lam)
        k = math.sqrt(lam)
        x = ell - rR
        if k > 0:
            u = uR * math.cos(k * x) + duR * math.sin(k * x) / k
            du = -uR * k * math.sin(k * x) + duR * math.cos(k * x)
        else:
            u, du = uR + duR * x, duR
        # scale-free: divide by the slope at the support edge
        return (ell * du - u) / duR

    return mismatch, edge


def solve_neumann(problem: NeumannProblem, grid_points: int = GRID_POINTS, max_widen: int = 60) -> ScatteringSolution:
    """Lowest Neumann eigenpair by shooting and bisection.

    The bracket starts at ``[0, 10 lam_born]`` and doubles until the
    boundary mismatch changes sign; a coarse scan then isolates the first
    sign change so the lowest eigenvalue is taken.

    Raises
    ------
    NumericalError
        If no sign change is found.
    """
    spec, N, ell = problem.spec, problem.N, problem.ell
    j = np.arange(grid_points)
    grid = 0.5 * ell * (1.0 - np.cos(math.pi * j / (grid_points - 1)))
    if spec.is_zero:
        return ScatteringSolution(problem, 0.0, 0.0, grid, np.ones_like(grid))
    a0 = scattering_length(spec)
    mismatch, edge = _mismatch_factory(problem)
    lo, g_lo = 0.0, mismatch(0.0)
    if not g_lo > 0:
        raise NumericalError("Neumann mismatch at zero energy is not positive", residual=g_lo)
    hi = 10.0 * born_eigenvalue(spec, N, ell)
    for _ in range(max_widen):
        if mismatch(hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalError("failed to bracket the Neumann eigenvalue", residual=mismatch(hi))
    # isolate the first sign change inside the bracket
    scan = np.linspace(lo, hi, 17)
    for a, b in zip(scan[:-1], scan[1:]):
        if mismatch(b) < 0:
            lo, hi = a, b
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 4e-16 * hi:
            break
        if mismatch(mid) > 0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    inner = _shoot(spec, shift=lam / N**2, dense=True)
    uR, duR = inner.y[0, -1] / N, inner.y[1, -1]
    rR = spec.support_radius / N
    sol = ScatteringSolution(problem, lam, a0, grid, np.empty(0), inner, (rR, uR, duR), 1.0)
    u_ell, du_ell = sol._u(np.array([ell]))
    norm = float(u_ell[0] / ell)
    residual = abs(ell * du_ell[0] - u_ell[0]) / abs(duR)
    if residual > 1e-7:
        raise NumericalError("Neumann condition not met at the ball edge", residual=residual)
    sol = ScatteringSolution(problem, lam, a0, grid, np.empty(0), inner, (rR, uR, duR), norm)
    f_vals = sol.f(grid)
    f_vals[-1] = 1.0
    object.__setattr__(sol, "f_values", f_vals)
    return sol


def omega_hat(solution: ScatteringSolution, p) -> float:
    """``omega_hat(p)`` for a physical momentum vector (or its norm)."""
    p = np.asarray(p, dtype=float)
    pn = float(np.sqrt(np.dot(p, p))) if p.ndim else abs(float(p))
    return float(solution.omega_hat(np.array([pn]))[0])


def ball_hat(pnorm, ell: float) -> np.ndarray:
    """Fourier transform of the indicator of ``B_ell``."""
    return ball_transform(pnorm, ell)


# ---------------------------------------------------------------------------
# momentum-space identity check


@dataclass(frozen=True)
class IdentityReport:
    """Residual of the momentum-space scattering identity on a lattice.

    ``max_residual`` is the largest ``|lhs - rhs|`` over the lattice modes;
    ``tail_budget`` estimates the contribution of the momenta dropped from
    the convolution sums.
    """

    max_residual: float
    tail_budget: float
    radius: int
    residuals: np.ndarray = field(repr=False)
    variant: str = "derived"


def _lattice_ball(radius: int) -> np.ndarray:
    rng = np.arange(-radius, radius + 1)
    K = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), -1).reshape(-1, 3)
    return K[np.einsum("ij,ij->i", K, K) <= radius * radius]


def verify_eta_identity(
    solution: ScatteringSolution,
    lattice: MomentumLattice,
    radius: int | None = None,
    variant: str = "derived",
    convolution: str = "truncated",
) -> IdentityReport:
    """Residual of ``p^2 eta_p + c v_hat(p/N) + (2N)^-1 sum_q v_hat((p-q)/N) eta_q
    = N lam chi_hat(p) + lam sum_q chi_hat(p-q) eta_q``.

    Parameters
    ----------
    variant : {"derived", "printed"}
        ``c = 1/2`` (what the Neumann equation gives after multiplying
        through by ``N``) or ``c = 1/(2N)``.
    convolution : {"truncated", "exact"}
        ``"truncated"`` sums ``q`` over ``|k_q| <= radius`` (default twice the
        lattice cutoff) and reports a tail budget.  ``"exact"`` evaluates both
        sums in position space: the first is ``N (w_hat(p) - v_hat(p/N))``
        and the second is ``eta_p`` because ``omega`` vanishes outside the
        ball.
    """
    if variant not in ("derived", "printed"):
        raise ValueError("variant must be 'derived' or 'printed'")
    if convolution not in ("truncated", "exact"):
        raise ValueError("convolution must be 'truncated' or 'exact'")
    N, lam, ell = solution.N, solution.lam, solution.ell
    spec = solution.spec
    if radius is None:
        radius = 2 * max(1, int(np.ceil(np.sqrt(lattice.k_squared.max()))))
    if solution.trivial:
        return IdentityReport(0.0, 0.0, radius, np.zeros(lattice.size), variant)
    pn = np.sqrt(lattice.p_squared)
    eta_p = solution.eta(lattice)
    vhat_p = radial_fourier(spec, pn / N)
    if convolution == "exact":
        vconv = N * (solution.interaction_kernel(pn) - vhat_p)
        cconv = eta_p
        budget = 0.0
    else:
        Q = _lattice_ball(radius)
        # eta on the ball of q's, by integer squared norm (radial symmetry)
        q2 = np.einsum("ij,ij->i", Q, Q)
        uq2, inv = np.unique(q2, return_inverse=True)
        eta_q = solution.eta_of_k2(uq2)[inv]
        diff = lattice.k[:, None, :] - Q[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        ud2, dinv = np.unique(d2, return_inverse=True)
        dnorm = TWO_PI * np.sqrt(ud2.astype(float))
        vconv = radial_fourier(spec, dnorm / N)[dinv].reshape(d2.shape) @ eta_q
        cconv = ball_transform(dnorm, ell)[dinv].reshape(d2.shape) @ eta_q
        budget = _tail_budget(solution, lattice, radius)
    c = 0.5 if variant == "derived" else 1.0 / (2.0 * N)
    lhs = lattice.p_squared * eta_p + c * vhat_p + vconv / (2.0 * N)
    rhs = N * lam * ball_transform(pn, ell) + lam * cconv
    res = np.abs(lhs - rhs)
    return IdentityReport(float(res.max()), budget, radius, res, variant)


def _tail_budget(solution: ScatteringSolution, lattice: MomentumLattice, radius: int) -> float:
    """Estimate of the dropped convolution terms.

    Uses ``|eta_q| <= C / q^2`` with ``C`` fitted on the retained shell,
    ``|v_hat| <= v_hat(0)`` and ``|chi_hat(q)| <= 4 pi (1 + q ell) / q^3``,
    and replaces the lattice sum over ``|k| > radius`` by a radial integral.
    """
    N, lam, ell = solution.N, solution.lam, solution.ell
    shell = np.arange(1, radius * radius + 1)
    c_eta = float(np.max(np.abs(solution.eta_of_k2(shell)) * TWO_PI**2 * shell))
    v0 = float(radial_fourier(solution.spec, np.array([0.0]))[0])
    R = solution.spec.support_radius
    pmax = math.sqrt(float(lattice.k_squared.max()))
    lo = radius + 0.5
    vmax = float(np.max(solution.spec.radial(np.linspace(0, R, 257))))

    def vbound(k):
        # |v_hat(q)| <= min(v0, 4 pi V (R q + 1) / q^3) for a profile bounded by V
        q = TWO_PI * max(k - pmax, 1e-12) / N
        return min(v0, 4.0 * math.pi * vmax * (R * q + 1.0) / q**3)

    def chibound(k):
        q = TWO_PI * max(k - pmax, 1e-12)
        return min(4.0 * math.pi * ell**3 / 3.0, 4.0 * math.pi * (1.0 + q * ell) / q**3)

    def density(k, bound, scale):
        return 4.0 * math.pi * k * k * bound(k) * c_eta / (TWO_PI**2 * k * k) * scale

    upper = max(10.0 * N / max(R, 1e-12) / TWO_PI, 10.0 * lo)
    v_tail, _ = integrate.quad(density, lo, upper, args=(vbound, 1.0 / (2.0 * N)), limit=400)
    c_tail, _ = integrate.quad(density, lo, np.inf, args=(chibound, lam), limit=400)
    return float(v_tail + c_tail)
