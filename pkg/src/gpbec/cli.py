"""Command-line runner: one TOML config in, a JSON report and CSV artifacts out.

Usage::

    gpbec <scatter|spectrum|decay|ldp|gibbs|verify> [--config FILE] [--out DIR] [--seed N]

Exit status is 0 when every check passes, 1 when some check fails and 2 when
the run could not be carried out (bad config, capacity or numerical error).
CSV files hold numbers in 17-digit scientific notation and no timing data,
so two runs with the same config and seed produce identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import difflib
import io
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import CapacityError, DomainError, EmptyLatticeError, NumericalError

SCHEMA_VERSION = 1
EXPERIMENTS = ("scatter", "spectrum", "decay", "ldp", "gibbs", "verify")
REPORT_NAME = "report.json"
U64_MAX = 2**64 - 1

EXACT_TOL = 1e-10
CLOSED_FORM_RTOL = 1e-8
IDENTITY_TOL = 1e-8
QUADRATIC_TOL = 1e-6
CURVATURE_RTOL = 1e-4
TAIL_R2_MIN = 0.95
GIBBS_SPREAD = 1.5
SANDWICH_SPREAD = 1.25
GROUND_LIMIT_TOL = 1e-6
GIBBS_DENSE_LIMIT = 4096


class ConfigError(ValueError):
    """Every problem found while validating a config, one message per entry."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


# ---------------------------------------------------------------------------
# config schema


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return (_is_int(x) or isinstance(x, float)) and math.isfinite(x)


def _real_list(x) -> bool:
    return isinstance(x, list) and len(x) > 0 and all(_is_real(v) for v in x)


_FIELDS = {
    "model": {
        "N": (lambda v: _is_int(v) and v >= 2, "an integer >= 2", 3),
        "beta": (lambda v: _is_real(v) and 0 <= v <= 1, "a number in [0, 1]", 1.0),
        "cutoff_kind": (lambda v: v in ("euclidean", "sup"), "'euclidean' or 'sup'", "euclidean"),
        "cutoff": (lambda v: _is_int(v) and v >= 1, "an integer >= 1", 1),
        "cap": (lambda v: _is_int(v) and v >= 0, "a nonnegative integer", None),
        "mean_field": (lambda v: isinstance(v, bool), "true or false", None),
        "budget": (lambda v: _is_int(v) and v >= 1, "a positive integer", 4_000_000),
    },
    "potential": {
        "kind": (lambda v: v in ("zero", "square_well", "cosine_bump", "table"),
                 "one of 'zero', 'square_well', 'cosine_bump', 'table'", "square_well"),
        "V0": (lambda v: _is_real(v) and v >= 0, "a finite nonnegative number", 50.0),
        "R": (lambda v: _is_real(v) and 0 < v < 0.5, "a number in (0, 1/2)", 0.4),
        "table": (lambda v: isinstance(v, dict), "a table keyed by integer |k|^2", None),
    },
    "scattering": {
        "ell": (lambda v: _is_real(v) and 0 < v < 0.5, "a number in (0, 1/2)", 0.45),
        "grid_points": (lambda v: _is_int(v) and v >= 64, "an integer >= 64", 2048),
        "identity_radius": (lambda v: _is_int(v) and v >= 1, "an integer >= 1", 6),
    },
    "statistics": {
        "kappas": (_real_list, "a nonempty list of numbers", [0.1, 0.2, 0.5, 1.0]),
        "lambdas": (_real_list, "a nonempty list of numbers", [-0.5, -0.25, 0.0, 0.25, 0.5]),
        "x_grid": (_real_list, "a nonempty list of numbers", [0.5, 1.0, 2.0, 4.0]),
        "n_sweep": (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_int(n) and n >= 2 for n in v),
                    "a nonempty list of integers >= 2", [3, 4]),
        "gibbs_beta": (lambda v: _is_real(v) and v > 0, "a positive number", 2.0),
        "levels": (lambda v: _is_int(v) and v >= 1, "an integer >= 1", 8),
        "onsager_c": (lambda v: _is_real(v) and v >= 0, "a nonnegative number", 1.0),
    },
    "output": {
        "directory": (lambda v: isinstance(v, str) and v != "", "a nonempty string", "gpbec-out"),
        "formats": (lambda v: isinstance(v, list) and all(f in ("json", "csv") for f in v),
                    "a list drawn from 'json', 'csv'", ["json", "csv"]),
    },
}
_TOP = {
    "experiment": (lambda v: v in EXPERIMENTS, "one of " + ", ".join(EXPERIMENTS), None),
    "seed": (lambda v: _is_int(v) and 0 <= v <= U64_MAX, "an integer in [0, 2^64)", 0),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; ``sections`` keeps every field with defaults filled in."""

    experiment: str | None
    seed: int
    sections: dict = field(repr=False)

    @property
    def model(self) -> dict:
        return self.sections["model"]

    @property
    def potential(self) -> dict:
        return self.sections["potential"]

    @property
    def scattering(self) -> dict:
        return self.sections["scattering"]

    @property
    def statistics(self) -> dict:
        return self.sections["statistics"]

    @property
    def output(self) -> dict:
        return self.sections["output"]

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed}
        out.update({name: dict(values) for name, values in self.sections.items()})
        return out

    def replace(self, **changes) -> "RunConfig":
        return RunConfig(changes.get("experiment", self.experiment), changes.get("seed", self.seed), self.sections)

    def potential_spec(self):
        from .lattice import PotentialSpec

        pot = self.potential
        if pot["kind"] == "zero":
            return PotentialSpec.zero()
        if pot["kind"] == "square_well":
            return PotentialSpec.square_well(float(pot["V0"]), float(pot["R"]))
        if pot["kind"] == "cosine_bump":
            return PotentialSpec.cosine_bump(float(pot["V0"]), float(pot["R"]))
        return PotentialSpec.from_table({int(k): float(v) for k, v in pot["table"].items()})

    def lattice(self):
        from .lattice import enumerate_modes

        return enumerate_modes(self.model["cutoff_kind"], self.model["cutoff"])

    def model_config(self, N: int | None = None, cap: int | None = None):
        from .model import ModelConfig

        m = self.model
        N = m["N"] if N is None else N
        if cap is None:
            cap = N if N != m["N"] or m["cap"] is None else m["cap"]
        return ModelConfig(self.lattice(), N, float(m["beta"]), self.potential_spec(), m["mean_field"], cap, m["budget"])


def _line_locator(text: str):
    """Map ``(section, key)`` to the 1-based line where the key is set."""
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[([^\[\]]+)\]\s*(#.*)?$", line)
        if head:
            section = head.group(1).strip()
            where.setdefault((None, section.split(".")[0]), lineno)
            continue
        m = re.match(r"\s*([A-Za-z0-9_\-]+)\s*=", line)
        if m:
            where.setdefault((section, m.group(1)), lineno)
    return where


def _suggest(name: str, options) -> str:
    close = difflib.get_close_matches(name, list(options), n=1, cutoff=0.5)
    return f" (did you mean '{close[0]}'?)" if close else ""


def parse_config(text: str) -> RunConfig:
    """Parse and validate TOML config text.

    Raises
    ------
    ConfigError
        Listing every problem found, each prefixed with its line when known.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    where = _line_locator(text)
    errors: list[str] = []

    def at(section, key):
        line = where.get((section, key))
        name = key if section is None else f"{section}.{key}"
        return (f"line {line}: " if line else "") + name

    top = {}
    for key, value in raw.items():
        if key in _FIELDS:
            if not isinstance(value, dict):
                errors.append(f"{at(None, key)}: must be a section")
            continue
        if key not in _TOP:
            errors.append(f"{at(None, key)}: unknown key{_suggest(key, list(_TOP) + list(_FIELDS))}")
            continue
        check, expect, _ = _TOP[key]
        if not check(value):
            errors.append(f"{at(None, key)}: must be {expect}, got {value!r}")
        else:
            top[key] = value

    sections = {}
    for name, schema in _FIELDS.items():
        given = raw.get(name, {}) if isinstance(raw.get(name, {}), dict) else {}
        values = {k: (list(d) if isinstance(d, list) else d) for k, (_, _, d) in schema.items()}
        for key, value in given.items():
            if key not in schema:
                errors.append(f"{at(name, key)}: unknown key{_suggest(key, schema)}")
                continue
            check, expect, _ = schema[key]
            if not check(value):
                errors.append(f"{at(name, key)}: must be {expect}, got {value!r}")
            else:
                values[key] = value
        sections[name] = values

    model, pot, scat = sections["model"], sections["potential"], sections["scattering"]
    if model["cap"] is not None and model["cap"] > model["N"]:
        errors.append(f"{at('model', 'cap')}: cap {model['cap']} exceeds N = {model['N']}")
    if pot["kind"] == "table":
        table = pot["table"]
        if table is None:
            errors.append(f"{at('potential', 'kind')}: kind 'table' needs a [potential.table] section")
        else:
            for k, v in table.items():
                if not (k.isdigit() and _is_real(v)):
                    errors.append(f"{at('potential', 'table')}: entry {k!r} = {v!r} must map an integer |k|^2 to a number")
    elif pot["kind"] in ("square_well", "cosine_bump"):
        R, ell = pot["R"], scat["ell"]
        if _is_real(R) and _is_real(ell) and not R < ell:
            line_key = "ell" if ("scattering", "ell") in where else "R"
            section = "scattering" if line_key == "ell" else "potential"
            errors.append(f"{at(section, line_key)}: ball radius ell = {ell} must satisfy R = {R} < ell < 1/2")
    if errors:
        raise ConfigError(errors)
    return RunConfig(top.get("experiment"), top.get("seed", 0), sections)


def default_config() -> RunConfig:
    """The built-in tiny config (N = 3, six modes, square well)."""
    return parse_config("")


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class Check:
    """One report entry; ``passed`` is ``None`` for values reported without a verdict."""

    name: str
    passed: bool | None
    value: object
    tolerance: object
    anchor: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": _jsonable(self.value),
                "tolerance": _jsonable(self.tolerance), "anchor": self.anchor}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def csv_text(header, rows) -> str:
    """CSV with ``\\n`` line ends and 17 significant digits for floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


@dataclass
class RunReport:
    config: dict
    checks: list[Check] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    timing_ms: float = 0.0
    error: dict | None = None

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return 2
        return 1 if any(c.passed is False for c in self.checks) else 0

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "config": _jsonable(self.config),
            "checks": [c.to_dict() for c in self.checks],
            "timing_ms": self.timing_ms,
            "artifacts": sorted(self.artifacts),
        }
        if self.error is not None:
            out["error"] = self.error
        return out


class _Sink:
    """Collects checks and writes artifacts into the output directory."""

    def __init__(self, out: Path, formats):
        self.out = out
        self.csv = "csv" in formats
        self.checks: list[Check] = []
        self.artifacts: list[str] = []

    def check(self, name, passed, value, tolerance, anchor):
        self.checks.append(Check(name, None if passed is None else bool(passed), value, tolerance, anchor))

    def table(self, filename, header, rows):
        if not self.csv:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / filename).write_text(csv_text(header, rows), encoding="utf-8")
        self.artifacts.append(filename)


# ---------------------------------------------------------------------------
# experiments


def _solve(cfg: RunConfig, N: int):
    from .scattering import NeumannProblem, solve_neumann

    problem = NeumannProblem(cfg.potential_spec(), N, float(cfg.scattering["ell"]))
    return solve_neumann(problem, cfg.scattering["grid_points"])


def _run_scatter(cfg: RunConfig, sink: _Sink) -> None:
    from .bogoliubov import KernelTable, bogoliubov_angle, renormalized_kernels, second_layer_kernels
    from .scattering import born_eigenvalue, square_well_length, verify_eta_identity

    spec = cfg.potential_spec()
    if not spec.has_profile:
        raise DomainError("scatter needs a square_well or cosine_bump potential")
    N = cfg.model["N"]
    lattice = cfg.lattice()
    sol = _solve(cfg, N)
    if spec.kind == "square_well":
        exact = square_well_length(spec.V0, spec.R)
        rel = abs(sol.a0 - exact) / exact if exact else abs(sol.a0)
        sink.check("scattering_length_closed_form", rel <= CLOSED_FORM_RTOL, rel, CLOSED_FORM_RTOL,
                   "square-well zero-energy solution")
    sink.check("scattering_length", None, sol.a0, None, "zero-energy scattering solution")
    born = born_eigenvalue(spec, N, sol.ell)
    sink.check("neumann_eigenvalue", None, {"lambda": sol.lam, "born": born, "deviation_times_N": (sol.lam - born) * N},
               None, "Neumann eigenvalue leading order")
    ident = verify_eta_identity(sol, lattice, radius=cfg.scattering["identity_radius"], convolution="exact")
    sink.check("eta_identity", ident.max_residual <= IDENTITY_TOL, ident.max_residual, IDENTITY_TOL,
               "momentum-space scattering identity")
    eta = sol.eta(lattice)
    sink.check("eta_times_p_squared", None, float(np.max(np.abs(eta) * lattice.p_squared)), None,
               "kernel decay in momentum")

    F, G = renormalized_kernels(sol, lattice)
    try:
        tau = second_layer_kernels(F, G)
    except DomainError:
        tau = np.full(lattice.size, np.nan)
    nu = bogoliubov_angle(lattice.p_squared, sol.a0)
    gap = float(np.max(np.abs(eta + tau - nu)))
    sink.check("second_layer_gap", None, gap, None, "composed kernel against the Bogoliubov angle")

    r = sol.radial_grid
    sink.table("scattering_profile.csv", ["r", "f"], zip(r, sol.f(r)))
    table = KernelTable(lattice, eta, tau, nu)
    sink.table("kernels.csv", ["k1", "k2", "k3", "eta", "sigma", "gamma", "tau", "nu"],
               (list(k) + [e, s, g, t, v] for k, e, s, g, t, v in table.rows()))


def _excitation_ground(cfg: RunConfig, seed: int, count: int = 1):
    from .model import build_excitation_hamiltonian
    from .spectra import low_spectrum

    bundle = build_excitation_hamiltonian(cfg.model_config())
    return bundle, low_spectrum(bundle.total, min(count, bundle.basis.dim), seed=seed)


def _run_spectrum(cfg: RunConfig, sink: _Sink, seed: int) -> None:
    from .spectra import DENSE_TOL

    bundle, spec = _excitation_ground(cfg, seed, cfg.statistics["levels"])
    worst = float(spec.residuals.max())
    sink.check("eigenpair_residuals", worst <= DENSE_TOL, worst, DENSE_TOL, "eigenpair residual")
    sink.check("ground_energy", None, spec.ground_energy, None, "excitation Hamiltonian ground energy")
    sink.check("dimension", None, bundle.basis.dim, None, "capped Fock space dimension")
    sink.table("spectrum.csv", ["index", "eigenvalue", "residual"], spec.rows())


def _run_decay(cfg: RunConfig, sink: _Sink, seed: int) -> None:
    from .stats import depletion_report, markov_violation, tail_probabilities

    bundle, spec = _excitation_ground(cfg, seed)
    kappas = cfg.statistics["kappas"]
    rep = depletion_report(spec.ground_vector, bundle.basis, kappas, cfg.statistics["lambdas"])
    P = rep.distribution
    viol = markov_violation(P, kappas)
    sink.check("markov_chain", viol <= 0.0, viol, 0.0, "exponential Markov inequality")
    fit = rep.tail
    ok = (not fit.degenerate) and fit.slope < 0 and fit.r_squared >= TAIL_R2_MIN
    sink.check("tail_fit", ok, {"slope": fit.slope, "r_squared": fit.r_squared, "points": fit.points},
               {"slope": "< 0", "r_squared_min": TAIL_R2_MIN}, "exponential tail of the excitation number")
    sink.check("exp_moments", None, rep.exp_moments, None, "exponential moments of the excitation number")
    sink.table("decay.csv", ["n", "P(N+=n)", "P(N+>=n)"], zip(range(len(P)), P, tail_probabilities(P)))


def _run_ldp(cfg: RunConfig, sink: _Sink, seed: int) -> None:
    from .scattering import scattering_length
    from .stats import mgf, mgf_curvature, quadratic_vacuum, tail_probabilities

    spec = cfg.potential_spec()
    a0 = scattering_length(spec) if spec.has_profile else 0.0
    vac = quadratic_vacuum(cfg.lattice(), a0, seed=seed)
    model, P = vac.model, vac.distribution
    n = np.arange(len(P))
    mean = float(n @ P)
    var = float(((n - mean) ** 2) @ P)
    sink.check("vacuum_mean", abs(mean - model.mean) <= QUADRATIC_TOL, abs(mean - model.mean), QUADRATIC_TOL,
               "quadratic vacuum mean excitation number")
    sink.check("vacuum_variance", abs(var - model.variance) <= QUADRATIC_TOL, abs(var - model.variance),
               QUADRATIC_TOL, "quadratic vacuum excitation variance")
    curv = mgf_curvature(P, mean)
    rel = abs(curv - model.variance) / model.variance if model.variance else abs(curv)
    sink.check("mgf_curvature", rel <= CURVATURE_RTOL, rel, CURVATURE_RTOL, "log-MGF curvature at zero tilt")
    sink.check("sigma_squared_sum", None, {"sigma2": model.sigma2, "measured_variance": var}, None,
               "sum of sinh^2 cosh^2 of the Bogoliubov angles")

    lambdas = np.asarray(cfg.statistics["lambdas"], dtype=float)
    vals, bad = mgf(P, lambdas, mean)
    sink.table("mgf.csv", ["lambda", "log_mgf", "gaussian"],
               zip(lambdas, vals, 0.5 * lambdas**2 * model.variance))
    # exact Chernoff: P(N+ - mu >= x) <= exp(inf_lambda>0 [log M(lambda) - lambda x])
    T = tail_probabilities(P)
    pos = lambdas[lambdas > 0]
    pos_vals, _ = mgf(P, pos, mean)
    worst = -math.inf
    rows = []
    for x in cfg.statistics["x_grid"]:
        j = int(math.ceil(mean + x - 1e-12))
        tail = float(T[j]) if 0 <= j < len(T) else (1.0 if j < 0 else 0.0)
        bound = float(np.exp(np.min(pos_vals - pos * x))) if len(pos) else 1.0
        worst = max(worst, tail - bound)
        rows.append((x, tail, bound))
    sink.check("chernoff_bound", worst <= 0.0, worst, 0.0, "Chernoff tail bound")
    sink.table("chernoff.csv", ["x", "P(N+-mu>=x)", "chernoff"], rows)


def _run_gibbs(cfg: RunConfig, sink: _Sink) -> None:
    from .model import build_excitation_hamiltonian
    from .spectra import dense_spectrum, gibbs
    from .stats import gibbs_exp_moment, state_exp_moment

    beta = float(cfg.statistics["gibbs_beta"])
    kappa = float(cfg.statistics["kappas"][min(1, len(cfg.statistics["kappas"]) - 1)])
    rows, moments, zs, limits = [], [], [], []
    for N in cfg.statistics["n_sweep"]:
        bundle = build_excitation_hamiltonian(cfg.model_config(N=N, cap=N))
        dim = bundle.basis.dim
        if dim > GIBBS_DENSE_LIMIT:
            raise CapacityError(dim, GIBBS_DENSE_LIMIT)
        spec = dense_spectrum(bundle.total)
        th = gibbs(bundle.total, beta, spectrum=spec)
        m = gibbs_exp_moment(th, bundle.basis, kappa)
        E = spec.eigenvalues
        gap = float(E[np.argmax(E > E[0] + 1e-8)] - E[0]) if np.any(E > E[0] + 1e-8) else 1.0
        cold = gibbs(bundle.total, 1e6 / gap, spectrum=spec)
        diff = abs(gibbs_exp_moment(cold, bundle.basis, kappa) - state_exp_moment(spec.ground_vector, bundle.basis, kappa))
        moments.append(m)
        zs.append(th.z_shifted)
        limits.append(diff)
        rows.append((N, beta, kappa, m, th.log_z_shifted, th.energy, th.entropy, th.free_energy, diff))
    spread = max(moments) / min(moments)
    sink.check("gibbs_moment_spread", spread <= GIBBS_SPREAD, spread, GIBBS_SPREAD,
               "uniform exponential moment of the Gibbs state")
    zspread = max(zs) / min(zs)
    sink.check("partition_sandwich_spread", zspread <= SANDWICH_SPREAD, zspread, SANDWICH_SPREAD,
               "partition function two-sided bound")
    worst = max(limits)
    sink.check("zero_temperature_limit", worst <= GROUND_LIMIT_TOL, worst, GROUND_LIMIT_TOL,
               "zero-temperature limit of the Gibbs moment")
    sink.table("gibbs.csv", ["N", "beta", "kappa", "exp_moment", "log_z_shifted", "energy", "entropy",
                             "free_energy", "ground_limit_gap"], rows)


def _run_verify(cfg: RunConfig, sink: _Sink) -> None:
    from .bogoliubov import build_generator, unitarity_drift
    from .fock import FockBasis, max_entry
    from .model import build_excitation_hamiltonian, excitation_conjugate
    from .stats import double_commutator_check, exponential_commutator_check, modified_ccr_check, onsager_check

    mc = cfg.model_config()
    N, lattice = mc.N, mc.lattice
    full_cfg = cfg.model_config(cap=N)
    basis = FockBasis(lattice, N, mc.budget)

    ccr = modified_ccr_check(basis, N)
    worst = max(ccr.mixed, ccr.annihilators, ccr.creators)
    sink.check("modified_ccr", worst <= EXACT_TOL, worst, EXACT_TOL, "modified commutation relations")

    p, m = 0, int(lattice.negate[0])
    words = [[("B", p), ("B", m)], [("b", p)], [("A", p), ("a", m)], [("A", p), ("A", m), ("a", p)]]
    exp_worst = 0.0
    for word in words:
        for kappa in cfg.statistics["kappas"]:
            rep = exponential_commutator_check(basis, word, float(kappa), N)
            exp_worst = max(exp_worst, rep.single_left, rep.single_right, rep.double)
    sink.check("exponential_commutators", exp_worst <= EXACT_TOL, exp_worst, EXACT_TOL,
               "commutators with the exponential of the excitation number")

    dc = double_commutator_check(full_cfg, 1.0, float(cfg.statistics["kappas"][0]))
    sink.check("double_commutator", dc.derived <= EXACT_TOL, dc.derived, EXACT_TOL,
               "double commutator of the Hamiltonian with the exponential weight")
    sink.check("double_commutator_three_sum_form", None, {"deviation": dc.printed, "scale": dc.scale}, None,
               "alternative three-sum form of the double commutator")

    conj, _ = excitation_conjugate(full_cfg)
    bundle = build_excitation_hamiltonian(full_cfg, basis)
    dev = max_entry(conj - bundle.total)
    sink.check("excitation_conjugation", dev <= EXACT_TOL, dev, EXACT_TOL, "excitation map conjugation")

    spec = cfg.potential_spec()
    if spec.has_profile:
        eta = _solve(cfg, N).eta(lattice)
    else:
        eta = np.where(lattice.negate >= 0, -0.3, 0.0)
    drift = unitarity_drift(build_generator(basis, eta, N))
    sink.check("bogoliubov_unitarity", drift <= EXACT_TOL, drift, EXACT_TOL, "unitarity of the Bogoliubov exponential")

    ons = onsager_check(bundle.total, basis.totals, float(cfg.statistics["onsager_c"]))
    ok = ons.inverse_c > 0 and ons.certificate >= -EXACT_TOL
    sink.check("onsager_certificate", ok, {"inverse_C": ons.inverse_c, "c": ons.c, "min_eigenvalue": ons.certificate},
               {"min_eigenvalue": -EXACT_TOL}, "Onsager lower bound")


def run(cfg: RunConfig, out: Path | str | None = None) -> RunReport:
    """Run ``cfg.experiment`` and write its artifacts and ``report.json``."""
    if cfg.experiment is None:
        raise ConfigError(["experiment: no experiment selected"])
    out = Path(out if out is not None else cfg.output["directory"])
    sink = _Sink(out, cfg.output["formats"])
    report = RunReport(cfg.to_dict())
    report.config["output"]["directory"] = str(out)
    start = time.perf_counter()
    try:
        if cfg.experiment == "scatter":
            _run_scatter(cfg, sink)
        elif cfg.experiment == "spectrum":
            _run_spectrum(cfg, sink, cfg.seed)
        elif cfg.experiment == "decay":
            _run_decay(cfg, sink, cfg.seed)
        elif cfg.experiment == "ldp":
            _run_ldp(cfg, sink, cfg.seed)
        elif cfg.experiment == "gibbs":
            _run_gibbs(cfg, sink)
        else:
            _run_verify(cfg, sink)
    except (DomainError, EmptyLatticeError, CapacityError, NumericalError) as exc:
        report.error = {"type": type(exc).__name__, "message": str(exc)}
    report.timing_ms = round(1000.0 * (time.perf_counter() - start), 3)
    report.checks = sink.checks
    report.artifacts = list(sink.artifacts)
    if "json" in cfg.output["formats"]:
        out.mkdir(parents=True, exist_ok=True)
        report.artifacts.append(REPORT_NAME)
        (out / REPORT_NAME).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


# ---------------------------------------------------------------------------
# entry point


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpbec", description="Run one Bose gas experiment from a TOML config.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, help="TOML config (built-in tiny config when omitted)")
    parser.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    parser.add_argument("--seed", type=_seed, help="seed for iterative solvers (overrides seed)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
    except OSError as exc:
        print(f"gpbec: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for line in exc.errors:
            print(f"gpbec: {line}", file=sys.stderr)
        return 2
    if cfg.experiment not in (None, args.experiment):
        print(f"gpbec: config selects experiment '{cfg.experiment}' but '{args.experiment}' was requested",
              file=sys.stderr)
        return 2
    cfg = cfg.replace(experiment=args.experiment, seed=cfg.seed if args.seed is None else args.seed)
    report = run(cfg, args.out)
    for c in report.checks:
        status = "report" if c.passed is None else ("pass" if c.passed else "FAIL")
        print(f"{status:>6}  {c.name}")
    if report.error:
        print(f"gpbec: {report.error['type']}: {report.error['message']}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
