"""Experiment recipes, config files, CSV reports and the ``qdl`` command.

Config files hold ``key = value`` lines in sections named after recipes::

    [counterexample]
    eps = 0.39269908169872414
    kmin = 4
    kmax = 64
    s = 0.2, 0.35, 0.45

Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
3 numerical failure.
"""
from __future__ import annotations

import configparser
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import click
import numpy as np

from . import domains, fracsob, harmonics, minimizer


class ConfigError(ValueError):
    pass


NUMERICAL_ERRORS = (domains.NumericalError, minimizer.NumericalError, FloatingPointError,
                    np.linalg.LinAlgError, ArithmeticError)


# ---------------------------------------------------------------- reports


@dataclass
class Row:
    name: str
    value: float
    bound: float
    passed: bool
    tolerance: float
    anchor: str


@dataclass
class RunReport:
    recipe: str
    rows: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)

    def check(self, name, value, bound, passed, tolerance=0.0, anchor=""):
        self.rows.append(Row(name, float(value), float(bound), bool(passed), float(tolerance), anchor))

    def le(self, name, value, bound, tolerance=0.0, anchor=""):
        """value <= bound (1 + tolerance)."""
        ok = value <= bound + tolerance * abs(bound)
        self.check(name, value, bound, ok, tolerance, anchor or f"{name} <= bound")

    def ge(self, name, value, bound, tolerance=0.0, anchor=""):
        ok = value >= bound - tolerance * abs(bound)
        self.check(name, value, bound, ok, tolerance, anchor or f"{name} >= bound")

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def emit_csv(report: RunReport, path: str) -> None:
    """Long-format CSV: name, value, bound, pass, tolerance, anchor."""
    with open(path, "w") as fh:
        fh.write("name,value,bound,pass,tolerance,anchor\n")
        for r in report.rows:
            anchor = r.anchor.replace(",", ";")
            fh.write(",".join([r.name, _fmt(r.value), _fmt(r.bound), _fmt(r.passed),
                               _fmt(r.tolerance), anchor]) + "\n")


def write_table(path: str, header: list, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


# ---------------------------------------------------------------- config


def _floats(text):
    vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    return vals


def _ints(text):
    return [int(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _float(text):
    t = str(text).strip().lower()
    if t in ("pi/8", "π/8"):
        return math.pi / 8
    return float(t)


# key -> (parser, default, validator message, validator)
def _positive(x):
    return x > 0


def _nonempty_positive(xs):
    return len(xs) > 0 and all(x > 0 for x in xs)


SCHEMAS: dict = {
    "counterexample": {
        "eps": (_float, math.pi / 8, "must lie in (0, pi/2)", lambda x: 0 < x < math.pi / 2),
        "kmin": (int, 4, "must be >= 1", lambda x: x >= 1),
        "kmax": (int, 64, "must be >= 1", lambda x: x >= 1),
        "s": (_floats, [0.2, 0.35, 0.45], "values must lie in (0, 1/2)",
              lambda xs: len(xs) > 0 and all(0 < x < 0.5 for x in xs)),
        "seed": (int, 0, "", None),
    },
    "annulus-suite": {
        "n": (_ints, [2, 3], "values must be 2 or 3", lambda xs: len(xs) > 0 and set(xs) <= {2, 3}),
        "mmax": (int, 6, "must lie in [0, 6]", lambda x: 0 <= x <= 6),
        "r": (_floats, [0.3, 0.5, 0.7], "values must lie in (0, 1)",
              lambda xs: len(xs) > 0 and all(0 < x < 1 for x in xs)),
        "rtol": (float, 1e-6, "must be positive", _positive),
        "seed": (int, 0, "", None),
    },
    "branch-minimizer": {
        "h": (float, 0.02, "must lie in (0, 1]", lambda x: 0 < x <= 1),
        "restarts": (int, 8, "must be >= 1", lambda x: x >= 1),
        "sweeps": (int, 200, "must be >= 1", lambda x: x >= 1),
        "radii": (_floats, list(np.linspace(0.05, 0.4, 8)), "must be positive and <= 1",
                  lambda xs: _nonempty_positive(xs) and max(xs) <= 1),
        "holder_radii": (_floats, list(np.geomspace(0.04, 0.4, 6)),
                         "need >= 4 positive radii spanning a decade",
                         lambda xs: len(xs) >= 4 and min(xs) > 0 and max(xs) >= 10 * min(xs) * (1 - 1e-9)),
        "seed": (int, 0, "", None),
    },
    "boundary-probe": {
        "h": (float, 0.02, "must lie in (0, 1]", lambda x: 0 < x <= 1),
        "profile": (str, "sine", "must be flat, parabola, sine or wave",
                    lambda x: x in ("flat", "parabola", "sine", "wave")),
        "s": (float, 0.75, "must lie in (1/2, 1]", lambda x: 0.5 < x <= 1),
        "epsilon": (float, 0.5, "must be positive", _positive),
        "radii": (_floats, [0.1, 0.2, 0.3, 0.5, 0.7], "must lie in (0, 1)",
                  lambda xs: _nonempty_positive(xs) and max(xs) < 1),
        "restarts": (int, 2, "must be >= 1", lambda x: x >= 1),
        "seed": (int, 0, "", None),
    },
    "trace-hardy": {
        "count": (int, 20, "must be >= 1", lambda x: x >= 1),
        "profile": (str, "sine", "must be flat, parabola, sine or wave",
                    lambda x: x in ("flat", "parabola", "sine", "wave")),
        "height": (float, 1.0, "must be positive", _positive),
        "seed": (int, 0, "", None),
    },
    "interpolation-suite": {
        "epsilon": (_floats, [0.1, 0.5], "values must be positive", _nonempty_positive),
        "trials": (int, 50, "must be >= 1", lambda x: x >= 1),
        "s": (float, 0.75, "must lie in (1/2, 1)", lambda x: 0.5 < x < 1),
        "modes": (int, 8, "must be >= 1", lambda x: x >= 1),
        "seed": (int, 0, "", None),
    },
    "hs-equivalence": {
        "s": (_floats, [0.3, 0.5, 0.7], "values must lie in (0, 1)",
              lambda xs: len(xs) > 0 and all(0 < x < 1 for x in xs)),
        "count": (int, 100, "must be >= 1", lambda x: x >= 1),
        "modes": (int, 8, "must be >= 1", lambda x: x >= 1),
        "samples": (int, 512, "must be >= 16", lambda x: x >= 16),
        "distance": (str, "chord", "must be chord or arc", lambda x: x in ("chord", "arc")),
        "seed": (int, 0, "", None),
    },
    "halfdisk-bound": {
        "count": (int, 30, "must be >= 1", lambda x: x >= 1),
        "epsilon": (float, 0.5, "must be positive", _positive),
        "s": (float, 0.75, "must lie in (1/2, 1]", lambda x: 0.5 < x <= 1),
        "constant": (float, harmonics.HALFDISK_C_GOLDEN, "must be positive", _positive),
        "seed": (int, 1, "", None),
    },
}

RECIPES = tuple(SCHEMAS)


@dataclass
class ExperimentConfig:
    recipe: str
    params: dict
    out: str = "."
    jobs: int = 1

    @property
    def seed(self) -> int:
        return int(self.params.get("seed", 0))


def validate_params(recipe: str, raw: dict) -> dict:
    if recipe not in SCHEMAS:
        raise ConfigError(f"unknown recipe {recipe!r}; choose from {', '.join(RECIPES)}")
    schema = SCHEMAS[recipe]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"[{recipe}] unknown key(s): {', '.join(unknown)}")
    params = {}
    for key, (parse, default, msg, ok) in schema.items():
        if key in raw:
            try:
                val = parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{recipe}] {key} = {raw[key]!r}: {exc}") from None
        else:
            val = default
        if ok is not None and not ok(val):
            raise ConfigError(f"[{recipe}] {key} = {val!r} {msg}")
        params[key] = val
    if recipe == "counterexample" and params["kmin"] > params["kmax"]:
        raise ConfigError("[counterexample] kmin must not exceed kmax")
    if "QDL_SEED" in os.environ:
        try:
            params["seed"] = int(os.environ["QDL_SEED"])
        except ValueError:
            raise ConfigError(f"QDL_SEED must be an integer, got {os.environ['QDL_SEED']!r}") from None
    return params


def load_config(path: Optional[str], recipe: str, overrides: Optional[dict] = None,
                out: str = ".", jobs: int = 1) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        bad = [s for s in cp.sections() if s not in SCHEMAS]
        if bad:
            raise ConfigError(f"{path}: unknown section(s) {', '.join(bad)}")
        if cp.has_section(recipe):
            raw.update(dict(cp.items(recipe)))
    raw.update(overrides or {})
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return ExperimentConfig(recipe, validate_params(recipe, raw), out, jobs)


def _map(fn: Callable, items: list, jobs: int) -> list:
    """Ordered map, optionally over worker processes."""
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- recipes


def _counterexample_point(args):
    eps, k, svals = args
    fam = harmonics.counterexample_family(eps, k)
    d = fam.diagnostics(tuple(svals))
    # (ii): boundary values vanish off the support of eta, up to truncation
    th = np.linspace(eps, 2 * np.pi - eps, 4001)
    d["off_support"] = float(np.abs(fam.boundary_series()(th)).max())
    d["off_support_bound"] = fam.truncation_bound()
    return d


def recipe_counterexample(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("counterexample")
    ks = list(range(p["kmin"], p["kmax"] + 1))
    diags = _map(_counterexample_point, [(p["eps"], k, p["s"]) for k in ks], cfg.jobs)
    rows = []
    for d in diags:
        k = d["k"]
        if k >= d["k0"]:
            rep.ge(f"energy_lower_k{k}", d["energy"], d["energy_lower"],
                   anchor="counterexample (i): energy >= a0^2/4")
            rep.le(f"energy_upper_k{k}", d["energy"], d["energy_upper"],
                   anchor="counterexample (i): energy <= 4 A^2")
        rep.le(f"off_support_k{k}", d["off_support"], d["off_support_bound"],
               anchor="counterexample (ii): f_k = 0 off the support of eta")
        rep.le(f"sup_sqrtk_k{k}", d["sup_sqrtk"], d["sup_bound"] + d["sup_slack"],
               anchor="counterexample (iii): sqrt(k) sup|f_k| <= 2 sup eta (+ truncation)")
        for s in p["s"]:
            rep.le(f"hs_scaled_s{s}_k{k}", d[f"hs_scaled_{s}"], d["hs_bound"],
                   anchor="counterexample (iv): k^(1-2s) |f_k|_s^2 <= 8 A^2")
        rep.ge(f"half_norm_k{k}", d["half_norm"], d["energy_lower"],
               anchor="counterexample: s = 1/2 norm bounded below by a0^2/4")
        rows.append([k, d["k0"], d["a0"], d["A"], d["energy"], d["sup_sqrtk"], d["off_support"]]
                    + [d[f"hs_scaled_{s}"] for s in p["s"]] + [d["half_norm"]])
    path = os.path.join(cfg.out, "counterexample_diagnostics.csv")
    write_table(path, ["k", "k0", "a0", "A", "energy", "sup_sqrtk", "off_support"]
                + [f"hs_scaled_{s}" for s in p["s"]] + ["half_norm"], rows)
    rep.artifacts["diagnostics"] = path
    return rep


def _random_pair(rng, N, m):
    k = len(harmonics.harmonic_basis(N, m))
    return (harmonics.HarmonicPoly(N, m, rng.standard_normal(k)),
            harmonics.HarmonicPoly(N, m, rng.standard_normal(k)))


def _annulus_point(args):
    N, m, R, seed = args
    rng = np.random.default_rng([seed, N, m, int(round(R * 1e6))])
    p, q = _random_pair(rng, N, m)
    sol = harmonics.solve_annulus(p, q, R)
    E = harmonics.annulus_energy(sol)
    Eq = harmonics.annulus_energy_quadrature(sol)
    b = harmonics.energy_bounds(m, R, p.norm2(), q.norm2(), (p - q).norm2(), N) if m >= 1 else (np.nan, np.nan)
    return N, m, R, E, Eq, b


def recipe_annulus_suite(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("annulus-suite")
    pts = [(N, m, R, cfg.seed) for N in p["n"] for m in range(p["mmax"] + 1) for R in p["r"]]
    table = []
    for N, m, R, E, Eq, (b21, b22) in _map(_annulus_point, pts, cfg.jobs):
        tag = f"N{N}_m{m}_R{R}"
        rel = abs(E - Eq) / max(abs(Eq), 1e-300)
        rep.le(f"quadrature_{tag}", rel, p["rtol"], anchor="closed-form annulus energy = quadrature")
        if m >= 1:
            # for N = 2 the first bound is an identity, so compare at rounding level
            rep.le(f"bound21_{tag}", E, b21, tolerance=1e-12,
                   anchor="annulus energy <= c_m |p-q|^2 + f(m ln 1/R) m (|p|^2+|q|^2)")
            rep.le(f"bound22_{tag}", E, b22, anchor="annulus energy <= 4N f~(R^-m) m (|p|^2+|q|^2)")
        table.append([N, m, R, E, Eq, b21, b22])
    for N in p["n"]:
        one = harmonics.HarmonicPoly.constant(N, 1.0)
        zero = harmonics.HarmonicPoly.constant(N, 0.0)
        R = math.exp(-1) if N == 2 else 0.5
        E = harmonics.annulus_energy(harmonics.solve_annulus(one, zero, R))
        # 2 pi / ln(1/R) in 2-D; (N - 2) |S^(N-1)| / (R^(2-N) - 1) in 3-D
        exact = 2 * math.pi if N == 2 else 4 * math.pi
        rep.le(f"degree0_N{N}", abs(E - exact), 1e-12 * exact,
               anchor="degree-0 annulus energy in closed form")
    path = os.path.join(cfg.out, "annulus_suite.csv")
    write_table(path, ["N", "m", "R", "energy", "quadrature", "bound21", "bound22"], table)
    rep.artifacts["table"] = path
    return rep


def branch_experiment(h: float, restarts: int, sweeps: int, seed: int, radii, holder_radii):
    mesh = domains.mesh_domain("disk", h)
    trace = minimizer.trace_q_roots(mesh, 1, 2)
    u = minimizer.minimize(mesh, trace, sweeps=sweeps, restarts=restarts, seed=seed)
    exact = minimizer.branch_solution(mesh.vertices)
    err = minimizer.pointwise_error(u, exact)
    energies = np.array([e for _, e, _ in u.log])
    monotone = bool(np.all(np.diff(energies) <= 1e-12 * energies[0]))
    mq = minimizer.morrey_quotient(u, [0.0, 0.0], radii, 0.5)
    alpha, r2 = minimizer.holder_exponent_fit(u, [0.0, 0.0], holder_radii)
    return dict(mesh=mesh, field=u, err=err, monotone=monotone, morrey=mq,
                variation=float((mq.max() - mq.min()) / mq.min()), alpha=alpha, r2=r2)


def recipe_branch_minimizer(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("branch-minimizer")
    t0 = time.perf_counter()
    res = branch_experiment(p["h"], p["restarts"], p["sweeps"], cfg.seed, p["radii"], p["holder_radii"])
    u = res["field"]
    rep.check("converged", float(u.meta["converged"]), 1.0, u.meta["converged"], 0.0,
              "relax reaches max vertex move < 1e-9 diam(trace)")
    rep.check("monotone_energy", float(res["monotone"]), 1.0, res["monotone"], 0.0,
              "energy never increases across sweeps")
    rep.le("pointwise_error", res["err"].max(), 5 * p["h"],
           anchor="G-distance to {+-sqrt(z)} <= 5h at every vertex")
    rep.le("holder_exponent_deviation", abs(res["alpha"] - 0.5), 0.05,
           anchor="oscillation exponent at the branch point = 1/2")
    rep.le("morrey_variation", res["variation"], 0.10,
           anchor="r^(-1) E(B_r) constant: optimal exponent 1/Q")
    rep.check("energy_vs_2pi", u.energy, 2 * math.pi, True, 0.0,
              "discrete energy against the continuum value 2 pi (informational)")
    rep.check("runtime_seconds", time.perf_counter() - t0, 120.0, True, 0.0, "informational")
    prefix = os.path.join(cfg.out, "branch")
    minimizer.write_qfield(u, prefix + "_field.csv")
    minimizer.write_runlog(u, prefix + "_runlog.csv")
    write_table(prefix + "_morrey.csv", ["r", "quotient"], list(zip(p["radii"], res["morrey"])))
    rep.artifacts.update(field=prefix + "_field.csv", runlog=prefix + "_runlog.csv",
                         morrey=prefix + "_morrey.csv")
    return rep


def recipe_boundary_probe(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("boundary-probe")
    dom = domains.example_graph(p["profile"])
    mesh = domains.mesh_domain("graph", p["h"], dom)
    u = minimizer.minimize(mesh, minimizer.trace_q_roots(mesh, 1, 2), restarts=p["restarts"],
                           seed=cfg.seed)
    rows = minimizer.boundary_inequality_probe(u, dom, p["s"], p["epsilon"], p["radii"])
    for r in rows:
        rep.check(f"implied_C_r{r.r}", r.implied, float("inf"), bool(np.isfinite(r.implied)), 0.0,
                  "boundary energy inequality holds with a finite C")
    path = os.path.join(cfg.out, "boundary_probe.csv")
    write_table(path, ["r", "interior", "tangential", "gagliardo2", "implied_C"],
                [[r.r, r.interior, r.tangential, r.gagliardo2, r.implied] for r in rows])
    rep.artifacts["probe"] = path
    return rep


def recipe_trace_hardy(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("trace-hardy")
    dom = domains.example_graph(p["profile"])
    strip = fracsob.StripDomain(dom.F, -1.0, 1.0, p["height"])
    rng = np.random.default_rng(cfg.seed)
    table = []
    for i in range(p["count"]):
        u = fracsob.random_strip_function(rng)
        lhs = fracsob.trace_distance_weight(u, 1.0, strip)
        dn = fracsob.normal_derivative_norm(u, strip)
        rep.le(f"hardy_{i}", lhs, 2 * dn, anchor="|(u - tr u)/t| <= p/(p-1) |d_N u| with p = 2")
        table.append([i, lhs, dn])
    path = os.path.join(cfg.out, "trace_hardy.csv")
    write_table(path, ["function", "weighted_trace", "normal_derivative"], table)
    rep.artifacts["table"] = path
    return rep


def _random_series(rng, K):
    return fracsob.FourierSeries1D(rng.standard_normal(K + 1), rng.standard_normal(K + 1))


def recipe_interpolation_suite(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("interpolation-suite")
    rng = np.random.default_rng(cfg.seed)
    table = []
    for eps in p["epsilon"]:
        for i in range(p["trials"]):
            u, v = _random_series(rng, p["modes"]), _random_series(rng, p["modes"])
            r = harmonics.interpolate_annulus(u, v, eps, s=p["s"])
            rep.le(f"interp_eps{eps}_{i}", r.energy, r.eps_term + r.C_term,
                   anchor="annulus energy <= eps([u]^2 + [v]^2) + C |u - v|^2")
            table.append([eps, i, r.energy, r.eps_term, r.C_term, r.C, r.m_epsilon, r.R_epsilon])
    path = os.path.join(cfg.out, "interpolation_suite.csv")
    write_table(path, ["epsilon", "trial", "energy", "eps_term", "C_term", "C", "m_epsilon",
                       "R_epsilon"], table)
    rep.artifacts["table"] = path
    return rep


HS_TOLERANCE = 1e-3


def recipe_hs_equivalence(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("hs-equivalence")
    rng = np.random.default_rng(cfg.seed)
    table = []
    for s in p["s"]:
        lo, hi = fracsob.equivalence_envelope(s, p["modes"], p["distance"])
        lo, hi = min(lo, hi), max(lo, hi)
        c1, cinf = fracsob.mode_ratio(1, s, p["distance"]), fracsob.mode_ratio_limit(s)
        env = (min(c1, cinf), max(c1, cinf))
        # at s = 1/2 with chordal distance the envelope is a single point
        tol = HS_TOLERANCE if abs(s - 0.5) < 1e-12 else 0.0
        for i in range(p["count"]):
            F = _random_series(rng, p["modes"])
            F.a[0] = 0.0
            g = fracsob.gagliardo_seminorm(F.sample(p["samples"], p["distance"]), s) ** 2
            f = fracsob.hs_seminorm_fourier(F, s) ** 2
            ratio = g / f
            rep.ge(f"hs_lower_s{s}_{i}", ratio, env[0], tolerance=tol,
                   anchor="Gagliardo^2 / Fourier^2 >= min(c_1, c_inf)")
            rep.le(f"hs_upper_s{s}_{i}", ratio, env[1], tolerance=tol,
                   anchor="Gagliardo^2 / Fourier^2 <= max(c_1, c_inf)")
            table.append([s, i, g, f, ratio, env[0], env[1], lo, hi])
    path = os.path.join(cfg.out, "hs_equivalence.csv")
    write_table(path, ["s", "function", "gagliardo2", "fourier2", "ratio", "env_lo", "env_hi",
                       "band_lo", "band_hi"], table)
    rep.artifacts["table"] = path
    return rep


def recipe_halfdisk_bound(cfg: ExperimentConfig) -> RunReport:
    p = cfg.params
    rep = RunReport("halfdisk-bound")
    rng = np.random.default_rng(cfg.seed)
    table = []
    for i in range(p["count"]):
        ga, gs = harmonics.random_halfdisk_data(rng, zero_graph=True)
        r = harmonics.halfdisk_energy_bound_check(ga, gs, p["epsilon"], p["s"])
        rep.le(f"odd_{i}", r.energy, r.arc_energy, tolerance=1e-8,
               anchor="zero diameter data: energy <= arc tangential energy")
        table.append(["odd", i, r.energy, r.arc_energy, r.graph_seminorm2, r.implied_constant()])
    for i in range(p["count"]):
        ga, gs = harmonics.random_halfdisk_data(rng)
        r = harmonics.halfdisk_energy_bound_check(ga, gs, p["epsilon"], p["s"])
        rep.le(f"mixed_{i}", r.energy, r.rhs(p["constant"]),
               anchor="energy <= (1+eps) arc + (C/eps) [g]_s^2 with the frozen C")
        table.append(["mixed", i, r.energy, r.arc_energy, r.graph_seminorm2, r.implied_constant()])
    path = os.path.join(cfg.out, "halfdisk_bound.csv")
    write_table(path, ["kind", "sample", "energy", "arc_energy", "graph_seminorm2", "implied_C"], table)
    rep.artifacts["table"] = path
    return rep


DISPATCH = {
    "counterexample": recipe_counterexample,
    "annulus-suite": recipe_annulus_suite,
    "branch-minimizer": recipe_branch_minimizer,
    "boundary-probe": recipe_boundary_probe,
    "trace-hardy": recipe_trace_hardy,
    "interpolation-suite": recipe_interpolation_suite,
    "hs-equivalence": recipe_hs_equivalence,
    "halfdisk-bound": recipe_halfdisk_bound,
}


def run_experiment(config: ExperimentConfig) -> RunReport:
    if config.recipe not in DISPATCH:
        raise ConfigError(f"unknown recipe {config.recipe!r}")
    os.makedirs(config.out, exist_ok=True)
    report = DISPATCH[config.recipe](config)
    emit_csv(report, os.path.join(config.out, f"{config.recipe}_report.csv"))
    return report


# ---------------------------------------------------------------- command line


def _finish(report: RunReport) -> None:
    n, bad = len(report.rows), report.failures()
    click.echo(f"{report.recipe}: {n - len(bad)}/{n} checks passed")
    for r in bad[:20]:
        click.echo(f"  FAIL {r.name}: value {r.value!r} vs bound {r.bound!r} ({r.anchor})", err=True)
    sys.exit(0 if not bad else 1)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except NUMERICAL_ERRORS as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def main():
    """Experiments on Dirichlet energies of Q-valued maps."""


def _recipe_command(name):
    @main.command(name=name)
    @click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
    @click.option("--jobs", type=int, default=1, show_default=True)
    @click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
    @click.option("--set", "sets", multiple=True, help="override a config key: key=value")
    @_guarded
    def cmd(config_path, jobs, out, sets):
        overrides = {}
        for item in sets:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        cfg = load_config(config_path, name, overrides, out, jobs)
        _finish(run_experiment(cfg))

    cmd.__doc__ = f"Run the {name} recipe."
    return cmd


for _name in RECIPES:
    if _name != "counterexample":
        _recipe_command(_name)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--eps", type=str, default=None)
@click.option("--kmin", type=str, default=None)
@click.option("--kmax", type=str, default=None)
@click.option("--s", "s_values", type=str, default=None, help="comma-separated s values")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@_guarded
def counterexample(config_path, eps, kmin, kmax, s_values, jobs, out):
    """Run the counterexample recipe (per-k CSV of all four diagnostics)."""
    overrides = {k: v for k, v in dict(eps=eps, kmin=kmin, kmax=kmax, s=s_values).items()
                 if v is not None}
    cfg = load_config(config_path, "counterexample", overrides, out, jobs)
    _finish(run_experiment(cfg))


@main.command()
@click.option("--N", "N", type=click.IntRange(2, 3), required=True)
@click.option("--m", type=click.IntRange(0, None), required=True)
@click.option("--R", "R", type=float, required=True)
@click.option("--p", "p", type=str, required=True, help="basis coefficients, comma-separated")
@click.option("--q", "q", type=str, required=True, help="basis coefficients, comma-separated")
@click.option("--out", type=click.Path(dir_okay=False), default="-", show_default=True)
@_guarded
def annulus(N, m, R, p, q, out):
    """Energy and both upper bounds for one annulus solution (CSV)."""
    try:
        P = harmonics.HarmonicPoly(N, m, _floats(p))
        Qp = harmonics.HarmonicPoly(N, m, _floats(q))
        sol = harmonics.solve_annulus(P, Qp, R)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    E = harmonics.annulus_energy(sol)
    b21, b22 = (harmonics.energy_bounds(m, R, P.norm2(), Qp.norm2(), (P - Qp).norm2(), N)
                if m >= 1 else (float("nan"), float("nan")))
    text = "energy,bound21,bound22\n" + ",".join(_fmt(x) for x in (E, b21, b22)) + "\n"
    if out == "-":
        click.echo(text, nl=False)
    else:
        with open(out, "w") as fh:
            fh.write(text)


@main.command()
@click.option("--kind", type=click.Choice(["disk", "halfdisk", "graph"]), required=True)
@click.option("--h", type=float, required=True)
@click.option("--profile", type=click.Choice(["flat", "parabola", "sine", "wave"]), default="sine",
              show_default=True, help="boundary profile for graph meshes")
@click.option("--out-prefix", required=True)
@_guarded
def mesh(kind, h, profile, out_prefix):
    """Write a mesh as vertices/triangles/boundary CSV files."""
    try:
        F = domains.example_graph(profile) if kind == "graph" else None
        m = domains.mesh_domain(kind, h, F)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for path in domains.write_mesh(m, out_prefix):
        click.echo(path)


def parse_trace(text: str, m: domains.DomainMesh) -> minimizer.BoundaryTrace:
    """constant:v11,...,vQn@Q | q_roots:d[,Q] | holder_random:beta,seed[,Q] | sampled:path"""
    kind, _, arg = text.partition(":")
    try:
        if kind == "q_roots":
            vals = _ints(arg) if arg else [1]
            return minimizer.trace_q_roots(m, vals[0], vals[1] if len(vals) > 1 else 2)
        if kind == "holder_random":
            vals = _floats(arg)
            Q = int(vals[2]) if len(vals) > 2 else 1
            return minimizer.trace_holder_random(m, vals[0], int(vals[1]), Q=Q)
        if kind == "constant":
            body, _, Q = arg.partition("@")
            vals = np.array(_floats(body))
            Q = int(Q) if Q else 1
            return minimizer.trace_constant(m, vals.reshape(Q, -1))
        if kind == "sampled":
            return minimizer.trace_sampled(m, arg)
    except (ValueError, IndexError, OSError) as exc:
        raise ConfigError(f"bad trace {text!r}: {exc}") from None
    raise ConfigError(f"unknown trace generator {kind!r}")


@main.command()
@click.option("--mesh-prefix", required=True)
@click.option("--trace", "trace_spec", required=True,
              help="q_roots:d[,Q] | constant:v..@Q | holder_random:beta,seed[,Q] | sampled:path")
@click.option("--sweeps", type=click.IntRange(1, None), default=200, show_default=True)
@click.option("--restarts", type=click.IntRange(1, None), default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", default="minimize", show_default=True)
@_guarded
def minimize(mesh_prefix, trace_spec, sweeps, restarts, seed, out_prefix):
    """Relax a Q-valued field on a stored mesh; writes the field and run log."""
    seed = int(os.environ.get("QDL_SEED", seed))
    try:
        m = domains.read_mesh(mesh_prefix)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read mesh {mesh_prefix!r}: {exc}") from None
    tr = parse_trace(trace_spec, m)
    u = minimizer.minimize(m, tr, sweeps=sweeps, restarts=restarts, seed=seed)
    minimizer.write_qfield(u, out_prefix + "_field.csv")
    minimizer.write_runlog(u, out_prefix + "_runlog.csv")
    click.echo(f"energy {u.energy!r} converged {u.meta['converged']} residual {u.meta['residual']!r}")
    sys.exit(0 if u.meta["converged"] else 1)


if __name__ == "__main__":
    main()
