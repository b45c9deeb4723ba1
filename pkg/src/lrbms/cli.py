"""Command-line driver: ``lrbms {solve,estimate,study,greedy,online,verify}``.

Runs are described by an INI file with the sections listed in ``SCHEMA``; any
key not listed there is rejected before numerics start. All CSV output uses 17
significant digits and starts with one timestamped comment line.
"""

import argparse
import configparser
import csv
import datetime
import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import __version__
from .estimate import NC_PARAMETERS, eta_global, eta_online
from .grid import build_nested_grid, dof_permutation
from .linalg import SolverError, write_matrix_market
from .presets import (SOURCES, checkerboard_kappa, constant_kappa, lambda_field, make_problem,
                      sinsin_exact, table_kappa)
from .problem import ParameterBox, ProblemError, energy_error, energy_norm, equivalence_constants
from .reconstruct import (check_coarse_conservation, conforming_to_dg, face_jumps, oswald_interpolate,
                          reconstruct_flux, write_rt_csv)
from .reduced import (ModelFormatError, estimate_reduced, greedy_train, load_model, save_model,
                      seed_and_extend, seed_constants, solve_reduced)
from .swipdg import assemble, solve_dg

log = logging.getLogger("lrbms")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER, EXIT_FORMAT = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


def _floats(text):
    try:
        return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ValueError(f"expected comma separated numbers, got {text!r}") from None


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


#: section -> key -> (parser, default text)
SCHEMA = {
    "grid": {"coarse": (int, "2"), "refinement": (int, "4")},
    "problem": {"preset": (str, "manufactured"), "contrast": (float, "100"),
                "cells": (_optional_int, "auto"), "kappa": (_floats, "1, 1"),
                "kappa_table": (str, ""), "source": (str, "sinsin")},
    "parameters": {"components": (_names, "one"), "thetas": (_names, "mu0"),
                   "lower": (_floats, "0.5"), "upper": (_floats, "2.0")},
    "discretization": {"penalty_factor": (float, "8")},
    "estimator": {"mu_hat": (str, "auto"), "mu_bar": (str, "mu"), "nc_parameter": (str, "mu_bar")},
    "solver": {"rel_tol": (float, "1e-12"), "max_iter": (_optional_int, "auto")},
    "greedy": {"training_size": (int, "8"), "tol": (float, "0"), "max_extensions": (int, "8")},
    "study": {"levels": (int, "3")},
    "output": {"directory": (str, "out")},
}

PRESETS = ("manufactured", "checkerboard", "table")


def default_config_text():
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {d}" for k, (_, d) in keys.items()]
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class RunConfig:
    coarse: int
    refinement: int
    preset: str
    contrast: float
    cells: object
    kappa: tuple
    kappa_table: str
    source: str
    components: tuple
    thetas: tuple
    lower: tuple
    upper: tuple
    penalty_factor: float
    mu_hat: str
    mu_bar: str
    nc_parameter: str
    rel_tol: float
    max_iter: object
    training_size: int
    tol: float
    max_extensions: int
    levels: int
    directory: str

    @property
    def box(self):
        return ParameterBox(self.lower, self.upper)

    def fixed_mu_hat(self):
        """``mu_hat`` for reduced models, which need one fixed value."""
        if self.mu_hat in ("auto", "midpoint"):
            return self.box.midpoint()
        return self.box.check(_floats(self.mu_hat))

    def estimate_mu_hat(self, mu):
        """``mu_hat`` for estimates of fine solutions: ``mu`` itself under ``auto``."""
        return np.asarray(mu, dtype=float) if self.mu_hat == "auto" else self.fixed_mu_hat()

    def estimate_mu_bar(self, mu):
        return np.asarray(mu, dtype=float) if self.mu_bar == "mu" else self.box.check(_floats(self.mu_bar))


def load_config(path=None):
    """Parse and validate a configuration file (defaults when ``path`` is None)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(default_config_text())
    if path is not None:
        user = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            with open(path) as fh:
                user.read_file(fh)
        except (OSError, configparser.Error) as err:
            raise ConfigError(f"cannot read configuration {path}: {err}") from None
        for section in user.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key, value in user.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key [{section}] {key}")
                parser.set(section, key, value)
    values = {}
    for section, keys in SCHEMA.items():
        for key, (conv, _) in keys.items():
            try:
                values[key] = conv(parser.get(section, key))
            except ValueError as err:
                raise ConfigError(f"[{section}] {key}: {err}") from None
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg):
    def fail(where, msg):
        raise ConfigError(f"{where}: {msg}")

    if cfg.coarse < 1:
        fail("[grid] coarse", "must be >= 1")
    if cfg.refinement < 1:
        fail("[grid] refinement", "must be >= 1")
    if cfg.preset not in PRESETS:
        fail("[problem] preset", f"must be one of {', '.join(PRESETS)}")
    if cfg.source not in SOURCES:
        fail("[problem] source", f"must be one of {', '.join(SOURCES)}")
    if cfg.preset == "table" and not cfg.kappa_table:
        fail("[problem] kappa_table", "required for the table preset")
    if len(cfg.kappa) != 2 or min(cfg.kappa) <= 0:
        fail("[problem] kappa", "expected two positive diagonal entries")
    if cfg.contrast <= 0:
        fail("[problem] contrast", "must be positive")
    if len(cfg.components) != len(cfg.thetas) or not cfg.components:
        fail("[parameters] thetas", "need one coefficient per component")
    try:
        box = cfg.box
        lam = lambda_field(cfg.components, cfg.thetas)
    except ProblemError as err:
        fail("[parameters]", str(err))
    if any(t.index is not None and t.index >= box.dim for t in lam.thetas):
        fail("[parameters] thetas", f"parameter index out of range for a {box.dim}-d box")
    if cfg.penalty_factor <= 0:
        fail("[discretization] penalty_factor", "must be positive")
    for key in ("mu_hat", "mu_bar"):
        text = getattr(cfg, key)
        if text in (("auto", "midpoint") if key == "mu_hat" else ("mu",)):
            continue
        try:
            box.check(_floats(text))
        except (ValueError, ProblemError) as err:
            fail(f"[estimator] {key}", str(err))
    if cfg.nc_parameter not in NC_PARAMETERS:
        fail("[estimator] nc_parameter", f"must be one of {', '.join(NC_PARAMETERS)}")
    if not 0 < cfg.rel_tol < 1:
        fail("[solver] rel_tol", "must lie in (0, 1)")
    if cfg.training_size < 1:
        fail("[greedy] training_size", "must be >= 1")
    if cfg.max_extensions < 0:
        fail("[greedy] max_extensions", "must be >= 0")
    if cfg.levels < 2:
        fail("[study] levels", "must be >= 2")


# --------------------------------------------------------------------------- problem setup


def build_problem(cfg, refinement=None, coarse=None):
    grid = build_nested_grid(cfg.coarse if coarse is None else coarse,
                             cfg.refinement if refinement is None else refinement)
    lam = lambda_field(cfg.components, cfg.thetas)
    if cfg.preset == "manufactured":
        kappa = constant_kappa(grid, np.diag(cfg.kappa))
    elif cfg.preset == "checkerboard":
        kappa = checkerboard_kappa(grid, cfg.contrast, cfg.cells)
    else:
        kappa = table_kappa(grid, cfg.kappa_table)
    exact = None
    if (cfg.preset == "manufactured" and cfg.source == "sinsin"
            and all(n == "one" for n in cfg.components)):
        exact = sinsin_exact(cfg.kappa, lam)
    return make_problem(grid, lam, kappa, SOURCES[cfg.source], cfg.box, exact=exact)


def parse_mu(text, box):
    if text is None:
        return box.midpoint()
    try:
        return box.check(_floats(text))
    except (ValueError, ProblemError) as err:
        raise ConfigError(f"--mu: {err}") from None


def training_set(cfg, box, seed):
    if box.dim == 1:
        return box.uniform(cfg.training_size)
    return box.random(cfg.training_size, np.random.default_rng(seed))


# --------------------------------------------------------------------------- CSV


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in np.ravel(v))
    return f"{float(v):.17g}"


def _open_csv(path, command):
    fh = open(path, "w", newline="")
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    fh.write(f"# lrbms {__version__} {command} {stamp}\n")
    return fh, csv.writer(fh, lineterminator="\n")


def write_csv(path, command, header, rows):
    fh, w = _open_csv(path, command)
    with fh:
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_vector(directory, name, vec, meta):
    directory = Path(directory)
    np.asarray(vec, dtype="<f8").tofile(directory / f"{name}.bin")
    lines = [f"{k} = {v}" for k, v in meta.items()]
    lines.append(f"array {name} float64 {len(vec)}")
    (directory / f"{name}_manifest.txt").write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------- commands


def _solve(cfg, op, mu):
    return solve_dg(op, mu, rel_tol=cfg.rel_tol, max_iter=cfg.max_iter, return_info=True)


def cmd_solve(cfg, args, out):
    problem = build_problem(cfg)
    mu = parse_mu(args.mu, problem.box)
    op = assemble(problem, cfg.penalty_factor)
    p, iterations = _solve(cfg, op, mu)
    norm = energy_norm(problem, mu, p)
    error = energy_error(problem, mu, problem.exact(mu)[1], p) if problem.exact else None
    write_vector(out, "solution", p, {"format_version": 1, "coarse": cfg.coarse,
                                      "refinement": cfg.refinement, "mu": _fmt(mu)})
    write_csv(out / "solve.csv", "solve", ["mu", "num_dofs", "cg_iterations", "energy_norm", "energy_error"],
              [[mu, problem.grid.num_dofs, iterations, norm, error]])
    print(f"solved: {problem.grid.num_dofs} dofs, {iterations} CG iterations, energy norm {norm:.10g}")
    return EXIT_OK


def _estimate(cfg, problem, op, mu):
    p, _ = _solve(cfg, op, mu)
    report = eta_global(problem, p, mu, mu_bar=cfg.estimate_mu_bar(mu), mu_hat=cfg.estimate_mu_hat(mu),
                        penalty_factor=cfg.penalty_factor, nc_parameter=cfg.nc_parameter)
    error = energy_error(problem, mu, problem.exact(mu)[1], p) if problem.exact else None
    return p, report, error


def cmd_estimate(cfg, args, out):
    problem = build_problem(cfg)
    mu = parse_mu(args.mu, problem.box)
    op = assemble(problem, cfg.penalty_factor)
    p, report, error = _estimate(cfg, problem, op, mu)
    fh, _ = _open_csv(out / "estimate.csv", "estimate")
    with fh:
        report.write_csv(fh)
    write_rt_csv(out / "flux.csv", problem.grid, reconstruct_flux(problem, p, mu, cfg.penalty_factor))
    eff = report.eta / error if error else None
    write_csv(out / "estimate_summary.csv", "estimate",
              ["mu", "eta", "eta_nc", "eta_r", "eta_df", "error", "effectivity"],
              [[mu, report.eta, *report.totals, error, eff]])
    print(f"eta = {report.eta:.10g}" + (f", error = {error:.10g}, effectivity = {eff:.4g}" if error else ""))
    return EXIT_OK


def _rate(a, b, ha, hb):
    if a is None or b is None or a <= 0 or b <= 0:
        return None
    return np.log(a / b) / np.log(ha / hb)


def cmd_study(cfg, args, out):
    levels = args.levels if args.levels is not None else cfg.levels
    if levels < 2:
        raise ConfigError("--levels: must be >= 2")
    rows = []
    mu = None
    for level in range(levels):
        problem = build_problem(cfg, refinement=cfg.refinement * 2**level)
        mu = parse_mu(args.mu, problem.box) if mu is None else mu
        op = assemble(problem, cfg.penalty_factor)
        _, report, error = _estimate(cfg, problem, op, mu)
        eff = report.eta / error if error else None
        rows.append([level, problem.grid.mesh_size, error, report.eta, *report.totals, eff])
        log.info("level %d: h=%.4g eta=%.6g", level, problem.grid.mesh_size, report.eta)
    footer = []
    for a, b in zip(rows[:-1], rows[1:]):
        footer.append([f"rate {a[0]}-{b[0]}", None]
                      + [_rate(x, y, a[1], b[1]) for x, y in zip(a[2:7], b[2:7])] + [None])
    write_csv(out / "study.csv", "study",
              ["level", "h", "error", "eta", "eta_nc", "eta_r", "eta_df", "effectivity"], rows + footer)
    for r in rows:
        print(" ".join(_fmt(v) or "-" for v in r))
    return EXIT_OK


def cmd_greedy(cfg, args, out):
    size = args.training_size if args.training_size is not None else cfg.training_size
    tol = args.tol if args.tol is not None else cfg.tol
    cfg = replace(cfg, training_size=size)
    problem = build_problem(cfg)
    train = training_set(cfg, problem.box, args.seed)
    # eigenvalue bounds over the box corners and the training set
    problem = problem.with_eigen_sample(problem.box.corners() + list(train))
    op = assemble(problem, cfg.penalty_factor)
    model = greedy_train(op, train, tol, cfg.max_extensions, mu_hat=cfg.fixed_mu_hat(), rel_tol=cfg.rel_tol)
    save_model(model, out / "model", extra={
        "coarse": cfg.coarse, "refinement": cfg.refinement,
        "components": ",".join(cfg.components), "thetas": ",".join(cfg.thetas)})
    write_csv(out / "history.csv", "greedy", ["iteration", "max_eta", "mu", "sizes", "stagnated"],
              [[h["iteration"], h["max_eta"], h["mu"], " ".join(map(str, h["sizes"])),
                int(h.get("stagnated", False))] for h in model.history])
    print(f"greedy: {len(model.history)} iterations, reduced size {model.size}, "
          f"converged={model.converged}")
    return EXIT_OK


def cmd_online(cfg, args, out):
    directory = Path(args.model) if args.model else out / "model"
    lam = lambda_field(cfg.components, cfg.thetas)
    model, meta = load_model(directory, lam)
    for key, expected in (("components", ",".join(cfg.components)), ("thetas", ",".join(cfg.thetas))):
        if key in meta and meta[key] != expected:
            raise ModelFormatError(f"model was trained with {key} = {meta[key]}, configuration has {expected}")
    mu = parse_mu(args.mu, cfg.box)
    start = time.perf_counter()
    c, report = estimate_reduced(model, mu, mu_bar=cfg.estimate_mu_bar(mu), nc_parameter=cfg.nc_parameter)
    elapsed = time.perf_counter() - start
    write_csv(out / "online.csv", "online", ["mu", "eta", "eta_nc", "eta_r", "eta_df", "wall_time", "coefficients"],
              [[mu, report.eta, *report.totals, elapsed, c]])
    print(f"online: eta = {report.eta:.10g} ({elapsed * 1e3:.3f} ms)")
    return EXIT_OK


# --------------------------------------------------------------------------- verify


def _min_eigenvalue(A):
    if A.shape[0] <= 4000:
        return float(scipy.linalg.eigvalsh(A.toarray(), subset_by_index=[0, 0])[0])
    return float(scipy.sparse.linalg.eigsh(A, k=1, which="SA", return_eigenvectors=False)[0])


def verification_checks(cfg, seed=0):
    """Run the invariant suite on the configured problem.

    Returns rows ``(name, passed, value, tolerance)``; an exception inside a
    check marks it failed.
    """
    rng = np.random.default_rng(seed)
    problem = build_problem(cfg)
    grid = problem.grid
    op = assemble(problem, cfg.penalty_factor)
    box = problem.box
    params = box.corners() + [box.midpoint()]
    state = {}

    def coercivity():
        return min(_min_eigenvalue(op.matrix(mu)) for mu in params), 0.0, lambda v, t: v > t

    def symmetry():
        A = op.matrix(box.midpoint())
        return abs(A - A.T).max() / abs(A).max(), 1e-14, None

    def collapse():
        single = build_problem(cfg, coarse=1, refinement=cfg.coarse * cfg.refinement)
        perm = dof_permutation(grid, single.grid)
        kappa = np.empty_like(problem.kappa)
        kappa[perm[::3] // 3] = problem.kappa
        source = np.empty(grid.num_dofs)
        source[perm] = problem.source.ravel()
        single = replace(single, kappa=kappa, source=source.reshape(-1, 3))
        A = op.matrix(box.midpoint())
        B = assemble(single, cfg.penalty_factor).matrix(box.midpoint())[perm][:, perm]
        return abs(A - B).max() / abs(A).max(), 1e-14, None

    def solution(mu):
        key = tuple(mu)
        if key not in state:
            state[key] = _solve(cfg, op, mu)[0]
        return state[key]

    def discrete_residual():
        mu = box.midpoint()
        r = op.matrix(mu) @ solution(mu) - op.rhs
        return np.linalg.norm(r) / max(np.linalg.norm(op.rhs), 1e-300), 1e-10, None

    fnorm = float(np.sqrt(np.sum(problem.source**2 * grid.areas[:, None] / 3)))

    def dg_conservation():
        mu = box.midpoint()
        u = reconstruct_flux(problem, solution(mu), mu, cfg.penalty_factor)
        worst = max(abs(check_coarse_conservation(problem, u, T)) for T in range(grid.num_coarse_elements))
        return worst, 1e-10 * (1 + fnorm), None

    def norm_equivalence():
        worst = -np.inf
        for _ in range(20):
            mu, mu_bar = box.random(1, rng)[0], box.random(1, rng)[0]
            alpha, gamma = equivalence_constants(problem.lam, mu, mu_bar)
            for _ in range(5):
                q = rng.standard_normal(grid.num_dofs)
                a, b = energy_norm(problem, mu, q), energy_norm(problem, mu_bar, q)
                worst = max(worst, (np.sqrt(alpha) * b - a) / a, (a - np.sqrt(gamma) * b) / a)
        return worst, 1e-12, None

    def oswald_conformity():
        s = oswald_interpolate(grid, rng.standard_normal(grid.num_dofs))
        jumps = face_jumps(grid, conforming_to_dg(grid, s))
        return max(jumps.max(initial=0.0), np.abs(s[grid.vertex_on_boundary]).max(initial=0.0)), 1e-14, None

    def reduced_model():
        if "model" not in state:
            model = seed_constants(op, cfg.fixed_mu_hat())
            state["model"] = seed_and_extend(model, solution(box.midpoint()))
        return state["model"]

    def offline_online():
        model = reduced_model()
        worst = 0.0
        for mu in box.random(3, rng):
            c, p = solve_reduced(model, mu)
            online = eta_online(model.offline, c, mu)
            direct = eta_global(problem, p, mu, mu_hat=model.mu_hat, penalty_factor=cfg.penalty_factor)
            # parts are measured against the total so that vanishing parts do not divide by zero
            for x, y in zip((online.eta, *online.totals), (direct.eta, *direct.totals)):
                worst = max(worst, abs(x - y) / max(abs(direct.eta), 1e-300))
        return worst, 1e-9, None

    def reduced_conservation():
        model = reduced_model()
        mu = box.random(1, rng)[0]
        _, p = solve_reduced(model, mu)
        u = reconstruct_flux(problem, p, mu, cfg.penalty_factor)
        worst = max(abs(check_coarse_conservation(problem, u, T)) for T in range(grid.num_coarse_elements))
        return worst, 1e-10 * (1 + fnorm), None

    def reliability():
        mu = box.midpoint()
        p = solution(mu)
        error = energy_error(problem, mu, problem.exact(mu)[1], p)
        report = eta_global(problem, p, mu, mu_hat=mu, penalty_factor=cfg.penalty_factor)
        return error / report.eta, 1.0, None

    checks = [("coercivity", coercivity), ("symmetry", symmetry), ("single_level_collapse", collapse),
              ("discrete_residual", discrete_residual), ("dg_conservation", dg_conservation),
              ("norm_equivalence", norm_equivalence), ("oswald_conformity", oswald_conformity),
              ("offline_online", offline_online), ("reduced_conservation", reduced_conservation)]
    if problem.exact is not None:
        checks.append(("reliability", reliability))
    rows = []
    for name, fn in checks:
        try:
            value, tol, compare = fn()
            passed = compare(value, tol) if compare else value <= tol
        except (SolverError, np.linalg.LinAlgError, ProblemError, ValueError) as err:
            log.warning("check %s raised: %s", name, err)
            value, tol, passed = float("nan"), float("nan"), False
        rows.append((name, bool(passed), float(value), float(tol)))
    return rows


def cmd_verify(cfg, args, out):
    if getattr(args, "dump", False):
        op = assemble(build_problem(cfg), cfg.penalty_factor)
        for xi, A in enumerate(op.components):
            write_matrix_market(out / f"A_{xi}.mtx", A, comment=f"component {xi}")
    rows = verification_checks(cfg, args.seed)
    write_csv(out / "verify.csv", "verify", ["check", "passed", "value", "tolerance"],
              [[n, int(p), v, t] for n, p, v, t in rows])
    for n, p, v, t in rows:
        print(f"{'PASS' if p else 'FAIL'} {n}: {v:.3e} (tolerance {t:.1e})")
    failed = [n for n, p, _, _ in rows if not p]
    if failed:
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "estimate": cmd_estimate, "study": cmd_study,
            "greedy": cmd_greedy, "online": cmd_online, "verify": cmd_verify}


# --------------------------------------------------------------------------- entry point


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="output directory (overrides [output] directory)")
    common.add_argument("--mu", help='parameter as "v1,v2,..." (default: box midpoint)')
    common.add_argument("--threads", type=_positive_int, help="worker cap (runs are single threaded)")
    common.add_argument("--seed", type=int, help="seed for random samples (default 0)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lrbms", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    # global flags may also follow the command name
    sub_common = argparse.ArgumentParser(add_help=False)
    for action in common._actions:
        kwargs = {"default": argparse.SUPPRESS, "help": action.help}
        if isinstance(action, argparse._StoreTrueAction):
            kwargs["action"] = "store_true"
        else:
            kwargs["type"] = action.type
        sub_common.add_argument(*action.option_strings, **kwargs)
    for action in common._actions:
        parser._add_action(action)
    subs = parser.add_subparsers(dest="command", required=True)
    subs.add_parser("solve", parents=[sub_common], help="DG solve at one parameter")
    subs.add_parser("estimate", parents=[sub_common], help="solve and evaluate the estimator")
    study = subs.add_parser("study", parents=[sub_common], help="refinement study (n_h doubled per level)")
    study.add_argument("--levels", type=int)
    greedy = subs.add_parser("greedy", parents=[sub_common], help="train and save a reduced model")
    greedy.add_argument("--training-size", type=_positive_int)
    greedy.add_argument("--tol", type=float)
    online = subs.add_parser("online", parents=[sub_common], help="query a saved reduced model")
    online.add_argument("--model", help="model directory (default: <out>/model)")
    verify = subs.add_parser("verify", parents=[sub_common], help="run the invariant checks")
    verify.add_argument("--dump", action="store_true",
                        help="also write the assembled components in Matrix Market format")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.seed = 0 if args.seed is None else args.seed
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        log.info("--threads %d: commands run in a single process without a worker pool", args.threads)
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.directory)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, out)
    except (ConfigError, ProblemError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except ModelFormatError as err:
        print(f"model format error: {err}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
