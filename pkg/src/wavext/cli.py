"""Batch experiment front end: the ``wavext`` command.

Runs convergence studies (in mesh size, time step, or joint degree),
estimator studies, single solves, and energy-conservation checks from a
line-based ``key = value`` config file, writing ``results.csv``,
``rates.txt`` and ``run.log`` into the output directory.  Identical configs
produce byte-identical ``results.csv``.
"""

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, SolverFailure
from .estimator import compute_estimator, effectivity_index
from .fem import build_space
from .mesh import build_structured_mesh, mesh_size
from .postprocess import (compute_error_report, convergence_rates,
                          energy_trace)
from .problem import Discretization, inline_problem, make_preset
from .solver import solve
from .timebasis import uniform_time_partition

EXPERIMENTS = ("converge-h", "converge-tau", "converge-pq", "estimate",
               "solve", "energy")

CSV_COLUMNS = ("run_id", "experiment", "method", "bc_mode", "p", "q", "h",
               "tau", "err_u", "err_ustar", "err_v", "err_gradu", "eta",
               "osc_f", "effectivity", "energy_drift")

_LIST_KEYS = {"p", "q", "mesh", "tau"}
_SCALAR_KEYS = {"experiment", "problem", "psi", "method", "bc_mode",
                "initial_mode", "samples_per_slab", "T", "out", "u", "c",
                "bbox"}


@dataclass
class ExperimentConfig:
    experiment: str
    problem: str = ""
    psi: str = ""
    p: list = field(default_factory=list)
    q: list = field(default_factory=list)
    mesh: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    method: str = "gradient"
    bc_mode: str = "projection"
    initial_mode: str = ""
    samples_per_slab: int = 11
    t_final: float = 1.0
    out: str = "results"
    inline_u: str = ""
    inline_c: float = 1.0
    inline_bbox: tuple = (0.0, 1.0, 0.0, 1.0)


_DEFAULTS = {
    "converge-h": dict(problem="dirichlet-cos", p=[1, 2, 3], q=[4],
                       mesh=[4, 8, 16, 32], tau=[0.03125]),
    "converge-tau": dict(problem="dirichlet-cos", p=[8], q=[1, 2, 3, 4],
                         mesh=[4], tau=[0.25, 0.125, 0.0625]),
    "converge-pq": dict(problem="dirichlet-cos", p=[1, 2, 3, 4, 5, 6],
                        q=[], mesh=[8], tau=[0.25]),
    "estimate": dict(problem="estimator-poly", p=[4], q=[1, 2], mesh=[2],
                     tau=[0.125, 0.0625, 0.03125, 0.015625]),
    "solve": dict(problem="dirichlet-cos", p=[2], q=[2], mesh=[8], tau=[0.125]),
    "energy": dict(problem="standing-wave", p=[2], q=[2], mesh=[8],
                   tau=[0.03125]),
}

_METHOD_ALIASES = {"gradient": "gradient", "gradientcoupling": "gradient",
                   "i": "gradient", "mass": "mass", "masscoupling": "mass",
                   "ii": "mass"}
_BC_ALIASES = {"projection": "projection", "ptau": "projection",
               "ptaulifting": "projection", "interpolation": "interpolation",
               "lagrange": "interpolation",
               "naivelagrangeintime": "interpolation"}


def parse_config(path, experiment):
    """Read a ``key = value`` config file (lists by key repetition)."""
    raw = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _LIST_KEYS | _SCALAR_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        raw.setdefault(key, []).append(value)
    for key in _SCALAR_KEYS:
        if key in raw and len(raw[key]) > 1:
            raise ConfigurationError(f"{path}: key {key!r} given more than once")

    def scalar(key, default=None):
        return raw[key][0] if key in raw else default

    if scalar("experiment") and scalar("experiment") != experiment:
        raise ConfigurationError(
            f"config names experiment {scalar('experiment')!r}, "
            f"but {experiment!r} was requested")

    cfg = ExperimentConfig(experiment=experiment)
    defaults = _DEFAULTS[experiment]
    cfg.problem = scalar("problem", defaults["problem"])
    cfg.psi = scalar("psi", "cos4t" if cfg.problem == "estimator-poly" else "")
    try:
        cfg.p = [int(v) for v in raw.get("p", defaults["p"])]
        cfg.q = [int(v) for v in raw.get("q", defaults["q"])]
        cfg.mesh = [int(v) for v in raw.get("mesh", defaults["mesh"])]
        cfg.tau = [float(v) for v in raw.get("tau", defaults["tau"])]
        cfg.samples_per_slab = int(scalar("samples_per_slab", "11"))
        cfg.t_final = float(scalar("T", "1.0"))
        cfg.inline_c = float(scalar("c", "1.0"))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    method = scalar("method", "gradient").lower()
    if method not in _METHOD_ALIASES:
        raise ConfigurationError(f"unknown method {method!r}")
    cfg.method = _METHOD_ALIASES[method]
    bc = scalar("bc_mode", "projection").lower()
    if bc not in _BC_ALIASES:
        raise ConfigurationError(f"unknown bc_mode {bc!r}")
    cfg.bc_mode = _BC_ALIASES[bc]
    cfg.initial_mode = scalar(
        "initial_mode", "interpolation" if experiment == "energy" else "projection")
    if cfg.initial_mode not in ("projection", "interpolation"):
        raise ConfigurationError(f"unknown initial_mode {cfg.initial_mode!r}")
    cfg.out = scalar("out", "results")
    cfg.inline_u = scalar("u", "")
    if "bbox" in raw:
        parts = raw["bbox"][0].split()
        if len(parts) != 4:
            raise ConfigurationError("bbox needs four numbers: x_min x_max y_min y_max")
        cfg.inline_bbox = tuple(float(v) for v in parts)
    _validate(cfg)
    return cfg


def default_config(experiment):
    cfg = ExperimentConfig(experiment=experiment, **{
        k: (list(v) if isinstance(v, list) else v)
        for k, v in _DEFAULTS[experiment].items()})
    cfg.psi = "cos4t" if cfg.problem == "estimator-poly" else ""
    cfg.initial_mode = "interpolation" if experiment == "energy" else "projection"
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {cfg.experiment!r}")
    if cfg.experiment != "converge-pq" and not cfg.q:
        raise ConfigurationError("q list must not be empty")
    for name, values in (("p", cfg.p), ("mesh", cfg.mesh), ("tau", cfg.tau)):
        if not values:
            raise ConfigurationError(f"{name} list must not be empty")
    if any(v <= 0 for v in cfg.tau):
        raise ConfigurationError("tau values must be positive")
    if any(v < 1 for v in cfg.p + cfg.mesh):
        raise ConfigurationError("p and mesh values must be >= 1")
    if cfg.samples_per_slab < 3:
        raise ConfigurationError("samples_per_slab must be >= 3")
    if cfg.problem == "inline" and not cfg.inline_u:
        raise ConfigurationError("inline problems need a u = <expression> line")


def _make_problem(cfg):
    if cfg.problem == "inline":
        return inline_problem(cfg.inline_u, c=cfg.inline_c,
                              bbox=cfg.inline_bbox, t_final=cfg.t_final)
    return make_preset(cfg.problem, cfg.psi or None)


def _cells(cfg):
    """Deterministic run matrix for an experiment config."""
    cells = []
    if cfg.experiment == "converge-pq":
        for p in cfg.p:
            cells.append(dict(p=p, q=p, nx=cfg.mesh[0], tau=cfg.tau[0]))
    elif cfg.experiment in ("solve", "energy"):
        cells.append(dict(p=cfg.p[0], q=cfg.q[0], nx=cfg.mesh[0], tau=cfg.tau[0]))
    elif cfg.experiment == "converge-h":
        for p in cfg.p:
            for q in cfg.q:
                for nx in cfg.mesh:
                    cells.append(dict(p=p, q=q, nx=nx, tau=cfg.tau[0]))
    else:  # converge-tau, estimate
        for p in cfg.p:
            for q in cfg.q:
                for tau in cfg.tau:
                    cells.append(dict(p=p, q=q, nx=cfg.mesh[0], tau=tau))
    return cells


def run_cell(cfg, cell):
    """Solve one run-matrix cell and return its CSV row values."""
    problem = _make_problem(cfg)
    mesh = build_structured_mesh(cell["nx"], cell["nx"], problem.bbox)
    space = build_space(mesh, cell["p"])
    n_slabs = round(cfg.t_final / cell["tau"])
    if n_slabs < 1 or abs(n_slabs * cell["tau"] - cfg.t_final) > 1e-9 * cfg.t_final:
        raise ConfigurationError(
            f"tau = {cell['tau']} does not divide the final time {cfg.t_final}")
    partition = uniform_time_partition(cfg.t_final, n_slabs)
    disc = Discretization(space, partition, cell["q"], method=cfg.method,
                          bc_mode=cfg.bc_mode, initial_mode=cfg.initial_mode)
    try:
        sol = solve(problem, disc)
    except SolverFailure as exc:
        raise SolverFailure(
            f"cell p={cell['p']} q={cell['q']} mesh={cell['nx']} "
            f"tau={cell['tau']}: {exc}", residual=exc.residual) from exc

    row = dict(experiment=cfg.experiment, method=cfg.method, bc_mode=cfg.bc_mode,
               p=cell["p"], q=cell["q"], h=mesh_size(mesh), tau=cell["tau"],
               err_u=None, err_ustar=None, err_v=None, err_gradu=None,
               eta=None, osc_f=None, effectivity=None, energy_drift=None)
    if problem.has_exact():
        rep = compute_error_report(sol, problem, cfg.samples_per_slab)
        row.update(err_u=rep.err_u, err_ustar=rep.err_ustar,
                   err_v=rep.err_v, err_gradu=rep.err_gradu)
    if cfg.experiment == "estimate":
        br = compute_estimator(sol, problem.f, problem.c,
                               samples_per_slab=cfg.samples_per_slab,
                               singular_at_zero=problem.singular_at_zero)
        eff = effectivity_index(br.eta, row["err_u"]) if row["err_u"] else None
        row.update(eta=br.eta, osc_f=br.osc_f,
                   effectivity=None if eff is None or math.isnan(eff) else eff)
    energies = energy_trace(sol, problem.c)
    if energies[0] > 0:
        row["energy_drift"] = float(np.abs(energies - energies[0]).max() / energies[0])
    row["dofs"] = 2 * space.n_dofs * (cell["q"] * n_slabs + 1)
    return row


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.11e}"
    return str(value)


def _write_results(rows, out_dir):
    path = out_dir / "results.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, row in enumerate(rows):
            writer.writerow([_fmt(row.get(c)) if c != "run_id" else f"r{i:03d}"
                             for c in CSV_COLUMNS])
    return path


_RATE_QUANTITIES = ("err_u", "err_ustar", "err_v", "err_gradu")


def _rates_report(cfg, rows):
    lines = [f"experiment: {cfg.experiment}", ""]
    if cfg.experiment == "converge-h":
        for p in cfg.p:
            group = [r for r in rows if r["p"] == p]
            lines.append(f"p = {p}, q = {group[0]['q']} (rates in h)")
            lines += _pairwise_block(group, "h", [r["h"] for r in group])
    elif cfg.experiment in ("converge-tau", "estimate"):
        quantities = _RATE_QUANTITIES if cfg.experiment == "converge-tau" \
            else ("err_u", "eta", "osc_f")
        for p in cfg.p:
            for q in cfg.q:
                group = [r for r in rows if r["p"] == p and r["q"] == q]
                if not group:
                    continue
                lines.append(f"p = {p}, q = {q} (rates in tau)")
                lines += _pairwise_block(group, "tau", [r["tau"] for r in group],
                                         quantities)
                if cfg.experiment == "estimate":
                    effs = [r["effectivity"] for r in group if r["effectivity"]]
                    if effs:
                        lines.append(f"  effectivity min {min(effs):.3f} "
                                     f"max {max(effs):.3f} ratio {max(effs)/min(effs):.3f}")
    elif cfg.experiment == "converge-pq":
        lines.append("p = q sweep at fixed mesh and time step (errors vs DOFs)")
        for r in rows:
            lines.append(f"  p=q={r['p']:2d} dofs={r['dofs']:8d} "
                         + " ".join(f"{k}={_fmt(r[k])}" for k in _RATE_QUANTITIES))
    elif cfg.experiment == "energy":
        lines.append(f"energy drift: {_fmt(rows[0]['energy_drift'])}")
    else:
        for r in rows:
            lines.append("  " + " ".join(f"{k}={_fmt(r[k])}" for k in _RATE_QUANTITIES))
    return "\n".join(lines) + "\n"


def _pairwise_block(group, res_name, resolutions, quantities=_RATE_QUANTITIES):
    lines = []
    for r in group:
        lines.append(f"  {res_name}={_fmt(r[res_name])} "
                     + " ".join(f"{k}={_fmt(r.get(k))}" for k in quantities))
    if len(group) >= 2:
        for k in quantities:
            errs = [r.get(k) for r in group]
            if any(e is None for e in errs):
                continue
            rates = convergence_rates(resolutions, errs)
            txt = " ".join("n/a" if v is None else f"{v:.3f}" for v in rates)
            lines.append(f"  rates[{k}]: {txt}")
    lines.append("")
    return lines


def _check(cfg, rows):
    """Experiment-specific sanity thresholds used by --check."""
    failures = []
    if cfg.experiment == "converge-h":
        for p in cfg.p:
            group = [r for r in rows if r["p"] == p]
            if len(group) < 2:
                continue
            hs = [r["h"] for r in group]
            for k, target, tol in (("err_u", p + 1, 0.25), ("err_ustar", p + 1, 0.25),
                                   ("err_v", p + 1, 0.25), ("err_gradu", p, 0.25)):
                rate = convergence_rates(hs, [r[k] for r in group])[-1]
                if rate is None or abs(rate - target) > tol:
                    failures.append(f"p={p}: {k} last-pair rate {rate} not within "
                                    f"{target}+-{tol}")
    elif cfg.experiment == "converge-tau" and cfg.bc_mode == "projection":
        for q in cfg.q:
            group = [r for r in rows if r["q"] == q]
            if len(group) < 2:
                continue
            taus = [r["tau"] for r in group]
            checks = [("err_u", q + 1, 0.3), ("err_v", q + 1, 0.3),
                      ("err_gradu", q + 1, 0.3)]
            if q > 1:
                checks.append(("err_ustar", q + 2, 0.3))
            for k, target, tol in checks:
                rate = convergence_rates(taus, [r[k] for r in group])[-1]
                if rate is None or abs(rate - target) > tol:
                    failures.append(f"q={q}: {k} last-pair rate {rate} not within "
                                    f"{target}+-{tol}")
    elif cfg.experiment == "estimate":
        for r in rows:
            if r["err_u"] is not None and r["err_u"] > r["eta"] + r["osc_f"]:
                failures.append(f"q={r['q']} tau={r['tau']}: error exceeds eta + osc_f")
        for q in cfg.q:
            effs = [r["effectivity"] for r in rows if r["q"] == q and r["effectivity"]]
            if effs and max(effs) / min(effs) > 3.0:
                failures.append(f"q={q}: effectivity ratio {max(effs)/min(effs):.2f} > 3")
    elif cfg.experiment == "energy":
        drift = rows[0]["energy_drift"]
        if drift is None or drift > 1e-10:
            failures.append(f"energy drift {drift} exceeds 1e-10")
    elif cfg.experiment == "converge-pq":
        errs = [r["err_u"] for r in rows]
        if any(b >= a for a, b in zip(errs, errs[1:])):
            failures.append("err_u not strictly decreasing in p = q")
    return failures


def _run_cell_star(args):
    return run_cell(*args)


def run_experiment(cfg, jobs=1, check=False):
    """Execute the run matrix; write results.csv, rates.txt, run.log.

    Returns the process exit code (0 ok, 4 when --check thresholds fail).
    """
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = _cells(cfg)
    log_lines = [f"experiment {cfg.experiment}: {len(cells)} cells, "
                 f"problem {cfg.problem}{(' psi=' + cfg.psi) if cfg.psi else ''}"]
    start = time.time()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_star, [(cfg, cell) for cell in cells]))
        log_lines += [f"  p={c['p']} q={c['q']} nx={c['nx']} tau={c['tau']} done"
                      for c in cells]
    else:
        rows = []
        for cell in cells:
            t0 = time.time()
            rows.append(run_cell(cfg, cell))
            log_lines.append(
                f"  p={cell['p']} q={cell['q']} nx={cell['nx']} tau={cell['tau']}"
                f" done in {time.time() - t0:.2f}s")
    csv_path = _write_results(rows, out_dir)
    (out_dir / "rates.txt").write_text(_rates_report(cfg, rows))
    log_lines.append(f"total {time.time() - start:.2f}s -> {csv_path}")
    failures = _check(cfg, rows) if check else []
    log_lines += [f"CHECK FAIL: {msg}" for msg in failures]
    (out_dir / "run.log").write_text("\n".join(log_lines) + "\n")
    for msg in failures:
        print(f"check failed: {msg}", file=sys.stderr)
    return 4 if failures else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wavext",
        description="Space-time FEM experiment driver for the acoustic wave equation")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None,
                        help="key = value config file (defaults are built in)")
        sp.add_argument("--out", type=str, default=None,
                        help="output directory (overrides the config)")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--check", action="store_true",
                        help="apply experiment-specific acceptance thresholds")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.experiment) if args.config \
            else default_config(args.experiment)
        if args.out:
            cfg = replace(cfg, out=args.out)
        return run_experiment(cfg, jobs=max(1, args.jobs), check=args.check)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
