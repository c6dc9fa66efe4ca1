"""Command-line front end driven by a JSON config.

Subcommands: ``solve``, ``tensors``, ``indicatrix`` and ``compare``. Exit
status is 0 on success, 1 for invalid input and 2 when a solver does not
converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from . import geometry
from .errors import BiasedSplineError, ConfigError
from .solvers import (DEFAULT_MAX_ITER, DEFAULT_NODES, DEFAULT_TOLERANCE, BoundaryProblem, SolverReport,
                      solve, solve_collocation, sup_distance)
from .hamiltonian import DEFAULT_STEPS
from .systems import BUILTIN_NAMES, builtin, system_from_expressions

log = logging.getLogger("biasedsplines")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2
METHODS = ("shooting", "collocation", "both")
FORMS = ("metric", "cometric", "induced")


def fmt(x) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------- config


def _require(block: Mapping, key: str, where: str):
    if key not in block:
        raise ConfigError("missing required field", f"{where}.{key}")
    return block[key]


def _vector(value, d, field):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a list of numbers", field) from None
    if arr.ndim == 0:
        arr = arr[None]
    if arr.shape != (d,):
        raise ConfigError(f"expected {d} components, got {arr.size}", field)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("components must be finite", field)
    return arr


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "config") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "config") from None
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object", "config")
    return cfg


def build_system(cfg: Mapping):
    block = _require(cfg, "system", "config")
    if not isinstance(block, dict):
        raise ConfigError("must be an object", "system")
    has_builtin = "builtin" in block
    has_inline = "metric" in block or "cometric" in block
    if has_builtin == has_inline:
        raise ConfigError("give exactly one of 'builtin' or inline 'metric'/'cometric'", "system")
    try:
        if has_builtin:
            name = block["builtin"]
            if name not in BUILTIN_NAMES:
                raise ConfigError(f"unknown builtin {name!r}; expected one of {', '.join(BUILTIN_NAMES)}",
                                  "system.builtin")
            return builtin(name, block.get("params") or {})
        dim = _require(block, "dim", "system")
        if not isinstance(dim, int) or dim < 1:
            raise ConfigError("must be a positive integer", "system.dim")
        return system_from_expressions(
            dim,
            _require(block, "metric", "system"),
            _require(block, "cometric", "system"),
            params=block.get("params"),
            coords=block.get("coords"),
            name=block.get("name", "expression"),
        )
    except ConfigError:
        raise
    except BiasedSplineError as exc:
        raise ConfigError(str(exc), "system") from None


def build_problem(cfg: Mapping, system) -> BoundaryProblem:
    block = _require(cfg, "problem", "config")
    solver = cfg.get("solver", {})
    d = system.dim
    q0 = _vector(_require(block, "q0", "problem"), d, "problem.q0")
    qf = _vector(_require(block, "qf", "problem"), d, "problem.qf")
    v0_raw, vf_raw = block.get("v0", "FREE"), block.get("vf", "FREE")
    free = [v == "FREE" or v is None for v in (v0_raw, vf_raw)]
    if free[0] != free[1]:
        raise ConfigError("v0 and vf must be both given or both FREE", "problem.v0")
    v0 = None if free[0] else _vector(v0_raw, d, "problem.v0")
    vf = None if free[1] else _vector(vf_raw, d, "problem.vf")
    T = block.get("T", 1.0)
    if not isinstance(T, (int, float)) or not T > 0:
        raise ConfigError("must be a positive number", "problem.T")
    steps = solver.get("steps", DEFAULT_STEPS)
    if not isinstance(steps, int) or steps < 2:
        raise ConfigError("must be an integer >= 2", "solver.steps")
    tol = solver.get("tolerance", DEFAULT_TOLERANCE)
    if not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigError("must be positive", "solver.tolerance")
    max_iter = solver.get("max_iter", DEFAULT_MAX_ITER)
    if not isinstance(max_iter, int) or max_iter < 1:
        raise ConfigError("must be a positive integer", "solver.max_iter")
    try:
        return BoundaryProblem(system, q0, qf, v0, vf, float(T), steps, float(tol), max_iter)
    except (BiasedSplineError, ValueError) as exc:
        raise ConfigError(str(exc), "problem") from None


def _solver_options(cfg, problem):
    block = cfg.get("solver", {})
    method = block.get("method", "shooting")
    if method not in METHODS:
        raise ConfigError(f"expected one of {', '.join(METHODS)}", "solver.method")
    nodes = block.get("nodes", DEFAULT_NODES)
    if not isinstance(nodes, int) or nodes < 8:
        raise ConfigError("must be an integer >= 8", "solver.nodes")
    seeds = block.get("seeds")
    if seeds is not None:
        width = problem.dim if problem.is_geodesic else 2 * problem.dim
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("must be a nonempty list", "solver.seeds")
        seeds = [_vector(s, width, f"solver.seeds[{i}]") for i, s in enumerate(seeds)]
    return method, nodes, seeds


def build_grid(cfg: Mapping, system):
    block = _require(cfg, "grid", "config")
    ranges = _require(block, "ranges", "grid")
    d = system.dim
    if not isinstance(ranges, list) or len(ranges) != d:
        raise ConfigError(f"expected {d} [low, high, count] triples", "grid.ranges")
    axes = []
    for i, r in enumerate(ranges):
        if not isinstance(r, list) or len(r) != 3:
            raise ConfigError("expected [low, high, count]", f"grid.ranges[{i}]")
        lo, hi, n = r
        if not isinstance(n, int) or n < 1:
            raise ConfigError("count must be a positive integer", f"grid.ranges[{i}]")
        if not all(isinstance(x, (int, float)) for x in (lo, hi)) or hi < lo:
            raise ConfigError("bounds must be numbers with low <= high", f"grid.ranges[{i}]")
        axes.append(np.linspace(lo, hi, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    for q in points:
        if not system.in_domain(q):
            raise ConfigError(f"grid point {q.tolist()} lies outside the chart domain", "grid.ranges")
    return points


# ---------------------------------------------------------------- output


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def trajectory_header(d):
    header = ["t"]
    for name in ("q", "v", "a", "F", "E", "alpha", "p"):
        header += [f"{name}{i + 1}" for i in range(d)]
    return header + ["H", "cost_density"]


def write_trajectory(path: Path, traj, stride: int = 1):
    forces = traj.forces
    cols = [traj.t[:, None], traj.q, traj.v, forces.a, forces.force, forces.effort, traj.alpha, traj.p,
            traj.hamiltonian[:, None], forces.cost_density[:, None]]
    table = np.concatenate(cols, axis=1)
    idx = np.arange(0, len(table), stride)
    if idx[-1] != len(table) - 1:
        idx = np.append(idx, len(table) - 1)
    _write_csv(path, trajectory_header(traj.dim), table[idx])


def read_trajectory(path):
    """Load a trajectory CSV into a dict of column arrays keyed by header name."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    return {name: data[:, i] for i, name in enumerate(header)}


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    return repr(value)


def summary_dict(report: SolverReport) -> dict:
    params = report.shooting_parameters
    return {
        "converged": report.converged,
        "method": report.method,
        "iterations": report.iterations,
        "residual_norm": report.residual_norm,
        "cost": report.cost,
        "shooting_parameters": None if params is None else [float(x) for x in params],
        "wall_time_ms": report.details.get("wall_time_ms"),
        "message": report.message,
        "diagnostics": _jsonable({k: v for k, v in report.details.items() if k != "wall_time_ms"}),
    }


def _write_json(path: Path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- commands


def _run_solvers(cfg, problem, method, nodes, seeds):
    reports = []
    if method in ("shooting", "both"):
        kwargs = {"seeds": seeds} if problem.is_geodesic and seeds else {}
        if seeds and not problem.is_geodesic:
            kwargs = {"seed": seeds[0]}
        reports.append(solve(problem, **kwargs))
    if method in ("collocation", "both"):
        reports.append(solve_collocation(problem, nodes))
    return reports


def cmd_solve(cfg, out: Path) -> int:
    system = build_system(cfg)
    problem = build_problem(cfg, system)
    method, nodes, seeds = _solver_options(cfg, problem)
    stride = cfg.get("output", {}).get("stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise ConfigError("must be a positive integer", "output.stride")
    reports = _run_solvers(cfg, problem, method, nodes, seeds)
    out.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        name = "trajectory.csv" if rep is reports[0] else f"trajectory_{rep.method}.csv"
        if rep.trajectory is not None:
            write_trajectory(out / name, rep.trajectory, stride)
    summary = summary_dict(reports[0])
    if len(reports) > 1:
        summary["runs"] = [summary_dict(r) for r in reports]
    _write_json(out / "summary.json", summary)
    for rep in reports:
        log.info("%s: converged=%s cost=%.12g residual=%.3g", rep.method, rep.converged, rep.cost,
                 rep.residual_norm)
    return EXIT_OK if all(r.converged for r in reports) else EXIT_NOT_CONVERGED


def cmd_compare(cfg, out: Path) -> int:
    system = build_system(cfg)
    problem = build_problem(cfg, system)
    _, nodes, seeds = _solver_options(cfg, problem)
    shoot, col = _run_solvers(cfg, problem, "both", nodes, seeds)
    out.mkdir(parents=True, exist_ok=True)
    for rep, name in ((shoot, "trajectory.csv"), (col, "trajectory_collocation.csv")):
        if rep.trajectory is not None:
            write_trajectory(out / name, rep.trajectory)
    gap = abs(col.cost - shoot.cost) / max(abs(shoot.cost), 1e-300)
    dist = sup_distance(col, shoot) if shoot.trajectory and col.trajectory else None
    report = {
        "shooting": summary_dict(shoot),
        "collocation": summary_dict(col),
        "cost_gap_relative": gap if shoot.cost != 0 else abs(col.cost),
        "sup_distance": dist,
    }
    _write_json(out / "compare.json", report)
    log.info("cost gap %.3e, sup distance %s", report["cost_gap_relative"], dist)
    return EXIT_OK if shoot.converged and col.converged else EXIT_NOT_CONVERGED


def tensor_header(d):
    pairs = [f"{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    header = [f"q{i + 1}" for i in range(d)]
    for name in ("M", "Nt", "N", "Hs"):
        header += [name + p for p in pairs]
    header += [f"G{k + 1}{i + 1}{j + 1}" for k in range(d) for i in range(d) for j in range(d)]
    header.append("tau_maxabs")
    if d == 2:
        header.append("sectional_curvature")
    return header


def cmd_tensors(cfg, out: Path) -> int:
    system = build_system(cfg)
    points = build_grid(cfg, system)
    d = system.dim
    geo = geometry.local_geometry(system.metric, system.cometric, points, with_curvature=d == 2)
    rows = []
    for n, q in enumerate(points):
        row = list(q)
        for mat in (geo.metric, geo.cometric, geo.induced, geo.hstar):
            row += list(mat[n].ravel())
        row += list(geo.gamma[n].ravel())
        row.append(np.max(np.abs(geo.tau[n])))
        if d == 2:
            row.append(geometry.sectional_curvature(system.metric, q))
        rows.append(row)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "tensors.csv", tensor_header(d), rows)
    return EXIT_OK


def cmd_indicatrix(cfg, out: Path) -> int:
    system = build_system(cfg)
    if system.dim != 2:
        raise ConfigError("indicatrices need a 2-dimensional system", "system")
    points = build_grid(cfg, system)
    block = cfg.get("indicatrix", {})
    which = block.get("which", "metric")
    if which not in FORMS:
        raise ConfigError(f"expected one of {', '.join(FORMS)}", "indicatrix.which")
    count = block.get("count", 32)
    if not isinstance(count, int) or count < 1:
        raise ConfigError("must be a positive integer", "indicatrix.count")
    M = system.metric.value(points)
    forms = {"metric": lambda: M, "cometric": lambda: system.cometric.value(points),
             "induced": lambda: M @ system.cometric.value(points) @ M}
    A = forms[which]()
    rows = []
    for n, q in enumerate(points):
        for k, u in enumerate(geometry.indicatrix_samples(A[n], count)):
            rows.append([n, q[0], q[1], k, u[0], u[1]])
    out.mkdir(parents=True, exist_ok=True)
    header = ["point", "q1", "q2", "k", "u1", "u2"]
    with open(out / "indicatrix.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([str(int(r[0]))] + [fmt(x) for x in r[1:3]] + [str(int(r[3]))] + [fmt(x) for x in r[4:]])
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "tensors": cmd_tensors, "indicatrix": cmd_indicatrix, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasedsplines", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default="./out", help="output directory (default ./out)")
        p.add_argument("--verbose", action="store_true", help="log solver progress to stderr")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BiasedSplineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
