"""Command-line front end: solve, diagnose, reproduce, envelope-table.

Exit codes: 0 success, 1 usage/configuration error, 2 solver
non-convergence, 3 a selected diagnostic threshold failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .diagnostics import (boundary_identity, moving_plane, neumann_trace,
                          p_function, pucci_check, viscosity_check,
                          write_csv_rows, write_json_report)
from .errors import PnslError
from .experiments import EXPERIMENTS, run_experiment, envelope_table
from .fields import load_checkpoint, save_checkpoint
from .geometry import classify_grid, domain_from_dict
from .operators import PParams
from .solver import ProblemSpec, SolverConfig, make_grid, residual, solve
from .viz import save_heatmap

__all__ = ["main", "parse_config", "RunConfig"]

_DOMAIN_KEYS = {
    "domain.kind", "domain.radius", "domain.center_x", "domain.center_y",
    "domain.inner_radius", "domain.outer_radius",
    "domain.semi_axis_x", "domain.semi_axis_y",
    "domain.half_length", "domain.cap_radius",
}
_PROBLEM_KEYS = {"problem.p", "problem.dimension", "problem.rhs",
                 "problem.dirichlet", "problem.neumann_target"}
_GRID_KEYS = {"grid.h"}
_SOLVER_KEYS = {"solver.epsilon", "solver.epsilon_factor", "solver.directions",
                "solver.damping", "solver.tolerance", "solver.max_iterations",
                "solver.scheme", "solver.interpolation", "solver.boundary",
                "solver.momentum", "solver.grad_floor"}
_DIAG_KEYS = {"diagnostics.boundary_samples", "diagnostics.probe_spacing",
              "diagnostics.max_symmetry_score", "diagnostics.tolerance",
              "diagnostics.selection"}
_OUTPUT_KEYS = {"output.directory"}
_ALL_KEYS = (_DOMAIN_KEYS | _PROBLEM_KEYS | _GRID_KEYS | _SOLVER_KEYS
             | _DIAG_KEYS | _OUTPUT_KEYS)


class RunConfig:
    """A validated flat-key run configuration."""

    def __init__(self, entries: dict):
        self.entries = dict(entries)

    @property
    def domain(self):
        desc = {k.split(".", 1)[1]: v for k, v in self.entries.items()
                if k.startswith("domain.")}
        return domain_from_dict(desc)

    @property
    def problem(self) -> ProblemSpec:
        e = self.entries
        return ProblemSpec(p=float(e["problem.p"]),
                           n=int(e.get("problem.dimension", 2)),
                           rhs=float(e.get("problem.rhs", 1.0)),
                           dirichlet=float(e.get("problem.dirichlet", 0.0)),
                           neumann_target=e.get("problem.neumann_target"))

    @property
    def h(self) -> float:
        return float(self.entries["grid.h"])

    @property
    def solver(self) -> SolverConfig:
        e = self.entries
        kwargs = {}
        mapping = {"solver.epsilon": "eps", "solver.epsilon_factor": "eps_factor",
                   "solver.directions": "directions", "solver.damping": "omega",
                   "solver.tolerance": "tolerance",
                   "solver.max_iterations": "max_iterations",
                   "solver.scheme": "scheme",
                   "solver.interpolation": "interpolation",
                   "solver.boundary": "boundary", "solver.momentum": "momentum",
                   "solver.grad_floor": "grad_floor"}
        for key, arg in mapping.items():
            if key in e and e[key] is not None:
                kwargs[arg] = e[key]
        if "directions" in kwargs:
            kwargs["directions"] = int(kwargs["directions"])
        if "max_iterations" in kwargs:
            kwargs["max_iterations"] = int(kwargs["max_iterations"])
        return SolverConfig(**kwargs)

    def diag(self, key: str, default):
        return self.entries.get(f"diagnostics.{key}", default)

    @property
    def output_dir(self) -> str:
        return str(self.entries.get("output.directory", "."))

    def to_json(self) -> str:
        return json.dumps(self.entries, indent=2, sort_keys=True)


def _key_line(text: str, key: str) -> int:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return lineno
    return 0


def parse_config(path: str) -> RunConfig:
    """Parse and validate a flat-JSON run config; unknown keys are rejected
    with a line-anchored message."""
    with open(path) as fh:
        text = fh.read()
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PnslError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(entries, dict):
        raise PnslError(f"{path}:1: config must be a flat JSON object")
    for key in entries:
        if key not in _ALL_KEYS:
            raise PnslError(f"{path}:{_key_line(text, key)}: unknown config key"
                            f" {key!r}")
    for required in ("domain.kind", "problem.p", "grid.h"):
        if required not in entries:
            raise PnslError(f"{path}:1: missing required key {required!r}")
    return RunConfig(entries)


def cmd_solve(args) -> int:
    config = parse_config(args.config)
    out_dir = args.out or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    domain = config.domain
    problem = config.problem
    solver_cfg = config.solver
    grid = make_grid(domain, config.h, solver_cfg)
    fld, report = solve(problem, domain, grid, solver_cfg)
    meta = problem.meta()
    meta["h"] = config.h
    save_checkpoint(os.path.join(out_dir, "field"), fld, domain, meta,
                    report.iterations)
    write_json_report(os.path.join(out_dir, "solve_report.json"), {
        "config": config.entries, "report": report.to_dict()})
    print(f"solved: {report.iterations} iterations, final update "
          f"{report.final_update:.3e}, residual {report.sup_residual:.3e}, "
          f"converged={report.converged}")
    return 0 if report.converged else 2


def _reclassify(fld, domain, header):
    eps = fld.meta.get("eps") or 3.0 * fld.grid.h
    cls = classify_grid(domain, fld.grid, eps)
    fld.classification = cls
    fld.trusted = cls.sd <= 0
    return fld


def cmd_diagnose(args) -> int:
    fld, domain, header = load_checkpoint(args.checkpoint)
    prob_meta = header.get("problem", {})
    p = float(prob_meta.get("p", 2.0))
    problem = ProblemSpec(p=p, rhs=float(prob_meta.get("rhs", 1.0)),
                          dirichlet=float(prob_meta.get("dirichlet", 0.0))
                          if prob_meta.get("dirichlet") != "callable" else 0.0)
    params = PParams(p=p)
    _reclassify(fld, domain, header)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    selected = args.checks.split(",") if args.checks else ["symmetry"]
    payload = {"checkpoint": args.checkpoint, "selected": selected,
               "thresholds": {}}
    failed = False

    if "symmetry" in selected:
        trace = neumann_trace(fld, domain, args.boundary_samples, problem=problem)
        payload["symmetry"] = trace.to_dict()
        write_csv_rows(os.path.join(out_dir, "neumann_trace.csv"), trace.rows)
        if args.max_symmetry_score is not None:
            payload["thresholds"]["max_symmetry_score"] = args.max_symmetry_score
            if not (trace.score < args.max_symmetry_score):
                failed = True
    if "viscosity" in selected:
        rep = viscosity_check(fld, params)
        payload["viscosity"] = rep.to_dict()
        if not rep.passed:
            failed = True
    if "pucci" in selected:
        rep = pucci_check(fld, params, K=abs(problem.rhs))
        payload["pucci"] = rep.to_dict()
        if not rep.passed:
            failed = True
    if "identity" in selected:
        res, rows = boundary_identity(fld, domain, params,
                                      args.boundary_samples, problem=problem)
        worst = float(np.max(np.abs(res))) if len(res) else math.nan
        payload["identity"] = {"max_residual": worst}
        write_csv_rows(os.path.join(out_dir, "boundary_identity.csv"), rows)
        if args.max_identity_residual is not None:
            payload["thresholds"]["max_identity_residual"] = args.max_identity_residual
            if not (worst < args.max_identity_residual):
                failed = True
    if "pfunction" in selected and (p == 2.0 or math.isinf(p)):
        pf = p_function(fld, params)
        payload["pfunction"] = pf.to_dict()
        save_heatmap(pf.field, os.path.join(out_dir, "p_function.svg"),
                     title="P-function")
    if "movingplane" in selected:
        rows = []
        for k in range(4):
            th = math.pi * k / 4.0
            for r in moving_plane(fld, domain, (math.cos(th), math.sin(th)),
                                  (0.0, 0.2)):
                r["direction"] = th
                rows.append(r)
        payload["movingplane"] = rows

    save_heatmap(fld, os.path.join(out_dir, "field.svg"), title="u")
    res_sup, res_masked = residual(fld, problem)
    payload["residual"] = {"sup": res_sup, "masked_fraction": res_masked}
    write_json_report(os.path.join(out_dir, "diagnostics.json"), payload)
    print(json.dumps({k: v for k, v in payload.items() if k != "checkpoint"},
                     indent=2, sort_keys=True, default=str))
    return 3 if failed else 0


def cmd_reproduce(args) -> int:
    name = args.experiment
    if name not in EXPERIMENTS:
        print(f"unknown experiment {name!r}; valid names: "
              + ", ".join(sorted(EXPERIMENTS)), file=sys.stderr)
        return 1
    result = run_experiment(name, quick=args.quick)
    print(result.table())
    return 0 if result.passed else 3


def cmd_envelope_table(args) -> int:
    result = envelope_table(quick=args.quick)
    print(result.table())
    return 0 if result.passed else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pnsl",
        description="Normalized p-Laplacian Dirichlet solver and symmetry lab")
    parser.add_argument("--threads", type=int, default=None,
                        help="numba thread count (results are thread-invariant)")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; deterministic paths ignore it")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a run config")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_diag = sub.add_parser("diagnose", help="run diagnostics on a checkpoint")
    p_diag.add_argument("checkpoint")
    p_diag.add_argument("--out", default=".")
    p_diag.add_argument("--checks", default="symmetry",
                        help="comma list: symmetry,viscosity,pucci,identity,"
                             "pfunction,movingplane")
    p_diag.add_argument("--boundary-samples", type=int, default=128)
    p_diag.add_argument("--max-symmetry-score", type=float, default=None)
    p_diag.add_argument("--max-identity-residual", type=float, default=None)
    p_diag.set_defaults(func=cmd_diagnose)

    p_rep = sub.add_parser("reproduce", help="run a named experiment")
    p_rep.add_argument("experiment")
    p_rep.add_argument("--quick", action="store_true",
                       help="coarse, fast variant for smoke testing")
    p_rep.set_defaults(func=cmd_reproduce)

    p_env = sub.add_parser("envelope-table",
                           help="closed-form envelopes vs brute force")
    p_env.add_argument("--quick", action="store_true")
    p_env.set_defaults(func=cmd_envelope_table)

    args = parser.parse_args(argv)
    if args.threads:
        import numba
        numba.set_num_threads(args.threads)
    try:
        return args.func(args)
    except PnslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
