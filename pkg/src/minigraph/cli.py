"""Command-line front end.

Every subcommand reads a JSON config (``--config``), writes its data files
and a JSON report into ``--out`` and exits with

* 0 when every check in the report meets its tolerance,
* 1 when a check fails,
* 2 when the config is malformed (nothing is written),
* 3 when the numerics break down (a partial report is written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .barrier import (BarrierError, boundary_gradient_constant, build_profile, choose_r0,
                      phi_second, supersolution_check)
from .config import (EXPERIMENTS, ConfigError, build_metric, build_mesh, build_problem,
                     build_solver_config, load_config)
from .estimates import EstimateReport, PreconditionError, rigidity_experiment
from .fieldio import FieldFormatError, atomic_write, read_field, write_field
from .geometry import (GeometryError, compute_quantities, det_identity_check, inverse_identity_check,
                       jacobi_residual)
from .metric import RotationallySymmetricMetric
from .oracle import ShootingError, discrete_area, first_variation_check, minimize_area, radial_shoot
from .solver import (SolverError, annulus_family, continuation_solve, maximum_principle_check,
                     newton_solve, solution_from_field)

log = logging.getLogger("minigraph")

__all__ = ["main", "build_parser", "TOLERANCES"]

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

TOLERANCES = {
    "max_principle_slack": -1e-12,
    "gradient_max_slack": -1e-8,
    "interior_slack": 0.0,
    "ordering_slack": -1e-10,
    "identity": 1e-12,
    "oracle_sup_diff": 1e-6,
    "first_variation": 1e-12,
    "rigidity_variation": 0.2,
    "barrier_margin": 0.0,
}

_DEFAULT_NAMES = {
    "solve": ("solution.csv", "report.json"),
    "barrier": ("barrier_profile.csv", "barrier_certificate.json"),
    "annulus-family": ("family.csv", "family_report.json"),
    "estimate-check": (None, "estimate_report.json"),
    "oracle-compare": ("oracle_newton.csv", "oracle_report.json"),
    "geometry-report": ("geometry.csv", "geometry_report.json"),
    "rigidity": ("rigidity.csv", "rigidity_report.json"),
}


class NumericalFailure(RuntimeError):
    """Raised after a partial report has been assembled."""


# -- report plumbing ----------------------------------------------------------

def _clean(obj):
    """JSON-ready copy with floats fixed to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


class Report:
    def __init__(self, experiment: str):
        self.experiment = experiment
        self.checks: list[dict] = []
        self.results: dict = {}
        self.status = "pass"
        self.message = ""

    def check(self, name: str, value: float, tolerance: float, relation: str) -> bool:
        """Record ``value >= tolerance`` (relation "ge"), ``>`` ("gt") or ``<=`` ("le")."""
        value = float(value)
        ok = {"ge": value >= tolerance, "gt": value > tolerance, "le": value <= tolerance}[relation]
        self.checks.append({"name": name, "value": value, "tolerance": tolerance,
                            "relation": relation, "passed": bool(ok)})
        if not ok and self.status == "pass":
            self.status = "fail"
        return ok

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "status": self.status, "message": self.message,
                "checks": self.checks, "results": self.results,
                "meta": {"package": "minigraph", "version": __version__}}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Outputs:
    def __init__(self, experiment: str, out: str | None, cfg: dict, report_path: str | None = None):
        data_name, report_name = _DEFAULT_NAMES[experiment]
        names = cfg.get("outputs", {})
        out_path = Path(out) if out else Path(".")
        if experiment == "solve" and out_path.suffix == ".csv":
            # ``solve --out solution.csv`` names the solution file directly
            self.data = out_path
            base = out_path.parent
        else:
            base = out_path
            self.data = base / names.get("data", data_name) if data_name else None
        self.report = Path(report_path) if report_path else base / names.get("report", report_name)

    def write_report(self, report: Report) -> None:
        atomic_write(self.report, dumps_report(report.as_dict()))


# -- experiments --------------------------------------------------------------

def _solve(cfg, args):
    problem = build_problem(cfg, args.seed)
    config = build_solver_config(cfg)
    if cfg.get("solver", {}).get("continuation", False):
        res = continuation_solve(problem, config)
        return res.solution, res.gradient_sup_trace
    return newton_solve(problem, config=config), None


def _estimate_block(report: Report, solution, R=None) -> None:
    est = EstimateReport.evaluate(solution, R)
    report.results["estimates"] = est.__dict__
    report.check("gradient_max_slack", est.gradient_max_slack, TOLERANCES["gradient_max_slack"], "ge")
    if est.interior_slack is not None:
        report.check("interior_slack", est.interior_slack, TOLERANCES["interior_slack"], "gt")


def _solution_summary(report: Report, sol) -> None:
    report.results.update({
        "residual_norm": sol.residual_norm,
        "iterations": sol.newton_iterations_per_step,
        "gradient_sup": sol.gradient_sup,
        "min_u": sol.min_u,
        "max_u": sol.max_u,
        "converged": sol.converged,
    })


def run_solve(cfg, args, outputs: Outputs, report: Report):
    sol, trace = _solve(cfg, args)
    _solution_summary(report, sol)
    if trace is not None:
        report.results["gradient_sup_trace"] = trace
    if not sol.converged:
        report.message = sol.message or "Newton did not converge"
        raise NumericalFailure(report.message)
    report.check("residual_norm", sol.residual_norm, build_solver_config(cfg).newton_tol, "le")
    report.check("max_principle_slack", maximum_principle_check(sol), TOLERANCES["max_principle_slack"], "ge")
    _estimate_block(report, sol, cfg.get("estimate", {}).get("R"))
    write_field(outputs.data, sol.u)


def run_barrier(cfg, args, outputs: Outputs, report: Report):
    metric = build_metric(cfg)
    if not isinstance(metric, RotationallySymmetricMetric):
        raise ConfigError("metric: the barrier needs a rotationally symmetric metric")
    block = cfg.get("barrier", {})
    n = int(block.get("n", metric.dim))
    if n != metric.dim:
        raise ConfigError("barrier/n: must equal metric/dim")
    r0 = block.get("r0", "auto")
    if r0 == "auto":
        r0 = choose_r0(metric, None, None, float(block.get("upper_cap", 1.0)), n)
    r0 = float(r0)
    if 4 * r0 > metric.domain.bounds[0][1]:
        raise ConfigError("barrier: the annulus 2 r0 <= r <= 4 r0 must lie inside metric/domain")
    profile = build_profile(r0, n, samples=int(block.get("samples", 401)))
    chk = supersolution_check(metric, profile)
    c2 = boundary_gradient_constant(profile)
    report.results.update({"r0": r0, "n": n, "delta0": profile.delta0, "C2": c2,
                           "min_margin": chk.min_margin, "certified": chk.certified})
    report.check("barrier_margin", chk.min_margin, TOLERANCES["barrier_margin"], "gt")
    r = profile.r[1:]
    lap = metric.laplacian_of_distance(r)
    p1, p2 = profile.phi_prime[1:], phi_second(r, r0, n)
    mw = p1 * lap + p2 / (1.0 + p1 * p1)
    rows = zip(r, profile.phi[1:], p1, mw)
    atomic_write(outputs.data, _csv_text(["r", "phi", "phi_prime", "Mw"], rows))


def run_family(cfg, args, outputs: Outputs, report: Report):
    metric = build_metric(cfg)
    fam = cfg["family"]
    r1 = float(fam["r1"])
    t = fam.get("t", "delta0")
    if t == "delta0":
        r0 = choose_r0(metric, None, None, float(fam.get("r0_cap", r1 / 2)))
        t = build_profile(r0, metric.dim, samples=3).delta0
        report.results["r0"] = r0
    t = float(t)
    report.results["t"] = t
    res = annulus_family(metric, r1, fam["outer_radii"], t, build_solver_config(cfg),
                         nodes_per_unit=int(fam.get("nodes_per_unit", 64)), threads=args.threads)
    values = res.values
    report.results.update({
        "outer_radii": [m.R for m in res.members],
        "u_at_2r1": values,
        "ratio_to_first": [v / values[0] if values[0] else 0.0 for v in values],
        "gradient_sup": [m.gradient_sup for m in res.members],
        "ordering_slack": res.ordering_slack,
        "iterations": [m.iterations for m in res.members],
    })
    if not res.converged:
        report.message = "a continuation step failed"
        raise NumericalFailure(report.message)
    oracle = [None] * len(values)
    if fam.get("oracle", True):
        oracle = [float(radial_shoot(metric, r1, m.R, t, r_eval=[r1, 2 * r1]).u[1]) for m in res.members]
        report.results["oracle_u_at_2r1"] = oracle
        report.results["oracle_diff"] = [abs(a - b) for a, b in zip(values, oracle)]
    for k, m in enumerate(res.members):
        report.check(f"max_principle_slack[{k}]", m.max_principle_slack, TOLERANCES["max_principle_slack"], "ge")
    for k, s in enumerate(res.ordering_slack):
        report.check(f"ordering_slack[{k}]", s, TOLERANCES["ordering_slack"], "ge")
    rows = [(m.R, math.log(m.R), m.u_at_2r1, m.gradient_sup, "" if o is None else o)
            for m, o in zip(res.members, oracle)]
    atomic_write(outputs.data, _csv_text(["R", "log_R", "u_at_2r1", "gradient_sup", "oracle_u_at_2r1"], rows))


def run_estimate(cfg, args, outputs: Outputs, report: Report):
    if args.solution:
        problem = build_problem(cfg, args.seed)
        field = read_field(args.solution, problem.mesh)
        sol = solution_from_field(problem, field)
    else:
        sol, _ = _solve(cfg, args)
    _solution_summary(report, sol)
    report.check("max_principle_slack", maximum_principle_check(sol), TOLERANCES["max_principle_slack"], "ge")
    _estimate_block(report, sol, cfg.get("estimate", {}).get("R"))


def run_oracle(cfg, args, outputs: Outputs, report: Report):
    problem = build_problem(cfg, args.seed)
    sol = newton_solve(problem, config=build_solver_config(cfg))
    if not sol.converged:
        report.message = sol.message
        raise NumericalFailure("Newton did not converge")
    block = cfg.get("oracle", {})
    desc = minimize_area(problem, tol=float(block.get("descent_tol", 1e-10)),
                         max_iter=int(block.get("max_iter", 200_000)), u0=problem.initial_guess())
    diff = float(np.max(np.abs(desc.u.values - sol.u.values)))
    fv = first_variation_check(problem, sol.u)
    report.results.update({
        "area_newton": discrete_area(problem, sol.u),
        "area_descent": desc.area,
        "sup_diff": diff,
        "descent_iterations": desc.iterations,
        "descent_converged": desc.converged,
        "first_variation_error": fv,
        "radial_diff": None,
    })
    report.check("oracle_sup_diff", diff, TOLERANCES["oracle_sup_diff"], "le")
    report.check("first_variation", fv, TOLERANCES["first_variation"], "le")
    b = cfg["boundary"]
    mesh = problem.mesh
    if (isinstance(problem.metric, RotationallySymmetricMetric) and b["type"] == "annulus"
            and float(b.get("inner", 0.0)) == 0.0):
        r = mesh.axes[0]
        prof = radial_shoot(problem.metric, r[0], r[-1], float(b.get("outer", 0.0)), r_eval=r)
        report.results["radial_diff"] = float(np.max(np.abs(sol.u.values - prof.u[:, None])))
    write_field(outputs.data, sol.u)


def run_geometry(cfg, args, outputs: Outputs, report: Report):
    if args.solution:
        metric = build_metric(cfg)
        u = read_field(args.solution, build_mesh(cfg, metric))
    else:
        if "boundary" not in cfg:
            raise ConfigError("geometry-report needs --solution or a boundary block to solve")
        sol, _ = _solve(cfg, args)
        if not sol.converged:
            raise NumericalFailure("Newton did not converge")
        metric, u = sol.problem.metric, sol.u
    q = compute_quantities(metric, u)
    jac = jacobi_residual(metric, u, q).values
    det_err = det_identity_check(metric, u, q)
    inv_err = inverse_identity_check(metric, u, q)
    gap = float(np.min(q.norm_A_sq - q.dim * q.mean_curvature ** 2))
    report.results.update({"det_identity_error": det_err, "inverse_identity_error": inv_err,
                           "jacobi_residual_sup": float(np.max(np.abs(jac))),
                           "min_normA2_minus_nH2": gap})
    report.check("det_identity", det_err, TOLERANCES["identity"], "le")
    report.check("inverse_identity", inv_err, TOLERANCES["identity"], "le")
    scale = max(1.0, float(np.max(q.norm_A_sq)))
    report.check("normA2_minus_nH2", gap, -TOLERANCES["identity"] * scale, "ge")
    x = u.mesh.coords()
    n1, n2 = u.mesh.shape
    rows = ((i, j, x[i, j, 0], x[i, j, 1], u.values[i, j], q.W[i, j], q.mean_curvature[i, j],
             q.norm_A_sq[i, j], q.angle[i, j], jac[i, j]) for i in range(n1) for j in range(n2))
    header = ["i", "j", "x1", "x2", "u", "W", "H", "normA2", "angle", "jacobi_residual"]
    atomic_write(outputs.data, _csv_text(header, rows))


def run_rigidity(cfg, args, outputs: Outputs, report: Report):
    block = cfg.get("rigidity", {})
    rep = rigidity_experiment(radii=tuple(block.get("radii", (4.0, 8.0, 16.0))),
                              epsilons=tuple(block.get("epsilons", (0.1, 0.01))),
                              amplitude=float(block.get("amplitude", 1.0)),
                              nodes=int(block.get("nodes", 65)), config=build_solver_config(cfg))
    report.results.update({
        "rows": [r.__dict__ for r in rep.rows],
        "variation": {repr(k): v for k, v in rep.variation.items()},
        "C_variation": {repr(k): v for k, v in rep.C_variation.items()},
    })
    if not rep.converged:
        raise NumericalFailure("a rigidity solve did not converge")
    for eps, v in rep.variation.items():
        report.check(f"harnack_variation[{eps!r}]", v, TOLERANCES["rigidity_variation"], "le")
    rows = [(r.R, r.eps, r.harnack_ratio, r.C, r.sup_ball) for r in rep.rows]
    atomic_write(outputs.data, _csv_text(["R", "eps", "harnack_ratio", "C", "sup_ball"], rows))


_RUNNERS = {
    "solve": run_solve,
    "barrier": run_barrier,
    "annulus-family": run_family,
    "estimate-check": run_estimate,
    "oracle-compare": run_oracle,
    "geometry-report": run_geometry,
    "rigidity": run_rigidity,
}

_NUMERIC_ERRORS = (NumericalFailure, SolverError, ShootingError, BarrierError, GeometryError,
                   PreconditionError, FloatingPointError, ArithmeticError)


def execute(experiment: str, args) -> int:
    try:
        cfg = load_config(args.config, None if experiment == "run" else experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if experiment == "run":
        experiment = cfg["experiment"]
    args.solution = getattr(args, "solution", None)
    outputs = Outputs(experiment, args.out, cfg, getattr(args, "report", None))
    report = Report(experiment)
    try:
        _RUNNERS[experiment](cfg, args, outputs, report)
    except (ConfigError, FieldFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        report.status = "error"
        report.message = report.message or str(exc)
        outputs.write_report(report)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    outputs.write_report(report)
    for c in report.checks:
        if not c["passed"]:
            print(f"check failed: {c['name']} = {c['value']:.6g} (tolerance {c['tolerance']:g}, {c['relation']})",
                  file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minigraph", description="Minimal graphs over Riemannian chart metrics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--out", default=".", help="output directory (solve also accepts a .csv path)")
    common.add_argument("--seed", type=int, default=0, help="seed for random boundary data")
    common.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + EXPERIMENTS:
        p = sub.add_parser(name, parents=[common])
        if name in ("solve", "run"):
            p.add_argument("--report", help="report JSON path (defaults to a file in --out)")
        if name in ("estimate-check", "geometry-report", "run"):
            p.add_argument("--solution", help="solution CSV written by 'solve'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return execute(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
