"""Command dispatch and deterministic CSV/JSON emission.

This is the only module that touches the file system.  All numeric cells
are written with 17 significant digits, so identical configurations give
byte-identical outputs regardless of the worker count.

Exit codes: 0 pass, 1 check failed, 2 configuration error,
3 inconclusive, 4 hypothesis/admissibility refused.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from scipy.stats import qmc

from .closed_forms import GaussianBarrier
from .config import ConfigError, RunConfig, parse_config, sweep_factory
from .experiments import (
    AdmissibilityRefused,
    HypothesisRefused,
    StudyError,
    StudyReport,
    comparison_study,
    exhaustion_study,
    fujita_sweep,
    monotone_in_amplitude,
    neumann_monotonicity_study,
    supersolution_bound_study,
)
from .integrator import BlowUp, GlobalUpTo, Inconclusive, Trace, run

__all__ = ["main", "dispatch"]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_REFUSED = 4


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _write_trace(path: Path, trace: Trace) -> None:
    rows = []
    for i in range(trace.n_samples):
        rows.append(
            [
                float(trace.times[i]),
                float(trace.dts[i]),
                float(trace.sup_norms[i]),
                float(np.max(trace.wall_values[i])),
                float(np.max(trace.cap_values[i])),
            ]
        )
    _write_csv(path, ["t", "dt", "sup_norm", "u_inner_boundary", "u_cap"], rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not math.isfinite(f) else f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n", newline="\n"
    )


def _emit_report(report: StudyReport, traces: dict[str, Trace], outdir: Path) -> StudyReport:
    artifacts = []
    for name in sorted(traces):
        p = outdir / f"trace_{name}.csv"
        _write_trace(p, traces[name])
        artifacts.append(str(p))
    report = replace(report, artifacts=tuple(artifacts) + (str(outdir / "study.json"),))
    _write_json(outdir / "study.json", asdict(report))
    return report


def _outcome_payload(outcome) -> dict:
    if isinstance(outcome, GlobalUpTo):
        return {"kind": "GlobalUpTo", "t_end": outcome.t_end, "decay_slope": outcome.decay_slope}
    if isinstance(outcome, BlowUp):
        return {
            "kind": "BlowUp",
            "t_detect": outcome.t_detect,
            "t_hat": outcome.t_hat,
            "t0_bound": outcome.t0_bound,
        }
    return {"kind": "Inconclusive", "reason": outcome.reason}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_simulate(cfg: RunConfig, outdir: Path, jobs: int) -> int:
    problem = cfg.build_problem(label="simulate")
    outcome, trace = run(problem, cfg.solver)
    _write_trace(outdir / "trace.csv", trace)
    _write_json(outdir / "run.json", _outcome_payload(outcome))
    return EXIT_INCONCLUSIVE if isinstance(outcome, Inconclusive) else EXIT_PASS


def _cmd_exhaust(cfg: RunConfig, outdir: Path, jobs: int) -> int:
    params = cfg.study.get("exhaustion", {})
    lengths = [float(x) for x in params.get("lengths", [cfg.length, 2 * cfg.length, 4 * cfg.length])]
    if sorted(lengths) != lengths or len(set(lengths)) != len(lengths):
        print("exhaustion lengths must increase strictly", file=sys.stderr)
        return EXIT_CONFIG
    base_l = lengths[0]
    problems = []
    for length in lengths:
        ratio = length / base_l
        intervals = round(cfg.intervals * ratio)
        if abs(intervals - cfg.intervals * ratio) > 1e-9:
            print(
                f"length {length} is not commensurate with the base spacing", file=sys.stderr
            )
            return EXIT_CONFIG
        problems.append(
            cfg.build_problem(length=length, intervals=intervals, label=f"L={length:g}")
        )
    report, traces = exhaustion_study(
        problems,
        cfg.solver,
        t_check=float(params.get("t_check", 1.0)),
        tail_tol=float(params.get("tail_tol", 1e-3)),
    )
    report = _emit_report(report, traces, outdir)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_compare(cfg: RunConfig, outdir: Path, jobs: int) -> int:
    params = cfg.study.get("comparison", {})
    phi_scale = float(params.get("phi_scale", 0.5))
    if not (0.0 < phi_scale <= 1.0):
        print(f"comparison phi_scale must lie in (0,1], got {phi_scale}", file=sys.stderr)
        return EXIT_CONFIG
    problem_neu = cfg.build_problem(neumann_wall=True, label="neumann")
    grid = problem_neu.grid
    psi = np.asarray(problem_neu.initial.values)
    from .problems import Problem, initial_field  # local import to keep module edges thin

    problem_dyn = Problem(
        grid,
        cfg.p,
        problem_neu.operator,
        _dynamical_wall(cfg, grid),
        problem_neu.cap,
        initial_field(grid, phi_scale * psi, ramp=False),
        label="dynamical",
    )
    kwargs = {}
    if "mono_tol" in params and params["mono_tol"] is not None:
        kwargs["mono_tol"] = float(params["mono_tol"])
    if "tracked_span" in params:
        kwargs["tracked_span"] = tuple(float(x) for x in params["tracked_span"])
    report, traces = comparison_study(problem_dyn, problem_neu, cfg.solver, **kwargs)
    report = _emit_report(report, traces, outdir)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _dynamical_wall(cfg: RunConfig, grid):
    from .discretization import dynamical_closure, neumann_closure

    if cfg.sigma is None:
        return neumann_closure("wall")
    return dynamical_closure(cfg.sigma, grid, grid.domain.boundary_ids[0])


def _cmd_neumann_mono(cfg: RunConfig, outdir: Path, jobs: int) -> int:
    params = cfg.study.get("monotonicity", {})
    problem = cfg.build_problem(neumann_wall=True, label="neumann")
    kwargs = {}
    if "mono_tol" in params and params["mono_tol"] is not None:
        kwargs["mono_tol"] = float(params["mono_tol"])
    if "tracked_span" in params:
        kwargs["tracked_span"] = tuple(float(x) for x in params["tracked_span"])
    try:
        report, traces = neumann_monotonicity_study(problem, cfg.solver, **kwargs)
    except HypothesisRefused as exc:
        payload = {"refused": str(exc)}
        if exc.report is not None:
            payload["violating_nodes"] = list(exc.report.violating_nodes[:32])
            payload["min_residual"] = exc.report.min_residual
        _write_json(outdir / "study.json", payload)
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    report = _emit_report(report, traces, outdir)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _residual_samples(cfg: RunConfig) -> tuple[list[list], float]:
    """Sobol-sample the interior residual and sweep the boundary residual."""
    barrier = cfg.build_barrier()
    rows: list[list] = []
    worst = math.inf
    sampler = qmc.Sobol(d=2, scramble=False, seed=0)
    pts = sampler.random_base2(m=14)  # 16384 points
    sigma_bound = cfg.sigma.bound if cfg.sigma is not None else 0.0
    if isinstance(barrier, GaussianBarrier):
        dom = cfg.domain
        rho = dom.r0 + pts[:, 0] * 20.0
        ts = pts[:, 1] * 100.0
        x = np.zeros((rho.size, dom.dim))
        x[:, 0] = rho
        res = barrier.interior_residual(x, ts)
        for i in range(rho.size):
            rows.append(["interior", float(rho[i]), 0.0, float(ts[i]), float(res[i])])
        worst = float(np.min(res))
        # boundary sweep at the worst point of the sphere, all dissipation levels
        y = np.zeros(dom.dim)
        y[0] = dom.r0
        nu = -y / dom.r0
        for sig_frac in np.linspace(0.0, 1.0, 11):
            sig = sig_frac * sigma_bound
            for t in np.linspace(0.0, 100.0, 101):
                val = barrier.boundary_residual(y, nu, sig, t)
                rows.append(["boundary", float(dom.r0), float(sig), float(t), float(val)])
                worst = min(worst, float(val))
    else:
        rho = pts[:, 0] * 20.0
        ts = pts[:, 1] * 100.0
        dom = cfg.domain
        for side, x0 in (("left", dom.a), ("right", dom.b)):
            xs = x0 - rho if side == "left" else x0 + rho
            # interior residual of each branch matches the 1-d Gaussian barrier
            one_d = GaussianBarrier(
                1, cfg.p, [barrier.shift_left if side == "left" else barrier.shift_right]
            )
            res = one_d.interior_residual(xs[:, None], ts)
            for i in range(xs.size):
                rows.append([f"interior_{side}", float(xs[i]), 0.0, float(ts[i]), float(res[i])])
            worst = min(worst, float(np.min(res)))
            for sig_frac in np.linspace(0.0, 1.0, 11):
                sig = sig_frac * sigma_bound
                for t in np.linspace(0.0, 100.0, 101):
                    val = barrier.boundary_residual(side, sig, t)
                    rows.append([f"boundary_{side}", float(x0), float(sig), float(t), float(val)])
                    worst = min(worst, float(val))
    return rows, worst


def _cmd_verify_supersolution(cfg: RunConfig, outdir: Path, jobs: int) -> int:
    if cfg.init["kind"] not in ("scaled_U", "scaled_V"):
        print(
            "verify-supersolution needs init kind scaled_U or scaled_V", file=sys.stderr
        )
        return EXIT_CONFIG
    params = cfg.study.get("supersolution", {})
    barrier = cfg.build_barrier()
    problem = cfg.build_problem(label="barrier-bounded")
    try:
        report, traces = supersolution_bound_study(
            barrier,
            problem,
            cfg.solver,
            rel_tol=float(params.get("rel_tol", 1e-6)),
            abs_tol=float(params.get("abs_tol", 1e-8)),
            slope_slack=float(params.get("slope_slack", 0.2)),
        )
    except AdmissibilityRefused as exc:
        _write_json(outdir / "study.json", {"refused": str(exc)})
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    rows, worst = _residual_samples(cfg)
    _write_csv(outdir / "residuals.csv", ["kind", "coord", "sigma", "t", "residual"], rows)
    details = dict(report.details)
    details["residual_min"] = worst
    components = dict(details["violation_components"])
    components["residual_sign"] = -worst - 1e-12  # require worst >= -1e-12
    del details["violation_components"]
    from .experiments import build_report

    report = build_report("supersolution_bound", report.params, components, details)
    report = _emit_report(report, traces, outdir)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_sweep(cfg: RunConfig, outdir: Path, jobs: int) -> int:
    params = cfg.study.get("sweep", {})
    p_values = [float(x) for x in params.get("p_values", [cfg.p])]
    amplitudes = [float(x) for x in params.get("amplitudes", [1.0])]
    points = [(p, a) for p in p_values for a in amplitudes]
    records = fujita_sweep(sweep_factory(cfg), points, cfg.solver, jobs=jobs)
    rows = [
        [r.p, r.amplitude, r.sigma_bound, r.domain, r.outcome, r.t_hat, r.t0_bound]
        for r in records
    ]
    _write_csv(
        outdir / "phase.csv",
        ["p", "amplitude", "sigma_bound", "domain", "outcome", "T_hat", "t0_bound"],
        rows,
    )
    mono_ok, mono_problems = monotone_in_amplitude(records)
    payload = {
        "kind": "fujita_sweep",
        "records": [asdict(r) for r in records],
        "monotone_in_amplitude": mono_ok,
        "monotonicity_violations": mono_problems,
    }
    _write_json(outdir / "study.json", payload)
    if any(r.outcome == "Inconclusive" for r in records):
        return EXIT_INCONCLUSIVE
    return EXIT_PASS if mono_ok else EXIT_FAIL


COMMANDS = {
    "simulate": _cmd_simulate,
    "exhaust": _cmd_exhaust,
    "compare": _cmd_compare,
    "neumann-mono": _cmd_neumann_mono,
    "verify-supersolution": _cmd_verify_supersolution,
    "sweep": _cmd_sweep,
}


def dispatch(command: str, cfg: RunConfig, outdir: Path, jobs: int = 1) -> int:
    """Run one command against a validated configuration."""
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[command](cfg, outdir, jobs)
    except StudyError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except HypothesisRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except AdmissibilityRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fujitalab",
        description="Blow-up vs. global existence laboratory for exterior-domain "
        "reaction-diffusion flows with dissipative dynamical boundary conditions.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON configuration")
    parser.add_argument("--out", default=".", help="output directory (default: cwd)")
    parser.add_argument("--jobs", type=int, default=1, help="worker count for sweeps")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(json.dumps({"violations": exc.violations}), file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(args.command, cfg, Path(args.out), args.jobs)


if __name__ == "__main__":
    sys.exit(main())
