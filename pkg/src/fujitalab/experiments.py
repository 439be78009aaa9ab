"""Reproducible studies: each qualitative claim becomes a checked run.

Studies advance their member runs in lockstep (shared step sizes), so
the discrete comparison principle holds to rounding and the ordering
checks can use tight tolerances.  Every report reduces its checks to a
single worst violation measured against zero: each component is
(measured - allowed), so `passed` is exactly `worst_violation <= 0`.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .closed_forms import (
    GaussianBarrier,
    ReactionMajorant,
    TwoRayBarrier,
    admissibility_report,
    check_monotonicity_hypothesis,
)
from .geometry import Grid, RadialExterior
from .integrator import BlowUp, GlobalUpTo, Inconclusive, SolverConfig, Trace, run, run_many
from .problems import Problem, barrier_on_grid

__all__ = [
    "StudyReport",
    "SweepRecord",
    "build_report",
    "StudyError",
    "HypothesisRefused",
    "AdmissibilityRefused",
    "exhaustion_study",
    "comparison_study",
    "neumann_monotonicity_study",
    "supersolution_bound_study",
    "fujita_sweep",
    "majorant_margin",
    "monotone_in_amplitude",
]


class StudyError(RuntimeError):
    """A member run did not complete, so the study cannot judge its claim."""


class HypothesisRefused(RuntimeError):
    """Input data failed the hypothesis a study requires; run refused."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class AdmissibilityRefused(RuntimeError):
    """Barrier shift fails the boundary admissibility condition; run refused."""


@dataclass(frozen=True)
class StudyReport:
    """Outcome of one study; passed is exactly worst_violation <= tolerance."""

    kind: str
    params: dict
    worst_violation: float
    tolerance: float
    passed: bool
    details: dict
    artifacts: tuple[str, ...] = ()

    def __post_init__(self):
        if self.passed != (self.worst_violation <= self.tolerance):
            raise ValueError("passed flag must equal worst_violation <= tolerance")


def build_report(kind: str, params: dict, components: dict[str, float], details: dict) -> StudyReport:
    worst = max(components.values()) if components else 0.0
    details = dict(details)
    details["violation_components"] = {k: float(v) for k, v in components.items()}
    return StudyReport(
        kind=kind,
        params=params,
        worst_violation=float(worst),
        tolerance=0.0,
        passed=bool(worst <= 0.0),
        details=details,
    )


@dataclass(frozen=True)
class SweepRecord:
    p: float
    amplitude: float
    sigma_bound: float
    domain: str
    outcome: str
    t_hat: float
    t0_bound: float
    flags: tuple[str, ...] = ()


def _domain_summary(grid: Grid) -> str:
    dom = grid.domain
    if isinstance(dom, RadialExterior):
        return f"radial_exterior(N={dom.dim},r0={dom.r0:g},L={grid.length:g})"
    return f"two_rays(a={dom.a:g},b={dom.b:g},L={grid.length:g})"


def _require_completed(outcomes, what: str, allow_blowup: bool = True) -> None:
    """Raise unless every member ended in a usable classification.

    Ordering and monotonicity claims hold while the runs are alive, so a
    clean blow-up is an acceptable end for them; Inconclusive never is.
    """
    for i, (outcome, _) in enumerate(outcomes):
        ok = isinstance(outcome, GlobalUpTo) or (allow_blowup and isinstance(outcome, BlowUp))
        if not ok:
            reason = getattr(outcome, "reason", outcome.kind)
            raise StudyError(f"{what}: member {i} did not complete ({reason})")


def _sample_grid(cfg: SolverConfig, n_times: int, extra: tuple[float, ...] = ()) -> tuple[float, ...]:
    times = set(np.linspace(0.0, cfg.t_end, n_times + 1)[1:])
    times.update(x for x in extra if 0.0 < x <= cfg.t_end)
    return tuple(sorted(times))


def majorant_margin(trace: Trace, p: float) -> float:
    """max over samples with t < t0 of sup/z(t) - 1; certified nonpositive up to rounding."""
    sup0 = float(trace.sup_norms[0])
    if sup0 <= 0.0:
        return float(np.max(trace.sup_norms))
    maj = ReactionMajorant(p, sup0)
    mask = trace.times < maj.blowup_time * (1.0 - 1e-12)
    if not np.any(mask):
        return 0.0
    z = maj.value(trace.times[mask])
    return float(np.max(trace.sup_norms[mask] / z - 1.0))


# ---------------------------------------------------------------------------
# exhaustion in the truncation length
# ---------------------------------------------------------------------------

def exhaustion_study(
    problems: list[Problem],
    cfg: SolverConfig,
    *,
    t_check: float = 1.0,
    tail_tol: float = 1e-3,
    n_check_times: int = 16,
) -> tuple[StudyReport, dict[str, Trace]]:
    """Same problem at increasing truncation lengths, nested on shared nodes.

    Checks nodewise monotone growth in the truncation length at shared
    sample times, and that consecutive sup-differences at t_check shrink
    below tail_tol.  Members must share the spacing so nodes nest.
    """
    if len(problems) < 3:
        raise ValueError(f"need at least 3 truncation lengths, got {len(problems)}")
    lengths = [pr.grid.length for pr in problems]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError(f"truncation lengths must increase, got {lengths}")
    h0 = problems[0].grid.h
    if any(abs(pr.grid.h - h0) > 1e-12 * h0 for pr in problems):
        raise ValueError("exhaustion members must share the grid spacing")

    worst_mono = -math.inf
    diffs_at_check: list[float] = []

    def on_sample(t, states):
        nonlocal worst_mono
        at_check = abs(t - t_check) <= 1e-12 * max(t_check, 1.0)
        for (pa, ua), (pb, ub) in zip(
            zip(problems, states), zip(problems[1:], states[1:])
        ):
            pair_mono = -math.inf
            pair_diff = 0.0
            for sa, sb in zip(pa.grid.segments, pb.grid.segments):
                small = ua[sa.sl]
                big = ub[sb.sl][: sa.n_nodes]
                pair_mono = max(pair_mono, float(np.max(small - big)))
                pair_diff = max(pair_diff, float(np.max(np.abs(small - big))))
            worst_mono = max(worst_mono, pair_mono)
            if at_check:
                diffs_at_check.append(pair_diff)

    results = run_many(
        problems, cfg, sample_times=_sample_grid(cfg, n_check_times, (t_check,)),
        on_sample=on_sample,
    )
    _require_completed(results, "exhaustion study")

    n_pairs = len(problems) - 1
    if len(diffs_at_check) < n_pairs:
        raise StudyError(f"exhaustion study: no sample reached t_check={t_check}")
    diffs = diffs_at_check[-n_pairs:]  # the record taken at t_check
    decrease_viol = max(
        (d2 - d1 for d1, d2 in zip(diffs, diffs[1:])), default=-math.inf
    )
    components = {
        "ordering": worst_mono - cfg.ordering_tol,
        "tail_decreasing": decrease_viol,
        "tail_size": diffs[-1] - tail_tol,
    }
    report = build_report(
        "exhaustion",
        {
            "lengths": lengths,
            "t_check": t_check,
            "tail_tol": tail_tol,
            "ordering_tol": cfg.ordering_tol,
        },
        components,
        {
            "consecutive_sup_differences": diffs,
            "worst_ordering_violation": worst_mono,
        },
    )
    traces = {f"L{pr.grid.length:g}": tr for pr, (_, tr) in zip(problems, results)}
    return report, traces


# ---------------------------------------------------------------------------
# dynamical flow bounded by the Neumann flow
# ---------------------------------------------------------------------------

def _tracked_mask(grid: Grid, span: tuple[float, float]) -> np.ndarray:
    lo, hi = span
    mask = np.zeros(grid.n_nodes, dtype=bool)
    for seg in grid.segments:
        mask[seg.sl] = (seg.xi >= lo) & (seg.xi <= hi)
    return mask


def comparison_study(
    problem_dyn: Problem,
    problem_neu: Problem,
    cfg: SolverConfig,
    *,
    mono_tol: float | None = None,
    tracked_span: tuple[float, float] | None = None,
    n_check_times: int = 16,
) -> tuple[StudyReport, dict[str, Trace]]:
    """Order the dissipative run below the Neumann run started above it.

    Requires the initial data ordered nodewise.  The time-monotonicity of
    the Neumann run is checked only when its initial data passes the
    discrete reaction-vs-curvature hypothesis; otherwise that sub-check
    is reported as "hypothesis not met" and the verdict rests on the
    ordering alone.
    """
    if problem_dyn.grid is not problem_neu.grid:
        raise ValueError("comparison members must share one grid")
    if problem_dyn.p != problem_neu.p:
        raise ValueError("comparison members must share the exponent")
    phi = np.asarray(problem_dyn.initial.values)
    psi = np.asarray(problem_neu.initial.values)
    if np.any(phi > psi):
        raise ValueError("initial data must satisfy phi <= psi nodewise")

    grid = problem_dyn.grid
    hyp = check_monotonicity_hypothesis(problem_neu.initial, grid, problem_neu.p)
    if mono_tol is None:
        sup_psi = float(np.max(psi))
        mono_tol = 1e-6 * sup_psi ** problem_neu.p if sup_psi > 0 else 1e-12
    if tracked_span is None:
        tracked_span = (0.15 * grid.length, 0.6 * grid.length)
    tracked = _tracked_mask(grid, tracked_span)

    worst_order = -math.inf
    worst_mono = -math.inf
    prev = {"v": np.asarray(problem_neu.initial.values, dtype=float).copy()}

    def on_sample(t, states):
        nonlocal worst_order
        worst_order = max(worst_order, float(np.max(states[0] - states[1])))

    def on_step(t, dt, states):
        nonlocal worst_mono
        if hyp.passed:
            rate = (states[1] - prev["v"]) / dt
            worst_mono = max(worst_mono, float(np.max(-rate[tracked])))
        prev["v"] = states[1].copy()

    results = run_many(
        [problem_dyn, problem_neu],
        cfg,
        sample_times=_sample_grid(cfg, n_check_times),
        on_sample=on_sample,
        on_step=on_step,
    )
    _require_completed(results, "comparison study")

    components = {"ordering": worst_order - cfg.ordering_tol}
    if hyp.passed:
        components["neumann_monotonicity"] = worst_mono - mono_tol
    report = build_report(
        "comparison",
        {
            "ordering_tol": cfg.ordering_tol,
            "mono_tol": mono_tol,
            "tracked_span": list(tracked_span),
        },
        components,
        {
            "worst_ordering_violation": worst_order,
            "hypothesis_passed": hyp.passed,
            "hypothesis_min_residual": hyp.min_residual,
            "monotonicity_checked": hyp.passed,
            "worst_monotonicity_violation": worst_mono if hyp.passed else None,
            "note": None if hyp.passed else "hypothesis not met; pass judged on ordering only",
        },
    )
    return report, {"dynamical": results[0][1], "neumann": results[1][1]}


def neumann_monotonicity_study(
    problem: Problem,
    cfg: SolverConfig,
    *,
    mono_tol: float | None = None,
    tracked_span: tuple[float, float] | None = None,
) -> tuple[StudyReport, dict[str, Trace]]:
    """Nondecreasing-in-time check for the Neumann flow.

    Refused unless the initial data passes the discrete hypothesis.  The
    per-step check runs over a tracked window of each segment: a skirt
    near the wall (where incompatible normal slopes provoke a genuine
    transient dip) and the cap-influenced outer part are excluded and
    reported separately.
    """
    if problem.wall.kind == "dynamical" and problem.wall.sigma.bound > 0.0:
        raise ValueError("monotonicity study applies to the Neumann problem")
    grid = problem.grid
    hyp = check_monotonicity_hypothesis(problem.initial, grid, problem.p)
    if not hyp.passed:
        raise HypothesisRefused(
            f"initial data violates the monotonicity hypothesis at "
            f"{len(hyp.violating_nodes)} nodes (min residual {hyp.min_residual:.3g})",
            report=hyp,
        )
    psi = np.asarray(problem.initial.values)
    if mono_tol is None:
        sup_psi = float(np.max(psi))
        mono_tol = 1e-6 * sup_psi ** problem.p if sup_psi > 0 else 1e-12
    if tracked_span is None:
        tracked_span = (0.15 * grid.length, 0.6 * grid.length)
    tracked = _tracked_mask(grid, tracked_span)

    worst = -math.inf
    worst_node = -1
    prev = {"u": np.asarray(problem.initial.values, dtype=float).copy()}
    if problem.cap.kind == "dirichlet0":
        for seg in grid.segments:
            prev["u"][seg.offset + seg.n_nodes - 1] = 0.0

    def on_step(t, dt, states):
        nonlocal worst, worst_node
        rate = (states[0] - prev["u"]) / dt
        viol = -rate
        viol[~tracked] = -math.inf
        idx = int(np.argmax(viol))
        if viol[idx] > worst:
            worst = float(viol[idx])
            worst_node = idx
        prev["u"] = states[0].copy()

    results = run_many([problem], cfg, on_step=on_step)
    _require_completed(results, "monotonicity study")

    report = build_report(
        "neumann_monotonicity",
        {"mono_tol": mono_tol, "tracked_span": list(tracked_span)},
        {"monotonicity": worst - mono_tol},
        {
            "worst_rate_violation": worst,
            "worst_node": worst_node,
            "hypothesis_min_residual": hyp.min_residual,
        },
    )
    return report, {"neumann": results[0][1]}


# ---------------------------------------------------------------------------
# closed-form barrier domination
# ---------------------------------------------------------------------------

def supersolution_bound_study(
    barrier: GaussianBarrier | TwoRayBarrier,
    problem: Problem,
    cfg: SolverConfig,
    *,
    rel_tol: float = 1e-6,
    abs_tol: float = 1e-8,
    slope_slack: float = 0.2,
    n_check_times: int = 32,
) -> tuple[StudyReport, dict[str, Trace]]:
    """Check the run stays below the closed-form barrier at all samples.

    Refused when the barrier shift is not admissible for the boundary
    bound of the problem's sigma model.  Also fits the decay of the
    sup-norm and compares the slope against the barrier's decay rate
    with the configured slack.
    """
    grid = problem.grid
    sigma = problem.wall.sigma
    sigma_bound = sigma.bound if sigma is not None else 0.0
    if isinstance(barrier, GaussianBarrier):
        adm = admissibility_report(grid.domain, barrier.shift, sigma_bound)
    else:
        adm = admissibility_report(
            grid.domain, (barrier.shift_left, barrier.shift_right), sigma_bound
        )
    if not adm.global_ok:
        raise AdmissibilityRefused(
            f"barrier shift not admissible for sigma bound {sigma_bound}: {adm.flags}"
        )
    phi = np.asarray(problem.initial.values)
    barrier0 = barrier_on_grid(grid, barrier, 0.0)
    if np.any(phi > barrier0 * (1.0 + rel_tol) + abs_tol):
        raise ValueError("initial data must start below the barrier")

    worst = -math.inf

    def on_sample(t, states):
        nonlocal worst
        bound = barrier_on_grid(grid, barrier, t) * (1.0 + rel_tol) + abs_tol
        worst = max(worst, float(np.max(states[0] - bound)))

    results = run_many(
        [problem], cfg, sample_times=_sample_grid(cfg, n_check_times), on_sample=on_sample
    )
    outcome, trace = results[0]
    if not isinstance(outcome, GlobalUpTo):
        raise StudyError(
            f"barrier-bounded run did not reach the horizon ({getattr(outcome, 'reason', outcome.kind)})"
        )
    slope_cap = -barrier.decay_exponent * (1.0 - slope_slack)
    slope = outcome.decay_slope
    components = {
        "barrier_bound": worst,
        "decay_slope": (slope - slope_cap) if np.isfinite(slope) else math.inf,
    }
    report = build_report(
        "supersolution_bound",
        {
            "rel_tol": rel_tol,
            "abs_tol": abs_tol,
            "slope_cap": slope_cap,
            "sigma_bound": sigma_bound,
        },
        components,
        {
            "worst_bound_violation": worst,
            "decay_slope": slope,
            "majorant_margin": majorant_margin(trace, problem.p),
            "outcome": outcome.kind,
        },
    )
    return report, {"run": trace}


# ---------------------------------------------------------------------------
# exponent/amplitude sweep
# ---------------------------------------------------------------------------

def _sweep_one(factory, p: float, amplitude: float, cfg: SolverConfig) -> SweepRecord:
    problem = factory(p, amplitude)
    sigma = problem.wall.sigma
    sigma_bound = sigma.bound if sigma is not None else 0.0
    dom = _domain_summary(problem.grid)
    phi_sup = float(np.max(np.abs(problem.initial.values)))
    t0 = ReactionMajorant(p, phi_sup).blowup_time if phi_sup > 0 else math.inf
    try:
        outcome, _ = run(problem, cfg)
    except Exception as exc:  # individual failures degrade to inconclusive
        outcome = Inconclusive(f"run failed: {exc}")
    p_c = 1.0 + 2.0 / problem.grid.domain.dim
    flags: tuple[str, ...] = ()
    if isinstance(outcome, GlobalUpTo) and p <= p_c + 1e-12:
        flags = ("slow",)
    t_hat = outcome.t_hat if isinstance(outcome, BlowUp) else math.nan
    name = {"global": "GlobalUpTo", "blowup": "BlowUp", "inconclusive": "Inconclusive"}[
        outcome.kind
    ]
    return SweepRecord(p, amplitude, sigma_bound, dom, name, t_hat, t0, flags)


def fujita_sweep(
    factory,
    points: list[tuple[float, float]],
    cfg: SolverConfig,
    jobs: int = 1,
) -> list[SweepRecord]:
    """One independent run per (p, amplitude) tuple, deterministically sorted.

    factory(p, amplitude) -> Problem must be picklable for jobs > 1.
    Individual failures are recorded as Inconclusive and the sweep
    continues.  Subcritical runs that reach the horizon are flagged
    "slow" instead of being trusted as global.
    """
    tasks = sorted({(float(p), float(a)) for p, a in points})
    if not tasks:
        return []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(
                pool.map(_sweep_one_star, ((factory, p, a, cfg) for p, a in tasks))
            )
    else:
        records = [_sweep_one(factory, p, a, cfg) for p, a in tasks]
    records.sort(key=lambda r: (r.p, r.amplitude))
    return records


def _sweep_one_star(args) -> SweepRecord:
    return _sweep_one(*args)


def monotone_in_amplitude(records: list[SweepRecord]) -> tuple[bool, list[str]]:
    """Blow-up at one amplitude must persist at larger amplitudes (fixed p)."""
    problems: list[str] = []
    by_p: dict[float, list[SweepRecord]] = {}
    for rec in records:
        by_p.setdefault(rec.p, []).append(rec)
    for p, group in sorted(by_p.items()):
        group = sorted(group, key=lambda r: r.amplitude)
        seen_blowup = False
        for rec in group:
            if rec.outcome == "BlowUp":
                seen_blowup = True
            elif seen_blowup and rec.outcome == "GlobalUpTo":
                problems.append(
                    f"p={p}: amplitude {rec.amplitude} global after a smaller amplitude blew up"
                )
    return (len(problems) == 0, problems)
