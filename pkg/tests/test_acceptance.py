"""Acceptance suite: one test per numbered criterion, run with -v -s.

Each test prints a single pass/fail line.  The heavyweight runs (the
subcritical blow-up, the two barrier-bounded flows) are shared between
criteria through module-scoped fixtures.
"""

import time

import numpy as np
import pytest
from scipy.stats import qmc

from fujitalab.closed_forms import (
    GaussianBarrier,
    ReactionMajorant,
    TwoRayBarrier,
    ball_admissible,
    barrier_constants,
    two_ray_admissible,
)
from fujitalab.discretization import ConstantSigma, dynamical_closure
from fujitalab.experiments import (
    comparison_study,
    exhaustion_study,
    fujita_sweep,
    majorant_margin,
    monotone_in_amplitude,
    supersolution_bound_study,
)
from fujitalab.geometry import RadialExterior, TwoRays, build_grid
from fujitalab.integrator import BlowUp, GlobalUpTo, SolverConfig, run
from fujitalab.problems import (
    Problem,
    assemble_problem,
    barrier_profile,
    gaussian_profile,
    harmonic_profile,
    initial_field,
)


def report(n, ok, detail):
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared heavyweight runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def subcritical_blowup_run():
    dom = RadialExterior(3, 1.0)
    grid = build_grid(dom, 20.0, 2000)
    prob = assemble_problem(
        dom, 20.0, 2000, 1.4, ConstantSigma(1.0), gaussian_profile(grid, 1.0), ramp=True
    )
    cfg = SolverConfig(t_end=100.0, dt_max=0.05)
    start = time.perf_counter()
    outcome, trace = run(prob, cfg)
    return outcome, trace, time.perf_counter() - start


@pytest.fixture(scope="module")
def radial_barrier_study():
    dom = RadialExterior(3, 4.0)
    grid = build_grid(dom, 20.0, 2000)
    barrier = GaussianBarrier(3, 3.0, np.zeros(3))
    prob = assemble_problem(
        dom, 20.0, 2000, 3.0, ConstantSigma(1.0), barrier_profile(grid, barrier, 0.5),
        ramp=True,
    )
    cfg = SolverConfig(t_end=100.0, dt_max=0.05)
    start = time.perf_counter()
    rep, traces = supersolution_bound_study(barrier, prob, cfg)
    return rep, traces["run"], time.perf_counter() - start


@pytest.fixture(scope="module")
def two_ray_barrier_study():
    dom = TwoRays(-1.0, 1.0)
    grid = build_grid(dom, 20.0, 2000)
    barrier = TwoRayBarrier(-1.0, 1.0, 0.7, -0.7, 4.0)
    prob = assemble_problem(
        dom, 20.0, 2000, 4.0, ConstantSigma(0.3), barrier_profile(grid, barrier, 0.5),
        ramp=True,
    )
    cfg = SolverConfig(t_end=100.0, dt_max=0.05)
    start = time.perf_counter()
    rep, traces = supersolution_bound_study(barrier, prob, cfg)
    return rep, traces["run"], time.perf_counter() - start


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_1_closed_form_identities():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    b = GaussianBarrier(3, 3.0, np.array([0.3, -0.2, 0.1]))
    x = rng.normal(scale=3.0, size=(100, 3))
    t = rng.uniform(0.0, 10.0, size=100)
    val = b.value(x, t)

    # three derivative formulas against central differences, relative 1e-6
    dt_fd = (b.value(x, t + 1e-5) - b.value(x, t - 1e-5)) / 2e-5
    err_t = np.max(np.abs(dt_fd - b.time_derivative(x, t)) / (np.abs(b.time_derivative(x, t)) + val))
    lap_fd = np.zeros(100)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1e-4
        lap_fd += (b.value(x + e, t) - 2 * val + b.value(x - e, t)) / 1e-8
    err_lap = np.max(np.abs(lap_fd - b.laplacian(x, t)) / (np.abs(b.laplacian(x, t)) + val))
    nu = rng.normal(size=(100, 3))
    nu /= np.linalg.norm(nu, axis=1)[:, None]
    dn_fd = (b.value(x + 1e-5 * nu, t) - b.value(x - 1e-5 * nu, t)) / 2e-5
    err_n = np.max(np.abs(dn_fd - b.normal_derivative(x, nu, t)) / (np.abs(b.normal_derivative(x, nu, t)) + val))

    # heat identity: d_t - Lap = ((dim - 2*decay)/(2(t+1))) * value, to 1e-12
    lhs = b.time_derivative(x, t) - b.laplacian(x, t)
    rhs = (3 - 2.0 * b.decay_exponent) / (2.0 * (t + 1.0)) * val
    err_id = np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))

    elapsed = time.perf_counter() - start
    ok = max(err_t, err_lap, err_n) < 1e-6 and err_id < 1e-12 and elapsed < 1.0
    report(1, ok, f"fd errors {err_t:.2e}/{err_lap:.2e}/{err_n:.2e}, "
                  f"identity {err_id:.2e}, {elapsed:.2f}s")


def test_criterion_2_supersolution_signs():
    start = time.perf_counter()
    worst = np.inf
    pts = qmc.Sobol(d=2, scramble=False).random_base2(m=14)
    for dim, p in ((3, 2.0), (3, 3.0), (2, 2.5), (1, 4.0)):
        b = GaussianBarrier(dim, p, np.zeros(dim))
        rho = 1.0 + 20.0 * pts[:, 0]
        ts = 100.0 * pts[:, 1]
        x = np.zeros((rho.size, dim))
        x[:, 0] = rho
        worst = min(worst, float(np.min(b.interior_residual(x, ts))))
        # boundary: exterior of the unit sphere with bound 0.2 (admissible for
        # every dim here), sigma swept below the bound
        r0, cap = 1.0, 0.2 / dim * dim  # keep r0 > cap*dim
        if ball_admissible(r0, 0.2 / dim, dim):
            y = np.zeros(dim)
            y[0] = r0
            for sig in np.linspace(0.0, 0.2 / dim, 5):
                vals = b.boundary_residual(y, -y / r0, sig, np.linspace(0.0, 100.0, 101))
                worst = min(worst, float(np.min(vals)))
    two_ray = TwoRayBarrier(-1.0, 1.0, 0.7, -0.7, 4.0)
    assert two_ray_admissible(-1.0, 1.0, 0.7, -0.7, 0.3)
    for side in ("left", "right"):
        for sig in (0.0, 0.15, 0.3):
            vals = two_ray.boundary_residual(side, sig, np.linspace(0.0, 100.0, 101))
            worst = min(worst, float(np.min(vals)))
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-12 and elapsed < 5.0
    report(2, ok, f"min residual {worst:.2e} over 4 exponent pairs, {elapsed:.2f}s")


def test_criterion_3_majorant_bound(subcritical_blowup_run, radial_barrier_study,
                                    two_ray_barrier_study):
    margins = {
        "subcritical": majorant_margin(subcritical_blowup_run[1], 1.4),
        "radial_barrier": majorant_margin(radial_barrier_study[1], 3.0),
        "two_ray_barrier": majorant_margin(two_ray_barrier_study[1], 4.0),
    }
    # uniform-data Neumann test problem: p=2, z0=1, error <= 5 dt up to t=0.5
    dom = RadialExterior(3, 1.0)
    grid = build_grid(dom, 1.0, 32)
    prob = assemble_problem(dom, 1.0, 32, 2.0, None, np.ones(grid.n_nodes),
                            ramp=False, neumann_cap=True)
    dt = 1e-3
    cfg = SolverConfig(dt_init=dt, dt_max=dt, t_end=0.5, sample_stride=20)
    outcome, trace = run(prob, cfg)
    maj = ReactionMajorant(2.0, 1.0)
    ode_err = float(np.max(np.abs(trace.sup_norms - maj.value(trace.times))))
    ok = max(margins.values()) <= 1e-6 and ode_err <= 5 * dt
    report(3, ok, f"majorant margins {margins}, uniform-ODE error {ode_err:.2e} <= {5*dt}")


def test_criterion_4_subcritical_blowup(subcritical_blowup_run):
    outcome, trace, elapsed = subcritical_blowup_run
    t0 = ReactionMajorant(1.4, 1.0).blowup_time
    ok = (
        isinstance(outcome, BlowUp)
        and outcome.t_hat >= 0.95 * t0
        and outcome.t_hat >= 2.375
        and elapsed < 60.0
    )
    report(4, ok, f"{outcome.kind}, t_hat={getattr(outcome, 't_hat', float('nan')):.4g} "
                  f">= {0.95 * t0:.4g}, {elapsed:.1f}s at M=2000")


def test_criterion_5_supercritical_global(radial_barrier_study):
    rep, trace, elapsed = radial_barrier_study
    comp = rep.details["violation_components"]
    slope = rep.details["decay_slope"]
    ok = (
        rep.passed
        and comp["barrier_bound"] <= 0.0
        and slope <= -0.4
        and trace.times[-1] == pytest.approx(100.0)
        and elapsed < 120.0
    )
    report(5, ok, f"bounded by the Gaussian barrier, slope {slope:.3f} <= -0.4, "
                  f"{elapsed:.1f}s")


def test_criterion_6_two_ray_theorem(two_ray_barrier_study):
    rep, trace, elapsed = two_ray_barrier_study
    comp = rep.details["violation_components"]
    slope = rep.details["decay_slope"]
    slope_cap = -barrier_constants(1, 4.0)[1] * 0.8
    ok = (
        rep.passed
        and comp["barrier_bound"] <= 0.0
        and slope <= slope_cap
        and trace.times[-1] == pytest.approx(100.0)
        and elapsed < 60.0
    )
    report(6, ok, f"bounded by the two-ray barrier, slope {slope:.3f} <= {slope_cap:.3f}, "
                  f"{elapsed:.1f}s")


def test_criterion_7_exhaustion():
    start = time.perf_counter()
    dom = RadialExterior(3, 1.0)
    probs = []
    for length, m in ((10.0, 500), (20.0, 1000), (40.0, 2000)):
        grid = build_grid(dom, length, m)
        probs.append(
            assemble_problem(dom, length, m, 3.0, ConstantSigma(1.0),
                             gaussian_profile(grid, 0.05, 3.0), ramp=True)
        )
    cfg = SolverConfig(t_end=1.5, dt_max=0.02, ordering_tol=1e-8)
    rep, _ = exhaustion_study(probs, cfg, t_check=1.0, tail_tol=1e-3)
    diffs = rep.details["consecutive_sup_differences"]
    elapsed = time.perf_counter() - start
    ok = (
        rep.passed
        and rep.details["worst_ordering_violation"] <= 1e-8
        and diffs[1] < diffs[0]
        and diffs[-1] < 1e-3
    )
    report(7, ok, f"monotone within 1e-8, diffs at t=1: {diffs[0]:.2e} > {diffs[1]:.2e} "
                  f"< 1e-3, {elapsed:.1f}s")


def test_criterion_8_comparison_chain():
    start = time.perf_counter()
    dom = RadialExterior(3, 1.0)
    grid = build_grid(dom, 10.0, 500)
    neu = assemble_problem(dom, 10.0, 500, 3.0, None, harmonic_profile(grid, 1.0),
                           ramp=True, label="neumann")
    psi = np.asarray(neu.initial.values)
    dyn = Problem(neu.grid, 3.0, neu.operator,
                  dynamical_closure(ConstantSigma(1.0), neu.grid, "sphere"),
                  neu.cap, initial_field(neu.grid, 0.5 * psi, ramp=False), "dynamical")
    cfg = SolverConfig(t_end=2.0, dt_max=0.02, ordering_tol=1e-8)
    rep, _ = comparison_study(dyn, neu, cfg)
    elapsed = time.perf_counter() - start
    # the cap ramp breaks the growth hypothesis, so the time-monotonicity
    # sub-check is conditionally waived and the verdict rests on ordering
    ok = rep.passed and rep.details["worst_ordering_violation"] <= 1e-8
    detail = (f"u <= v within 1e-8 (worst {rep.details['worst_ordering_violation']:.2e}); "
              f"monotonicity sub-check "
              f"{'ran' if rep.details['monotonicity_checked'] else 'waived (hypothesis not met)'}; "
              f"{elapsed:.1f}s")
    report(8, ok, detail)


def test_criterion_9_dichotomy_sweep():
    start = time.perf_counter()
    dom_sub = {"kind": "radial_exterior", "dim": 3, "r0": 1.0, "length": 20.0,
               "intervals": 400}
    from fujitalab.config import config_from_dict, sweep_factory

    cfg_sub = config_from_dict({
        "domain": dom_sub,
        "p": 1.4,
        "sigma": {"kind": "constant", "value": 1.0},
        "init": {"kind": "gaussian", "amplitude": 1.0, "width": 1.0},
        "solver": {"t_end": 200.0, "dt_max": 0.05},
    })
    sub_points = [(p, a) for p in (1.3, 1.5, 5.0 / 3.0) for a in (0.5, 1.0)]
    sub = fujita_sweep(sweep_factory(cfg_sub), sub_points, cfg_sub.solver)

    cfg_super = config_from_dict({
        "domain": {"kind": "radial_exterior", "dim": 3, "r0": 4.0, "length": 20.0,
                   "intervals": 400},
        "p": 3.0,
        "sigma": {"kind": "constant", "value": 1.0},
        "init": {"kind": "scaled_U", "scale": 0.05},
        "solver": {"t_end": 100.0, "dt_max": 0.05},
    })
    super_points = [(p, 0.05) for p in (1.9, 2.5, 3.0)]
    sup = fujita_sweep(sweep_factory(cfg_super), super_points, cfg_super.solver)

    mono_ok, mono_problems = monotone_in_amplitude(sub + sup)
    elapsed = time.perf_counter() - start
    ok = (
        all(r.outcome == "BlowUp" for r in sub)
        and all(r.outcome == "GlobalUpTo" for r in sup)
        and mono_ok
    )
    report(9, ok, f"{len(sub)} subcritical BlowUp, {len(sup)} supercritical GlobalUpTo, "
                  f"amplitude-monotone: {mono_ok}, {elapsed:.1f}s")
