import numpy as np
import pytest

from fujitalab.closed_forms import ReactionMajorant
from fujitalab.discretization import ConstantSigma
from fujitalab.geometry import RadialExterior, TwoRays, build_grid
from fujitalab.integrator import (
    BlowUp,
    GlobalUpTo,
    Inconclusive,
    InsufficientDataError,
    SolverConfig,
    Trace,
    adaptive_dt,
    estimate_blowup_time,
    run,
    run_many,
    step,
)
from fujitalab.problems import assemble_problem, gaussian_profile, initial_field


def make_trace(times, sups):
    times = np.asarray(times, dtype=float)
    sups = np.asarray(sups, dtype=float)
    n = times.size
    return Trace(times, np.full(n, 1e-3), sups, np.zeros((n, 1)), np.zeros((n, 1)))


def uniform_neumann_problem(p=2.0, value=1.0, m=32):
    dom = RadialExterior(3, 1.0)
    grid = build_grid(dom, 1.0, m)
    return assemble_problem(dom, 1.0, m, p, None, np.full(grid.n_nodes, value),
                            ramp=False, neumann_cap=True)


class TestSolverConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            SolverConfig(dt_min=1e-3, dt_init=1e-4)
        with pytest.raises(ValueError):
            SolverConfig(dt_init=1.0, dt_max=0.5)
        with pytest.raises(ValueError):
            SolverConfig(blowup_threshold=0.5)


class TestAdaptiveDt:
    def test_power_law(self):
        cfg = SolverConfig(dt_max=1.0)
        grid = build_grid(RadialExterior(3, 1.0), 1.0, 16)
        assert adaptive_dt(initial_field(grid, np.ones(17), ramp=False), 2.0, cfg) == pytest.approx(0.1)
        assert adaptive_dt(np.full(17, 1e3), 2.0, cfg) == pytest.approx(1e-4)

    def test_clamps(self):
        cfg = SolverConfig(dt_max=0.05)
        assert adaptive_dt(np.zeros(5), 2.0, cfg) == 0.05
        assert adaptive_dt(np.full(5, 1e300), 2.0, cfg) == cfg.dt_min


class TestStep:
    def test_zero_fixed_point(self):
        prob = uniform_neumann_problem(value=0.0)
        out = step(prob.initial, prob, 0.01)
        assert np.all(out.values == 0.0)

    def test_uniform_follows_reaction_flow(self):
        # spatially uniform data under Neumann closures follows w' = w^p;
        # explicit Euler has global error below 5*dt up to t = 0.5
        prob = uniform_neumann_problem(p=2.0, value=1.0)
        dt = 1e-3
        maj = ReactionMajorant(2.0, 1.0)
        state = prob.initial
        k = 0
        while state.time < 0.5 - 1e-12:
            state = step(state, prob, dt)
            k += 1
        assert k == 500
        spread = np.max(state.values) - np.min(state.values)
        assert spread < 1e-10  # stays uniform
        assert abs(np.max(state.values) - maj.value(0.5)) <= 5 * dt

    def test_rejects_nonpositive_dt(self):
        prob = uniform_neumann_problem()
        with pytest.raises(ValueError):
            step(prob.initial, prob, 0.0)


class TestRun:
    def test_zero_data_global_with_zero_trace(self):
        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 100)
        prob = assemble_problem(dom, 10.0, 100, 2.0, ConstantSigma(1.0),
                                np.zeros(grid.n_nodes))
        outcome, trace = run(prob, SolverConfig(t_end=1.0))
        assert isinstance(outcome, GlobalUpTo)
        assert outcome.t_end == pytest.approx(1.0)
        assert np.all(trace.sup_norms == 0.0)

    def test_positivity_and_cap_pinned(self):
        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 200)
        prob = assemble_problem(dom, 10.0, 200, 2.0, ConstantSigma(1.0),
                                gaussian_profile(grid, 0.5))
        outcome, trace = run(prob, SolverConfig(t_end=2.0, dt_max=0.02))
        assert isinstance(outcome, GlobalUpTo)
        assert np.all(trace.cap_values == 0.0)
        assert np.all(trace.sup_norms >= 0.0)

    def test_majorant_bound_for_blowup_run(self):
        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 300)
        prob = assemble_problem(dom, 10.0, 300, 1.4, ConstantSigma(1.0),
                                gaussian_profile(grid, 1.0))
        cfg = SolverConfig(t_end=50.0, dt_max=0.05)
        outcome, trace = run(prob, cfg)
        assert isinstance(outcome, BlowUp)
        # certified bound: the reaction flow dominates, so t_hat >= 0.95 t0
        maj = ReactionMajorant(1.4, float(trace.sup_norms[0]))
        assert outcome.t0_bound == pytest.approx(maj.blowup_time)
        assert outcome.t_hat >= 0.95 * maj.blowup_time
        assert outcome.t_detect <= outcome.t_hat
        mask = trace.times < maj.blowup_time * (1 - 1e-12)
        z = maj.value(trace.times[mask])
        assert np.max(trace.sup_norms[mask] / z) <= 1.0 + 1e-6

    def test_comparison_ordering_in_lockstep(self):
        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 200)
        lo = assemble_problem(dom, 10.0, 200, 2.0, ConstantSigma(1.0),
                              gaussian_profile(grid, 0.4))
        hi = assemble_problem(dom, 10.0, 200, 2.0, ConstantSigma(1.0),
                              gaussian_profile(grid, 0.8))
        worst = [-np.inf]

        def on_sample(t, states):
            worst[0] = max(worst[0], float(np.max(states[0] - states[1])))

        cfg = SolverConfig(t_end=2.0, dt_max=0.02, ordering_tol=1e-8)
        results = run_many([lo, hi], cfg, sample_times=tuple(np.linspace(0.1, 2.0, 20)),
                           on_sample=on_sample)
        assert all(isinstance(o, GlobalUpTo) for o, _ in results)
        assert worst[0] <= cfg.ordering_tol

    def test_two_ray_run(self):
        dom = TwoRays(-1.0, 1.0)
        grid = build_grid(dom, 10.0, 200)
        prob = assemble_problem(dom, 10.0, 200, 4.0, ConstantSigma(0.3),
                                gaussian_profile(grid, 0.1))
        outcome, trace = run(prob, SolverConfig(t_end=2.0, dt_max=0.02))
        assert isinstance(outcome, GlobalUpTo)
        assert np.all(trace.cap_values == 0.0)

    def test_step_budget_inconclusive(self):
        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 100)
        prob = assemble_problem(dom, 10.0, 100, 2.0, ConstantSigma(1.0),
                                gaussian_profile(grid, 0.5))
        outcome, _ = run(prob, SolverConfig(t_end=10.0, max_steps=3))
        assert isinstance(outcome, Inconclusive)
        assert "budget" in outcome.reason

    def test_trace_times_strictly_increasing(self):
        prob = uniform_neumann_problem(value=0.5)
        _, trace = run(prob, SolverConfig(t_end=0.3, dt_max=0.01, sample_stride=3))
        assert np.all(np.diff(trace.times) > 0.0)
        assert trace.times[-1] == pytest.approx(0.3)

    def test_time_profile_sigma(self):
        from fujitalab.discretization import SigmaProfile
        from fujitalab.experiments import majorant_margin

        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 200)
        sig = SigmaProfile([0.0, 1.0, 2.0], [0.2, 1.0, 0.5], bound=1.0)
        prob = assemble_problem(dom, 10.0, 200, 2.0, sig,
                                gaussian_profile(grid, 0.3))
        outcome, trace = run(prob, SolverConfig(t_end=2.0, dt_max=0.02))
        assert isinstance(outcome, GlobalUpTo)
        assert majorant_margin(trace, 2.0) <= 1e-6


class TestEstimateBlowupTime:
    def test_exact_reaction_trace_p2(self):
        # sup = 1/(1-t): the transformed series is exactly linear, root 1
        sups = np.logspace(5, 10, 30)
        times = 1.0 - 1.0 / sups
        t_hat = estimate_blowup_time(make_trace(times, sups), 2.0)
        assert abs(t_hat - 1.0) < 1e-3

    def test_exact_reaction_trace_p15(self):
        # z0 = 1, p = 1.5: root at t0 = 2
        sups = np.logspace(5, 10, 30)
        times = 2.0 * (1.0 - sups ** (-0.5))
        t_hat = estimate_blowup_time(make_trace(times, sups), 1.5)
        assert abs(t_hat - 2.0) < 1e-2

    def test_bounded_trace_rejected(self):
        trace = make_trace(np.linspace(0, 1, 10), np.full(10, 2.0))
        with pytest.raises(InsufficientDataError):
            estimate_blowup_time(trace, 2.0)

    def test_too_few_regime_samples(self):
        sups = np.array([1.0, 2.0, 1e6, 1e8, 1e10])
        times = np.array([0.0, 0.5, 0.9, 0.95, 0.99])
        with pytest.raises(InsufficientDataError):
            estimate_blowup_time(make_trace(times, sups), 2.0)

    def test_root_never_precedes_last_sample(self):
        sups = np.logspace(5, 12, 40)
        times = 1.0 - 1.0 / sups
        t_hat = estimate_blowup_time(make_trace(times, sups), 2.0)
        assert t_hat >= times[-1]
