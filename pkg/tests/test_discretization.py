import numpy as np
import pytest

from fujitalab.closed_forms import GaussianBarrier
from fujitalab.discretization import (
    ConstantSigma,
    SigmaProfile,
    apply_operator,
    assemble_laplacian,
    build_implicit_system,
    dirichlet_cap,
    dynamical_closure,
    neumann_closure,
)
from fujitalab.geometry import RadialExterior, TwoRays, build_grid
from fujitalab.integrator import step
from fujitalab.problems import Problem, initial_field


class TestSigmaModels:
    def test_constant_validation(self):
        assert ConstantSigma(0.0)(5.0) == 0.0
        assert ConstantSigma(2.0).bound == 2.0
        with pytest.raises(ValueError):
            ConstantSigma(-0.1)

    def test_profile_interpolation_and_bounds(self):
        prof = SigmaProfile([0.0, 1.0, 2.0], [0.0, 1.0, 0.5], bound=1.0)
        assert prof(0.5) == pytest.approx(0.5)
        assert prof(1.5) == pytest.approx(0.75)
        assert prof(10.0) == pytest.approx(0.5)  # clamped past the table
        with pytest.raises(ValueError):
            SigmaProfile([0.0, 1.0], [0.0, 2.0], bound=1.0)
        with pytest.raises(ValueError):
            SigmaProfile([0.0, 1.0], [-0.1, 0.5], bound=1.0)
        with pytest.raises(ValueError):
            SigmaProfile([1.0, 0.0], [0.1, 0.5], bound=1.0)


class TestLaplacian:
    def test_annihilates_constants(self):
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 100)
        op = assemble_laplacian(grid, 3)
        out = apply_operator(op, np.full(grid.n_nodes, 4.2))
        assert np.max(np.abs(out)) < 1e-12

    def test_harmonic_function_oracle(self):
        # 1/r is harmonic in three dimensions
        for m in (100, 200, 400):
            grid = build_grid(RadialExterior(3, 1.0), 10.0, m)
            r = grid.segments[0].coords
            op = assemble_laplacian(grid, 3)
            out = apply_operator(op, 1.0 / r)
            interior = out[1:-1]
            # error is O(h^2) with the constant from the fourth derivative
            assert np.max(np.abs(interior)) < 3.0 * grid.h**2

    def test_convergence_order_on_barrier_samples(self):
        barrier = GaussianBarrier(3, 3.0, [0.0, 0.0, 0.0])
        errs = []
        for m in (125, 250, 500):
            grid = build_grid(RadialExterior(3, 1.0), 10.0, m)
            r = grid.segments[0].coords
            op = assemble_laplacian(grid, 3)
            vals = barrier.value_from_distance2(r**2, 0.3)
            got = apply_operator(op, vals)[1:-1]
            want = barrier.laplacian(np.stack([r, np.zeros_like(r), np.zeros_like(r)], 1), 0.3)[1:-1]
            errs.append(np.max(np.abs(got - want)))
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(1.8 <= o <= 2.2 for o in orders)

    def test_two_rays_pure_second_difference(self):
        grid = build_grid(TwoRays(-1.0, 1.0), 5.0, 50)
        op = assemble_laplacian(grid, 1)
        # quadratic in the physical coordinate: second derivative exactly 2
        vals = np.concatenate([seg.coords**2 for seg in grid.segments])
        out = apply_operator(op, vals)
        for seg in grid.segments:
            assert np.allclose(out[seg.sl][1:-1], 2.0, atol=1e-9)

    def test_rejects_grid_breaking_sign_pattern(self):
        # the advective term overwhelms 1/h^2 only for dim >= 4 on coarse grids
        grid = build_grid(RadialExterior(10, 0.1), 16.0, 16)
        with pytest.raises(ValueError):
            assemble_laplacian(grid, 10)

    def test_dimension_must_match_domain(self):
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 100)
        with pytest.raises(ValueError):
            assemble_laplacian(grid, 2)
        grid2 = build_grid(TwoRays(-1.0, 1.0), 5.0, 50)
        with pytest.raises(ValueError):
            assemble_laplacian(grid2, 3)


class TestClosures:
    def test_dynamical_rejects_cap_side(self):
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 100)
        with pytest.raises(ValueError):
            dynamical_closure(ConstantSigma(1.0), grid, "cap")

    def test_sigma_zero_degenerates_to_neumann(self):
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 100)
        op = assemble_laplacian(grid, 3)
        dyn0 = dynamical_closure(ConstantSigma(0.0), grid, "sphere")
        neu = neumann_closure("wall")
        s1 = build_implicit_system(op, dyn0, dirichlet_cap(), 0.01, 0.01)
        s2 = build_implicit_system(op, neu, dirichlet_cap(), 0.01, 0.01)
        assert np.array_equal(s1.ab[0], s2.ab[0])
        assert s1.wall_coef == s2.wall_coef == [0.0]

    def test_linear_profile_boundary_rate_radial(self):
        # u(r) = r has unit slope away from the wall, so sigma du0/dt = 1
        dom = RadialExterior(3, 1.0)
        grid = build_grid(dom, 10.0, 400)
        op = assemble_laplacian(grid, 3)
        wall = dynamical_closure(ConstantSigma(1.0), grid, "sphere")
        prob = Problem(grid, 2.0, op, wall, dirichlet_cap(),
                       initial_field(grid, grid.segments[0].coords.copy(), ramp=False))
        dt = 1e-8
        before = prob.initial
        after = step(before, prob, dt, include_reaction=False)
        rate = (after.values[0] - before.values[0]) / dt
        assert rate == pytest.approx(1.0, abs=1e-5)

    def test_two_ray_boundary_rates_follow_normals(self):
        # u(x) = x: outward derivative is +1 at the left endpoint, -1 at the
        # right one, so the wall rates are -1/sigma and +1/sigma
        dom = TwoRays(-1.0, 1.0)
        grid = build_grid(dom, 5.0, 200)
        op = assemble_laplacian(grid, 1)
        sigma = ConstantSigma(2.0)
        wall = dynamical_closure(sigma, grid, "left")
        vals = np.concatenate([seg.coords for seg in grid.segments])
        vals = vals - vals.min()  # keep data nonnegative; slope unchanged
        prob = Problem(grid, 2.0, op, wall, dirichlet_cap(),
                       initial_field(grid, vals, ramp=False))
        dt = 1e-8
        after = step(prob.initial, prob, dt, include_reaction=False)
        left, right = grid.segments
        rate_left = (after.values[left.offset] - vals[left.offset]) / dt
        rate_right = (after.values[right.offset] - vals[right.offset]) / dt
        assert rate_left == pytest.approx(-1.0 / 2.0, abs=1e-5)
        assert rate_right == pytest.approx(1.0 / 2.0, abs=1e-5)


class TestImplicitSystem:
    @pytest.mark.parametrize("dt", [1e-10, 1e-4, 0.05, 10.0])
    @pytest.mark.parametrize("sigma", [0.0, 0.3, 5.0])
    def test_monotone_for_admitted_grids(self, dt, sigma):
        for dom, dim in ((RadialExterior(2, 0.5), 2), (RadialExterior(3, 1.0), 3),
                         (TwoRays(-1.0, 1.0), 1)):
            grid = build_grid(dom, 10.0, 64)
            op = assemble_laplacian(grid, dim)
            wall = dynamical_closure(ConstantSigma(sigma), grid, dom.boundary_ids[0])
            build_implicit_system(op, wall, dirichlet_cap(), dt, dt, check=True)

    def test_neumann_cap_checked_too(self):
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 64)
        op = assemble_laplacian(grid, 3)
        build_implicit_system(op, neumann_closure("wall"), neumann_closure("cap"),
                              0.01, 0.01, check=True)

    def test_diffusion_maximum_principle(self):
        # pure diffusion keeps data inside its initial range
        rng = np.random.default_rng(3)
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 200)
        op = assemble_laplacian(grid, 3)
        wall = dynamical_closure(ConstantSigma(1.0), grid, "sphere")
        vals = rng.uniform(0.0, 1.0, grid.n_nodes)
        prob = Problem(grid, 2.0, op, wall, dirichlet_cap(),
                       initial_field(grid, vals, ramp=False))
        state = prob.initial
        for _ in range(50):
            state = step(state, prob, 0.01, include_reaction=False)
        assert np.all(state.values >= -1e-12)
        assert np.all(state.values <= 1.0 + 1e-12)

    def test_rejects_unordered_closures(self):
        grid = build_grid(RadialExterior(3, 1.0), 10.0, 64)
        op = assemble_laplacian(grid, 3)
        with pytest.raises(ValueError):
            build_implicit_system(op, dirichlet_cap(), dirichlet_cap(), 0.01, 0.01)
