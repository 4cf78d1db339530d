import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from blightwave._blocklu import BlockLU
from blightwave.errors import BlowUpError, DomainError, InstabilityError
from blightwave.model import figure1_params, reaction_terms, table5_params
from blightwave.solver import (FieldState, Grid, Trajectory, _InterleavedSystem, full_rhs,
                               integrate, laplacian_neumann, standard_initial_condition)


def logistic(t, u0, cap, r):
    """Closed-form solution of u' = r u (1 - u/cap)."""
    e = math.exp(r * t)
    return u0 * cap * e / ((cap - u0) + u0 * e)


def homogeneous(grid, b, n, t=0.0):
    """B-only state: all flowers removed, so the carrying capacity is eps."""
    z = np.zeros(grid.n_cells)
    return FieldState(t, z + b, z, z, z, z + n)


class TestGrid:
    def test_spacing(self):
        g = Grid(1000.0, 10000)
        assert g.dx == pytest.approx(0.1)
        assert g.centers[0] == pytest.approx(0.05)
        assert g.centers[-1] == pytest.approx(999.95)

    @pytest.mark.parametrize("length,n", [(1.0, 2), (0.0, 10), (-1.0, 10), (1.0, 3.5)])
    def test_invalid(self, length, n):
        with pytest.raises(DomainError):
            Grid(length, n)


class TestLaplacian:
    def test_constant(self):
        assert np.all(laplacian_neumann(np.full(10, 3.7), 0.5) == 0)

    def test_quadratic_interior(self):
        dx = 0.1
        x = np.arange(50) * dx
        lap = laplacian_neumann(x ** 2, dx)
        np.testing.assert_allclose(lap[1:-1], 2.0, rtol=1e-9)

    def test_reflecting_ghosts(self):
        lap = laplacian_neumann(np.array([1.0, 0.0, 0.0, 4.0]), 1.0)
        np.testing.assert_allclose(lap, [-1.0, 1.0, 4.0, -4.0])

    def test_mass_conservation(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            f = rng.random(rng.integers(3, 100)) * 10 ** rng.uniform(-3, 8)
            assert abs(laplacian_neumann(f, 0.37).sum()) <= 1e-12 * np.abs(f).sum() / 0.37 ** 2

    def test_too_short(self):
        with pytest.raises(DomainError):
            laplacian_neumann(np.ones(2), 1.0)


class TestFullRhs:
    def test_homogeneous_matches_reaction(self, small_grid, params5):
        z = np.ones(small_grid.n_cells)
        state = FieldState(0.0, 2e5 * z, 1e6 * z, 3.0 * z, 1.5 * z, 0.5 * z)
        rates = full_rhs(state, params5, small_grid)
        expected = reaction_terms(2e5, 1e6, 3.0, 1.5, 0.5, params5)
        for name, value in zip("bosir", expected):
            np.testing.assert_allclose(getattr(rates, name), value, rtol=1e-14)

    def test_disease_free_is_stationary(self, small_grid, params5):
        rates = full_rhs(standard_initial_condition(small_grid, params5, 0.0), params5, small_grid)
        assert all(np.all(getattr(rates, c) == 0) for c in "bosir")

    def test_spike_diffusion_conserves_mass(self, small_grid, params5):
        state = standard_initial_condition(small_grid, params5, 1e6)
        b = np.zeros(small_grid.n_cells)
        b[57] = 1e6
        o = np.zeros_like(b)
        o[80] = 1e9
        state = FieldState(0.0, b, o, state.s, state.i, state.r)
        rates = full_rhs(state, params5, small_grid)
        db, do, *_ = reaction_terms(b, o, state.s, state.i, state.r, params5)
        assert rates.b.sum() == pytest.approx(db.sum(), rel=1e-12)
        assert rates.o.sum() == pytest.approx(do.sum(), rel=1e-12)
        assert rates.b[56] > 0 and rates.b[58] > 0  # diffusion spreads the spike

    def test_flowers_do_not_diffuse(self, small_grid, params5):
        state = standard_initial_condition(small_grid, params5, 0.0)
        s = state.s.copy()
        s[10] = 2.0
        r = state.r.copy()
        r[10] = 3.0
        rates = full_rhs(FieldState(0.0, state.b, state.o, s, state.i, r), params5, small_grid)
        assert np.all(rates.s == 0) and np.all(rates.r == 0)


class TestInitialCondition:
    def test_point_seed(self, small_grid, params5):
        s0 = standard_initial_condition(small_grid, params5, 1e6)
        assert s0.b[0] == 1e6 and s0.b[1:].sum() == 0
        assert np.all(s0.s == 5.0) and not s0.o.any() and not s0.i.any() and not s0.r.any()

    def test_rejects_negative_seed(self, small_grid, params5):
        with pytest.raises(DomainError):
            standard_initial_condition(small_grid, params5, -1.0)

    def test_fields_are_read_only(self, small_grid, params5):
        s0 = standard_initial_condition(small_grid, params5)
        with pytest.raises(ValueError):
            s0.b[0] = 1.0


class TestJacobianAndBlockSolver:
    def test_jacobian_matches_finite_differences(self, params5):
        grid = Grid(10.0, 6)
        rng = np.random.default_rng(0)
        y = np.column_stack([rng.uniform(1e5, 1e6, 6), rng.uniform(0, 1e8, 6),
                             rng.uniform(0, 2, 6), rng.uniform(0, 2, 6), rng.uniform(0, 1, 6)])
        y = y.ravel()
        system = _InterleavedSystem(params5, grid)
        jac = system.jac(0.0, y).toarray()
        f0 = system.fun(0.0, y)
        for k in range(y.size):
            h = 1e-6 * max(1.0, abs(y[k]))
            yp = y.copy()
            yp[k] += h
            fd = (system.fun(0.0, yp) - f0) / h
            np.testing.assert_allclose(jac[:, k], fd, rtol=1e-4, atol=1e-6 * np.abs(f0).max())

    def test_block_lu_matches_sparse_solver(self, params5):
        grid = Grid(100.0, 40)
        rng = np.random.default_rng(1)
        y = np.abs(rng.normal(size=5 * grid.n_cells)) * np.tile([1e5, 1e7, 1, 1, 1], grid.n_cells)
        jac = _InterleavedSystem(params5, grid).jac(0.0, y)
        matrix = (sp.identity(jac.shape[0], format="csc") - 0.05 * jac).tocsc()
        rhs = rng.normal(size=jac.shape[0])
        expected = spsolve(matrix, rhs)
        np.testing.assert_allclose(BlockLU(matrix).solve(rhs), expected, rtol=1e-9,
                                   atol=1e-12 * np.abs(expected).max())

    def test_block_lu_rejects_wrong_structure(self):
        m = sp.identity(10, format="lil")
        m[0, 9] = 1.0
        with pytest.raises(ValueError):
            BlockLU(m.tocsc())


class TestIntegrate:
    @pytest.mark.parametrize("method", ["adams_pc", "rk4", "bdf"])
    def test_logistic_oracle(self, method):
        p = table5_params(eps=2000.0, r=0.5, N=3.0)
        grid = Grid(3000.0, 3)
        kw = {"rtol": 1e-10, "atol": 1e-10} if method == "bdf" else {}
        traj = integrate(homogeneous(grid, 5.0, 3.0), p, grid, 10.0, dt=0.01, method=method,
                         record_every=1.0, **kw)
        exact = logistic(10.0, 5.0, 2000.0, 0.5)
        assert exact == pytest.approx(542.2345321251816, rel=1e-14)  # mpmath, 30 digits
        np.testing.assert_allclose(traj.at(10.0).b, exact, rtol=1e-6)
        for snap in traj.snapshots:
            np.testing.assert_allclose(snap.b, logistic(snap.t, 5.0, 2000.0, 0.5), rtol=1e-6)

    def test_adams_order_on_logistic(self):
        p = table5_params(eps=2000.0, r=0.5)
        grid = Grid(3000.0, 3)

        def final(dt):
            traj = integrate(homogeneous(grid, 5.0, 3.0), p, grid, 10.0, dt=dt,
                             method="adams_pc", record_every=10.0)
            return traj.snapshots[-1].b[0]

        # small enough that the optional second corrector never fires, so every
        # run uses the same PECE scheme
        dt = 0.0625
        ref = final(dt / 8)
        e1, e2 = abs(final(dt) - ref), abs(final(dt / 2) - ref)
        assert e1 / e2 >= 8.0
        exact = logistic(10.0, 5.0, 2000.0, 0.5)
        f1, f2 = abs(final(dt) - exact), abs(final(dt / 2) - exact)
        assert f1 / f2 >= 8.0

    def test_disease_free_is_constant(self, small_grid, params5):
        s0 = standard_initial_condition(small_grid, params5, 0.0)
        traj = integrate(s0, params5, small_grid, 2.0, dt=0.1)
        for snap in traj.snapshots:
            np.testing.assert_array_equal(snap.stacked(), s0.stacked())

    def test_record_grid(self, small_grid, params5):
        traj = integrate(standard_initial_condition(small_grid, params5), params5, small_grid,
                         1.0, dt=0.1, record_every=0.25)
        np.testing.assert_allclose(traj.times, [0.25, 0.5, 0.75, 1.0])
        assert traj.initial.t == 0.0
        single = integrate(standard_initial_condition(small_grid, params5), params5, small_grid,
                           1.0, dt=0.1, record_every=1.0)
        assert single.times.tolist() == [1.0]

    def test_invariants_hold_on_figure1_run(self, params5):
        grid = Grid(200.0, 400)
        traj = integrate(standard_initial_condition(grid, params5), params5, grid, 6.0, dt=0.1)
        for snap in traj.snapshots:
            total = snap.s + snap.i + snap.r
            assert np.abs(total - 5.0).max() <= 1e-6 * 5.0
            assert snap.stacked().min() >= 0.0

    def test_explicit_methods_agree(self, params5):
        # explicit stability needs 4 D dt / dx^2 small, hence the coarse grid
        grid = Grid(1000.0, 500)
        s0 = standard_initial_condition(grid, params5)
        a = integrate(s0, params5, grid, 5.0, dt=0.01, method="adams_pc", record_every=5.0)
        b = integrate(s0, params5, grid, 5.0, dt=0.01, method="rk4", record_every=5.0)
        ia, ib = a.snapshots[-1].i, b.snapshots[-1].i
        assert np.abs(ia - ib).max() <= 1e-4 * np.abs(ib).max()

    def test_bdf_agrees_with_rk4(self, params5):
        grid = Grid(1000.0, 500)
        s0 = standard_initial_condition(grid, params5)
        a = integrate(s0, params5, grid, 5.0, dt=0.01, method="bdf", record_every=5.0,
                      rtol=1e-8, atol=1e-8)
        b = integrate(s0, params5, grid, 5.0, dt=0.01, method="rk4", record_every=5.0)
        ia, ib = a.snapshots[-1].i, b.snapshots[-1].i
        assert np.abs(ia - ib).max() <= 1e-3 * np.abs(ib).max()

    def test_mass_changes_only_through_reactions(self, params5):
        # O has no source without infection, so pure decay + diffusion of an ooze bump
        grid = Grid(100.0, 100)
        z = np.zeros(grid.n_cells)
        o = z.copy()
        o[40:45] = 1e6
        s0 = FieldState(0.0, z, o, z, z, z + 5.0)
        traj = integrate(s0, params5, grid, 2.0, dt=0.01, method="rk4", record_every=1.0)
        decay = math.exp(-params5.gamma * 2.0)
        assert traj.snapshots[-1].o.sum() == pytest.approx(o.sum() * decay, rel=1e-9)

    def test_conservation_violation_is_reported(self, small_grid, params5):
        s0 = standard_initial_condition(small_grid, params5)
        s = s0.s.copy()
        s[17] = 4.0
        bad = FieldState(0.0, s0.b, s0.o, s, s0.i, s0.r)
        with pytest.raises(InstabilityError) as info:
            integrate(bad, params5, small_grid, 0.2, dt=0.1)
        assert info.value.cell == 17 and info.value.time == pytest.approx(0.1)

    def test_explicit_blow_up(self, params5):
        grid = Grid(100.0, 1000)
        s0 = standard_initial_condition(grid, params5)
        with pytest.warns(RuntimeWarning, match="stability"):
            with pytest.raises((BlowUpError, InstabilityError)):
                integrate(s0, params5, grid, 5.0, dt=0.1, method="rk4")

    @pytest.mark.parametrize("kw", [dict(method="euler"), dict(dt=0.0), dict(t_end=0.0),
                                    dict(record_every=0.05), dict(method="rk4", t_end=1.05)])
    def test_argument_validation(self, small_grid, params5, kw):
        args = dict(t_end=1.0, dt=0.1)
        args.update(kw)
        with pytest.raises(DomainError):
            integrate(standard_initial_condition(small_grid, params5), params5, small_grid, **args)

    def test_grid_mismatch(self, params5):
        s0 = standard_initial_condition(Grid(10.0, 10), params5)
        with pytest.raises(DomainError):
            integrate(s0, params5, Grid(10.0, 20), 1.0)


class TestTrajectory:
    def test_times_must_increase(self, small_grid, params5):
        s = standard_initial_condition(small_grid, params5)
        snaps = [FieldState(1.0, *s.stacked()), FieldState(0.5, *s.stacked())]
        with pytest.raises(DomainError):
            Trajectory(small_grid, params5, snaps, 0.5)

    def test_lookup(self, small_grid, params5):
        traj = integrate(standard_initial_condition(small_grid, params5), params5, small_grid,
                         1.0, dt=0.1, record_every=0.5)
        assert traj.at(0.5).t == 0.5
        assert traj.field("i").shape == (2, small_grid.n_cells)
        with pytest.raises(DomainError):
            traj.at(0.7)

    def test_clipped(self):
        s = FieldState(0.0, [-1e-12, 1.0, 2.0], [0, 0, 0], [1, 1, 1], [0, 0, 0], [0, 0, 0])
        assert s.clipped().b[0] == 0.0
