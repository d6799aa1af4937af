""" Tests for the time stepping scheme """

# Imports
import unittest

# 3rd party
import numpy as np

# Our own imports
from chemotax import scheme
from chemotax.errors import DomainError, InvariantViolation, NonConvergenceError, StabilityError
from chemotax.grid import GridSpec, Field, integrate
from chemotax.model_fns import ModelParams

from . import helpers

# Tests


class TestSchemeParams(unittest.TestCase):

    def test_step_count(self):

        assert scheme.SchemeParams(k=0.1, T_final=1.0).n_steps == 10
        assert scheme.SchemeParams(k=0.25, T_final=0.25).n_steps == 1
        assert scheme.SchemeParams(k=0.3, T_final=1.0).n_steps == 4

    def test_variant_aliases(self):

        assert scheme.SchemeParams(k=0.1, v_variant='FromU').v_variant == 'from_u'
        assert scheme.SchemeParams(k=0.1, v_variant='FromZ').v_variant == 'from_z'

    def test_rejects_bad_values(self):

        with self.assertRaises(ValueError):
            scheme.SchemeParams(k=0.0)
        with self.assertRaises(ValueError):
            scheme.SchemeParams(k=0.1, v_variant='from_w')
        with self.assertRaises(ValueError):
            scheme.SchemeParams(k=0.1, flux_scheme='weno')
        with self.assertRaises(ValueError):
            scheme.SchemeParams(k=0.1, picard_max=0)
        with self.assertRaises(ValueError):
            scheme.SchemeParams(k=0.1, picard_depth=-1)
        with self.assertRaises(ValueError):
            scheme.SchemeParams(k=0.5, T_final=0.25)

    def test_replace_and_to_dict(self):

        params = scheme.SchemeParams(k=0.1)
        res = params.replace(k=0.05)

        assert res.k == 0.05
        assert params.k == 0.1
        assert res.to_dict()['model'] == {'s': 1.0, 'm': 10.0, 'alpha': 0.1, 'alpha_max': 0.1}


class TestInitialize(unittest.TestCase):

    def test_z_from_v(self):

        grid = GridSpec((8, ))
        params = helpers.make_params()

        res = scheme.initialize(Field.constant(grid, 0.0), Field.constant(grid, 0.0), params)
        np.testing.assert_allclose(res.z.values, 0.1, rtol=1e-15)

        res = scheme.initialize(Field.constant(grid, 0.0), Field.constant(grid, 1.0), params)
        np.testing.assert_allclose(res.z.values, np.sqrt(1.01), rtol=1e-15)
        assert res.n == 0
        assert res.t == 0.0

    def test_rejects_negative_data(self):

        grid = GridSpec((8, ))
        params = helpers.make_params()
        u0 = Field(grid, np.r_[-1.0, np.ones(7)])

        with self.assertRaises(DomainError):
            scheme.initialize(u0, Field.constant(grid, 1.0), params)
        with self.assertRaises(DomainError):
            scheme.initialize(Field.constant(grid, 1.0), u0, params)


class TestVUpdates(unittest.TestCase):

    def test_from_z(self):

        grid = GridSpec((8, ))
        alpha = 0.1

        np.testing.assert_allclose(scheme.v_update_from_z(Field.constant(grid, alpha), alpha).values, 0.0, atol=1e-17)
        np.testing.assert_allclose(scheme.v_update_from_z(Field.constant(grid, np.sqrt(1 + alpha ** 2)), alpha).values,
                                   1.0, rtol=1e-14)

        v = Field(grid, np.linspace(0.0, 2.0, 8))
        z = v.with_values(np.sqrt(v.values + alpha ** 2))
        np.testing.assert_allclose(scheme.v_update_from_z(z, alpha).values, v.values, atol=1e-15)

    def test_from_u_constants(self):

        grid = GridSpec((16, ))
        params = helpers.make_params(k=0.1, model=ModelParams(s=2.0))

        res = scheme.v_update_from_u(Field.constant(grid, 3.0), Field.constant(grid, 0.0), params)
        np.testing.assert_allclose(res.values, 3.0, rtol=1e-14)

        res = scheme.v_update_from_u(Field.constant(grid, 3.0), Field.constant(grid, 2.0), params)
        np.testing.assert_allclose(res.values, 3.0 / (1.0 + 0.1 * 4.0), rtol=1e-14)

    def test_from_u_stays_nonnegative(self):

        rng = np.random.default_rng(5)
        grid = GridSpec((32, ))
        params = helpers.make_params(k=0.05)

        v_prev = Field(grid, rng.random(32))
        u_n = Field(grid, 20.0 * rng.random(32))
        res = scheme.v_update_from_u(v_prev, u_n, params)

        assert np.min(res.values) >= 0.0
        assert np.max(res.values) <= np.max(v_prev.values)


class TestRun(unittest.TestCase):

    def test_zero_cells_keep_the_chemical(self):

        grid = GridSpec((32, ))
        params = helpers.make_params(k=0.125, T_final=0.5)

        traj = scheme.run(Field.constant(grid, 0.0), Field.constant(grid, 1.0), params)

        assert traj.n_steps == 4
        np.testing.assert_array_equal(traj.stack('u'), 0.0)
        np.testing.assert_allclose(traj.stack('v'), 1.0, rtol=1e-12)

    def test_constant_data_scalar_recurrence(self):

        grid = GridSpec((16, ))
        c, d, k = 2.0, 1.5, 0.125
        params = helpers.make_params(k=k, T_final=0.5, v_variant='from_u', model=ModelParams(s=2.0))

        traj = scheme.run(Field.constant(grid, c), Field.constant(grid, d), params)

        for s in traj.steps:
            np.testing.assert_allclose(s.u.values, c, rtol=1e-12)
            np.testing.assert_allclose(s.v.values, d / (1.0 + k * c ** 2) ** s.n, rtol=1e-12)

    def test_single_step(self):

        grid = GridSpec((16, ))
        u0, v0 = helpers.bump_data(grid)

        traj = scheme.run(u0, v0, helpers.make_params(k=0.1, T_final=0.1))

        assert traj.n_steps == 1
        assert len(traj) == 2
        np.testing.assert_allclose(traj.times, [0.0, 0.1])

        first = scheme.step(scheme.initialize(u0, v0, traj.params), traj.params)
        assert first.n == 1
        assert first.picard_iters >= 1
        assert first.picard_residual <= traj.params.picard_tol
        np.testing.assert_array_equal(first.u.values, traj.final.u.values)
        np.testing.assert_array_equal(first.z.values, traj.final.z.values)

    def test_bounds_and_mass_on_bump(self):

        grid = GridSpec((64, ))
        u0 = helpers.bump_data(grid, amplitude=4.0)[0]
        v0 = Field.from_function(grid, lambda x: 1.0 + 0.5 * np.cos(np.pi * x))

        traj = scheme.run(u0, v0, helpers.make_params(k=0.03125, T_final=0.5))
        df = traj.to_frame()

        mass0 = integrate(u0)
        assert np.all(np.abs(df['mass'] - mass0) <= 1e-10 * mass0)
        assert df['u_min'].min() >= -1e-8
        assert df['z_min'].min() >= 0.1 - 1e-8
        assert np.all(np.diff(df['z_max']) <= 1e-8)
        assert df['v_max'].max() <= np.max(v0.values) + 1e-8
        assert df['v_min'].min() >= -1e-8
        assert df['picard_iters'].iloc[1:].min() >= 1
        assert df['picard_residual'].max() < 1e-9

    def test_upwind_keeps_u_nonnegative(self):

        grid = GridSpec((64, ))
        u0 = Field.from_function(grid, lambda x: 8.0 * (np.abs(x - 0.3) < 0.05))
        v0 = Field.from_function(grid, lambda x: 0.1 + 4.0 * x ** 2)

        traj = scheme.run(u0, v0, helpers.make_params(k=0.0625, T_final=0.5, flux_scheme='upwind'))

        assert np.min(traj.stack('u')) >= 0.0

    def test_upwind_keeps_u_nonnegative_in_2d(self):

        grid = GridSpec((24, 24))
        u0 = Field.from_function(grid, lambda x, y: 8.0 * ((np.abs(x - 0.3) < 0.1) & (np.abs(y - 0.3) < 0.1)))
        v0 = Field.from_function(grid, lambda x, y: 0.1 + 4.0 * x ** 2 + 3.0 * y ** 2)

        traj = scheme.run(u0, v0, helpers.make_params(k=0.0625, T_final=0.25, flux_scheme='upwind'))

        assert traj.n_steps == 4
        assert np.min(traj.stack('u')) >= 0.0
        self.assertAlmostEqual(integrate(traj.final.u), integrate(u0), delta=1e-10 * integrate(u0))

    def test_upwind_rejects_any_negative_u(self):

        grid = GridSpec((4, 4))
        prev = scheme.initialize(Field.constant(grid, 1.0), Field.constant(grid, 1.0), helpers.make_params())
        u = np.ones(grid.n_cells)
        u[5] = -1e-12
        new = scheme.TimeStep(n=1, t=0.0625, u=prev.u.with_values(u), z=prev.z, v=prev.v)

        scheme._check_step(prev, new, helpers.make_params(flux_scheme='central'), bounded_above=True)
        with self.assertRaises(InvariantViolation) as context:
            scheme._check_step(prev, new, helpers.make_params(flux_scheme='upwind'), bounded_above=True)
        assert context.exception.check == 'u_nonnegative'

    def test_smooth_truncation_and_large_s(self):

        grid = GridSpec((32, ))
        u0, v0 = helpers.bump_data(grid, amplitude=3.0)
        params = helpers.make_params(k=0.0625, T_final=0.25, truncation='smooth', model=ModelParams(s=2.5, m=2.0))

        traj = scheme.run(u0, v0, params)

        self.assertAlmostEqual(integrate(traj.final.u), integrate(u0), delta=1e-10 * integrate(u0))

    def test_2d_run_conserves_mass(self):

        grid = GridSpec((10, 8), (1.0, 0.8))
        u0, v0 = helpers.bump_data(grid)

        traj = scheme.run(u0, v0, helpers.make_params(k=0.0625, T_final=0.25))

        assert traj.n_steps == 4
        self.assertAlmostEqual(integrate(traj.final.u), integrate(u0), delta=1e-10 * integrate(u0))

    def test_nonconvergence_keeps_partial_trajectory(self):

        grid = GridSpec((32, ))
        u0, v0 = helpers.bump_data(grid, amplitude=4.0)
        v0 = Field.from_function(grid, lambda x: 1.0 + x)
        params = helpers.make_params(k=0.25, T_final=1.0, picard_max=1, picard_tol=1e-14)

        with self.assertRaises(NonConvergenceError) as context:
            scheme.run(u0, v0, params)

        err = context.exception
        assert len(err.residual_history) == 1
        assert len(err.trajectory) == 1
        assert err.to_dict()['exit_code'] == 3

    def test_to_frame_columns(self):

        grid = GridSpec((8, ))
        traj = scheme.run(*helpers.bump_data(grid), helpers.make_params(k=0.25, T_final=0.5))

        assert list(traj.to_frame().columns) == [
            'n', 't', 'mass', 'u_min', 'u_max', 'z_min', 'z_max', 'v_min', 'v_max',
            'picard_iters', 'picard_residual',
        ]
        assert traj.stack('z').shape == (3, 8)
        with self.assertRaises(KeyError):
            traj.stack('w')


class TestPicard(unittest.TestCase):

    def indicator_data_1d(self):
        grid = GridSpec((24, ))
        u0 = Field.from_function(grid, lambda x: 8.0 * (np.abs(x - 0.3) < 0.1))
        v0 = Field.from_function(grid, lambda x: 0.1 + 4.0 * x ** 2)
        return u0, v0

    def test_converges_on_indicator_data(self):

        u0, v0 = self.indicator_data_1d()

        for flux_scheme in ('central', 'upwind'):
            with self.subTest(flux_scheme=flux_scheme):
                params = helpers.make_params(k=0.0625, T_final=0.5, flux_scheme=flux_scheme)
                df = scheme.run(u0, v0, params).to_frame()

                assert df['picard_iters'].iloc[1:].max() <= 100
                assert df['picard_residual'].max() < params.picard_tol
                np.testing.assert_allclose(df['mass'], integrate(u0), rtol=1e-10)

    def test_converges_on_indicator_data_in_2d(self):

        grid = GridSpec((24, 24))
        u0 = Field.from_function(grid, lambda x, y: 8.0 * ((np.abs(x - 0.3) < 0.1) & (np.abs(y - 0.3) < 0.1)))
        v0 = Field.from_function(grid, lambda x, y: 0.1 + 4.0 * x ** 2 + 3.0 * y ** 2)
        params = helpers.make_params(k=0.0625, T_final=0.125)

        df = scheme.run(u0, v0, params).to_frame()

        assert df['picard_iters'].iloc[1:].max() <= 100
        assert df['u_min'].min() >= -params.bound_tol
        assert df['z_min'].min() >= params.model.alpha - params.bound_tol

    def test_acceleration_keeps_the_fixed_point(self):

        grid = GridSpec((32, ))
        u0 = helpers.bump_data(grid, amplitude=2.0)[0]
        v0 = Field.from_function(grid, lambda x: 1.0 + 0.5 * np.cos(np.pi * x))

        plain = scheme.run(u0, v0, helpers.make_params(k=0.0625, T_final=0.25, picard_depth=0))
        mixed = scheme.run(u0, v0, helpers.make_params(k=0.0625, T_final=0.25))

        np.testing.assert_allclose(mixed.stack('u'), plain.stack('u'), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(mixed.stack('z'), plain.stack('z'), rtol=1e-6, atol=1e-8)


class TestForcing(unittest.TestCase):

    def test_zero_forcing_matches_unforced_run(self):

        grid = GridSpec((16, ))
        u0, v0 = helpers.bump_data(grid)
        params = helpers.make_params(k=0.125, T_final=0.5, v_variant='from_u')
        forcing = scheme.ControlForcing(np.zeros((4, 16)), np.ones(16))

        res = scheme.linearly_implicit_run(u0, v0, params, forcing=forcing)
        exp = scheme.linearly_implicit_run(u0, v0, params)

        np.testing.assert_array_equal(res.stack('u'), exp.stack('u'))
        np.testing.assert_array_equal(res.stack('v'), exp.stack('v'))

    def test_growth_recurrence(self):

        grid = GridSpec((16, ))
        c, d, k = 1.5, 0.75, 0.125
        params = helpers.make_params(k=k, T_final=0.5, v_variant='from_u')
        forcing = scheme.ControlForcing(np.full((4, 16), c), np.ones(16))

        for runner in (scheme.linearly_implicit_run, scheme.run):
            traj = runner(Field.constant(grid, 0.0), Field.constant(grid, d), params, forcing=forcing)
            for s in traj.steps:
                np.testing.assert_allclose(s.v.values, d / (1.0 - k * c) ** s.n, rtol=1e-12)

    def test_stability_guard(self):

        grid = GridSpec((8, ))
        params = helpers.make_params(k=0.5, T_final=1.0)
        forcing = scheme.ControlForcing(np.full((2, 8), 4.0), np.ones(8))

        with self.assertRaises(StabilityError) as context:
            scheme.linearly_implicit_run(Field.constant(grid, 0.0), Field.constant(grid, 1.0), params, forcing=forcing)

        self.assertAlmostEqual(context.exception.suggested_k, 0.125)

    def test_forcing_off_the_mask_is_ignored(self):

        forcing = scheme.ControlForcing(np.full((2, 4), 3.0), np.array([1.0, 1.0, 0.0, 0.0]))

        np.testing.assert_array_equal(forcing.effective(1), [3.0, 3.0, 0.0, 0.0])
        assert forcing.has_positive_part
        assert forcing.n_steps == 2


class TestInterpolants(unittest.TestCase):

    def setUp(self):
        grid = GridSpec((16, ))
        self.traj = scheme.run(*helpers.bump_data(grid), helpers.make_params(k=0.125, T_final=0.5))

    def test_nodes_return_steps(self):

        for s in self.traj.steps:
            u_pc, z_pc = scheme.interpolant_pc(self.traj, s.t)
            u_lin, z_lin = scheme.interpolant_lin(self.traj, s.t)

            np.testing.assert_array_equal(u_pc.values, s.u.values)
            np.testing.assert_array_equal(z_pc.values, s.z.values)
            np.testing.assert_allclose(u_lin.values, s.u.values, rtol=1e-14)
            np.testing.assert_allclose(z_lin.values, s.z.values, rtol=1e-14)

    def test_midpoint(self):

        prev, cur = self.traj.steps[1], self.traj.steps[2]
        u_lin, z_lin = scheme.interpolant_lin(self.traj, 0.5 * (prev.t + cur.t))
        u_pc, _ = scheme.interpolant_pc(self.traj, 0.5 * (prev.t + cur.t))

        np.testing.assert_allclose(u_lin.values, 0.5 * (prev.u.values + cur.u.values), rtol=1e-13)
        np.testing.assert_allclose(z_lin.values, 0.5 * (prev.z.values + cur.z.values), rtol=1e-13)
        np.testing.assert_array_equal(u_pc.values, cur.u.values)

    def test_out_of_range(self):

        with self.assertRaises(DomainError):
            scheme.interpolant_pc(self.traj, -0.1)
        with self.assertRaises(DomainError):
            scheme.interpolant_lin(self.traj, 0.75)


class TestEyreIdentity(unittest.TestCase):

    def test_identity_holds(self):

        rng = np.random.default_rng(9)
        grid = GridSpec((64, ))
        z_prev = Field(grid, rng.random(64))
        z_n = Field(grid, rng.random(64))

        assert scheme.eyre_identity_check(z_n, z_n, 0.1) == 0.0
        for k in (1.0, 10.0):
            assert scheme.eyre_identity_check(z_n, z_prev, k) <= 1e-12
