""" Tests for the truncations and energy primitives """

# Imports
import unittest

# 3rd party
import numpy as np

# Our own imports
from chemotax import model_fns
from chemotax.errors import DomainError
from chemotax.grid import GridSpec, Field

# Tests


class TestModelParams(unittest.TestCase):

    def test_defaults(self):

        params = model_fns.ModelParams()

        assert params.to_dict() == {'s': 1.0, 'm': 10.0, 'alpha': 0.1, 'alpha_max': 0.1}

    def test_rejects_out_of_range(self):

        with self.assertRaises(ValueError):
            model_fns.ModelParams(s=0.5)
        with self.assertRaises(ValueError):
            model_fns.ModelParams(m=0.5)
        with self.assertRaises(ValueError):
            model_fns.ModelParams(alpha=0.2)
        with self.assertRaises(ValueError):
            model_fns.ModelParams(alpha=0.0)

        params = model_fns.ModelParams(alpha=0.2, alpha_max=0.5)
        assert params.alpha == 0.2


class TestTruncations(unittest.TestCase):

    def test_cap(self):

        assert model_fns.tm_cap(3, 5) == 3
        assert model_fns.tm_cap(7, 5) == 5
        assert model_fns.tm_cap(5, 5) == 5
        np.testing.assert_array_equal(model_fns.tm_cap(np.array([1.0, 6.0]), 5), [1.0, 5.0])

    def test_smooth_values(self):

        assert model_fns.tm_smooth(-3, 5) == -1
        assert model_fns.tm_smooth(2, 5) == 2
        assert model_fns.tm_smooth(10, 5) == 6
        assert model_fns.tm_smooth(0, 5) == 0
        assert model_fns.tm_smooth(5, 5) == 5
        assert isinstance(model_fns.tm_smooth(1.5, 5), float)

    def test_smooth_is_c2_across_knots(self):

        m, h = 5.0, 1e-4
        for knot in (-2.0, 0.0, m, m + 2.0):
            left = np.asarray(model_fns.tm_smooth(knot - np.arange(3) * h, m))
            right = np.asarray(model_fns.tm_smooth(knot + np.arange(3) * h, m))

            d1_left = (left[0] - left[1]) / h
            d1_right = (right[1] - right[0]) / h
            self.assertAlmostEqual(d1_left, d1_right, delta=1e-3)

            d2_left = (left[0] - 2 * left[1] + left[2]) / h ** 2
            d2_right = (right[2] - 2 * right[1] + right[0]) / h ** 2
            self.assertAlmostEqual(d2_left, d2_right, delta=1e-3)

    def test_smooth_is_bounded_and_monotone(self):

        m = 4.0
        r = np.linspace(0.0, 20.0, 2001)
        values = model_fns.tm_smooth(r, m)

        assert np.all(values >= 0.0)
        assert np.all(values <= m + 1.0)
        assert np.all(np.diff(values) >= 0.0)

        below = model_fns.tm_smooth(np.linspace(-5.0, 0.0, 501), m)
        assert np.all(np.diff(below) >= 0.0)

    def test_smooth_derivative_matches_finite_differences(self):

        m = 3.0
        r = np.array([-1.5, -0.5, 1.0, 3.5, 4.5])
        h = 1e-6
        fd = (model_fns.tm_smooth(r + h, m) - model_fns.tm_smooth(r - h, m)) / (2 * h)

        np.testing.assert_allclose(model_fns.truncate_derivative(r, m, 'smooth'), fd, atol=1e-6)

    def test_truncate_dispatch(self):

        assert model_fns.truncate(12.0, 10.0, 'cap') == 10.0
        assert model_fns.truncate(13.0, 10.0, 'smooth') == 11.0
        with self.assertRaises(ValueError):
            model_fns.truncate(1.0, 10.0, 'hard')

    def test_consumption(self):

        assert model_fns.consumption(3.0, 10.0, 2.0) == 9.0
        assert model_fns.consumption(15.0, 10.0, 2.0) == 100.0
        assert model_fns.consumption(-1e-14, 10.0, 1.0) == 0.0

        assert model_fns.consumption_derivative(3.0, 10.0, 2.0) == 6.0
        assert model_fns.consumption_derivative(15.0, 10.0, 2.0) == 0.0
        assert model_fns.consumption_derivative(0.0, 10.0, 2.0) == 0.0


class TestEnergyPrimitives(unittest.TestCase):

    def test_gm_prime(self):

        assert model_fns.gm_prime(1.0, model_fns.ModelParams(s=1, m=10)) == 0.0
        assert model_fns.gm_prime(3.0, model_fns.ModelParams(s=2, m=10)) == 3.0
        assert model_fns.gm_prime(15.0, model_fns.ModelParams(s=2, m=10)) == 10.0

        with self.assertRaises(DomainError):
            model_fns.gm_prime(0.0, model_fns.ModelParams(s=1))
        with self.assertRaises(DomainError):
            model_fns.gm_prime(-1.0, model_fns.ModelParams(s=2))

    def test_gm_primitive(self):

        params1 = model_fns.ModelParams(s=1, m=10)
        params2 = model_fns.ModelParams(s=2, m=10)

        assert model_fns.gm_primitive(0.0, params1) == 0.0
        assert abs(model_fns.gm_primitive(1e-12, params1)) < 1e-10
        self.assertAlmostEqual(model_fns.gm_primitive(2.0, params2), 2.0, places=14)
        self.assertAlmostEqual(model_fns.gm_primitive(12.0, params2), 70.0, places=12)

        with self.assertRaises(DomainError):
            model_fns.gm_primitive(-0.5, params2)

    def test_gm_primitive_is_convex_antiderivative(self):

        for s in (1.0, 1.5, 3.0):
            params = model_fns.ModelParams(s=s, m=4.0)
            r = np.linspace(0.1, 8.0, 400)
            g = model_fns.gm_primitive(r, params)

            assert np.all(np.diff(g, 2) >= -1e-12)

            h = 1e-6
            fd = (model_fns.gm_primitive(r + h, params) - model_fns.gm_primitive(r - h, params)) / (2 * h)
            away = np.abs(r - params.m) > 2 * h
            np.testing.assert_allclose(fd[away], model_fns.gm_prime(r, params)[away], rtol=1e-6, atol=1e-6)

    def test_g_energy_density(self):

        assert model_fns.g_energy_density(0.0, 1.0) == 0.0
        self.assertAlmostEqual(model_fns.g_energy_density(2.0, 2.0), 2.0, places=14)
        self.assertAlmostEqual(model_fns.g_energy_density(1.0, 3.0), 1.0 / 6.0, places=14)

        with self.assertRaises(DomainError):
            model_fns.g_energy_density(-1.0, 2.0)

    def test_energy_E(self):

        grid = GridSpec((64, ))

        assert model_fns.energy_E(Field.constant(grid, 0.0), Field.constant(grid, 3.0), 1.0) == 0.0
        self.assertAlmostEqual(
            model_fns.energy_E(Field.constant(grid, 2.0), Field.constant(grid, 1.0), 2.0), 1.0, places=14)

        # Interior faces only: 63 unit gradients of weight 1/64
        z = Field.from_function(grid, lambda x: x)
        res = model_fns.energy_E(Field.constant(grid, 0.0), z, 1.0)
        self.assertAlmostEqual(res, 0.5 * 63 / 64, places=12)

        with self.assertRaises(DomainError):
            model_fns.energy_E(Field.constant(grid, -1e-6), z, 1.0)
