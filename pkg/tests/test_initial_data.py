""" Tests for the initial data recipes """

# Imports
import unittest

# 3rd party
import numpy as np

# Our own imports
from chemotax import initial_data
from chemotax.grid import GridSpec, Field, integrate

from . import helpers

# Tests


class TestBuildInitialField(helpers.FileSystemTestCase):

    def test_constant(self):

        grid = GridSpec((16, ))
        res = initial_data.build_initial_field(grid, {'kind': 'constant', 'value': 2.5})

        np.testing.assert_array_equal(res.values, 2.5)

    def test_gaussian_peaks_at_center(self):

        grid = GridSpec((21, 21))
        recipe = {'kind': 'gaussian', 'center': [0.5, 0.5], 'width': 0.1, 'amplitude': 3.0, 'background': 0.5}
        res = initial_data.build_initial_field(grid, recipe)

        assert np.argmax(res.values) == 10 * 21 + 10
        self.assertAlmostEqual(np.max(res.values), 3.5, places=12)
        assert np.min(res.values) > 0.5

    def test_cosine_has_background_mean(self):

        grid = GridSpec((32, ))
        recipe = {'kind': 'cosine', 'mode': 2, 'amplitude': 0.3, 'background': 1.0}
        res = initial_data.build_initial_field(grid, recipe)

        self.assertAlmostEqual(integrate(res), 1.0, places=12)

    def test_csv_with_relative_path(self):

        grid = GridSpec((8, ))
        field = Field(grid, np.linspace(0.0, 1.0, 8))
        field.to_csv(self.tempdir / 'u0.csv')

        res = initial_data.build_initial_field(grid, {'kind': 'csv', 'path': 'u0.csv'}, base_dir=self.tempdir)

        np.testing.assert_array_equal(res.values, field.values)

    def test_csv_on_wrong_grid_fails(self):

        Field.constant(GridSpec((8, )), 1.0).to_csv(self.tempdir / 'u0.csv')

        with self.assertRaises(ValueError):
            initial_data.build_initial_field(GridSpec((16, )), {'kind': 'csv', 'path': str(self.tempdir / 'u0.csv')})

    def test_perturbed_is_seeded(self):

        grid = GridSpec((32, ))
        recipe = {'kind': 'perturbed', 'noise': 0.1, 'base': {'kind': 'constant', 'value': 1.0}}

        res1 = initial_data.build_initial_field(grid, recipe, seed=7)
        res2 = initial_data.build_initial_field(grid, recipe, seed=7)
        res3 = initial_data.build_initial_field(grid, recipe, seed=8)

        np.testing.assert_array_equal(res1.values, res2.values)
        assert not np.array_equal(res1.values, res3.values)
        assert np.all((res1.values >= 1.0) & (res1.values < 1.1))

    def test_sum(self):

        grid = GridSpec((8, ))
        recipe = {'kind': 'sum', 'terms': [
            {'kind': 'constant', 'value': 1.0},
            {'kind': 'constant', 'value': 0.25},
        ]}
        res = initial_data.build_initial_field(grid, recipe)

        np.testing.assert_array_equal(res.values, 1.25)

    def test_invalid_recipe_raises(self):

        with self.assertRaises(ValueError):
            initial_data.build_initial_field(GridSpec((8, )), {'kind': 'gaussian', 'center': 0.5})


class TestValidateRecipe(unittest.TestCase):

    def test_valid_recipe_has_no_errors(self):

        recipe = {'kind': 'gaussian', 'center': 0.5, 'width': 0.1, 'amplitude': 1.0}

        assert initial_data.validate_recipe(recipe) == []

    def test_reports_every_missing_key_with_its_path(self):

        res = initial_data.validate_recipe({'kind': 'gaussian'}, 'initial_data.u')

        assert res == [
            'initial_data.u.center: missing',
            'initial_data.u.width: missing',
            'initial_data.u.amplitude: missing',
        ]

    def test_nested_errors(self):

        recipe = {'kind': 'sum', 'terms': [
            {'kind': 'constant', 'value': 'one'},
            {'kind': 'perturbed', 'noise': -1.0, 'base': {'kind': 'bogus'}},
        ]}
        res = initial_data.validate_recipe(recipe, 'u')

        assert res == [
            "u.terms[0].value: expected a number, got 'one'",
            'u.terms[1].noise: expected a non-negative number, got -1.0',
            "u.terms[1].base.kind: expected one of ('constant', 'gaussian', 'cosine', 'csv', 'perturbed', 'sum'), got 'bogus'",
        ]

    def test_not_a_table(self):

        res = initial_data.validate_recipe(3.0, 'v')

        assert len(res) == 1
        assert res[0].startswith('v: expected a table')
