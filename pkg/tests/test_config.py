""" Tests for the config I/O module """

# Imports
import json

# Our own imports
from chemotax import config

from . import helpers

# Helpers


class MockRun(config.Configurable):

    def __init__(self, **kwargs):
        for key, val in kwargs.items():
            setattr(self, key, val)


# Classes


class TestConfigFiles(helpers.FileSystemTestCase):

    def test_save_load_toml(self):

        obj = MockRun(k=0.125, steps=8, upwind=True, grid={'cells': [16, 8]})
        config_file = self.tempdir / 'run.toml'
        assert not config_file.is_file()

        obj.save_config_file(config_file)
        assert config_file.is_file()

        res_obj = MockRun.load_config_file(config_file)

        assert res_obj.k == 0.125
        assert res_obj.steps == 8
        assert res_obj.upwind
        assert res_obj.grid == {'cells': [16, 8]}
        assert type(res_obj.grid) is dict

    def test_save_load_json(self):

        obj = MockRun(mode='simulate', k_list=[0.5, 0.25])
        config_file = self.tempdir / 'sub' / 'run.json'

        obj.save_config_file(config_file)

        with config_file.open('rt') as fp:
            assert json.load(fp) == {'mode': 'simulate', 'k_list': [0.5, 0.25]}

        res_obj = MockRun.load_config_file(config_file)
        assert res_obj.k_list == [0.5, 0.25]

    def test_private_attributes_are_not_saved(self):

        obj = MockRun(seed=3, _cache=[1, 2], _also_private=False)
        config_file = self.tempdir / 'run.toml'

        obj.save_config_file(config_file)
        res_obj = MockRun.load_config_file(config_file)

        assert res_obj.seed == 3
        assert not hasattr(res_obj, '_cache')
        assert not hasattr(res_obj, '_also_private')

    def test_string_round_trip(self):

        obj = MockRun(alpha=0.1, variant='from_z')

        res_obj = MockRun.load_config(obj.save_config(fmt='json'), fmt='json')

        assert res_obj.to_dict() == {'alpha': 0.1, 'variant': 'from_z'}

    def test_unknown_format(self):

        with self.assertRaises(ValueError):
            MockRun(a=1).save_config(fmt='yaml')
        with self.assertRaises(ValueError):
            MockRun.load_config('a = 1', fmt='yaml')

    def test_load_defaults(self):

        obj = MockRun.load_default('defaults')

        # Defaults every run config is merged over
        assert obj.mode == 'simulate'
        assert obj.seed == 0
        assert obj.scheme['alpha'] == 0.1
        assert obj.scheme['v_variant'] == 'from_z'
        assert obj.scheme['solver'] == 'picard'
        assert obj.control['lower'] == float('-inf')
        assert obj.control['mask'] == 'all'
        assert obj.output['dir'] == 'chemotax-out'

    def test_load_default_ignores_paths(self):

        res = config.load_default_mapping('../config/optimize.toml')

        assert res['mode'] == 'optimize'
        assert res['control']['targets']['kind'] == 'reference-run'


class TestMergeConfig(helpers.FileSystemTestCase):

    def test_merges_nested_tables(self):

        base = {'scheme': {'k': 0.1, 'm': 10}, 'seed': 0}
        override = {'scheme': {'k': 0.05}, 'mode': 'validate'}

        res = config.merge_config(base, override)

        assert res == {'scheme': {'k': 0.05, 'm': 10}, 'seed': 0, 'mode': 'validate'}
        assert base == {'scheme': {'k': 0.1, 'm': 10}, 'seed': 0}

    def test_non_tables_replace(self):

        res = config.merge_config({'mask': {'cells': [0, 1]}}, {'mask': 'all'})

        assert res == {'mask': 'all'}

    def test_load_mapping_by_suffix(self):

        (self.tempdir / 'a.toml').write_text('[grid]\ncells = [8]\n')
        (self.tempdir / 'b.json').write_text('{"grid": {"cells": [8]}}')

        assert config.load_mapping(self.tempdir / 'a.toml') == config.load_mapping(self.tempdir / 'b.json')
