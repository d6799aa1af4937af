""" Tests for the output layout """

# Imports
import json
import unittest

# 3rd party
import numpy as np

import pandas as pd

# Our own imports
from chemotax import outputs
from chemotax.grid import GridSpec, Field
from chemotax.scheme import run

from . import helpers

# Tests


class TestToJsonable(unittest.TestCase):

    def test_converts_numpy_and_non_finite(self):

        data = {
            'a': np.float64(1.5),
            'b': np.int64(3),
            'c': np.array([1.0, np.nan]),
            'd': (np.inf, -np.inf),
            'e': np.bool_(True),
            1: 'key',
        }

        res = outputs.to_jsonable(data)

        assert res == {'a': 1.5, 'b': 3, 'c': [1.0, None], 'd': ['inf', '-inf'], 'e': True, '1': 'key'}
        assert isinstance(res['b'], int)
        json.dumps(res)


class TestOutputLayout(helpers.FileSystemTestCase):

    def test_paths(self):

        layout = outputs.OutputLayout(self.tempdir / 'out')

        assert layout.manifest_file == self.tempdir / 'out' / 'manifest.json'
        assert layout.error_file == self.tempdir / 'out' / 'error.json'
        assert layout.get_step_path(12) == self.tempdir / 'out' / 'trajectory' / 'step_00012.csv'
        assert layout.relative(layout.get_step_path(3)) == 'trajectory/step_00003.csv'

    def test_write_frame_with_gnuplot(self):

        layout = outputs.OutputLayout(self.tempdir / 'out', gnuplot=True)
        df = pd.DataFrame({'k': [0.5, 0.25], 'norm': [1.0, 0.5]})

        path = layout.write_frame('rate', df)

        pd.testing.assert_frame_equal(pd.read_csv(path), df)
        script = (self.tempdir / 'out' / 'rate.gnuplot').read_text()
        assert 'set datafile separator ","' in script
        assert 'using 1:2' in script
        assert [p.name for p in layout.written] == ['rate.csv', 'rate.gnuplot']

    def test_write_field(self):

        layout = outputs.OutputLayout(self.tempdir / 'out')
        f = Field(GridSpec((4, )), np.array([0.0, 1.0, 2.0, 3.0]))

        path = layout.write_field('u0', f)

        np.testing.assert_array_equal(Field.from_csv(path).values, f.values)

    def test_write_trajectory_with_stride(self):

        grid = GridSpec((8, ))
        traj = run(*helpers.bump_data(grid), helpers.make_params(k=0.1, T_final=0.5))
        layout = outputs.OutputLayout(self.tempdir / 'out')

        path = layout.write_trajectory(traj, stride=2)

        dumps = sorted(p.name for p in layout.trajectory_dir.iterdir())
        assert dumps == ['step_00000.csv', 'step_00002.csv', 'step_00004.csv', 'step_00005.csv']

        df = pd.read_csv(layout.get_step_path(5))
        assert list(df.columns) == ['i', 'x', 'u', 'z', 'v']
        np.testing.assert_array_equal(df['u'].to_numpy(), traj.final.u.values)

        with path.open('rt') as fp:
            data = json.load(fp)
        assert data['n_steps'] == 5
        assert data['stride'] == 2
        assert len(data['steps']) == 6
        assert data['dumps'][-1] == {'n': 5, 't': 0.5, 'file': 'trajectory/step_00005.csv'}

        steps = pd.read_csv(self.tempdir / 'out' / 'steps.csv')
        assert len(steps) == 6

    def test_rejects_bad_stride(self):

        grid = GridSpec((8, ))
        traj = run(*helpers.bump_data(grid), helpers.make_params(k=0.25, T_final=0.5))

        with self.assertRaises(ValueError):
            outputs.OutputLayout(self.tempdir).write_trajectory(traj, stride=0)

    def test_manifest_lists_files(self):

        layout = outputs.OutputLayout(self.tempdir / 'out')
        layout.write_json('summary', {'value': np.float64(2.0)})
        layout.write_error({'error': 'DomainError', 'exit_code': 2})

        layout.write_manifest({'mode': 'simulate', 'status': 2})

        with layout.manifest_file.open('rt') as fp:
            data = json.load(fp)
        assert data == {'mode': 'simulate', 'status': 2, 'files': ['summary.json', 'error.json']}
