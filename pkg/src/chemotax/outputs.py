""" Output file layout for a chemotax run

Every file written through :py:class:`OutputLayout` is recorded so the
manifest can list all of them.

Classes:

* :py:class:`OutputLayout`: Paths and writers for one output directory

"""

# Imports
import json
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, List

# 3rd party
import numpy as np

import pandas as pd

# Our own imports
from .grid import Field
from .scheme import Trajectory

# Constants
FLOAT_FORMAT = '%.17g'

# Helpers


def to_jsonable(value: Any) -> Any:
    """ Convert numpy scalars, arrays and non-finite floats to plain JSON values """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, pathlib.Path):
        return str(value)
    return value

# Classes


@dataclass
class OutputLayout:
    """ Paths and writers for one run's output directory

    :param Path outdir:
        Directory to write to, created on first write
    :param bool gnuplot:
        If True, write a ``.gnuplot`` column description next to each CSV
    """

    outdir: pathlib.Path
    gnuplot: bool = False
    written: List[pathlib.Path] = field(default_factory=list)

    def __post_init__(self):
        self.outdir = pathlib.Path(self.outdir)

    # Calculated paths

    @property
    def manifest_file(self) -> pathlib.Path:
        return self.outdir / 'manifest.json'

    @property
    def error_file(self) -> pathlib.Path:
        return self.outdir / 'error.json'

    @property
    def trajectory_dir(self) -> pathlib.Path:
        return self.outdir / 'trajectory'

    def get_step_path(self, n: int) -> pathlib.Path:
        """ Path to the field dump of step ``n`` """
        return self.trajectory_dir / f'step_{n:05d}.csv'

    def relative(self, path: pathlib.Path) -> str:
        return path.relative_to(self.outdir).as_posix()

    def _record(self, path: pathlib.Path):
        if path not in self.written:
            self.written.append(path)

    # Writers

    def write_frame(self, name: str, df: pd.DataFrame) -> pathlib.Path:
        """ Write a table to ``<name>.csv``

        :param str name:
            File name without the suffix
        :param DataFrame df:
            The table to write
        :returns:
            The path written
        """
        path = self.outdir / f'{name}.csv'
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self._record(path)
        if self.gnuplot:
            self.write_gnuplot(path, list(df.columns))
        return path

    def write_gnuplot(self, csv_path: pathlib.Path, columns: List[str]) -> pathlib.Path:
        """ Column description for plotting a CSV against its first column """
        path = csv_path.with_suffix('.gnuplot')
        lines = [
            f'# columns of {csv_path.name}',
            'set datafile separator ","',
            'set key autotitle columnhead',
        ]
        for i, column in enumerate(columns, start=1):
            lines.append(f'# {i}: {column}')
        plots = [f'"{csv_path.name}" using 1:{i} with linespoints title "{column}"'
                 for i, column in enumerate(columns, start=1) if i > 1]
        if plots:
            lines.append('plot ' + ', \\\n     '.join(plots))
        path.write_text('\n'.join(lines) + '\n')
        self._record(path)
        return path

    def write_json(self, name: str, data: Dict[str, Any]) -> pathlib.Path:
        """ Write ``<name>.json`` with sorted keys """
        path = self.outdir / f'{name}.json'
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('wt') as fp:
            json.dump(to_jsonable(data), fp, indent=2, sort_keys=True)
            fp.write('\n')
        self._record(path)
        return path

    def write_field(self, name: str, f: Field) -> pathlib.Path:
        path = self.outdir / f'{name}.csv'
        path.parent.mkdir(parents=True, exist_ok=True)
        f.to_csv(path)
        self._record(path)
        return path

    def write_trajectory(self, traj: Trajectory, stride: int = 1) -> pathlib.Path:
        """ Write ``trajectory.json``, ``steps.csv`` and field dumps every ``stride`` steps

        The last step is always dumped.

        :param Trajectory traj:
            The trajectory to write
        :param int stride:
            Dump every stride-th step
        :returns:
            Path to the trajectory manifest
        """
        if stride < 1:
            raise ValueError(f'Expected stride >= 1, got {stride}')
        self.write_frame('steps', traj.to_frame())

        dumped = []
        for s in traj.steps:
            if s.n % stride != 0 and s.n != traj.n_steps:
                continue
            path = self.get_step_path(s.n)
            path.parent.mkdir(parents=True, exist_ok=True)
            df = s.u.to_frame().rename(columns={'value': 'u'})
            df['z'] = s.z.values
            df['v'] = s.v.values
            df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
            self._record(path)
            dumped.append({'n': s.n, 't': s.t, 'file': self.relative(path)})

        return self.write_json('trajectory', {
            'params': traj.params.to_dict(),
            'grid': traj.grid.to_dict(),
            'n_steps': traj.n_steps,
            'stride': stride,
            'steps': traj.to_frame().to_dict(orient='records'),
            'dumps': dumped,
        })

    def write_manifest(self, data: Dict[str, Any]) -> pathlib.Path:
        """ Write ``manifest.json`` listing every file written so far """
        files = [self.relative(p) for p in self.written if p != self.manifest_file]
        payload = dict(data)
        payload['files'] = files
        self.outdir.mkdir(parents=True, exist_ok=True)
        with self.manifest_file.open('wt') as fp:
            json.dump(to_jsonable(payload), fp, indent=2, sort_keys=True)
            fp.write('\n')
        return self.manifest_file

    def write_error(self, report: Dict[str, Any]) -> pathlib.Path:
        return self.write_json('error', report)
