""" Configuration driven runs of the chemotaxis toolkit

Each run is described by one TOML (or JSON) file that is merged over the
packaged ``defaults.toml``. The ``mode`` selects what is written to the output
directory:

* ``simulate``: ``steps.csv``, ``trajectory.json`` and field dumps
* ``convergence``: ``rate_*.csv`` fits under k-refinement, ``cauchy.csv``
* ``energy-report``: ``energy.csv`` and ``energy.json``
* ``optimize``: ``iterations.csv``, ``control.csv`` and the optimal state
* ``validate``: ``checks.csv`` with one pass/fail row per invariant check

Every run also writes ``manifest.json``, and ``error.json`` on failure.

Run a packaged example from the command line:

.. code-block:: bash

    chemotax simulate --out ./sim-out

Run a study from a config file using 4 processes:

.. code-block:: bash

    chemotax convergence --config ./study.toml --jobs 4 --out ./study-out

Set ``CHEMOTAX_LOG=INFO`` (or ``DEBUG``) to see progress messages.

Run the same thing from python:

.. code-block:: python

    config = parse_config('study.toml')
    status = execute(config, outdir='study-out', jobs=4)

Classes:

* :py:class:`RunConfig`: One validated run with its builders and stages

Functions:

* :py:func:`parse_config`: Merge, validate and load a run config
* :py:func:`execute`: Run a config and write its outputs
* :py:func:`mask_from_descriptor`: Build a control set indicator
* :py:func:`load_target_csv`: Load a time dependent target from CSV
* :py:func:`run_chemotax_cmd`: Command line entry point

"""

# Imports
import os
import copy
import time
import logging
import pathlib
import argparse
import platform
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

# 3rd party
import numpy as np

import pandas as pd

import scipy

import tomlkit

# Our own imports
from . import __version__
from .config import Configurable, load_mapping, load_default_mapping, merge_config
from .control import (
    ControlProblem, COST_VARIANTS, state_solve_controlled, cost_J, cost_terms,
    projected_gradient, reference_control, targets_from_trajectory,
    gradient_check, duality_check, comparison_solve,
)
from .diagnostics import (
    Scenario, EnergyReport, energy_report, interpolant_gap_rate, self_convergence,
    variant_agreement, operator_checks, budget_checks,
)
from .errors import ChemotaxError, ConfigError, DomainError, InvariantViolation
from .grid import GridSpec, Field
from .initial_data import build_initial_field, validate_recipe
from .model_fns import ModelParams, TRUNCATIONS
from .outputs import OutputLayout
from .scheme import SchemeParams, V_VARIANTS, V_VARIANT_ALIASES, FLUX_SCHEMES

# Constants
MODES = ('simulate', 'convergence', 'energy-report', 'optimize', 'validate')
STAGES = {
    'simulate': 'simulate',
    'convergence': 'convergence',
    'energy-report': 'energy_report',
    'optimize': 'optimize',
    'validate': 'validate',
}
SOLVERS = ('picard', 'linear')
TARGET_KINDS = ('reference-run', 'constant', 'file')

LOG_ENV = 'CHEMOTAX_LOG'
DEFAULT_LOG_LEVEL = 'WARNING'
DEFAULT_OUTDIR = 'chemotax-out'

CONTROL_KEYS = ('gamma_u', 'gamma_v', 'gamma_f', 'q', 'cost_variant', 'lower', 'upper',
                'tol', 'max_iters', 'mask', 'targets', 'descriptor')

GRADIENT_CHECK_TOL = 1e-4
DUALITY_TOL = 1e-10

logger = logging.getLogger(__name__)

# Helpers


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and not np.isnan(value)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _as_bound(value: Any) -> Any:
    """ Accept 'inf' and '-inf' strings from JSON descriptors """
    if isinstance(value, str) and value.strip().lower() in ('inf', '+inf', '-inf'):
        return float(value)
    return value


def _check_number(errors: List[str], path: str, value: Any,
                  minimum: Optional[float] = None,
                  strict: bool = False,
                  allow_inf: bool = False) -> bool:
    """ Append a message if ``value`` is not a number in range """
    if not _is_number(value) or (not allow_inf and not np.isfinite(value)):
        errors.append(f'{path}: expected a number, got {value!r}')
        return False
    if minimum is None:
        return True
    if strict and not value > minimum:
        errors.append(f'{path}: expected a value > {minimum}, got {value!r}')
        return False
    if not strict and not value >= minimum:
        errors.append(f'{path}: expected a value >= {minimum}, got {value!r}')
        return False
    return True


def _check_int(errors: List[str], path: str, value: Any, minimum: int) -> bool:
    if not _is_int(value) or value < minimum:
        errors.append(f'{path}: expected an integer >= {minimum}, got {value!r}')
        return False
    return True


def _check_bool(errors: List[str], path: str, value: Any) -> bool:
    if not isinstance(value, bool):
        errors.append(f'{path}: expected true or false, got {value!r}')
        return False
    return True


def _check_unknown(errors: List[str], section: str, values: Mapping[str, Any], allowed):
    for key in sorted(set(values) - set(allowed)):
        errors.append(f'{section}.{key}: unknown field')


def _resolve_path(value: Any, base_dir: pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(value).expanduser()
    if not path.is_absolute():
        path = base_dir / path
    return path


def _resolve_recipe_paths(recipe: Any, base_dir: pathlib.Path, path: str, errors: List[str]):
    """ Make every csv path in a recipe absolute, checking that it exists """
    if not isinstance(recipe, dict):
        return
    kind = recipe.get('kind')
    if kind == 'csv':
        csv_path = _resolve_path(recipe['path'], base_dir)
        if not csv_path.is_file():
            errors.append(f'{path}.path: file not found: {csv_path}')
        recipe['path'] = str(csv_path)
    elif kind == 'perturbed':
        _resolve_recipe_paths(recipe['base'], base_dir, f'{path}.base', errors)
    elif kind == 'sum':
        for i, term in enumerate(recipe['terms']):
            _resolve_recipe_paths(term, base_dir, f'{path}.terms[{i}]', errors)


def _check_k_values(errors: List[str], path: str, k_list: Any, min_count: int):
    if not isinstance(k_list, list) or not all(_is_number(k) and np.isfinite(k) and k > 0 for k in k_list):
        errors.append(f'{path}: expected a list of positive numbers, got {k_list!r}')
        return
    if len(k_list) < min_count:
        errors.append(f'{path}: expected at least {min_count} time steps, got {len(k_list)}')
        return
    ratios = np.asarray(k_list[:-1], dtype=np.float64) / np.asarray(k_list[1:], dtype=np.float64)
    if not np.allclose(ratios, 2.0, rtol=1e-12, atol=0.0):
        errors.append(f'{path}: expected dyadic steps, each half of the one before, got {k_list!r}')


def _versions() -> Dict[str, str]:
    return {
        'chemotax': __version__,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'tomlkit': tomlkit.__version__,
    }


def _log_level() -> int:
    name = os.environ.get(LOG_ENV, DEFAULT_LOG_LEVEL).strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        return logging.getLevelName(DEFAULT_LOG_LEVEL)
    return level

# Validation


def _validate_grid(grid: Any, errors: List[str]) -> bool:
    if not isinstance(grid, dict):
        errors.append(f'grid: expected a table, got {grid!r}')
        return False
    n_errors = len(errors)
    _check_unknown(errors, 'grid', grid, ('cells', 'lengths'))
    cells = grid.get('cells')
    if isinstance(cells, int) and not isinstance(cells, bool):
        cells = grid['cells'] = [cells]
    if not isinstance(cells, list) or len(cells) not in (1, 2):
        errors.append(f'grid.cells: expected a list of 1 or 2 cell counts, got {cells!r}')
        return False
    for i, count in enumerate(cells):
        _check_int(errors, f'grid.cells[{i}]', count, 2)
    lengths = grid.get('lengths')
    if lengths is not None:
        if _is_number(lengths):
            lengths = grid['lengths'] = [lengths]
        if not isinstance(lengths, list) or len(lengths) != len(cells):
            errors.append(f'grid.lengths: expected one length per axis, got {lengths!r}')
        else:
            for i, length in enumerate(lengths):
                _check_number(errors, f'grid.lengths[{i}]', length, 0.0, strict=True)
    return len(errors) == n_errors


def _validate_scheme(scheme: Dict[str, Any], allowed, errors: List[str]):
    _check_unknown(errors, 'scheme', scheme, allowed)
    k_ok = _check_number(errors, 'scheme.k', scheme.get('k'), 0.0, strict=True)
    if _check_number(errors, 'scheme.T_final', scheme.get('T_final'), 0.0, strict=True) and k_ok:
        if scheme['T_final'] < scheme['k']:
            errors.append(f'scheme.T_final: expected at least one step of k={scheme["k"]}, got {scheme["T_final"]!r}')
    _check_number(errors, 'scheme.s', scheme.get('s'), 1.0)
    _check_number(errors, 'scheme.m', scheme.get('m'), 1.0)
    alpha_ok = _check_number(errors, 'scheme.alpha', scheme.get('alpha'), 0.0, strict=True)
    if _check_number(errors, 'scheme.alpha_max', scheme.get('alpha_max'), 0.0, strict=True) and alpha_ok:
        if scheme['alpha'] > scheme['alpha_max']:
            errors.append(f'scheme.alpha: expected alpha <= alpha_max={scheme["alpha_max"]}, got {scheme["alpha"]!r}')

    variant = V_VARIANT_ALIASES.get(scheme.get('v_variant'), scheme.get('v_variant'))
    if variant not in V_VARIANTS:
        errors.append(f'scheme.v_variant: expected one of {V_VARIANTS}, got {scheme.get("v_variant")!r}')
    if scheme.get('flux_scheme') not in FLUX_SCHEMES:
        errors.append(f'scheme.flux_scheme: expected one of {FLUX_SCHEMES}, got {scheme.get("flux_scheme")!r}')
    if scheme.get('truncation') not in TRUNCATIONS:
        errors.append(f'scheme.truncation: expected one of {TRUNCATIONS}, got {scheme.get("truncation")!r}')
    if scheme.get('solver') not in SOLVERS:
        errors.append(f'scheme.solver: expected one of {SOLVERS}, got {scheme.get("solver")!r}')
    _check_number(errors, 'scheme.picard_tol', scheme.get('picard_tol'), 0.0, strict=True)
    _check_int(errors, 'scheme.picard_max', scheme.get('picard_max'), 1)
    _check_int(errors, 'scheme.picard_depth', scheme.get('picard_depth'), 0)
    _check_number(errors, 'scheme.bound_tol', scheme.get('bound_tol'), 0.0)


def _validate_initial_data(initial_data: Any, base_dir: pathlib.Path, errors: List[str]):
    if not isinstance(initial_data, dict):
        errors.append(f'initial_data: expected a table, got {initial_data!r}')
        return
    _check_unknown(errors, 'initial_data', initial_data, ('u', 'v'))
    for key in ('u', 'v'):
        path = f'initial_data.{key}'
        if key not in initial_data:
            errors.append(f'{path}: missing')
            continue
        recipe_errors = validate_recipe(initial_data[key], path)
        errors.extend(recipe_errors)
        if not recipe_errors:
            _resolve_recipe_paths(initial_data[key], base_dir, path, errors)


def _validate_study(study: Dict[str, Any], mode: str, allowed, errors: List[str]):
    _check_unknown(errors, 'study', study, allowed)
    _check_k_values(errors, 'study.k_list', study.get('k_list'), 3 if mode == 'convergence' else 0)
    m_list = study.get('m_list')
    if not isinstance(m_list, list) or len(m_list) < 2 or not all(_is_number(m) and m >= 1 for m in m_list):
        errors.append(f'study.m_list: expected at least 2 truncation levels >= 1, got {m_list!r}')
    elif np.any(np.diff(np.asarray(m_list, dtype=np.float64)) <= 0):
        errors.append(f'study.m_list: expected increasing truncation levels, got {m_list!r}')
    _check_bool(errors, 'study.variant_agreement', study.get('variant_agreement'))


def _validate_mask(mask: Any, grid: Optional[GridSpec], errors: List[str]):
    if grid is None:
        return
    try:
        mask_from_descriptor(grid, mask)
    except (ValueError, TypeError) as err:
        errors.append(f'control.mask: {err}')


def _validate_targets(targets: Any, base_dir: pathlib.Path, errors: List[str]):
    path = 'control.targets'
    if not isinstance(targets, dict):
        errors.append(f'{path}: expected a table with a "kind" key, got {targets!r}')
        return
    kind = targets.get('kind')
    if kind not in TARGET_KINDS:
        errors.append(f'{path}.kind: expected one of {TARGET_KINDS}, got {kind!r}')
        return
    if kind == 'reference-run':
        _check_unknown(errors, path, targets, ('kind', 'amplitude'))
        _check_number(errors, f'{path}.amplitude', targets.get('amplitude', 1.0))
    elif kind == 'constant':
        _check_unknown(errors, path, targets, ('kind', 'u', 'v'))
        for key in ('u', 'v'):
            _check_number(errors, f'{path}.{key}', targets.get(key))
    else:
        _check_unknown(errors, path, targets, ('kind', 'u_file', 'v_file'))
        for key in ('u_file', 'v_file'):
            if key not in targets:
                errors.append(f'{path}.{key}: missing')
                continue
            target_file = _resolve_path(targets[key], base_dir)
            if not target_file.is_file():
                errors.append(f'{path}.{key}: file not found: {target_file}')
            targets[key] = str(target_file)


def _validate_control(control: Dict[str, Any], user_control: Any,
                      grid: Optional[GridSpec], base_dir: pathlib.Path,
                      errors: List[str]):
    _check_unknown(errors, 'control', control, CONTROL_KEYS)
    if 'targets' not in user_control:
        errors.append('control.targets: missing block')
    else:
        _validate_targets(control['targets'], base_dir, errors)
    for name in ('gamma_u', 'gamma_v', 'gamma_f'):
        _check_number(errors, f'control.{name}', control.get(name), 0.0)
    _check_number(errors, 'control.q', control.get('q'), 2.0)
    if control.get('cost_variant') not in COST_VARIANTS:
        errors.append(f'control.cost_variant: expected one of {COST_VARIANTS}, got {control.get("cost_variant")!r}')
    control['lower'] = _as_bound(control.get('lower'))
    control['upper'] = _as_bound(control.get('upper'))
    lower_ok = _check_number(errors, 'control.lower', control['lower'], allow_inf=True)
    upper_ok = _check_number(errors, 'control.upper', control['upper'], allow_inf=True)
    if lower_ok and upper_ok and control['lower'] > control['upper']:
        errors.append(f'control.lower: expected lower <= upper, got [{control["lower"]}, {control["upper"]}]')
    _check_number(errors, 'control.tol', control.get('tol'), 0.0, strict=True)
    _check_int(errors, 'control.max_iters', control.get('max_iters'), 0)
    _validate_mask(control.get('mask'), grid, errors)


def _table(merged: Dict[str, Any], name: str, errors: List[str]) -> Optional[Dict[str, Any]]:
    value = merged.get(name)
    if not isinstance(value, dict):
        errors.append(f'{name}: expected a table, got {value!r}')
        return None
    return value


def _merge_user(defaults: Dict[str, Any], user: Mapping[str, Any]) -> Dict[str, Any]:
    """ Overlay the user config, replacing recipes and control sub-tables whole """
    merged = merge_config(defaults, user)
    for section, keys in (('initial_data', ('u', 'v')), ('control', ('mask', 'targets'))):
        user_section = user.get(section)
        if not isinstance(user_section, Mapping):
            continue
        for key in keys:
            if key in user_section:
                merged[section][key] = copy.deepcopy(user_section[key])
    return merged

# Control inputs


def mask_from_descriptor(grid: GridSpec, descriptor: Any, allow_empty: bool = False) -> Field:
    """ Build the 0/1 indicator of a control set

    :param GridSpec grid:
        The grid
    :param descriptor:
        One of ``"all"``, ``{"rectangle": [[lo, hi], ...]}`` with one interval per
        axis selecting the cells whose centers lie inside, or ``{"cells": [...]}``
        listing flat cell indices
    :param bool allow_empty:
        If False, an empty control set is an error
    :returns:
        The indicator field
    """
    values = np.zeros(grid.n_cells)
    if descriptor == 'all':
        values[:] = 1.0
    elif isinstance(descriptor, Mapping) and 'rectangle' in descriptor:
        rectangle = descriptor['rectangle']
        if not isinstance(rectangle, list) or len(rectangle) != grid.dim:
            raise ValueError(f'expected one [lo, hi] interval per axis, got {rectangle!r}')
        inside = np.ones(grid.n_cells, dtype=bool)
        for centers, interval in zip(grid.cell_centers(), rectangle):
            if not isinstance(interval, list) or len(interval) != 2 or not all(_is_number(x) for x in interval):
                raise ValueError(f'expected an interval [lo, hi], got {interval!r}')
            lo, hi = interval
            if lo > hi:
                raise ValueError(f'expected lo <= hi, got {interval!r}')
            inside &= (centers >= lo) & (centers <= hi)
        values[inside] = 1.0
    elif isinstance(descriptor, Mapping) and 'cells' in descriptor:
        cells = descriptor['cells']
        if not isinstance(cells, list) or not all(_is_int(c) and 0 <= c < grid.n_cells for c in cells):
            raise ValueError(f'expected a list of cell indices in [0, {grid.n_cells}), got {cells!r}')
        values[cells] = 1.0
    else:
        raise ValueError(f'expected "all", a rectangle or a cell list, got {descriptor!r}')
    if not allow_empty and not np.any(values):
        raise ValueError(f'the control set {descriptor!r} contains no cells')
    return Field(grid, values)


def load_target_csv(target_file: Union[str, pathlib.Path], problem: ControlProblem) -> np.ndarray:
    """ Load a target with columns ``n`` (1..N), ``cell`` and ``value``

    :param Path target_file:
        The CSV file
    :param ControlProblem problem:
        The problem the target belongs to
    :returns:
        The target, one row per step
    """
    df = pd.read_csv(target_file)
    missing = {'n', 'cell', 'value'} - set(df.columns)
    if missing:
        raise DomainError(f'{target_file}: missing columns {sorted(missing)}')
    shape = (problem.n_steps, problem.grid.n_cells)
    if len(df) != shape[0] * shape[1]:
        raise DomainError(f'{target_file}: expected {shape[0] * shape[1]} rows, got {len(df)}')
    target = np.full(shape, np.nan)
    n = df['n'].to_numpy(dtype=int)
    cell = df['cell'].to_numpy(dtype=int)
    if np.any((n < 1) | (n > shape[0]) | (cell < 0) | (cell >= shape[1])):
        raise DomainError(f'{target_file}: step or cell index out of range for {shape}')
    target[n - 1, cell] = df['value'].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(target)):
        raise DomainError(f'{target_file}: every (n, cell) pair needs one finite value')
    return target


def _canned_control_checks(seed: int) -> List[Dict[str, Any]]:
    """ Adjoint, duality and comparison checks on a small fixed problem """
    grid = GridSpec((16, ))
    u0 = build_initial_field(grid, {'kind': 'gaussian', 'center': [0.3], 'width': 0.1, 'amplitude': 1.0})
    v0 = Field.constant(grid, 1.0)
    problem = ControlProblem(
        grid=grid, mask=mask_from_descriptor(grid, {'rectangle': [[0.0, 0.5]]}),
        k=0.125, T_final=0.5, u0=u0, v0=v0,
        gamma_u=1.0, gamma_v=1.0, gamma_f=0.1, q=3.0,
    )
    f = reference_control(problem, amplitude=0.5)
    gradient_error = max(gradient_check(problem, f, n_directions=5, seed=seed))
    pairing = duality_check(problem, f, seed=seed)

    traj = state_solve_controlled(u0, v0, f, problem)
    supersolution = comparison_solve(v0, f, problem)
    excess = float(np.max(traj.stack('v') - supersolution))
    tol = problem.scheme_params.bound_tol

    return [
        {'check': 'adjoint_gradient', 'value': gradient_error,
         'threshold': GRADIENT_CHECK_TOL, 'passed': bool(gradient_error <= GRADIENT_CHECK_TOL)},
        {'check': 'adjoint_duality', 'value': pairing,
         'threshold': DUALITY_TOL, 'passed': bool(pairing <= DUALITY_TOL)},
        {'check': 'comparison_bound', 'value': excess,
         'threshold': tol, 'passed': bool(excess <= tol)},
    ]

# Classes


class RunConfig(Configurable):
    """ One run: the grid, scheme, initial data, study, control and outputs

    Build it with :py:func:`parse_config` to get a validated config with
    absolute paths. The stages each write their files to an
    :py:class:`~chemotax.outputs.OutputLayout` and return a summary for the
    manifest.

    :param str mode:
        One of 'simulate', 'convergence', 'energy-report', 'optimize', 'validate'
    :param dict grid:
        ``cells`` per axis and optional ``lengths``
    :param dict scheme:
        Time step, model parameters and solver options
    :param dict initial_data:
        ``u`` and ``v`` recipes (see :py:mod:`chemotax.initial_data`)
    :param dict study:
        ``k_list``, ``m_list`` and ``variant_agreement`` for convergence studies
    :param dict control:
        Weights, bounds, mask and targets of the control problem
    :param dict output:
        ``dir``, ``stride``, ``gnuplot`` and ``report``
    :param int seed:
        Seed for 'perturbed' initial data and the validation checks
    """

    def __init__(self,
                 mode: str = 'simulate',
                 grid: Optional[Dict[str, Any]] = None,
                 scheme: Optional[Dict[str, Any]] = None,
                 initial_data: Optional[Dict[str, Any]] = None,
                 study: Optional[Dict[str, Any]] = None,
                 control: Optional[Dict[str, Any]] = None,
                 output: Optional[Dict[str, Any]] = None,
                 seed: int = 0):
        self.mode = mode
        self.grid = {} if grid is None else grid
        self.scheme = {} if scheme is None else scheme
        self.initial_data = {} if initial_data is None else initial_data
        self.study = {} if study is None else study
        self.control = {} if control is None else control
        self.output = {} if output is None else output
        self.seed = seed

    # Builders

    def build_grid(self) -> GridSpec:
        cells = tuple(int(c) for c in self.grid['cells'])
        lengths = self.grid.get('lengths')
        return GridSpec(cells, None if lengths is None else tuple(float(x) for x in lengths))

    def build_params(self) -> SchemeParams:
        """ Scheme parameters from the ``[scheme]`` table """
        scheme = self.scheme
        model = ModelParams(s=float(scheme['s']), m=float(scheme['m']),
                            alpha=float(scheme['alpha']), alpha_max=float(scheme['alpha_max']))
        return SchemeParams(
            k=float(scheme['k']),
            model=model,
            v_variant=scheme['v_variant'],
            flux_scheme=scheme['flux_scheme'],
            truncation=scheme['truncation'],
            picard_tol=float(scheme['picard_tol']),
            picard_max=int(scheme['picard_max']),
            picard_depth=int(scheme['picard_depth']),
            T_final=float(scheme['T_final']),
            bound_tol=float(scheme['bound_tol']),
        )

    def build_initial_data(self, grid: Optional[GridSpec] = None) -> Tuple[Field, Field]:
        """ Sample (u0, v0), drawing any noise from one generator seeded by ``seed`` """
        if grid is None:
            grid = self.build_grid()
        rng = np.random.default_rng(self.seed)
        u0 = build_initial_field(grid, self.initial_data['u'], seed=rng)
        v0 = build_initial_field(grid, self.initial_data['v'], seed=rng)
        return u0, v0

    def build_scenario(self) -> Scenario:
        u0, v0 = self.build_initial_data()
        return Scenario(u0, v0, self.build_params(), solver=self.scheme['solver'])

    def build_control_problem(self) -> ControlProblem:
        """ The control problem with its targets loaded or generated

        :returns:
            A problem with the configured weights, bounds, mask and targets
        """
        control = self.control
        grid = self.build_grid()
        params = self.build_params()
        u0, v0 = self.build_initial_data(grid)
        problem = ControlProblem(
            grid=grid,
            mask=mask_from_descriptor(grid, control['mask']),
            k=params.k,
            T_final=params.T_final,
            u0=u0,
            v0=v0,
            model=params.model,
            gamma_u=float(control['gamma_u']),
            gamma_v=float(control['gamma_v']),
            gamma_f=float(control['gamma_f']),
            q=float(control['q']),
            cost_variant=control['cost_variant'],
            lower=float(control['lower']),
            upper=float(control['upper']),
            flux_scheme=params.flux_scheme,
        )

        targets = control['targets']
        kind = targets['kind']
        if kind == 'reference-run':
            f_reference = self._reference_control(problem)
            traj = state_solve_controlled(u0, v0, f_reference, problem)
            return problem.with_targets(*targets_from_trajectory(traj))
        if kind == 'constant':
            return problem.with_targets(np.full(grid.n_cells, float(targets['u'])),
                                        np.full(grid.n_cells, float(targets['v'])))
        return problem.with_targets(load_target_csv(targets['u_file'], problem),
                                    load_target_csv(targets['v_file'], problem))

    def _reference_control(self, problem: ControlProblem) -> np.ndarray:
        return reference_control(problem, amplitude=float(self.control['targets'].get('amplitude', 1.0)))

    # Stages

    def simulate(self, layout: OutputLayout, jobs: int = 1, report: bool = False) -> Dict[str, Any]:
        """ Run the scheme and write the trajectory

        :param OutputLayout layout:
            Where to write
        :param int jobs:
            Unused, a single run
        :param bool report:
            If True, also write the energy report
        :returns:
            Summary of the final step
        """
        traj = self.build_scenario().run()
        layout.write_trajectory(traj, stride=int(self.output['stride']))
        frame = traj.to_frame()
        summary = {
            'n_steps': traj.n_steps,
            'final': frame.iloc[-1].to_dict(),
            'max_picard_iters': int(frame['picard_iters'].max()),
        }
        if report:
            summary['energy'] = self._write_energy(layout, energy_report(traj))
        return summary

    def convergence(self, layout: OutputLayout, jobs: int = 1, report: bool = False) -> Dict[str, Any]:
        """ Interpolant gap rates, self convergence and variant agreement

        Self convergence needs at least 4 time steps and is skipped with a
        warning otherwise.
        """
        scenario = self.build_scenario()
        k_list = [float(k) for k in self.study['k_list']]
        summary: Dict[str, Any] = {'rates': {}}

        for name, fit in interpolant_gap_rate(scenario, k_list, jobs=jobs).items():
            layout.write_frame(f'rate_{name}_gap', fit.to_frame())
            summary['rates'][f'{name}_gap'] = fit.to_dict()

        if len(k_list) >= 4:
            study = self_convergence(scenario, k_list, self.study['m_list'], jobs=jobs)
            layout.write_frame('cauchy', study.cauchy_frame())
            layout.write_frame('m_saturation', study.m_frame)
            summary['self_convergence'] = study.to_dict()
        else:
            logger.warning('Skipping self convergence: needs at least 4 time steps, got %d', len(k_list))

        if self.study['variant_agreement']:
            if scenario.solver != 'picard':
                logger.warning('Skipping variant agreement: needs the picard solver, got %s', scenario.solver)
            else:
                fit = variant_agreement(scenario, k_list, jobs=jobs)
                layout.write_frame('rate_variant_agreement', fit.to_frame())
                summary['rates']['variant_agreement'] = fit.to_dict()
        return summary

    def energy_report(self, layout: OutputLayout, jobs: int = 1, report: bool = True) -> Dict[str, Any]:
        """ Run the scheme and write the energy terms and budgets """
        traj = self.build_scenario().run()
        layout.write_frame('steps', traj.to_frame())
        summary = self._write_energy(layout, energy_report(traj))
        if not summary['passed']:
            summary['failed'] = sorted(name for name, ok in summary['passes'].items() if not ok)
        return summary

    def optimize(self, layout: OutputLayout, jobs: int = 1, report: bool = False) -> Dict[str, Any]:
        """ Solve the control problem by projected gradient descent

        :param OutputLayout layout:
            Where to write
        :param int jobs:
            Unused, the optimizer is sequential
        :param bool report:
            If True, also write the energy report of the optimal state
        :returns:
            The optimizer summary, cost terms and, for reference-run targets,
            the distance to the generating control
        """
        problem = self.build_control_problem()
        result = projected_gradient(problem, tol=float(self.control['tol']),
                                    max_iters=int(self.control['max_iters']))
        layout.write_frame('iterations', result.history)
        layout.write_frame('control', result.control_frame(problem))
        layout.write_trajectory(result.trajectory, stride=int(self.output['stride']))

        summary = result.to_dict()
        summary['cost'] = cost_terms(result.trajectory, result.f, problem)
        if self.control['targets']['kind'] == 'reference-run':
            f_reference = self._reference_control(problem)
            traj = state_solve_controlled(problem.u0, problem.v0, f_reference, problem)
            diff = result.f - f_reference
            summary['reference'] = {
                'J': cost_J(traj, f_reference, problem),
                'control_error': float(np.sqrt(problem.inner(diff, diff))),
            }
        if not result.converged:
            logger.warning('Optimizer stopped after %d iterations with vi_residual %0.3e',
                           result.iterations, result.vi_residual)
        if report:
            summary['energy'] = self._write_energy(layout, energy_report(result.trajectory))
        return summary

    def validate(self, layout: OutputLayout, jobs: int = 1, report: bool = False) -> Dict[str, Any]:
        """ Operator checks, budgets of the configured run and adjoint checks

        :returns:
            'passed', the failed check names and the number of checks
        """
        rows = operator_checks(seed=self.seed)
        traj = self.build_scenario().run()
        rows.extend(budget_checks(traj))
        rows.extend(_canned_control_checks(self.seed))
        layout.write_frame('checks', pd.DataFrame(rows, columns=['check', 'value', 'threshold', 'passed']))
        if report:
            self._write_energy(layout, energy_report(traj))

        failed = [row['check'] for row in rows if not row['passed']]
        for name in failed:
            logger.error('Check failed: %s', name)
        return {'passed': not failed, 'failed': failed, 'n_checks': len(rows)}

    def _write_energy(self, layout: OutputLayout, energy: EnergyReport) -> Dict[str, Any]:
        layout.write_frame('energy', energy.frame)
        summary = energy.to_dict()
        layout.write_json('energy', summary)
        return summary

# Functions


def parse_config(config_file: Optional[Union[str, pathlib.Path]] = None,
                 mode: Optional[str] = None) -> RunConfig:
    """ Load, merge and validate a run config

    Values are merged over the packaged ``defaults.toml``. Initial data recipes,
    the control mask and the targets replace the defaults whole. The
    ``[control]`` block may name a ``descriptor`` JSON file whose values fill in
    any keys the block leaves out.

    :param Path config_file:
        The TOML or JSON config, or None for the packaged example of ``mode``
    :param str mode:
        If not None, overrides the mode in the file
    :returns:
        The validated config with every path made absolute
    :raises ConfigError:
        With one message per problem found
    """
    if config_file is None:
        if mode not in MODES:
            raise ConfigError([f'mode: expected one of {MODES}, got {mode!r}'])
        user = load_default_mapping(mode)
        base_dir = pathlib.Path.cwd()
    else:
        config_file = pathlib.Path(config_file)
        if not config_file.is_file():
            raise ConfigError([f'config: file not found: {config_file}'])
        try:
            user = load_mapping(config_file)
        except ValueError as err:
            raise ConfigError([f'config: could not parse {config_file}: {err}'])
        base_dir = config_file.resolve().parent
    if mode is not None:
        user['mode'] = mode

    errors: List[str] = []
    user_control = user.get('control')
    if isinstance(user_control, Mapping) and 'descriptor' in user_control:
        descriptor_file = _resolve_path(user_control['descriptor'], base_dir)
        if not descriptor_file.is_file():
            errors.append(f'control.descriptor: file not found: {descriptor_file}')
        else:
            try:
                user_control = merge_config(load_mapping(descriptor_file), user_control)
            except ValueError as err:
                errors.append(f'control.descriptor: could not parse {descriptor_file}: {err}')
            user_control['descriptor'] = str(descriptor_file)
        user = dict(user, control=user_control)

    defaults = load_default_mapping('defaults')
    merged = _merge_user(defaults, user)
    _check_unknown(errors, 'config', merged, list(defaults) + ['control'])

    mode = merged.get('mode')
    if mode not in MODES:
        errors.append(f'mode: expected one of {MODES}, got {mode!r}')

    grid = None
    if _validate_grid(merged.get('grid'), errors):
        grid = GridSpec(tuple(merged['grid']['cells']),
                        None if merged['grid'].get('lengths') is None else tuple(merged['grid']['lengths']))
    scheme = _table(merged, 'scheme', errors)
    if scheme is not None:
        _validate_scheme(scheme, defaults['scheme'], errors)
    _validate_initial_data(merged.get('initial_data'), base_dir, errors)
    study = _table(merged, 'study', errors)
    if study is not None:
        _validate_study(study, mode, defaults['study'], errors)
    if mode == 'optimize':
        if not isinstance(user_control, Mapping):
            errors.append('control: missing block')
        else:
            _validate_control(merged['control'], user_control, grid, base_dir, errors)

    output = _table(merged, 'output', errors)
    if output is not None:
        _check_unknown(errors, 'output', output, defaults['output'])
        if not isinstance(output.get('dir'), str) or not output['dir']:
            errors.append(f'output.dir: expected a directory name, got {output.get("dir")!r}')
        _check_int(errors, 'output.stride', output.get('stride'), 1)
        _check_bool(errors, 'output.gnuplot', output.get('gnuplot'))
        _check_bool(errors, 'output.report', output.get('report'))
    _check_int(errors, 'seed', merged.get('seed'), 0)

    if errors:
        raise ConfigError(errors)
    return RunConfig(**merged)


def execute(config: RunConfig,
            outdir: Optional[Union[str, pathlib.Path]] = None,
            jobs: int = 1,
            gnuplot: Optional[bool] = None,
            report: Optional[bool] = None) -> int:
    """ Run one config and write its outputs and manifest

    :param RunConfig config:
        A config from :py:func:`parse_config`
    :param Path outdir:
        Output directory (default: ``output.dir`` of the config)
    :param int jobs:
        Worker processes for studies
    :param bool gnuplot:
        Write gnuplot column descriptions (default: ``output.gnuplot``)
    :param bool report:
        Write energy reports (default: ``output.report``)
    :returns:
        The exit status: 0 ok, 2 bad input, 3 solver failure, 4 failed checks
    """
    if outdir is None:
        outdir = config.output.get('dir', DEFAULT_OUTDIR)
    if gnuplot is None:
        gnuplot = bool(config.output.get('gnuplot', False))
    if report is None:
        report = bool(config.output.get('report', False))
    layout = OutputLayout(pathlib.Path(outdir), gnuplot=gnuplot)

    logger.info('Running %s into %s', config.mode, layout.outdir)
    t0 = time.perf_counter()
    status = 0
    summary: Dict[str, Any] = {}
    try:
        summary = getattr(config, STAGES[config.mode])(layout, jobs=jobs, report=report)
    except ChemotaxError as err:
        logger.error('%s failed: %s', config.mode, err)
        status = err.exit_code
        traj = getattr(err, 'trajectory', None)
        if traj is not None and len(traj) > 0:
            layout.write_trajectory(traj, stride=int(config.output.get('stride', 1)))
        layout.write_error(err.to_dict())
    except ValueError as err:
        logger.error('%s failed: %s', config.mode, err)
        error = DomainError(str(err))
        status = error.exit_code
        layout.write_error(error.to_dict())
    else:
        if summary.get('passed') is False:
            failed = summary.get('failed', [])
            error = InvariantViolation(f'{config.mode}: {len(failed)} checks failed: {", ".join(failed)}',
                                       check=','.join(failed))
            logger.error(str(error))
            status = error.exit_code
            layout.write_error(error.to_dict())

    layout.write_manifest({
        'mode': config.mode,
        'status': status,
        'config': config.to_dict(),
        'versions': _versions(),
        'summary': summary,
        'wall_time': time.perf_counter() - t0,
    })
    logger.info('Finished %s with status %d', config.mode, status)
    return status


def run_chemotax_cmd(args: Optional[List[str]] = None) -> int:
    """ Command line entry point

    :param list[str] args:
        Command line arguments (default: ``sys.argv[1:]``)
    :returns:
        The exit status
    """
    parser = argparse.ArgumentParser(
        prog='chemotax',
        description='Simulate, study and control the chemotaxis-consumption model')
    parser.add_argument('mode', choices=MODES,
                        help='What to run')
    parser.add_argument('-c', '--config', type=pathlib.Path,
                        help='Run config (TOML or JSON), default: the packaged example for the mode')
    parser.add_argument('-j', '--jobs', type=int, default=1,
                        help='Number of worker processes for studies')
    parser.add_argument('-o', '--out', type=pathlib.Path,
                        help='Output directory (default: output.dir of the config)')
    parser.add_argument('--gnuplot', action='store_true', default=None,
                        help='Write a gnuplot column description next to each CSV')
    parser.add_argument('--report', action='store_true', default=None,
                        help='Write energy reports (CSV and JSON)')
    args = parser.parse_args(args=args)
    if args.jobs < 1:
        parser.error(f'--jobs must be at least 1, got {args.jobs}')

    logging.basicConfig(level=_log_level(), format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        config = parse_config(args.config, mode=args.mode)
    except ConfigError as err:
        for message in err.errors:
            logger.error('Invalid config: %s', message)
        layout = OutputLayout(args.out if args.out is not None else pathlib.Path(DEFAULT_OUTDIR))
        layout.write_error(err.to_dict())
        return err.exit_code
    return execute(config, outdir=args.out, jobs=args.jobs, gnuplot=args.gnuplot, report=args.report)
