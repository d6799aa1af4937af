""" Initial data recipes

A recipe is a small dictionary naming a ``kind`` and its parameters:

.. code-block:: python

    recipe = {'kind': 'gaussian', 'center': [0.5], 'width': 0.1, 'amplitude': 2.0}
    u0 = build_initial_field(grid, recipe)

Kinds:

* ``constant``: ``value``
* ``gaussian``: ``center``, ``width``, ``amplitude``, ``background`` (default 0)
* ``cosine``: ``mode`` (per axis or one for all), ``amplitude``, ``background``
* ``csv``: ``path`` to a field written by :py:meth:`chemotax.grid.Field.to_csv`
* ``perturbed``: ``base`` recipe plus uniform noise in [0, ``noise``)
* ``sum``: ``terms``, a list of recipes added together

Functions:

* :py:func:`build_initial_field`: Sample a recipe on a grid
* :py:func:`validate_recipe`: List every problem with a recipe

"""

# Imports
import pathlib
from typing import Any, Dict, List, Mapping, Optional, Union

# 3rd party
import numpy as np

# Our own imports
from .grid import GridSpec, Field

# Constants
RECIPE_KINDS = ('constant', 'gaussian', 'cosine', 'csv', 'perturbed', 'sum')

SeedLike = Union[None, int, np.random.Generator]

# Helpers


def _per_axis(value: Any, grid: GridSpec) -> List[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * grid.dim
    return [float(v) for v in value]


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)


def _gaussian(grid: GridSpec, recipe: Mapping[str, Any]) -> np.ndarray:
    centers = _per_axis(recipe['center'], grid)
    width = float(recipe['width'])
    dist2 = sum((x - c) ** 2 for x, c in zip(grid.cell_centers(), centers))
    bump = float(recipe['amplitude']) * np.exp(-dist2 / (2.0 * width ** 2))
    return bump + float(recipe.get('background', 0.0))


def _cosine(grid: GridSpec, recipe: Mapping[str, Any]) -> np.ndarray:
    modes = _per_axis(recipe['mode'], grid)
    wave = np.ones(grid.n_cells)
    for x, mode, length in zip(grid.cell_centers(), modes, grid.lengths):
        wave = wave * np.cos(mode * np.pi * x / length)
    return float(recipe.get('amplitude', 1.0)) * wave + float(recipe.get('background', 0.0))


def _from_csv(grid: GridSpec, recipe: Mapping[str, Any],
              base_dir: Optional[pathlib.Path]) -> np.ndarray:
    csv_path = pathlib.Path(recipe['path'])
    if not csv_path.is_absolute() and base_dir is not None:
        csv_path = base_dir / csv_path
    field = Field.from_csv(csv_path)
    if field.grid != grid:
        raise ValueError(f'Field in {csv_path} lives on {field.grid}, expected {grid}')
    return np.array(field.values)


def _build_values(grid: GridSpec, recipe: Mapping[str, Any],
                  rng: np.random.Generator,
                  base_dir: Optional[pathlib.Path]) -> np.ndarray:
    kind = recipe['kind']
    if kind == 'constant':
        return np.full(grid.n_cells, float(recipe['value']))
    if kind == 'gaussian':
        return _gaussian(grid, recipe)
    if kind == 'cosine':
        return _cosine(grid, recipe)
    if kind == 'csv':
        return _from_csv(grid, recipe, base_dir)
    if kind == 'perturbed':
        base = _build_values(grid, recipe['base'], rng, base_dir)
        return base + float(recipe['noise']) * rng.random(grid.n_cells)
    if kind == 'sum':
        total = np.zeros(grid.n_cells)
        for term in recipe['terms']:
            total = total + _build_values(grid, term, rng, base_dir)
        return total
    raise ValueError(f'Unknown initial data kind "{kind}", expected one of {RECIPE_KINDS}')

# Functions


def build_initial_field(grid: GridSpec,
                        recipe: Mapping[str, Any],
                        seed: SeedLike = None,
                        base_dir: Optional[Union[str, pathlib.Path]] = None) -> Field:
    """ Sample an initial data recipe on a grid

    :param GridSpec grid:
        The grid to sample on
    :param dict recipe:
        The recipe (see the module docs for the kinds)
    :param int seed:
        Seed (or generator) for ``perturbed`` recipes
    :param Path base_dir:
        If not None, directory that relative ``csv`` paths are resolved against
    :returns:
        The sampled field
    """
    errors = validate_recipe(recipe)
    if errors:
        raise ValueError('; '.join(errors))
    if base_dir is not None:
        base_dir = pathlib.Path(base_dir)
    rng = np.random.default_rng(seed)
    return Field(grid, _build_values(grid, recipe, rng, base_dir))


def validate_recipe(recipe: Any, path: str = 'recipe') -> List[str]:
    """ Check a recipe without sampling it

    :param dict recipe:
        The recipe to check
    :param str path:
        Dotted field path to prefix each message with
    :returns:
        A list of error messages, empty if the recipe is valid
    """
    if not isinstance(recipe, Mapping):
        return [f'{path}: expected a table with a "kind" key, got {recipe!r}']
    kind = recipe.get('kind')
    if kind not in RECIPE_KINDS:
        return [f'{path}.kind: expected one of {RECIPE_KINDS}, got {kind!r}']

    required: Dict[str, Any] = {
        'constant': ('value', ),
        'gaussian': ('center', 'width', 'amplitude'),
        'cosine': ('mode', ),
        'csv': ('path', ),
        'perturbed': ('base', 'noise'),
        'sum': ('terms', ),
    }
    errors = [f'{path}.{key}: missing' for key in required[kind] if key not in recipe]
    if errors:
        return errors

    if kind == 'constant' and not _is_number(recipe['value']):
        errors.append(f'{path}.value: expected a number, got {recipe["value"]!r}')
    elif kind == 'gaussian':
        if not _is_number(recipe['width']) or recipe['width'] <= 0:
            errors.append(f'{path}.width: expected a positive number, got {recipe["width"]!r}')
        for key in ('amplitude', 'background'):
            if key in recipe and not _is_number(recipe[key]):
                errors.append(f'{path}.{key}: expected a number, got {recipe[key]!r}')
    elif kind == 'cosine':
        for key in ('amplitude', 'background'):
            if key in recipe and not _is_number(recipe[key]):
                errors.append(f'{path}.{key}: expected a number, got {recipe[key]!r}')
    elif kind == 'perturbed':
        if not _is_number(recipe['noise']) or recipe['noise'] < 0:
            errors.append(f'{path}.noise: expected a non-negative number, got {recipe["noise"]!r}')
        errors.extend(validate_recipe(recipe['base'], f'{path}.base'))
    elif kind == 'sum':
        terms = recipe['terms']
        if not isinstance(terms, list) or not terms:
            errors.append(f'{path}.terms: expected a non-empty list of recipes')
        else:
            for i, term in enumerate(terms):
                errors.extend(validate_recipe(term, f'{path}.terms[{i}]'))
    return errors
