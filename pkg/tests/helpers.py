""" Test helper tools

Classes:

* :py:class:`FileSystemTestCase`: Tests that need a temporary directory

Functions:

* :py:func:`bump_data`: A gaussian bump of cells on a constant chemical
* :py:func:`cosine_data`: Smooth cosine initial data
* :py:func:`make_params`: Scheme parameters with test friendly defaults
* :py:func:`make_control_problem`: A small 1D control problem

"""

# Imports
import unittest
import tempfile
import pathlib
from typing import Optional, Tuple

# Our own imports
from chemotax.control import ControlProblem
from chemotax.grid import GridSpec, Field
from chemotax.initial_data import build_initial_field
from chemotax.model_fns import ModelParams
from chemotax.scheme import SchemeParams

# Helper classes


class FileSystemTestCase(unittest.TestCase):
    """ Set up and tear down a temporary filesystem """

    def setUp(self):
        self._tempdir_obj = tempfile.TemporaryDirectory()
        self.tempdir = pathlib.Path(self._tempdir_obj.__enter__()).resolve()

    def tearDown(self):
        self.tempdir = None
        self._tempdir_obj.__exit__(None, None, None)
        self._tempdir_obj = None

# Helper functions


def bump_data(grid: GridSpec, amplitude: float = 1.0, chemical: float = 1.0) -> Tuple[Field, Field]:
    """ u0 a gaussian bump at 0.3 (per axis), v0 constant """
    recipe = {'kind': 'gaussian', 'center': 0.3, 'width': 0.1, 'amplitude': amplitude}
    return build_initial_field(grid, recipe), Field.constant(grid, chemical)


def cosine_data(grid: GridSpec) -> Tuple[Field, Field]:
    """ Smooth, strictly positive u0 and v0 """
    u0 = build_initial_field(grid, {'kind': 'cosine', 'mode': 1, 'amplitude': 0.5, 'background': 1.0})
    v0 = build_initial_field(grid, {'kind': 'cosine', 'mode': 2, 'amplitude': 0.25, 'background': 1.0})
    return u0, v0


def make_params(k: float = 0.0625, T_final: float = 0.5,
                model: Optional[ModelParams] = None, **kwargs) -> SchemeParams:
    if model is None:
        model = ModelParams()
    return SchemeParams(k=k, T_final=T_final, model=model, **kwargs)


def make_control_problem(n_cells: int = 16, k: float = 0.125, T_final: float = 0.5,
                         **kwargs) -> ControlProblem:
    """ A 1D problem controlled on the left half, zero targets unless given """
    grid = GridSpec((n_cells, ))
    u0, v0 = bump_data(grid)
    mask = Field.from_function(grid, lambda x: (x <= 0.5).astype(float))
    kwargs.setdefault('gamma_u', 1.0)
    kwargs.setdefault('gamma_v', 1.0)
    kwargs.setdefault('gamma_f', 0.1)
    return ControlProblem(grid=grid, mask=mask, k=k, T_final=T_final, u0=u0, v0=v0, **kwargs)
