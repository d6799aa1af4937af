""" Uniform cell-centered grids with homogeneous Neumann boundaries

Fields live at cell centers, gradients live at interior faces and boundary faces
carry no flux, so the discrete divergence theorem holds exactly. All operators
are assembled once per grid as sparse matrices.

.. code-block:: python

    grid = GridSpec(cells_per_axis=(64, ), lengths=(1.0, ))
    f = Field.from_function(grid, lambda x: np.cos(np.pi*x))

    lap_f = neumann_laplacian(f)
    total = integrate(lap_f)  # zero up to round-off

Classes:

* :py:class:`GridSpec`: Uniform 1D/2D grid geometry
* :py:class:`Field`: Values sampled at cell centers
* :py:class:`FaceData`: Values at interior faces

Functions:

* :py:func:`integrate`: Midpoint quadrature of a field
* :py:func:`norm`: Discrete L^p norm of a field
* :py:func:`inner`: Discrete L^2 inner product
* :py:func:`grad_faces`: Face gradient of a field
* :py:func:`div_faces`: Cell divergence of face data
* :py:func:`neumann_laplacian`: The Neumann Laplacian of a field
* :py:func:`face_norm_squared`: Face-weighted quadrature of squared face data
* :py:func:`gradient_density`: Cell-centered |grad f|^2
* :py:func:`poisson_neumann_solve`: Solve (I - Laplacian) z = h
* :py:func:`solve_linear`: Solve one of the linear systems built on a grid

"""

# Imports
import json
import pathlib
import functools
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

# 3rd party
import numpy as np

import pandas as pd

from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

# Our own imports
from .errors import LinearSolverError, NumericFailureError

# Constants
CG_RTOL = 1e-10

AXIS_NAMES = ('x', 'y')
INDEX_NAMES = ('i', 'j')

# Classes


@dataclass(frozen=True)
class GridSpec:
    """ A uniform cell-centered grid on a box [0, L0] (x [0, L1])

    :param tuple[int] cells_per_axis:
        Number of cells along each axis (one or two axes, at least 2 cells each)
    :param tuple[float] lengths:
        Length of the domain along each axis (default: 1.0 per axis)
    """

    cells_per_axis: Tuple[int, ...]
    lengths: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        cells = self.cells_per_axis
        if isinstance(cells, (int, np.integer)):
            cells = (cells, )
        lengths = self.lengths
        if lengths is None:
            lengths = (1.0, ) * len(cells)
        elif isinstance(lengths, (int, float)):
            lengths = (lengths, )

        if len(cells) not in (1, 2):
            raise ValueError(f'Expected 1 or 2 axes, got cells_per_axis={cells}')
        if len(lengths) != len(cells):
            raise ValueError(f'Expected one length per axis, got lengths={lengths} for cells_per_axis={cells}')
        if any(int(c) != c or c < 2 for c in cells):
            raise ValueError(f'Expected at least 2 cells per axis, got {cells}')
        if any(not np.isfinite(length) or length <= 0 for length in lengths):
            raise ValueError(f'Expected positive finite lengths, got {lengths}')

        object.__setattr__(self, 'cells_per_axis', tuple(int(c) for c in cells))
        object.__setattr__(self, 'lengths', tuple(float(length) for length in lengths))

    @property
    def dim(self) -> int:
        return len(self.cells_per_axis)

    @property
    def h(self) -> Tuple[float, ...]:
        """ Cell spacing per axis """
        return tuple(length / n for length, n in zip(self.lengths, self.cells_per_axis))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def faces_per_axis(self) -> Tuple[int, ...]:
        """ Number of interior faces normal to each axis """
        counts = []
        for axis, n in enumerate(self.cells_per_axis):
            counts.append((n - 1) * self.n_cells // n)
        return tuple(counts)

    @property
    def n_faces(self) -> int:
        return sum(self.faces_per_axis)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def cell_indices(self) -> Tuple[np.ndarray, ...]:
        """ Integer index of every cell along each axis, in flattened order """
        grids = np.meshgrid(*[np.arange(n) for n in self.cells_per_axis], indexing='ij')
        return tuple(g.ravel() for g in grids)

    def cell_centers(self) -> Tuple[np.ndarray, ...]:
        """ Coordinates of every cell center along each axis, in flattened order """
        return tuple((idx + 0.5) * h for idx, h in zip(self.cell_indices(), self.h))

    def to_dict(self) -> dict:
        return {'cells_per_axis': list(self.cells_per_axis), 'lengths': list(self.lengths)}

    @classmethod
    def from_dict(cls, data: dict) -> 'GridSpec':
        return cls(cells_per_axis=tuple(data['cells_per_axis']),
                   lengths=tuple(data['lengths']))


@dataclass(frozen=True, eq=False)
class Field:
    """ A scalar function sampled at the cell centers of a grid

    The values are copied on construction and stored read-only.

    :param GridSpec grid:
        The grid the values live on
    :param ndarray values:
        One finite value per cell, in flattened cell order
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.grid.n_cells:
            raise ValueError(f'Expected {self.grid.n_cells} values, got {values.shape[0]}')
        if not np.all(np.isfinite(values)):
            raise ValueError('Field values must be finite')
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> 'Field':
        return cls(grid, np.full(grid.n_cells, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, function: Callable[..., np.ndarray]) -> 'Field':
        """ Sample a function of the cell center coordinates

        :param GridSpec grid:
            The grid to sample on
        :param Callable function:
            A vectorized function ``f(x)`` (1D) or ``f(x, y)`` (2D)
        :returns:
            The sampled field
        """
        values = function(*grid.cell_centers())
        return cls(grid, np.broadcast_to(values, (grid.n_cells, )))

    def with_values(self, values: np.ndarray) -> 'Field':
        """ A new field on the same grid """
        return Field(self.grid, values)

    def to_frame(self) -> pd.DataFrame:
        """ One row per cell: integer indices, center coordinates and value """
        columns = {}
        for name, idx in zip(INDEX_NAMES, self.grid.cell_indices()):
            columns[name] = idx
        for name, coord in zip(AXIS_NAMES, self.grid.cell_centers()):
            columns[name] = coord
        columns['value'] = self.values
        return pd.DataFrame(columns)

    def to_csv(self, csv_file: Union[str, pathlib.Path]):
        """ Write the field to a CSV file with a grid metadata header line

        :param Path csv_file:
            The file to write
        """
        csv_file = pathlib.Path(csv_file)
        csv_file.parent.mkdir(parents=True, exist_ok=True)
        with csv_file.open('wt', newline='') as fp:
            fp.write(f'# grid: {json.dumps(self.grid.to_dict())}\n')
            self.to_frame().to_csv(fp, index=False, float_format='%.17g')

    @classmethod
    def from_csv(cls, csv_file: Union[str, pathlib.Path]) -> 'Field':
        """ Read a field written by :py:meth:`to_csv`

        :param Path csv_file:
            The file to read
        :returns:
            The field stored in the file
        """
        csv_file = pathlib.Path(csv_file)
        with csv_file.open('rt') as fp:
            header = fp.readline()
            if not header.startswith('# grid:'):
                raise ValueError(f'Expected a "# grid:" header line in {csv_file}')
            grid = GridSpec.from_dict(json.loads(header.split(':', 1)[1]))
            df = pd.read_csv(fp)
        if 'value' not in df.columns:
            raise KeyError(f'Expected column "value" in {list(df.columns)}')
        return cls(grid, df['value'].to_numpy())

    def to_json(self) -> str:
        return json.dumps({'grid': self.grid.to_dict(), 'values': self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> 'Field':
        data = json.loads(text)
        return cls(GridSpec.from_dict(data['grid']), np.asarray(data['values']))


@dataclass(frozen=True, eq=False)
class FaceData:
    """ Values at the interior faces of a grid

    Faces normal to axis 0 come first; boundary faces are not stored, their
    normal components are identically zero.

    :param GridSpec grid:
        The grid the faces belong to
    :param ndarray values:
        One value per interior face
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.grid.n_faces:
            raise ValueError(f'Expected {self.grid.n_faces} face values, got {values.shape[0]}')
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    def components(self) -> List[np.ndarray]:
        """ Face values split per axis, each reshaped to its face lattice """
        parts = []
        start = 0
        for axis, count in enumerate(self.grid.faces_per_axis):
            shape = list(self.grid.cells_per_axis)
            shape[axis] -= 1
            parts.append(self.values[start:start + count].reshape(shape))
            start += count
        return parts

# Operator assembly


def _axis_operator(grid: GridSpec, axis: int, operator: sparse.spmatrix) -> sparse.csr_matrix:
    """ Lift a 1D operator along ``axis`` to the flattened grid """
    factors = [sparse.identity(n, format='csr') for n in grid.cells_per_axis]
    factors[axis] = operator
    result = factors[0]
    for factor in factors[1:]:
        result = sparse.kron(result, factor, format='csr')
    return sparse.csr_matrix(result)


def _stack_axes(grid: GridSpec, builder: Callable[[int, float], sparse.spmatrix]) -> sparse.csr_matrix:
    blocks = [_axis_operator(grid, axis, builder(n, h))
              for axis, (n, h) in enumerate(zip(grid.cells_per_axis, grid.h))]
    return sparse.vstack(blocks, format='csr')


@functools.lru_cache(maxsize=None)
def gradient_matrix(grid: GridSpec) -> sparse.csr_matrix:
    """ Face gradient: (f_right - f_left) / h at every interior face """
    return _stack_axes(grid, lambda n, h: sparse.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n)) / h)


@functools.lru_cache(maxsize=None)
def divergence_matrix(grid: GridSpec) -> sparse.csr_matrix:
    """ Cell divergence of face fluxes, the negative transpose of the gradient """
    return sparse.csr_matrix(-gradient_matrix(grid).T)


@functools.lru_cache(maxsize=None)
def laplacian_matrix(grid: GridSpec) -> sparse.csr_matrix:
    """ Neumann Laplacian, symmetric negative semi-definite """
    return sparse.csr_matrix(divergence_matrix(grid) @ gradient_matrix(grid))


@functools.lru_cache(maxsize=None)
def face_average_matrix(grid: GridSpec) -> sparse.csr_matrix:
    """ Arithmetic mean of the two cells adjacent to each face """
    return _stack_axes(grid, lambda n, h: sparse.diags([0.5, 0.5], [0, 1], shape=(n - 1, n)))


@functools.lru_cache(maxsize=None)
def _donor_matrices(grid: GridSpec) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    left = _stack_axes(grid, lambda n, h: sparse.diags([1.0], [0], shape=(n - 1, n)))
    right = _stack_axes(grid, lambda n, h: sparse.diags([1.0], [1], shape=(n - 1, n)))
    return left, right


def upwind_matrix(grid: GridSpec, velocity: np.ndarray) -> sparse.csr_matrix:
    """ Donor-cell selection for a face velocity

    :param GridSpec grid:
        The grid
    :param ndarray velocity:
        One velocity per interior face
    :returns:
        A faces x cells matrix picking the left cell where velocity >= 0, the right cell otherwise
    """
    left, right = _donor_matrices(grid)
    forward = (np.asarray(velocity) >= 0).astype(np.float64)
    return sparse.csr_matrix(sparse.diags(forward) @ left + sparse.diags(1.0 - forward) @ right)


@functools.lru_cache(maxsize=None)
def face_to_cell_matrix(grid: GridSpec) -> sparse.csr_matrix:
    """ Half of each face value goes to each of its two cells """
    left, right = _donor_matrices(grid)
    return sparse.csr_matrix(0.5 * (left + right).T)


@functools.lru_cache(maxsize=None)
def axis_laplacian_matrix(grid: GridSpec, axis: int) -> sparse.csr_matrix:
    """ Neumann second difference along a single axis """
    n, h = grid.cells_per_axis[axis], grid.h[axis]
    diff = sparse.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n)) / h
    return _axis_operator(grid, axis, sparse.csr_matrix(-diff.T @ diff))


@functools.lru_cache(maxsize=None)
def central_difference_matrix(grid: GridSpec, axis: int) -> sparse.csr_matrix:
    """ Central first difference along one axis with reflected ghost cells """
    n, h = grid.cells_per_axis[axis], grid.h[axis]
    central = sparse.lil_matrix(sparse.diags([-1.0, 1.0], [-1, 1], shape=(n, n)))
    central[0, 0] = -1.0
    central[n - 1, n - 1] = 1.0
    return _axis_operator(grid, axis, sparse.csr_matrix(central) / (2.0 * h))

# Linear solvers


def _solve_tridiagonal(matrix: sparse.spmatrix, rhs: np.ndarray) -> np.ndarray:
    matrix = sparse.csr_matrix(matrix)
    n = matrix.shape[0]
    banded = np.zeros((3, n))
    banded[0, 1:] = matrix.diagonal(1)
    banded[1, :] = matrix.diagonal(0)
    banded[2, :-1] = matrix.diagonal(-1)
    try:
        return linalg.solve_banded((1, 1), banded, rhs)
    except (linalg.LinAlgError, ValueError) as err:
        raise LinearSolverError(f'Tridiagonal solve failed: {err}') from err


def _solve_cg(matrix: sparse.spmatrix, rhs: np.ndarray, rtol: float) -> np.ndarray:
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)
    diagonal = matrix.diagonal()
    if np.any(diagonal <= 0):
        raise LinearSolverError('Expected a positive diagonal for the conjugate gradient solve')
    preconditioner = sparse.diags(1.0 / diagonal)
    solution, info = sparse_linalg.cg(matrix, rhs, x0=np.zeros_like(rhs),
                                      rtol=rtol, atol=0.0,
                                      maxiter=max(10 * rhs.shape[0], 1000),
                                      M=preconditioner)
    if info != 0:
        residual = float(np.linalg.norm(rhs - matrix @ solution))
        raise LinearSolverError(f'Conjugate gradient stopped with info={info}, residual {residual:0.3e}',
                                residual=residual)
    return solution


def solve_linear(grid: GridSpec,
                 matrix: sparse.spmatrix,
                 rhs: np.ndarray,
                 symmetric: bool = False,
                 rtol: float = CG_RTOL) -> np.ndarray:
    """ Solve a linear system assembled on ``grid``

    1D systems are tridiagonal and solved directly. 2D symmetric positive-definite
    systems use Jacobi-preconditioned conjugate gradients from a zero start, other
    2D systems use a sparse direct factorization.

    :param GridSpec grid:
        The grid the system lives on
    :param spmatrix matrix:
        The cells x cells system matrix
    :param ndarray rhs:
        The right hand side
    :param bool symmetric:
        If True, the matrix is symmetric positive-definite
    :param float rtol:
        Relative residual tolerance of the iterative solve
    :returns:
        The solution vector
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if grid.dim == 1:
        solution = _solve_tridiagonal(matrix, rhs)
    elif symmetric:
        solution = _solve_cg(sparse.csr_matrix(matrix), rhs, rtol)
    else:
        solution = sparse_linalg.spsolve(sparse.csc_matrix(matrix), rhs)
    if not np.all(np.isfinite(solution)):
        raise NumericFailureError('Linear solve produced non-finite values')
    return np.asarray(solution)

# Functions


def integrate(f: Field) -> float:
    """ Midpoint quadrature: sum of values times the cell volume """
    return float(np.sum(f.values) * f.grid.cell_volume)


def norm(f: Field, p: float = 2.0) -> float:
    """ Discrete L^p norm of a field

    :param Field f:
        The field
    :param float p:
        The exponent, at least 1, or ``np.inf`` for the max norm
    :returns:
        The norm
    """
    if not p >= 1:
        raise ValueError(f'Expected p >= 1, got {p}')
    values = np.abs(f.values)
    if np.isinf(p):
        return float(np.max(values))
    return float(np.sum(values ** p) * f.grid.cell_volume) ** (1.0 / p)


def inner(f: Field, g: Field) -> float:
    """ Discrete L^2 inner product """
    if f.grid != g.grid:
        raise ValueError(f'Fields live on different grids: {f.grid} vs {g.grid}')
    return float(np.dot(f.values, g.values) * f.grid.cell_volume)


def grad_faces(f: Field) -> FaceData:
    return FaceData(f.grid, gradient_matrix(f.grid) @ f.values)


def div_faces(g: FaceData) -> Field:
    return Field(g.grid, divergence_matrix(g.grid) @ g.values)


def neumann_laplacian(f: Field) -> Field:
    return Field(f.grid, laplacian_matrix(f.grid) @ f.values)


def face_norm_squared(g: FaceData) -> float:
    """ Squared L^2 norm of face data, each face weighted by one cell volume """
    return float(np.sum(g.values ** 2) * g.grid.cell_volume)


def gradient_density(f: Field) -> Field:
    """ Cell-centered |grad f|^2: half the sum of squared gradients on the adjacent faces

    Integrates to :py:func:`face_norm_squared` of :py:func:`grad_faces` and satisfies
    ``lap(f) + gradient_density(f) / f == lap(f**2) / (2*f)`` exactly.
    """
    face_grad = gradient_matrix(f.grid) @ f.values
    return Field(f.grid, face_to_cell_matrix(f.grid) @ face_grad ** 2)


def poisson_neumann_solve(h_rhs: Field, rtol: float = CG_RTOL) -> Field:
    """ Solve (I - Laplacian) z = h with homogeneous Neumann boundaries

    :param Field h_rhs:
        The right hand side
    :param float rtol:
        Relative residual tolerance for 2D solves
    :returns:
        The solution z
    """
    grid = h_rhs.grid
    matrix = sparse.identity(grid.n_cells, format='csr') - laplacian_matrix(grid)
    return Field(grid, solve_linear(grid, matrix, h_rhs.values, symmetric=True, rtol=rtol))
