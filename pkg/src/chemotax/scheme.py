""" Truncated time-discrete scheme in the (u, z) variables

Each step solves the coupled nonlinear system

.. code-block:: text

    (u - u_prev)/k - lap(u) + div(T(u) grad(z**2)) = 0
    (z - z_prev)/k - lap(z) - |grad z|**2/z + (c(u) - f*chi)/2 * (z - alpha**2/z) = 0

with z = sqrt(v + alpha**2), c(u) = T(u)**s and an optional control forcing
f supported on the indicator chi. The chemical v is then rebuilt either from z
directly or by a separate linear solve driven by u.

Example: Run a trajectory from a Gaussian bump of cells in a uniform chemical

.. code-block:: python

    grid = GridSpec((128, ))
    params = SchemeParams(k=1/64, T_final=1.0)
    u0 = Field.from_function(grid, lambda x: np.exp(-(x - 0.5)**2/0.02))
    v0 = Field.constant(grid, 1.0)

    traj = run(u0, v0, params)
    df = traj.to_frame()

Classes:

* :py:class:`SchemeParams`: Time step, model and solver options
* :py:class:`ControlForcing`: A control f and its support indicator
* :py:class:`TimeStep`: The state after one step
* :py:class:`Trajectory`: An ordered sequence of time steps

Functions:

* :py:func:`initialize`: Build step 0 from initial data
* :py:func:`step`: Advance one step with the Picard iteration
* :py:func:`run`: Advance to the final time
* :py:func:`linearly_implicit_run`: Advance with coefficients frozen at the previous step
* :py:func:`v_update_from_z`: Rebuild v from z
* :py:func:`v_update_from_u`: Rebuild v by a linear solve driven by u
* :py:func:`interpolant_pc`: Piecewise constant reconstruction in time
* :py:func:`interpolant_lin`: Piecewise linear reconstruction in time
* :py:func:`eyre_identity_check`: Residual of the discrete chain rule for z**2

"""

# Imports
import math
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

# 3rd party
import numpy as np

import pandas as pd

from scipy import sparse

# Our own imports
from .errors import (
    ChemotaxError, DomainError, InvariantViolation, NonConvergenceError,
    NumericFailureError, StabilityError,
)
from .grid import (
    GridSpec, Field, integrate,
    gradient_matrix, divergence_matrix, laplacian_matrix, face_average_matrix,
    face_to_cell_matrix, upwind_matrix, solve_linear,
)
from .model_fns import ModelParams, TRUNCATIONS, truncate, consumption

# Constants
V_VARIANTS = ('from_z', 'from_u')
V_VARIANT_ALIASES = {'FromZ': 'from_z', 'FromU': 'from_u'}
FLUX_SCHEMES = ('central', 'upwind')

MASS_RTOL = 1e-10
STEP_GUARD = 1e-12
TIME_GUARD = 1e-9

logger = logging.getLogger(__name__)

# Classes


@dataclass(frozen=True)
class SchemeParams:
    """ Parameters of the time stepping

    :param float k:
        Time step
    :param ModelParams model:
        Consumption power, truncation level and shift
    :param str v_variant:
        'from_z' to set v = z**2 - alpha**2, 'from_u' to solve a linear equation for v
    :param str flux_scheme:
        'central' (face average) or 'upwind' (donor cell) chemotaxis flux
    :param str truncation:
        'cap' or 'smooth' truncation of u
    :param float picard_tol:
        Relative residual that ends the Picard iteration
    :param int picard_max:
        Maximum number of Picard iterations per step
    :param int picard_depth:
        Number of previous iterates mixed by Anderson acceleration, 0 for plain Picard
    :param float T_final:
        Final time, at least one step
    :param float bound_tol:
        Tolerance of the post-step bound checks
    """

    k: float
    model: ModelParams = field(default_factory=ModelParams)
    v_variant: str = 'from_z'
    flux_scheme: str = 'central'
    truncation: str = 'cap'
    picard_tol: float = 1e-9
    picard_max: int = 200
    picard_depth: int = 5
    T_final: float = 1.0
    bound_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, 'v_variant', V_VARIANT_ALIASES.get(self.v_variant, self.v_variant))
        if not isinstance(self.k, (int, float)) or not np.isfinite(self.k) or self.k <= 0:
            raise ValueError(f'Expected k > 0, got k={self.k!r}')
        if self.v_variant not in V_VARIANTS:
            raise ValueError(f'Expected v_variant in {V_VARIANTS}, got {self.v_variant!r}')
        if self.flux_scheme not in FLUX_SCHEMES:
            raise ValueError(f'Expected flux_scheme in {FLUX_SCHEMES}, got {self.flux_scheme!r}')
        if self.truncation not in TRUNCATIONS:
            raise ValueError(f'Expected truncation in {TRUNCATIONS}, got {self.truncation!r}')
        if not self.picard_tol > 0:
            raise ValueError(f'Expected picard_tol > 0, got {self.picard_tol!r}')
        if int(self.picard_max) != self.picard_max or self.picard_max < 1:
            raise ValueError(f'Expected picard_max >= 1, got {self.picard_max!r}')
        if int(self.picard_depth) != self.picard_depth or self.picard_depth < 0:
            raise ValueError(f'Expected picard_depth >= 0, got {self.picard_depth!r}')
        if not self.T_final >= self.k * (1.0 - STEP_GUARD):
            raise ValueError(f'Expected T_final >= k, got T_final={self.T_final!r} with k={self.k!r}')
        if not self.bound_tol >= 0:
            raise ValueError(f'Expected bound_tol >= 0, got {self.bound_tol!r}')

    @property
    def n_steps(self) -> int:
        """ Number of steps after step 0 """
        return max(1, int(math.ceil(self.T_final / self.k - STEP_GUARD)))

    def replace(self, **kwargs) -> 'SchemeParams':
        """ Copy with some fields changed """
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class ControlForcing:
    """ A time dependent control supported on an indicator set

    :param ndarray values:
        One row of cell values per step n = 1..N
    :param ndarray mask:
        0/1 indicator of the control set, one value per cell
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        mask = np.array(self.mask, dtype=np.float64).reshape(-1)
        if values.ndim != 2 or values.shape[1] != mask.shape[0]:
            raise ValueError(f'Expected control values of shape (steps, {mask.shape[0]}), got {values.shape}')
        if not np.all(np.isfinite(values)):
            raise ValueError('Control values must be finite')
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', mask)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def has_positive_part(self) -> bool:
        return bool(np.any(self.values * self.mask > 0))

    def effective(self, n: int) -> np.ndarray:
        """ f^n times the indicator for step ``n`` (1-based) """
        return self.values[n - 1] * self.mask

    def check_stability(self, k: float):
        """ Reject controls with k * max(f+) >= 1 on the control set """
        positive = float(np.max(np.maximum(self.values * self.mask, 0.0), initial=0.0))
        if k * positive >= 1.0:
            suggested_k = 0.5 / positive
            raise StabilityError(f'Control too large for k={k}: k*max(f+)={k*positive:0.4g} >= 1, try k <= {suggested_k:0.4g}',
                                 suggested_k=suggested_k)


@dataclass(frozen=True, eq=False)
class TimeStep:
    """ The state at one time node """

    n: int
    t: float
    u: Field
    z: Field
    v: Field
    picard_iters: int = 0
    picard_residual: float = 0.0


@dataclass(eq=False)
class Trajectory:
    """ Ordered time steps of one run, starting from step 0 """

    params: SchemeParams
    grid: GridSpec
    steps: List[TimeStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n_steps(self) -> int:
        """ Number of steps after step 0 """
        return len(self.steps) - 1

    @property
    def final(self) -> TimeStep:
        return self.steps[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.steps])

    def stack(self, name: str) -> np.ndarray:
        """ Values of 'u', 'z' or 'v' as a (steps, cells) array """
        if name not in ('u', 'z', 'v'):
            raise KeyError(f'Expected one of "u", "z", "v", got {name!r}')
        return np.vstack([getattr(s, name).values for s in self.steps])

    def to_frame(self) -> pd.DataFrame:
        """ One row of summary values per step """
        rows = []
        for s in self.steps:
            rows.append({
                'n': s.n,
                't': s.t,
                'mass': integrate(s.u),
                'u_min': float(np.min(s.u.values)),
                'u_max': float(np.max(s.u.values)),
                'z_min': float(np.min(s.z.values)),
                'z_max': float(np.max(s.z.values)),
                'v_min': float(np.min(s.v.values)),
                'v_max': float(np.max(s.v.values)),
                'picard_iters': s.picard_iters,
                'picard_residual': s.picard_residual,
            })
        return pd.DataFrame(rows)

# Helpers


def _flux_matrix(grid: GridSpec, velocity: np.ndarray, flux_scheme: str) -> sparse.csr_matrix:
    if flux_scheme == 'upwind':
        return upwind_matrix(grid, velocity)
    return face_average_matrix(grid)


def _truncation_ratio(u: np.ndarray, params: SchemeParams) -> np.ndarray:
    """ T(u)/u, taken as 1 where u vanishes """
    trunc = np.asarray(truncate(u, params.model.m, params.truncation))
    ratio = np.ones_like(u)
    nonzero = u != 0.0
    ratio[nonzero] = trunc[nonzero] / u[nonzero]
    return ratio


def _consumption(u: np.ndarray, params: SchemeParams) -> np.ndarray:
    return np.asarray(consumption(u, params.model.m, params.model.s, params.truncation))


def _identity(grid: GridSpec) -> sparse.csr_matrix:
    return sparse.identity(grid.n_cells, format='csr')


def _solve_u(grid: GridSpec, u_prev: np.ndarray, u_iter: np.ndarray, z_iter: np.ndarray,
             params: SchemeParams) -> np.ndarray:
    """ Implicit u with the truncation ratio and grad(z**2) frozen """
    velocity = gradient_matrix(grid) @ (z_iter ** 2)
    selector = _flux_matrix(grid, velocity, params.flux_scheme)
    theta = _truncation_ratio(u_iter, params)
    matrix = (_identity(grid) / params.k - laplacian_matrix(grid)
              + divergence_matrix(grid) @ sparse.diags(velocity) @ selector @ sparse.diags(theta))
    return solve_linear(grid, matrix, u_prev / params.k, symmetric=False)


def _solve_z(grid: GridSpec, z_prev: np.ndarray, u_new: np.ndarray, z_iter: np.ndarray,
             params: SchemeParams, forcing: np.ndarray) -> np.ndarray:
    """ Implicit z, scaled by 2*z_iter**2 into a symmetric positive definite system """
    k, alpha2 = params.k, params.model.alpha ** 2
    rate = _consumption(u_new, params) - forcing
    zp2 = z_iter ** 2
    matrix = (sparse.diags(2.0 * zp2 / k + zp2 * rate)
              - sparse.diags(z_iter) @ laplacian_matrix(grid) @ sparse.diags(z_iter))
    rhs = 2.0 * zp2 * z_prev / k + z_iter * alpha2 * rate
    return solve_linear(grid, matrix, rhs, symmetric=True)


def _step_residual(grid: GridSpec, u: np.ndarray, z: np.ndarray,
                   u_prev: np.ndarray, z_prev: np.ndarray,
                   params: SchemeParams, forcing: np.ndarray) -> float:
    """ Relative residual of both step equations """
    k, alpha2 = params.k, params.model.alpha ** 2
    grad = gradient_matrix(grid)
    lap = laplacian_matrix(grid)

    velocity = grad @ (z ** 2)
    selector = _flux_matrix(grid, velocity, params.flux_scheme)
    trunc = np.asarray(truncate(u, params.model.m, params.truncation))
    res_u = (u - u_prev) / k - lap @ u + divergence_matrix(grid) @ (velocity * (selector @ trunc))

    rate = _consumption(u, params) - forcing
    grad_density = face_to_cell_matrix(grid) @ (grad @ z) ** 2
    res_z = (z - z_prev) / k - lap @ z - grad_density / z + 0.5 * rate * (z - alpha2 / z)

    volume = grid.cell_volume
    numerator = math.sqrt(volume * (np.sum(res_u ** 2) + np.sum(res_z ** 2)))
    scale = math.sqrt(volume * (np.sum(u_prev ** 2) + np.sum(z_prev ** 2))) / k
    return numerator / scale


def _anderson_mix(inputs: List[np.ndarray], outputs: List[np.ndarray]) -> np.ndarray:
    """ Anderson combination of the stored Picard inputs and their updates """
    if len(outputs) < 2:
        return outputs[-1]
    residuals = np.stack([g - x for x, g in zip(inputs, outputs)], axis=1)
    updates = np.stack(outputs, axis=1)
    d_res = np.diff(residuals, axis=1)
    d_upd = np.diff(updates, axis=1)
    gamma = np.linalg.lstsq(d_res, residuals[:, -1], rcond=None)[0]
    return updates[:, -1] - d_upd @ gamma


def _check_step(prev: TimeStep, new: TimeStep, params: SchemeParams,
                bounded_above: bool, check_u: bool = True):
    """ Post-hoc bounds and conservation for one accepted step """
    tol = params.bound_tol
    u, z, v = new.u.values, new.z.values, new.v.values
    if check_u:
        # Upwind fluxes keep u >= 0 exactly in any dimension
        u_tol = 0.0 if params.flux_scheme == 'upwind' else tol
        if np.min(u) < -u_tol:
            raise InvariantViolation(f'Step {new.n}: min(u)={np.min(u):0.3e} below -{u_tol}', check='u_nonnegative')
        if np.min(z) < params.model.alpha - tol:
            raise InvariantViolation(f'Step {new.n}: min(z)={np.min(z):0.6g} below alpha={params.model.alpha}', check='z_lower')
        if bounded_above and np.max(z) > np.max(prev.z.values) + tol:
            raise InvariantViolation(f'Step {new.n}: max(z)={np.max(z):0.12g} above previous max {np.max(prev.z.values):0.12g}',
                                     check='z_upper')
    if np.min(v) < -tol:
        raise InvariantViolation(f'Step {new.n}: min(v)={np.min(v):0.3e} below -{tol}', check='v_nonnegative')
    if bounded_above and np.max(v) > np.max(prev.v.values) + tol:
        raise InvariantViolation(f'Step {new.n}: max(v)={np.max(v):0.12g} above previous max {np.max(prev.v.values):0.12g}',
                                 check='v_upper')


def _check_mass(u0: Field, u_n: Field, n: int):
    mass0 = integrate(u0)
    drift = abs(integrate(u_n) - mass0)
    if drift > MASS_RTOL * max(abs(mass0), np.finfo(np.float64).tiny):
        raise InvariantViolation(f'Step {n}: mass drift {drift:0.3e} exceeds {MASS_RTOL} of {mass0:0.6g}', check='mass')


def _forcing_at(forcing: Optional[ControlForcing], n: int, grid: GridSpec) -> np.ndarray:
    if forcing is None:
        return np.zeros(grid.n_cells)
    return forcing.effective(n)


def _check_forcing(forcing: Optional[ControlForcing], params: SchemeParams, grid: GridSpec):
    if forcing is None:
        return
    if forcing.values.shape != (params.n_steps, grid.n_cells):
        raise ValueError(f'Expected control values of shape {(params.n_steps, grid.n_cells)}, got {forcing.values.shape}')
    forcing.check_stability(params.k)

# Functions


def v_update_from_z(z_n: Field, alpha: float) -> Field:
    """ v = z**2 - alpha**2 """
    return z_n.with_values(z_n.values ** 2 - alpha ** 2)


def v_update_from_u(v_prev: Field, u_n: Field, params: SchemeParams,
                    forcing: Optional[np.ndarray] = None) -> Field:
    """ Solve (I/k - lap + c(u_n) - f*chi) v = v_prev/k

    :param Field v_prev:
        The chemical at the previous step
    :param Field u_n:
        The cell density at the current step
    :param SchemeParams params:
        The scheme parameters
    :param ndarray forcing:
        If not None, the control times its indicator at this step
    :returns:
        The chemical at the current step
    """
    grid = v_prev.grid
    rate = _consumption(u_n.values, params)
    if forcing is not None:
        rate = rate - forcing
    matrix = _identity(grid) / params.k - laplacian_matrix(grid) + sparse.diags(rate)
    return v_prev.with_values(solve_linear(grid, matrix, v_prev.values / params.k, symmetric=True))


def initialize(u0: Field, v0: Field, params: SchemeParams) -> TimeStep:
    """ Step 0: z = sqrt(v0 + alpha**2)

    :param Field u0:
        Non-negative initial cell density
    :param Field v0:
        Non-negative initial chemical
    :param SchemeParams params:
        The scheme parameters
    :returns:
        The time step at t = 0
    """
    if u0.grid != v0.grid:
        raise DomainError(f'Initial data live on different grids: {u0.grid} vs {v0.grid}')
    if np.any(u0.values < 0):
        raise DomainError(f'Initial u must be non-negative, got min(u0)={np.min(u0.values)}')
    if np.any(v0.values < 0):
        raise DomainError(f'Initial v must be non-negative, got min(v0)={np.min(v0.values)}')
    z0 = v0.with_values(np.sqrt(v0.values + params.model.alpha ** 2))
    return TimeStep(n=0, t=0.0, u=u0, z=z0, v=v0)


def step(prev: TimeStep, params: SchemeParams,
         forcing: Optional[np.ndarray] = None) -> TimeStep:
    """ Advance one step by Picard iteration

    Alternates a u-solve with the truncation ratio and grad(z**2) frozen and a
    z-solve with |grad z|**2/z and alpha**2/z frozen, starting from the previous
    step, until the relative residual of the unmodified step equations drops
    below ``params.picard_tol``. The next frozen state is the Anderson mix of the
    last ``params.picard_depth`` Picard updates; the accepted state is always a
    plain Picard update, so the bounds of the linear solves carry over.

    :param TimeStep prev:
        The previous step
    :param SchemeParams params:
        The scheme parameters
    :param ndarray forcing:
        If not None, the control times its indicator at this step
    :returns:
        The next step, checked against the pointwise bounds
    """
    grid = prev.u.grid
    n = prev.n + 1
    if forcing is None:
        forcing = np.zeros(grid.n_cells)
    u_prev, z_prev = prev.u.values, prev.z.values

    u_in, z_in = u_prev, z_prev
    inputs, outputs = [], []
    history = []
    for iteration in range(1, int(params.picard_max) + 1):
        u_iter = _solve_u(grid, u_prev, u_in, z_in, params)
        z_iter = _solve_z(grid, z_prev, u_iter, z_in, params, forcing)
        if np.any(z_iter <= 0):
            raise NumericFailureError(f'Step {n}: z lost positivity at Picard iteration {iteration}')
        residual = _step_residual(grid, u_iter, z_iter, u_prev, z_prev, params, forcing)
        if not np.isfinite(residual):
            raise NumericFailureError(f'Step {n}: non-finite residual at Picard iteration {iteration}')
        history.append(residual)
        logger.debug('Step %d Picard iteration %d residual %0.3e', n, iteration, residual)
        if residual < params.picard_tol:
            break

        inputs.append(np.concatenate([u_in, z_in]))
        outputs.append(np.concatenate([u_iter, z_iter]))
        del inputs[:-(params.picard_depth + 1)], outputs[:-(params.picard_depth + 1)]
        mixed = _anderson_mix(inputs, outputs)
        u_in, z_in = mixed[:grid.n_cells], mixed[grid.n_cells:]
        if len(outputs) > 1:
            # Mixed states are clipped to the bounds of the exact step
            u_in = np.maximum(u_in, 0.0)
            z_in = np.maximum(z_in, params.model.alpha)
        if not np.all(np.isfinite(mixed)):
            logger.debug('Step %d Picard iteration %d: mixed state rejected, restarting', n, iteration)
            u_in, z_in = u_iter, z_iter
            inputs.clear()
            outputs.clear()
    else:
        raise NonConvergenceError(f'Step {n}: Picard iteration did not reach {params.picard_tol} in {params.picard_max} iterations',
                                  residual_history=history)

    u_new = prev.u.with_values(u_iter)
    z_new = prev.z.with_values(z_iter)
    if params.v_variant == 'from_z':
        v_new = v_update_from_z(z_new, params.model.alpha)
    else:
        v_new = v_update_from_u(prev.v, u_new, params, forcing=forcing)

    new = TimeStep(n=n, t=n * params.k, u=u_new, z=z_new, v=v_new,
                   picard_iters=len(history), picard_residual=history[-1])
    _check_step(prev, new, params, bounded_above=not np.any(forcing > 0))
    _check_mass(prev.u, u_new, n)
    return new


def run(u0: Field, v0: Field, params: SchemeParams,
        forcing: Optional[ControlForcing] = None) -> Trajectory:
    """ Advance from step 0 to the final time

    On failure the error carries the accepted steps as ``err.trajectory``.

    :param Field u0:
        Non-negative initial cell density
    :param Field v0:
        Non-negative initial chemical
    :param SchemeParams params:
        The scheme parameters
    :param ControlForcing forcing:
        If not None, a control with one row per step
    :returns:
        The trajectory with ``params.n_steps + 1`` steps
    """
    grid = u0.grid
    traj = Trajectory(params=params, grid=grid, steps=[initialize(u0, v0, params)])
    _check_forcing(forcing, params, grid)

    logger.info('Running %d steps of k=%g on %s', params.n_steps, params.k, grid.cells_per_axis)
    try:
        for n in range(1, params.n_steps + 1):
            traj.steps.append(step(traj.final, params, forcing=None if forcing is None else forcing.effective(n)))
            _check_mass(u0, traj.final.u, n)
    except ChemotaxError as err:
        err.trajectory = traj
        raise
    logger.info('Finished %d steps, max Picard iterations %d',
                traj.n_steps, max(s.picard_iters for s in traj.steps))
    return traj


def linearly_implicit_run(u0: Field, v0: Field, params: SchemeParams,
                          forcing: Optional[ControlForcing] = None) -> Trajectory:
    """ Advance in (u, v) with coefficients frozen at the previous step

    .. code-block:: text

        (u - u_prev)/k - lap(u) + div(S(u) grad(v_prev)) = 0
        (v - v_prev)/k - lap(v) + c(u) v - f*chi v = 0

    S is the face average or the donor cell selection of ``params.flux_scheme``.
    The z entries of the steps are sqrt(v + alpha**2).

    :param Field u0:
        Non-negative initial cell density
    :param Field v0:
        Non-negative initial chemical
    :param SchemeParams params:
        The scheme parameters
    :param ControlForcing forcing:
        If not None, a control with one row per step
    :returns:
        The trajectory with ``params.n_steps + 1`` steps
    """
    grid = u0.grid
    traj = Trajectory(params=params, grid=grid, steps=[initialize(u0, v0, params)])
    _check_forcing(forcing, params, grid)

    alpha2 = params.model.alpha ** 2
    bounded_above = forcing is None or not forcing.has_positive_part
    try:
        for n in range(1, params.n_steps + 1):
            prev = traj.final
            velocity = gradient_matrix(grid) @ prev.v.values
            selector = _flux_matrix(grid, velocity, params.flux_scheme)
            matrix = (_identity(grid) / params.k - laplacian_matrix(grid)
                      + divergence_matrix(grid) @ sparse.diags(velocity) @ selector)
            u_new = prev.u.with_values(solve_linear(grid, matrix, prev.u.values / params.k))

            v_new = v_update_from_u(prev.v, u_new, params, forcing=_forcing_at(forcing, n, grid))
            z_new = v_new.with_values(np.sqrt(np.maximum(v_new.values, 0.0) + alpha2))

            new = TimeStep(n=n, t=n * params.k, u=u_new, z=z_new, v=v_new)
            _check_step(prev, new, params, bounded_above=bounded_above, check_u=False)
            _check_mass(u0, u_new, n)
            traj.steps.append(new)
    except ChemotaxError as err:
        err.trajectory = traj
        raise
    return traj


def _node_index(traj: Trajectory, t: float) -> int:
    k = traj.params.k
    t_final = traj.n_steps * k
    if not -TIME_GUARD * k <= t <= t_final * (1.0 + TIME_GUARD):
        raise DomainError(f'Time {t} outside [0, {t_final}]')
    return min(max(int(math.ceil(t / k - TIME_GUARD)), 0), traj.n_steps)


def interpolant_pc(traj: Trajectory, t: float) -> Tuple[Field, Field]:
    """ Piecewise constant (u, z) at time t, step n on (t_{n-1}, t_n] """
    s = traj.steps[_node_index(traj, t)]
    return s.u, s.z


def interpolant_lin(traj: Trajectory, t: float) -> Tuple[Field, Field]:
    """ Piecewise linear (u, z) at time t, exact at every node """
    n = _node_index(traj, t)
    if n == 0:
        return traj.steps[0].u, traj.steps[0].z
    cur, prev = traj.steps[n], traj.steps[n - 1]
    weight = (t - cur.t) / traj.params.k
    u = cur.u.values + weight * (cur.u.values - prev.u.values)
    z = cur.z.values + weight * (cur.z.values - prev.z.values)
    return cur.u.with_values(u), cur.z.with_values(z)


def eyre_identity_check(z_n: Field, z_prev: Field, k: float) -> float:
    """ Max norm of dt(z)*2z - dt(z**2) - (z - z_prev)**2/k, zero up to round-off """
    if not k > 0:
        raise ValueError(f'Expected k > 0, got {k}')
    zn, zp = z_n.values, z_prev.values
    residual = (zn - zp) / k * 2.0 * zn - (zn ** 2 - zp ** 2) / k - (zn - zp) ** 2 / k
    return float(np.max(np.abs(residual)))
