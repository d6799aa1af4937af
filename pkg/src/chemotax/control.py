""" Bilinear optimal control of the chemical by a source f v on a control set

The state is advanced by :py:func:`~chemotax.scheme.linearly_implicit_run`, the
cost is tracked on time sums weighted by k, and the adjoint is the exact
transpose of the linearized state march, so gradients agree with finite
differences of :py:func:`cost_J` up to round-off.

Time-indexed arrays have one row per step n = 1..N for controls, targets and
linearized sources; adjoint arrays have N+1 rows where row j holds the
multiplier of step j+1 and the last row is zero.

Example: Recover a control from targets generated by a known control

.. code-block:: python

    problem = ControlProblem(grid=grid, mask=mask, k=1/16, T_final=1.0, u0=u0, v0=v0,
                             gamma_u=1.0, gamma_v=1.0, gamma_f=0.1, q=2, lower=-2, upper=2)
    f_star = reference_control(problem, amplitude=1.0)
    problem = problem.with_targets(*targets_from_trajectory(state_solve_controlled(u0, v0, f_star, problem)))

    result = projected_gradient(problem, max_iters=500)

Classes:

* :py:class:`ControlProblem`: Weights, bounds, control set and targets
* :py:class:`AdjointPair`: The backward multipliers
* :py:class:`LinearizedCoefficients`: Coefficients of the linearized state system
* :py:class:`ControlIterate`: Result of the optimizer

Functions:

* :py:func:`state_solve_controlled`: Forward state for a control
* :py:func:`cost_J`: The tracking cost
* :py:func:`adjoint_solve`: Backward multipliers for a control
* :py:func:`cost_gradient`: Gradient of the cost in the space-time inner product
* :py:func:`linearized_solve`: Forward solve of the linearized system
* :py:func:`projected_gradient`: Projected gradient descent with Armijo backtracking
* :py:func:`vi_residual`: Violation of the variational inequality
* :py:func:`explicit_control`: Pointwise control formula from the adjoint
* :py:func:`comparison_solve`: Supersolution for the chemical under f+
* :py:func:`gradient_check`: Adjoint gradient against central differences
* :py:func:`duality_check`: Forward/adjoint pairing check
* :py:func:`targets_from_trajectory`: Targets from a state trajectory
* :py:func:`reference_control`: A smooth control supported on the control set

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
from .errors import DomainError, SolverError
from .grid import (
    GridSpec, Field, gradient_matrix, divergence_matrix, laplacian_matrix,
    face_average_matrix, upwind_matrix, solve_linear,
)
from .model_fns import ModelParams, consumption, consumption_derivative
from .scheme import SchemeParams, ControlForcing, Trajectory, linearly_implicit_run, STEP_GUARD

# Constants
COST_VARIANTS = ('strong', 'weak')

logger = logging.getLogger(__name__)

# Classes


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """ A tracking problem for the bilinear control f v on a control set

    :param GridSpec grid:
        The spatial grid
    :param Field mask:
        0/1 indicator of the control set
    :param float k:
        Time step
    :param float T_final:
        Final time
    :param Field u0:
        Initial cell density
    :param Field v0:
        Initial chemical
    :param ModelParams model:
        Consumption power, truncation level and shift
    :param float gamma_u:
        Weight of the cell density tracking term
    :param float gamma_v:
        Weight of the chemical tracking term
    :param float gamma_f:
        Weight of the control cost
    :param float q:
        Control exponent, at least 2
    :param str cost_variant:
        'strong' (u exponent s*q) or 'weak' (u exponent 5s/3)
    :param float lower:
        Lower bound of the control, may be -inf
    :param float upper:
        Upper bound of the control, may be inf
    :param str flux_scheme:
        'central' or 'upwind' chemotaxis flux of the state
    :param ndarray u_target:
        Cell density target, one row per step (default: zero)
    :param ndarray v_target:
        Chemical target, one row per step (default: zero)
    """

    grid: GridSpec
    mask: Field
    k: float
    T_final: float
    u0: Field
    v0: Field
    model: ModelParams = field(default_factory=ModelParams)
    gamma_u: float = 1.0
    gamma_v: float = 0.0
    gamma_f: float = 1.0
    q: float = 3.0
    cost_variant: str = 'strong'
    lower: float = -np.inf
    upper: float = np.inf
    flux_scheme: str = 'central'
    u_target: Optional[np.ndarray] = None
    v_target: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ('mask', 'u0', 'v0'):
            if getattr(self, name).grid != self.grid:
                raise ValueError(f'"{name}" lives on {getattr(self, name).grid}, expected {self.grid}')
        if not np.all(np.isin(self.mask.values, (0.0, 1.0))):
            raise ValueError('Expected a 0/1 control mask')
        for name in ('gamma_u', 'gamma_v', 'gamma_f'):
            if not getattr(self, name) >= 0:
                raise ValueError(f'Expected {name} >= 0, got {getattr(self, name)!r}')
        if not self.q >= 2:
            raise ValueError(f'Expected q >= 2, got q={self.q!r}')
        if self.cost_variant not in COST_VARIANTS:
            raise ValueError(f'Expected cost_variant in {COST_VARIANTS}, got {self.cost_variant!r}')
        if not self.lower <= self.upper:
            raise ValueError(f'Expected lower <= upper, got [{self.lower}, {self.upper}]')

        shape = (self.n_steps, self.grid.n_cells)
        for name in ('u_target', 'v_target'):
            target = getattr(self, name)
            target = np.zeros(shape) if target is None else np.array(target, dtype=np.float64)
            if target.ndim == 1 and target.shape[0] == self.grid.n_cells:
                target = np.tile(target, (self.n_steps, 1))
            if target.shape != shape:
                raise ValueError(f'Expected {name} of shape {shape}, got {target.shape}')
            object.__setattr__(self, name, target)

    @property
    def scheme_params(self) -> SchemeParams:
        """ Parameters of the forward state solve """
        return SchemeParams(k=self.k, model=self.model, v_variant='from_u',
                            flux_scheme=self.flux_scheme, T_final=self.T_final)

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.T_final / self.k - STEP_GUARD)))

    @property
    def cost_exponent(self) -> float:
        """ Exponent of the cell density tracking term """
        if self.cost_variant == 'weak':
            return 5.0 * self.model.s / 3.0
        return self.model.s * self.q

    @property
    def bounded(self) -> bool:
        return bool(np.isfinite(self.lower) and np.isfinite(self.upper))

    @property
    def times(self) -> np.ndarray:
        """ Time of each step n = 1..N """
        return self.k * np.arange(1, self.n_steps + 1)

    def require_well_posed(self):
        """ gamma_u > 0 and either gamma_f > 0 or a bounded box """
        if not self.gamma_u > 0:
            raise DomainError(f'Expected gamma_u > 0 for the optimization, got {self.gamma_u}')
        if not (self.gamma_f > 0 or self.bounded):
            raise DomainError('Expected gamma_f > 0 or finite bounds for the optimization')

    def with_targets(self, u_target: np.ndarray, v_target: np.ndarray) -> 'ControlProblem':
        return dataclasses.replace(self, u_target=u_target, v_target=v_target)

    def zero_control(self) -> np.ndarray:
        return np.zeros((self.n_steps, self.grid.n_cells))

    @property
    def controlled(self) -> np.ndarray:
        """ Boolean cells of the control set """
        return self.mask.values > 0

    def project(self, f: np.ndarray) -> np.ndarray:
        """ Clip to the box on the control set, zero elsewhere """
        return np.where(self.controlled, np.clip(f, self.lower, self.upper), 0.0)

    def check_control(self, f: np.ndarray, admissible: bool = True) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        shape = (self.n_steps, self.grid.n_cells)
        if f.shape != shape:
            raise ValueError(f'Expected a control of shape {shape}, got {f.shape}')
        # Only the control set is boxed
        inside = f[:, self.controlled]
        if admissible and (np.any(inside < self.lower) or np.any(inside > self.upper)):
            raise DomainError(f'Control outside the box [{self.lower}, {self.upper}]')
        return f

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """ Space-time inner product: sum over steps of k times the L2 product """
        return float(self.k * self.grid.cell_volume * np.sum(a * b))


@dataclass(frozen=True, eq=False)
class AdjointPair:
    """ Multipliers of the cell density and chemical equations, N+1 rows each """

    lam: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True, eq=False)
class LinearizedCoefficients:
    """ Coefficients of the linearized state system, one row per step

    .. code-block:: text

        A1 U^n = g_U^n + U^{n-1}/k - (b1 + div(d grad)) V^{n-1}
        A2 V^n = g_V^n + V^{n-1}/k - b2 U^n

    with A1 = I/k - lap + a1 + div(c1 S(c1) .) and A2 = I/k - lap + a2.
    """

    grid: GridSpec
    k: float
    a1: np.ndarray
    b1: np.ndarray
    c1: np.ndarray
    d: np.ndarray
    a2: np.ndarray
    b2: np.ndarray
    flux_scheme: str = 'central'

    @property
    def n_steps(self) -> int:
        return self.a1.shape[0]

    @classmethod
    def zeros(cls, grid: GridSpec, k: float, n_steps: int) -> 'LinearizedCoefficients':
        cells = np.zeros((n_steps, grid.n_cells))
        faces = np.zeros((n_steps, grid.n_faces))
        return cls(grid, k, cells, cells, faces, faces, cells, cells)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, f: np.ndarray,
                        problem: ControlProblem) -> 'LinearizedCoefficients':
        """ Linearize the controlled state around a trajectory

        :param Trajectory traj:
            The state trajectory for control ``f``
        :param ndarray f:
            The control, one row per step
        :param ControlProblem problem:
            The problem
        :returns:
            The coefficients
        """
        grid = traj.grid
        m, s = problem.model.m, problem.model.s
        u, v = traj.stack('u'), traj.stack('v')
        grad = gradient_matrix(grid)

        c1 = (grad @ v[:-1].T).T
        d = np.empty_like(c1)
        for i in range(problem.n_steps):
            d[i] = _selector(grid, c1[i], problem.flux_scheme) @ u[i + 1]
        a2 = np.asarray(consumption(u[1:], m, s)) - f * problem.mask.values
        b2 = np.asarray(consumption_derivative(u[1:], m, s)) * v[1:]
        zeros = np.zeros_like(a2)
        return cls(grid, problem.k, zeros, zeros, c1, d, a2, b2, problem.flux_scheme)

    def matrices(self, n: int) -> Tuple[sparse.csr_matrix, sparse.csr_matrix, sparse.csr_matrix]:
        """ (A1, Bv, A2) of step ``n`` (1-based) """
        grid, i = self.grid, n - 1
        identity = sparse.identity(grid.n_cells, format='csr') / self.k
        lap = laplacian_matrix(grid)
        div = divergence_matrix(grid)
        a1 = (identity - lap + sparse.diags(self.a1[i])
              + div @ sparse.diags(self.c1[i]) @ _selector(grid, self.c1[i], self.flux_scheme))
        bv = sparse.diags(self.b1[i]) + div @ sparse.diags(self.d[i]) @ gradient_matrix(grid)
        a2 = identity - lap + sparse.diags(self.a2[i])
        return sparse.csr_matrix(a1), sparse.csr_matrix(bv), sparse.csr_matrix(a2)


@dataclass(eq=False)
class ControlIterate:
    """ Final iterate of the optimizer

    :param ndarray f:
        The control, one row per step
    :param float J_value:
        The cost at ``f``
    :param float gradient_norm:
        Space-time norm of the cost gradient
    :param float vi_residual:
        Violation of the variational inequality
    :param int iterations:
        Number of accepted iterations
    :param bool converged:
        True if the residual fell below the tolerance
    :param bool stalled:
        True if the line search failed
    :param DataFrame history:
        One row per iterate: iteration, J, gradient_norm, vi_residual, step
    """

    f: np.ndarray
    J_value: float
    gradient_norm: float
    vi_residual: float
    iterations: int
    converged: bool
    stalled: bool
    history: pd.DataFrame
    gradient: Optional[np.ndarray] = None
    trajectory: Optional[Trajectory] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'J_value': self.J_value,
            'gradient_norm': self.gradient_norm,
            'vi_residual': self.vi_residual,
            'iterations': self.iterations,
            'converged': self.converged,
            'stalled': self.stalled,
        }

    def control_frame(self, problem: ControlProblem) -> pd.DataFrame:
        """ Long table of the control: one row per step and cell """
        n_steps, n_cells = self.f.shape
        return pd.DataFrame({
            'n': np.repeat(np.arange(1, n_steps + 1), n_cells),
            't': np.repeat(problem.times, n_cells),
            'cell': np.tile(np.arange(n_cells), n_steps),
            'f': self.f.ravel(),
        })

# Helpers


def _selector(grid: GridSpec, velocity: np.ndarray, flux_scheme: str) -> sparse.csr_matrix:
    if flux_scheme == 'upwind':
        return upwind_matrix(grid, velocity)
    return face_average_matrix(grid)


def _signed_power(x: np.ndarray, p: float) -> np.ndarray:
    """ sgn(x)|x|^p with sgn(0)|0|^p = 0 """
    return np.sign(x) * np.abs(x) ** p


def _check_trajectory(traj: Trajectory, problem: ControlProblem):
    if traj.grid != problem.grid:
        raise ValueError(f'Trajectory lives on {traj.grid}, expected {problem.grid}')
    if traj.n_steps != problem.n_steps:
        raise ValueError(f'Trajectory has {traj.n_steps} steps, expected {problem.n_steps}')


def _cost_sources(traj: Trajectory, problem: ControlProblem) -> Tuple[np.ndarray, np.ndarray]:
    """ Derivatives of the tracking terms in u and v, one row per step """
    p = problem.cost_exponent
    g_lambda = problem.gamma_u * _signed_power(traj.stack('u')[1:] - problem.u_target, p - 1.0)
    g_eta = problem.gamma_v * (traj.stack('v')[1:] - problem.v_target)
    return g_lambda, g_eta

# Functions


def state_solve_controlled(u0: Field, v0: Field, f: np.ndarray, problem: ControlProblem) -> Trajectory:
    """ Forward state under control ``f``

    :param Field u0:
        Initial cell density
    :param Field v0:
        Initial chemical
    :param ndarray f:
        Admissible control, one row per step
    :param ControlProblem problem:
        The problem
    :returns:
        The state trajectory
    """
    f = problem.check_control(f)
    forcing = ControlForcing(f, problem.mask.values)
    return linearly_implicit_run(u0, v0, problem.scheme_params, forcing=forcing)


def cost_terms(traj: Trajectory, f: np.ndarray, problem: ControlProblem) -> Dict[str, float]:
    """ The three terms of the cost """
    _check_trajectory(traj, problem)
    f = problem.check_control(f, admissible=False)
    p, q = problem.cost_exponent, problem.q
    u_err = traj.stack('u')[1:] - problem.u_target
    v_err = traj.stack('v')[1:] - problem.v_target
    weight = problem.k * problem.grid.cell_volume
    return {
        'u': problem.gamma_u / p * weight * float(np.sum(np.abs(u_err) ** p)),
        'v': 0.5 * problem.gamma_v * weight * float(np.sum(v_err ** 2)),
        'f': problem.gamma_f / q * weight * float(np.sum(problem.mask.values * np.abs(f) ** q)),
    }


def cost_J(traj: Trajectory, f: np.ndarray, problem: ControlProblem) -> float:
    """ Tracking cost of a state trajectory and its control

    :param Trajectory traj:
        The state trajectory
    :param ndarray f:
        The control, one row per step
    :param ControlProblem problem:
        The problem
    :returns:
        gamma_u/p sum|u - u_d|^p + gamma_v/2 sum|v - v_d|^2 + gamma_f/q sum|f|^q, all k-weighted
    """
    return sum(cost_terms(traj, f, problem).values())


def linearized_solve(coeffs: LinearizedCoefficients,
                     g_U: np.ndarray,
                     g_V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """ Forward solve of the linearized system from zero initial data

    :param LinearizedCoefficients coeffs:
        The coefficients
    :param ndarray g_U:
        Source of the first equation, one row per step
    :param ndarray g_V:
        Source of the second equation, one row per step
    :returns:
        (U, V) with N+1 rows each, row 0 zero
    """
    grid, k = coeffs.grid, coeffs.k
    n_steps = coeffs.n_steps
    big_u = np.zeros((n_steps + 1, grid.n_cells))
    big_v = np.zeros((n_steps + 1, grid.n_cells))
    for n in range(1, n_steps + 1):
        a1, bv, a2 = coeffs.matrices(n)
        rhs_u = g_U[n - 1] + big_u[n - 1] / k - bv @ big_v[n - 1]
        big_u[n] = solve_linear(grid, a1, rhs_u)
        rhs_v = g_V[n - 1] + big_v[n - 1] / k - coeffs.b2[n - 1] * big_u[n]
        big_v[n] = solve_linear(grid, a2, rhs_v, symmetric=True)
    return big_u, big_v


def adjoint_march(coeffs: LinearizedCoefficients,
                  g_lambda: np.ndarray,
                  g_eta: np.ndarray) -> AdjointPair:
    """ Transpose of :py:func:`linearized_solve`, marched backward from zero

    :param LinearizedCoefficients coeffs:
        The coefficients
    :param ndarray g_lambda:
        Source paired with U, one row per step
    :param ndarray g_eta:
        Source paired with V, one row per step
    :returns:
        The multipliers
    """
    grid, k = coeffs.grid, coeffs.k
    n_steps = coeffs.n_steps
    lam = np.zeros((n_steps + 1, grid.n_cells))
    eta = np.zeros((n_steps + 1, grid.n_cells))
    bv_next = None
    for n in range(n_steps, 0, -1):
        a1, bv, a2 = coeffs.matrices(n)
        rhs_eta = g_eta[n - 1] + eta[n] / k
        if bv_next is not None:
            rhs_eta = rhs_eta - bv_next.T @ lam[n]
        eta[n - 1] = solve_linear(grid, a2, rhs_eta, symmetric=True)
        rhs_lam = g_lambda[n - 1] + lam[n] / k - coeffs.b2[n - 1] * eta[n - 1]
        lam[n - 1] = solve_linear(grid, sparse.csr_matrix(a1.T), rhs_lam)
        bv_next = bv
    return AdjointPair(lam=lam, eta=eta)


def adjoint_solve(traj: Trajectory, f: np.ndarray, problem: ControlProblem) -> AdjointPair:
    """ Backward multipliers of the cost for control ``f``

    :param Trajectory traj:
        The state trajectory for ``f``
    :param ndarray f:
        The control, one row per step
    :param ControlProblem problem:
        The problem
    :returns:
        The multipliers, last row zero
    """
    _check_trajectory(traj, problem)
    f = problem.check_control(f, admissible=False)
    coeffs = LinearizedCoefficients.from_trajectory(traj, f, problem)
    g_lambda, g_eta = _cost_sources(traj, problem)
    return adjoint_march(coeffs, g_lambda, g_eta)


def cost_gradient(f: np.ndarray, traj: Trajectory, adjoint: AdjointPair,
                  problem: ControlProblem) -> np.ndarray:
    """ gamma_f sgn(f)|f|^(q-1) + v eta on the control set, zero elsewhere """
    v = traj.stack('v')[1:]
    grad = problem.gamma_f * _signed_power(f, problem.q - 1.0) + v * adjoint.eta[:-1]
    return grad * problem.mask.values


def vi_residual(f: np.ndarray, gradient: np.ndarray, problem: ControlProblem) -> float:
    """ Largest decrease of the linearized cost over the box, zero at a stationary point

    Infinite bounds are replaced by a unit distance from ``f``.
    """
    inside = problem.controlled
    f, gradient = f[:, inside], gradient[:, inside]
    lower = np.full_like(f, problem.lower) if np.isfinite(problem.lower) else f - 1.0
    upper = np.full_like(f, problem.upper) if np.isfinite(problem.upper) else f + 1.0
    worst = np.maximum(0.0, np.maximum(-gradient * (lower - f), -gradient * (upper - f)))
    return float(problem.k * problem.grid.cell_volume * np.sum(worst))


def _evaluate(problem: ControlProblem, f: np.ndarray) -> Tuple[float, Trajectory]:
    traj = state_solve_controlled(problem.u0, problem.v0, f, problem)
    return cost_J(traj, f, problem), traj


def projected_gradient(problem: ControlProblem,
                       f_init: Optional[np.ndarray] = None,
                       tol: float = 1e-6,
                       max_iters: int = 200,
                       armijo: float = 1e-4,
                       shrink: float = 0.5,
                       min_step: float = 1e-14) -> ControlIterate:
    """ Minimize the cost over the box by projected gradient descent

    Trial steps start at 1/gamma_f, then follow the Barzilai-Borwein rule, and
    are halved until the Armijo condition holds. Controls the state solve rejects
    count as failed trials.

    :param ControlProblem problem:
        A well-posed problem
    :param ndarray f_init:
        Admissible starting control (default: zero projected on the box)
    :param float tol:
        Stop when the variational inequality residual falls below this
    :param int max_iters:
        Maximum number of accepted iterations
    :param float armijo:
        Sufficient decrease factor
    :param float shrink:
        Backtracking factor
    :param float min_step:
        Give up the line search below this step
    :returns:
        The final iterate and its history
    """
    problem.require_well_posed()
    if f_init is None:
        f_init = problem.project(problem.zero_control())
    f = problem.check_control(f_init) * problem.mask.values

    J_value, traj = _evaluate(problem, f)
    gradient = cost_gradient(f, traj, adjoint_solve(traj, f, problem), problem)
    step = 1.0 / problem.gamma_f if problem.gamma_f > 0 else 1.0

    history = []
    converged = stalled = False
    iteration = 0
    f_old = grad_old = None
    while True:
        residual = vi_residual(f, gradient, problem)
        gradient_norm = math.sqrt(problem.inner(gradient, gradient))
        history.append({'iteration': iteration, 'J': J_value, 'gradient_norm': gradient_norm,
                        'vi_residual': residual, 'step': step if iteration > 0 else 0.0})
        logger.info('Iteration %d: J=%0.8g vi_residual=%0.3e', iteration, J_value, residual)
        if residual <= tol:
            converged = True
            break
        if iteration >= max_iters:
            break

        if f_old is not None:
            ds, dg = f - f_old, gradient - grad_old
            curvature = problem.inner(ds, dg)
            if curvature > 0:
                step = problem.inner(ds, ds) / curvature

        trial = step
        accepted = None
        while trial >= min_step:
            f_trial = problem.project(f - trial * gradient)
            try:
                J_trial, traj_trial = _evaluate(problem, f_trial)
            except SolverError as err:
                logger.debug('Rejected step %0.3e: %s', trial, err)
                trial *= shrink
                continue
            if J_trial <= J_value + armijo * problem.inner(gradient, f_trial - f):
                accepted = (f_trial, J_trial, traj_trial)
                break
            trial *= shrink
        if accepted is None:
            logger.warning('Line search stalled at iteration %d with vi_residual %0.3e', iteration, residual)
            stalled = True
            break

        f_old, grad_old = f, gradient
        f, J_value, traj = accepted
        gradient = cost_gradient(f, traj, adjoint_solve(traj, f, problem), problem)
        step = trial
        iteration += 1

    return ControlIterate(
        f=f, J_value=J_value, gradient_norm=gradient_norm, vi_residual=residual,
        iterations=iteration, converged=converged, stalled=stalled,
        history=pd.DataFrame(history), gradient=gradient, trajectory=traj,
    )


def explicit_control(traj: Trajectory, adjoint: AdjointPair, problem: ControlProblem) -> np.ndarray:
    """ -sgn(eta) (v|eta|/gamma_f)^(1/(q-1)), projected on the box and the control set """
    if not problem.gamma_f > 0:
        raise DomainError('The explicit control needs gamma_f > 0')
    v = traj.stack('v')[1:]
    eta = adjoint.eta[:-1]
    f = -np.sign(eta) * (v * np.abs(eta) / problem.gamma_f) ** (1.0 / (problem.q - 1.0))
    return problem.project(f)


def comparison_solve(v0: Field, f: np.ndarray, problem: ControlProblem) -> np.ndarray:
    """ Solve (w - w_prev)/k - lap(w) = f+ chi w from v0, an upper bound for the chemical

    :param Field v0:
        Initial chemical
    :param ndarray f:
        The control, one row per step
    :param ControlProblem problem:
        The problem
    :returns:
        The supersolution, N+1 rows
    """
    f = problem.check_control(f, admissible=False)
    ControlForcing(f, problem.mask.values).check_stability(problem.k)
    grid, k = problem.grid, problem.k
    identity = sparse.identity(grid.n_cells, format='csr') / k
    w = np.zeros((problem.n_steps + 1, grid.n_cells))
    w[0] = v0.values
    for n in range(1, problem.n_steps + 1):
        growth = np.maximum(f[n - 1], 0.0) * problem.mask.values
        matrix = identity - laplacian_matrix(grid) - sparse.diags(growth)
        w[n] = solve_linear(grid, matrix, w[n - 1] / k, symmetric=True)
    return w


def gradient_check(problem: ControlProblem, f: np.ndarray,
                   n_directions: int = 20, eps: float = 1e-5,
                   seed: int = 0) -> List[float]:
    """ Relative error of the adjoint directional derivative against central differences

    :param ControlProblem problem:
        The problem
    :param ndarray f:
        The control to linearize around
    :param int n_directions:
        Number of random directions supported on the control set
    :param float eps:
        Finite difference step
    :param int seed:
        Seed for the directions
    :returns:
        One relative error per direction
    """
    rng = np.random.default_rng(seed)
    f = problem.check_control(f, admissible=False)
    traj = state_solve_controlled(problem.u0, problem.v0, f, problem)
    gradient = cost_gradient(f, traj, adjoint_solve(traj, f, problem), problem)

    errors = []
    for _ in range(n_directions):
        direction = rng.standard_normal(f.shape) * problem.mask.values
        exact = problem.inner(gradient, direction)
        J_plus, _ = _evaluate(problem, f + eps * direction)
        J_minus, _ = _evaluate(problem, f - eps * direction)
        approx = (J_plus - J_minus) / (2.0 * eps)
        errors.append(abs(exact - approx) / max(abs(exact), 1e-12))
    return errors


def duality_check(problem: ControlProblem, f: np.ndarray, seed: int = 0) -> float:
    """ Relative mismatch of <g_lambda, U> + <g_eta, V> and <lambda, g_U> + <eta, g_V>

    :param ControlProblem problem:
        The problem
    :param ndarray f:
        The control to linearize around
    :param int seed:
        Seed for the random sources
    :returns:
        The relative mismatch
    """
    rng = np.random.default_rng(seed)
    f = problem.check_control(f, admissible=False)
    traj = state_solve_controlled(problem.u0, problem.v0, f, problem)
    coeffs = LinearizedCoefficients.from_trajectory(traj, f, problem)

    shape = (problem.n_steps, problem.grid.n_cells)
    g_U, g_V, g_lambda, g_eta = (rng.standard_normal(shape) for _ in range(4))
    big_u, big_v = linearized_solve(coeffs, g_U, g_V)
    adjoint = adjoint_march(coeffs, g_lambda, g_eta)

    forward = problem.inner(g_lambda, big_u[1:]) + problem.inner(g_eta, big_v[1:])
    backward = problem.inner(adjoint.lam[:-1], g_U) + problem.inner(adjoint.eta[:-1], g_V)
    return abs(forward - backward) / max(abs(forward), abs(backward), 1e-300)


def targets_from_trajectory(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    """ (u_target, v_target) with one row per step n = 1..N """
    return traj.stack('u')[1:], traj.stack('v')[1:]


def reference_control(problem: ControlProblem, amplitude: float = 1.0) -> np.ndarray:
    """ amplitude * sin(pi t / T) on the control set """
    profile = amplitude * np.sin(np.pi * problem.times / problem.T_final)
    return problem.project(profile[:, np.newaxis] * problem.mask.values[np.newaxis, :])
