""" Energy budgets, interpolant gap rates and convergence studies

Everything here post-processes finished trajectories. Studies that need many
runs take a list of :py:class:`Scenario` objects and can spread them over
worker processes.

Classes:

* :py:class:`Scenario`: Initial data plus scheme parameters for one run
* :py:class:`EnergyReport`: Per-step energy terms and budget slacks
* :py:class:`RateFit`: A log-log fit of norms against time steps
* :py:class:`ConvergenceStudy`: Cauchy differences under k-refinement plus the m-saturation gap

Functions:

* :py:func:`run_scenarios`: Run scenarios, optionally in parallel
* :py:func:`energy_report`: Energy terms and budgets of a trajectory
* :py:func:`fit_rate`: Fit a log-log slope
* :py:func:`interpolant_gaps`: Squared gaps between the piecewise linear and constant interpolants
* :py:func:`interpolant_gap_rate`: Gap rates under dyadic k-refinement
* :py:func:`self_convergence`: Cauchy differences under k-refinement and m-saturation
* :py:func:`variant_agreement`: Difference between the two ways of rebuilding v
* :py:func:`operator_checks`: Grid operator and identity checks
* :py:func:`budget_checks`: Bound and budget checks on one trajectory

"""

# Imports
import math
import logging
import dataclasses
from dataclasses import dataclass
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

# 3rd party
import numpy as np

import pandas as pd

from scipy import stats

# Our own imports
from .grid import (
    GridSpec, Field, FaceData, integrate, norm, face_norm_squared, grad_faces,
    div_faces, gradient_matrix, laplacian_matrix, face_to_cell_matrix,
    axis_laplacian_matrix, central_difference_matrix, poisson_neumann_solve,
)
from .model_fns import energy_E, gm_primitive, truncate, consumption, tm_smooth
from .scheme import (
    SchemeParams, Trajectory, run, linearly_implicit_run, v_update_from_u,
    eyre_identity_check, MASS_RTOL,
)

# Constants
BUDGET_TOL = 1e-8

logger = logging.getLogger(__name__)

# Classes


@dataclass(frozen=True, eq=False)
class Scenario:
    """ Initial data and parameters for one run

    :param Field u0:
        Initial cell density
    :param Field v0:
        Initial chemical
    :param SchemeParams params:
        The scheme parameters
    :param str solver:
        'picard' for :py:func:`~chemotax.scheme.run`, 'linear' for
        :py:func:`~chemotax.scheme.linearly_implicit_run`
    """

    u0: Field
    v0: Field
    params: SchemeParams
    solver: str = 'picard'

    def with_k(self, k: float) -> 'Scenario':
        return dataclasses.replace(self, params=self.params.replace(k=k))

    def with_m(self, m: float) -> 'Scenario':
        model = dataclasses.replace(self.params.model, m=m)
        return dataclasses.replace(self, params=self.params.replace(model=model))

    def with_variant(self, v_variant: str) -> 'Scenario':
        return dataclasses.replace(self, params=self.params.replace(v_variant=v_variant))

    def run(self) -> Trajectory:
        if self.solver == 'linear':
            return linearly_implicit_run(self.u0, self.v0, self.params)
        return run(self.u0, self.v0, self.params)


@dataclass(eq=False)
class EnergyReport:
    """ Per-step energy terms, budgets and their pass flags

    :param DataFrame frame:
        One row per step with the named energy terms and budgets
    :param dict[str, bool] passes:
        Pass flags for the mass, z telescoping, gradient budget and z max checks
    :param float gradient_bound:
        The explicit bound on the gradient budget
    """

    frame: pd.DataFrame
    passes: Dict[str, bool]
    gradient_bound: float

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def to_dict(self) -> Dict[str, Any]:
        """ JSON friendly summary """
        df = self.frame
        return {
            'n_steps': int(df['n'].max()),
            'final_energy': float(df['energy'].iloc[-1]),
            'final_truncated_energy': float(df['truncated_energy'].iloc[-1]),
            'max_mass_drift': float(df['mass_drift'].max()),
            'min_z_slack': float(df['z_slack'].min()),
            'min_gradient_slack': float(df['gradient_slack'].min()),
            'gradient_bound': self.gradient_bound,
            'max_inferred_ratio': float(df['inferred_ratio'].max()),
            'passes': dict(self.passes),
            'passed': self.passed,
        }


@dataclass(eq=False)
class RateFit:
    """ Log-log fit of norms against time steps

    :param ndarray k_values:
        Strictly decreasing time steps
    :param ndarray norms:
        One norm per time step
    :param float slope:
        Fitted slope of log(norm) against log(k), NaN if any norm is not positive
    """

    k_values: np.ndarray
    norms: np.ndarray
    slope: float
    intercept: float
    correlation: float
    label: str = ''

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'k': self.k_values, 'norm': self.norms})

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'k_values': [float(k) for k in self.k_values],
            'norms': [float(n) for n in self.norms],
            'slope': float(self.slope),
            'intercept': float(self.intercept),
            'correlation': float(self.correlation),
        }


@dataclass(eq=False)
class ConvergenceStudy:
    """ Cauchy differences under k-refinement and the m-saturation gap """

    u: RateFit
    v: RateFit
    m_frame: pd.DataFrame
    saturated_gap: float

    def cauchy_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'k': self.u.k_values,
            'u_cauchy': self.u.norms,
            'v_cauchy': self.v.norms,
        })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'u': self.u.to_dict(),
            'v': self.v.to_dict(),
            'saturated_gap': self.saturated_gap,
            'm_values': [float(m) for m in self.m_frame['m']],
        }

# Helpers


def _run_scenario(scenario: Scenario) -> Trajectory:
    return scenario.run()


def _volume_sum(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sum(values) * grid.cell_volume)


def _hessian_norm_squared(z: Field) -> float:
    """ Sum of squared second differences, mixed terms from central differences """
    grid = z.grid
    total = 0.0
    for axis in range(grid.dim):
        total += float(np.sum((axis_laplacian_matrix(grid, axis) @ z.values) ** 2))
    if grid.dim == 2:
        mixed = central_difference_matrix(grid, 0) @ (central_difference_matrix(grid, 1) @ z.values)
        total += 2.0 * float(np.sum(mixed ** 2))
    return total * grid.cell_volume


def _truncated_energy(u: Field, z: Field, params: SchemeParams) -> float:
    density = gm_primitive(np.maximum(u.values, 0.0), params.model)
    return 0.25 * params.model.s * _volume_sum(density, u.grid) + 0.5 * face_norm_squared(grad_faces(z))


def _check_k_list(k_list: Sequence[float], min_count: int = 3, dyadic: bool = True) -> np.ndarray:
    k_values = np.asarray(k_list, dtype=np.float64)
    if k_values.ndim != 1 or k_values.shape[0] < min_count:
        raise ValueError(f'Expected at least {min_count} time steps, got {list(k_list)}')
    if np.any(np.diff(k_values) >= 0):
        raise ValueError(f'Expected strictly decreasing time steps, got {list(k_list)}')
    if dyadic and not np.allclose(k_values[:-1] / k_values[1:], 2.0, rtol=1e-12, atol=0.0):
        raise ValueError(f'Expected dyadic time steps, got {list(k_list)}')
    return k_values


def _time_l2(diff: np.ndarray, grid: GridSpec, k: float) -> float:
    """ sqrt of the k-weighted sum of squared L2 norms of each row """
    return math.sqrt(k * grid.cell_volume * float(np.sum(diff ** 2)))

# Functions


def run_scenarios(scenarios: Sequence[Scenario], jobs: int = 1) -> List[Trajectory]:
    """ Run every scenario, in input order

    :param list[Scenario] scenarios:
        The runs to perform
    :param int jobs:
        Number of worker processes, 1 to run in this process
    :returns:
        One trajectory per scenario
    """
    if jobs is None or jobs <= 1 or len(scenarios) <= 1:
        return [_run_scenario(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_scenario, scenarios))


def energy_report(traj: Trajectory) -> EnergyReport:
    """ Energy terms, running budgets and inferred constant ratios per step

    The budgets are the mass drift, the z telescoping slack
    ``|z0|^2 - |z^n|^2 - sum |z^j - z^{j-1}|^2`` and the gradient slack
    ``|v0 + alpha^2|^2 / (4 alpha^2) - k sum |grad z^j|^2``. Only the budgets
    are pass/fail; the energy inequality is reported as a ratio.

    :param Trajectory traj:
        A trajectory with at least step 0
    :returns:
        The report
    """
    if len(traj) < 1:
        raise ValueError('Expected a trajectory with at least one step')
    params = traj.params
    grid = traj.grid
    k, s, m, alpha = params.k, params.model.s, params.model.m, params.model.alpha

    first = traj.steps[0]
    mass0 = integrate(first.u)
    z0_norm2 = norm(first.z) ** 2
    gradient_bound = norm(first.v.with_values(first.v.values + alpha ** 2)) ** 2 / (4.0 * alpha ** 2)
    to_cell = face_to_cell_matrix(grid)
    grad = gradient_matrix(grid)

    rows = []
    telescoping_sum = 0.0
    gradient_budget = 0.0
    prev = None
    prev_truncated = None
    for cur in traj.steps:
        z = cur.z.values
        face_grad = grad @ z
        driver = face_norm_squared(FaceData(grid, face_grad))
        truncated = _truncated_energy(cur.u, cur.z, params)
        mass = integrate(cur.u)
        row = {
            'n': cur.n,
            't': cur.t,
            'energy': energy_E(cur.u.with_values(np.maximum(cur.u.values, 0.0)), cur.z, s),
            'truncated_energy': truncated,
            'delta_t_energy': 0.0,
            'grad_jump': 0.0,
            'chemo_consumption': 0.0,
            'hessian': 0.0,
            'grad4': 0.0,
            'truncation_dissipation': 0.0,
            'rhs_driver': driver,
            'inferred_ratio': 0.0,
            'mass': mass,
            'mass_drift': 0.0 if mass == mass0 else abs(mass - mass0) / max(abs(mass0), np.finfo(np.float64).tiny),
        }
        if prev is not None:
            grad_density = to_cell @ face_grad ** 2
            trunc = np.maximum(np.asarray(truncate(cur.u.values, m, params.truncation)), 0.0)
            if s < 2:
                lower_order = np.sqrt(trunc + 1.0)
            else:
                lower_order = trunc ** (s / 2.0)

            row['delta_t_energy'] = (truncated - prev_truncated) / k
            row['grad_jump'] = face_norm_squared(FaceData(grid, face_grad - grad @ prev.z.values)) / (2.0 * k)
            row['chemo_consumption'] = _volume_sum(
                np.asarray(consumption(cur.u.values, m, s, params.truncation)) * grad_density, grid)
            row['hessian'] = _hessian_norm_squared(cur.z)
            row['grad4'] = _volume_sum(grad_density ** 2 / z ** 2, grid)
            row['truncation_dissipation'] = face_norm_squared(FaceData(grid, grad @ lower_order))

            aggregate = row['delta_t_energy'] + row['grad_jump'] + 0.25 * row['chemo_consumption']
            if s >= 2:
                aggregate += row['truncation_dissipation']
            row['inferred_ratio'] = aggregate / driver if driver > 0 else 0.0

            telescoping_sum += norm(cur.z.with_values(z - prev.z.values)) ** 2
            gradient_budget += k * driver

        z_telescoping = norm(cur.z) ** 2 + telescoping_sum
        row.update({
            'z_telescoping': z_telescoping,
            'z_slack': z0_norm2 - z_telescoping,
            'gradient_budget': gradient_budget,
            'gradient_bound': gradient_bound,
            'gradient_slack': gradient_bound - gradient_budget,
            'z_max': float(np.max(z)),
        })
        rows.append(row)
        prev, prev_truncated = cur, truncated

    df = pd.DataFrame(rows)
    passes = {
        'mass': bool(df['mass_drift'].max() <= MASS_RTOL),
        'z_telescoping': bool(df['z_slack'].min() >= -BUDGET_TOL),
        'gradient_budget': bool(df['gradient_slack'].min() >= -BUDGET_TOL),
        'z_max_nonincreasing': bool(np.all(np.diff(df['z_max'].to_numpy()) <= BUDGET_TOL)),
    }
    return EnergyReport(frame=df, passes=passes, gradient_bound=gradient_bound)


def fit_rate(k_values: Sequence[float], norms: Sequence[float], label: str = '') -> RateFit:
    """ Fit log(norm) = slope * log(k) + intercept

    :param list[float] k_values:
        At least 3 strictly decreasing time steps
    :param list[float] norms:
        One norm per time step
    :param str label:
        Name for the fit
    :returns:
        The fit, with NaN slope if any norm is not positive
    """
    k_values = _check_k_list(k_values, dyadic=False)
    norms = np.asarray(norms, dtype=np.float64)
    if norms.shape != k_values.shape:
        raise ValueError(f'Expected {k_values.shape[0]} norms, got {norms.shape}')
    if np.any(~np.isfinite(norms)) or np.any(norms <= 0):
        return RateFit(k_values, norms, np.nan, np.nan, np.nan, label)
    res = stats.linregress(np.log(k_values), np.log(norms))
    return RateFit(k_values, norms, float(res.slope), float(res.intercept), float(res.rvalue), label)


def interpolant_gaps(traj: Trajectory) -> Dict[str, float]:
    """ Squared time-slab gaps between the piecewise linear and constant interpolants

    Each step contributes ``k/3 |w^n - w^{n-1}|^2``, the exact time integral over
    its interval. u is measured in L^s for s < 2 and L^2 otherwise, z in H^1.

    :param Trajectory traj:
        The trajectory
    :returns:
        A dictionary with the 'u' and 'z' squared gaps
    """
    params = traj.params
    k = params.k
    p = params.model.s if params.model.s < 2 else 2.0
    u_gap = 0.0
    z_gap = 0.0
    for prev, cur in zip(traj.steps[:-1], traj.steps[1:]):
        du = cur.u.with_values(cur.u.values - prev.u.values)
        dz = cur.z.with_values(cur.z.values - prev.z.values)
        u_gap += k / 3.0 * norm(du, p) ** 2
        z_gap += k / 3.0 * (norm(dz) ** 2 + face_norm_squared(grad_faces(dz)))
    return {'u': u_gap, 'z': z_gap}


def interpolant_gap_rate(scenario: Scenario, k_list: Sequence[float], jobs: int = 1) -> Dict[str, RateFit]:
    """ Fit the squared interpolant gaps against dyadic time steps

    :param Scenario scenario:
        The run to refine
    :param list[float] k_list:
        At least 3 dyadic, decreasing time steps
    :param int jobs:
        Number of worker processes
    :returns:
        A dictionary with the 'u' and 'z' fits
    """
    k_values = _check_k_list(k_list)
    logger.info('Interpolant gaps for k=%s', list(k_values))
    trajectories = run_scenarios([scenario.with_k(float(k)) for k in k_values], jobs=jobs)
    gaps = [interpolant_gaps(traj) for traj in trajectories]
    return {
        name: fit_rate(k_values, [g[name] for g in gaps], label=f'{name}_gap')
        for name in ('u', 'z')
    }


def self_convergence(scenario: Scenario,
                     k_list: Sequence[float],
                     m_list: Optional[Sequence[float]] = None,
                     jobs: int = 1) -> ConvergenceStudy:
    """ Cauchy differences between successive k-halvings and the m-saturation gap

    The difference between steps k and k/2 is sampled at the nodes of the coarse
    run: ``sqrt(sum_n k |w_k^n - w_{k/2}^{2n}|^2)``.

    :param Scenario scenario:
        The run to refine
    :param list[float] k_list:
        At least 4 dyadic, decreasing time steps
    :param list[float] m_list:
        Increasing truncation levels, run at the scenario's own k
    :param int jobs:
        Number of worker processes
    :returns:
        The study
    """
    k_values = _check_k_list(k_list, min_count=4)
    if m_list is None:
        m_list = [scenario.params.model.m, 2.0 * scenario.params.model.m]
    m_values = np.asarray(m_list, dtype=np.float64)
    if m_values.shape[0] < 2 or np.any(np.diff(m_values) <= 0):
        raise ValueError(f'Expected at least 2 increasing truncation levels, got {list(m_list)}')

    scenarios = [scenario.with_k(float(k)) for k in k_values]
    scenarios.extend(scenario.with_m(float(m)) for m in m_values)
    logger.info('Self convergence over k=%s and m=%s', list(k_values), list(m_values))
    trajectories = run_scenarios(scenarios, jobs=jobs)
    k_runs, m_runs = trajectories[:len(k_values)], trajectories[len(k_values):]

    grid = scenario.u0.grid
    u_diffs, v_diffs = [], []
    for coarse, fine, k in zip(k_runs[:-1], k_runs[1:], k_values[:-1]):
        u_diffs.append(_time_l2(coarse.stack('u')[1:] - fine.stack('u')[2::2], grid, k))
        v_diffs.append(_time_l2(coarse.stack('v')[1:] - fine.stack('v')[2::2], grid, k))

    rows = []
    for i, (m, traj) in enumerate(zip(m_values, m_runs)):
        max_u = float(np.max(traj.stack('u')))
        row = {'m': m, 'max_u': max_u, 'saturated': bool(m >= max_u), 'gap_to_next': np.nan}
        if i + 1 < len(m_runs):
            nxt = m_runs[i + 1]
            row['gap_to_next'] = max(float(np.max(np.abs(traj.stack(name) - nxt.stack(name))))
                                     for name in ('u', 'v'))
        rows.append(row)
    m_frame = pd.DataFrame(rows)

    saturated_pairs = m_frame['saturated'].to_numpy()
    both = saturated_pairs[:-1] & saturated_pairs[1:]
    gaps = m_frame['gap_to_next'].to_numpy()[:-1][both]
    saturated_gap = float(np.max(gaps)) if gaps.size else np.nan

    return ConvergenceStudy(
        u=fit_rate(k_values[:-1], u_diffs, label='u_cauchy'),
        v=fit_rate(k_values[:-1], v_diffs, label='v_cauchy'),
        m_frame=m_frame,
        saturated_gap=saturated_gap,
    )


def variant_agreement(scenario: Scenario, k_list: Sequence[float], jobs: int = 1) -> RateFit:
    """ L2 difference between v = z^2 - alpha^2 and v rebuilt by the linear v equation

    Both are driven by the same u sequence of a 'from_z' run.

    :param Scenario scenario:
        The run to refine
    :param list[float] k_list:
        At least 3 dyadic, decreasing time steps
    :param int jobs:
        Number of worker processes
    :returns:
        The fit of the differences
    """
    k_values = _check_k_list(k_list)
    trajectories = run_scenarios([scenario.with_variant('from_z').with_k(float(k)) for k in k_values], jobs=jobs)
    diffs = []
    for traj in trajectories:
        v_prev = traj.steps[0].v
        rebuilt = [v_prev.values]
        for cur in traj.steps[1:]:
            v_prev = v_update_from_u(v_prev, cur.u, traj.params)
            rebuilt.append(v_prev.values)
        diffs.append(_time_l2(traj.stack('v')[1:] - np.vstack(rebuilt)[1:], traj.grid, traj.params.k))
    return fit_rate(k_values, diffs, label='variant_agreement')


def _check_row(name: str, value: float, threshold: float, passed: bool) -> Dict[str, Any]:
    return {'check': name, 'value': float(value), 'threshold': float(threshold), 'passed': bool(passed)}


def operator_checks(seed: int = 0) -> List[Dict[str, Any]]:
    """ Grid operator, Poisson solver and pointwise identity checks

    :param int seed:
        Seed for the random test data
    :returns:
        One row per check with its value, threshold and pass flag
    """
    rng = np.random.default_rng(seed)
    rows = []

    for grid in (GridSpec((64, )), GridSpec((16, 12), (1.0, 0.75))):
        name = f'{grid.dim}d'
        faces = FaceData(grid, rng.standard_normal(grid.n_faces))
        total = abs(integrate(div_faces(faces)))
        rows.append(_check_row(f'divergence_theorem_{name}', total, 1e-12, total <= 1e-12))

        lap = laplacian_matrix(grid)
        asym = float(abs(lap - lap.T).max())
        rows.append(_check_row(f'laplacian_symmetry_{name}', asym, 1e-12, asym <= 1e-12))

    cells = [32, 64, 128]
    lap_errors, poisson_errors, residuals = [], [], []
    for n in cells:
        grid = GridSpec((n, ))
        exact = Field.from_function(grid, lambda x: np.cos(np.pi * x))
        lap_exact = -np.pi ** 2 * exact.values
        lap_errors.append(float(np.max(np.abs(laplacian_matrix(grid) @ exact.values - lap_exact))))

        rhs = exact.with_values((1.0 + np.pi ** 2) * exact.values)
        solution = poisson_neumann_solve(rhs)
        poisson_errors.append(norm(solution.with_values(solution.values - exact.values), np.inf))

        random_rhs = rng.standard_normal(n)
        random_solution = poisson_neumann_solve(rhs.with_values(random_rhs))
        residual = random_solution.values - laplacian_matrix(grid) @ random_solution.values - random_rhs
        residuals.append(float(np.linalg.norm(residual)))

    h_values = [1.0 / n for n in cells]
    lap_order = fit_rate(h_values, lap_errors).slope
    poisson_order = fit_rate(h_values, poisson_errors).slope
    rows.append(_check_row('laplacian_order', lap_order, 1.8, 1.8 <= lap_order <= 2.2))
    rows.append(_check_row('poisson_order', poisson_order, 1.8, 1.8 <= poisson_order <= 2.2))
    rows.append(_check_row('poisson_residual', max(residuals), 1e-10, max(residuals) <= 1e-10))

    grid = GridSpec((64, ))
    eyre = 0.0
    for k in (1.0, 10.0):
        z_n = Field(grid, rng.random(grid.n_cells))
        z_prev = Field(grid, rng.random(grid.n_cells))
        eyre = max(eyre, eyre_identity_check(z_n, z_prev, k))
    rows.append(_check_row('eyre_identity', eyre, 1e-12, eyre <= 1e-12))

    m, h = 5.0, 1e-4
    jump = 0.0
    for knot in (-2.0, 0.0, m, m + 2.0):
        left = np.asarray(tm_smooth(knot - np.arange(3) * h, m))
        right = np.asarray(tm_smooth(knot + np.arange(3) * h, m))
        d1 = abs((left[0] - left[1]) / h - (right[1] - right[0]) / h)
        d2 = abs((left[0] - 2 * left[1] + left[2]) / h ** 2 - (right[2] - 2 * right[1] + right[0]) / h ** 2)
        jump = max(jump, d1, d2)
    rows.append(_check_row('tm_smooth_c2', jump, 1e-3, jump <= 1e-3))
    return rows


def budget_checks(traj: Trajectory) -> List[Dict[str, Any]]:
    """ Mass, telescoping, gradient budget and pointwise bound checks on one trajectory

    :param Trajectory traj:
        The trajectory
    :returns:
        One row per check with its value, threshold and pass flag
    """
    report = energy_report(traj)
    df = report.frame
    tol = traj.params.bound_tol
    alpha = traj.params.model.alpha
    u_min = float(np.min(traj.stack('u')))
    z_min = float(np.min(traj.stack('z')))
    v = traj.stack('v')
    v_excess = float(np.max(v) - np.max(v[0]))
    z_increase = float(np.max(np.diff(df['z_max'].to_numpy()), initial=0.0))
    return [
        _check_row('mass_drift', df['mass_drift'].max(), MASS_RTOL, report.passes['mass']),
        _check_row('z_telescoping_slack', df['z_slack'].min(), -BUDGET_TOL, report.passes['z_telescoping']),
        _check_row('gradient_budget_slack', df['gradient_slack'].min(), -BUDGET_TOL, report.passes['gradient_budget']),
        _check_row('z_max_increase', z_increase, BUDGET_TOL, report.passes['z_max_nonincreasing']),
        _check_row('u_min', u_min, -tol, u_min >= -tol),
        _check_row('z_min_minus_alpha', z_min - alpha, -tol, z_min - alpha >= -tol),
        _check_row('v_min', float(np.min(v)), -tol, float(np.min(v)) >= -tol),
        _check_row('v_max_excess', v_excess, tol, v_excess <= tol),
    ]
