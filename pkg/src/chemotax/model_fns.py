""" Pointwise nonlinear ingredients of the truncated chemotaxis-consumption model

Every scalar function accepts a float or a numpy array and is applied elementwise.
Scalar inputs return a python float.

Classes:

* :py:class:`ModelParams`: Consumption power, truncation level and shift

Functions:

* :py:func:`tm_cap`: Upper truncation min(r, m)
* :py:func:`tm_smooth`: C2 truncation, bounded between -1 and m+1
* :py:func:`truncate`: Dispatch to one of the truncations by name
* :py:func:`consumption`: Truncated consumption rate T(u)^s
* :py:func:`consumption_derivative`: Derivative of :py:func:`consumption` in u
* :py:func:`gm_prime`: Derivative of the truncated energy primitive
* :py:func:`gm_primitive`: The truncated energy primitive
* :py:func:`g_energy_density`: The untruncated energy density
* :py:func:`energy_E`: Energy of a (u, z) pair on a grid

"""

# Imports
from dataclasses import dataclass, asdict
from typing import Any, Dict, Union

# 3rd party
import numpy as np

from scipy import special

# Our own imports
from .errors import DomainError
from .grid import Field, integrate, face_norm_squared, grad_faces

ArrayLike = Union[float, np.ndarray]

TRUNCATIONS = ('cap', 'smooth')

NEGATIVE_U_TOL = 1e-12

# Classes


@dataclass(frozen=True)
class ModelParams:
    """ Parameters of the nonlinear model

    :param float s:
        Consumption power, at least 1
    :param float m:
        Truncation level, at least 1
    :param float alpha:
        Shift in z = sqrt(v + alpha**2), in (0, alpha_max]
    :param float alpha_max:
        Largest admissible shift
    """

    s: float = 1.0
    m: float = 10.0
    alpha: float = 0.1
    alpha_max: float = 0.1

    def __post_init__(self):
        for name in ('s', 'm', 'alpha', 'alpha_max'):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.number)) or not np.isfinite(value):
                raise ValueError(f'Expected a finite number for "{name}", got {value!r}')
            object.__setattr__(self, name, float(value))
        if self.s < 1:
            raise ValueError(f'Expected s >= 1, got s={self.s}')
        if self.m < 1:
            raise ValueError(f'Expected m >= 1, got m={self.m}')
        if not 0 < self.alpha <= self.alpha_max:
            raise ValueError(f'Expected 0 < alpha <= {self.alpha_max}, got alpha={self.alpha}')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

# Helpers


def _as_array(r: ArrayLike) -> np.ndarray:
    return np.asarray(r, dtype=np.float64)


def _as_output(result: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(result)
    return result


def _hermite_upper(t: np.ndarray) -> np.ndarray:
    """ m + 2*H1(t) + H5(t) without the m """
    t3 = t ** 3
    return 2.0 * (t - 6.0 * t3 + 8.0 * t3 * t - 3.0 * t3 * t * t) + (10.0 * t3 - 15.0 * t3 * t + 6.0 * t3 * t * t)


def _hermite_lower(t: np.ndarray) -> np.ndarray:
    """ -H0(t) + 2*H4(t) """
    t3 = t ** 3
    return -(1.0 - 10.0 * t3 + 15.0 * t3 * t - 6.0 * t3 * t * t) + 2.0 * (-4.0 * t3 + 7.0 * t3 * t - 3.0 * t3 * t * t)

# Truncations


def tm_cap(r: ArrayLike, m: float) -> ArrayLike:
    """ Upper truncation: identity below m, m above """
    return _as_output(np.minimum(_as_array(r), m), r)


def tm_smooth(r: ArrayLike, m: float) -> ArrayLike:
    """ C2 truncation of the identity

    Identity on [0, m], -1 below -2, m+1 above m+2, joined by quintic Hermite
    blends on (-2, 0) and (m, m+2) matching value, slope and curvature at the knots.

    :param ndarray r:
        The values to truncate
    :param float m:
        The truncation level
    :returns:
        The truncated values
    """
    values = np.atleast_1d(_as_array(r))
    result = values.copy()
    result[values <= -2.0] = -1.0
    result[values >= m + 2.0] = m + 1.0

    lower = (values > -2.0) & (values < 0.0)
    result[lower] = _hermite_lower((values[lower] + 2.0) / 2.0)
    upper = (values > m) & (values < m + 2.0)
    result[upper] = m + _hermite_upper((values[upper] - m) / 2.0)
    return _as_output(result.reshape(np.shape(r)), r)


def _tm_smooth_derivative(values: np.ndarray, m: float) -> np.ndarray:
    result = np.zeros_like(values)
    inside = (values >= 0.0) & (values <= m)
    result[inside] = 1.0

    lower = (values > -2.0) & (values < 0.0)
    t = (values[lower] + 2.0) / 2.0
    result[lower] = 0.5 * (6.0 * t ** 2 - 4.0 * t ** 3)

    upper = (values > m) & (values < m + 2.0)
    t = (values[upper] - m) / 2.0
    result[upper] = 0.5 * (2.0 - 6.0 * t ** 2 + 4.0 * t ** 3)
    return result


def truncate(r: ArrayLike, m: float, kind: str = 'cap') -> ArrayLike:
    """ Apply the named truncation, either 'cap' or 'smooth' """
    if kind == 'cap':
        return tm_cap(r, m)
    if kind == 'smooth':
        return tm_smooth(r, m)
    raise ValueError(f'Unknown truncation "{kind}", expected one of {TRUNCATIONS}')


def truncate_derivative(r: ArrayLike, m: float, kind: str = 'cap') -> ArrayLike:
    """ Derivative of :py:func:`truncate`, taken as 0 on the cap knot """
    values = np.atleast_1d(_as_array(r))
    if kind == 'cap':
        result = (values < m).astype(np.float64)
    elif kind == 'smooth':
        result = _tm_smooth_derivative(values, m)
    else:
        raise ValueError(f'Unknown truncation "{kind}", expected one of {TRUNCATIONS}')
    return _as_output(result.reshape(np.shape(r)), r)


def consumption(u: ArrayLike, m: float, s: float, kind: str = 'cap') -> ArrayLike:
    """ Truncated consumption rate T(u)^s, negative truncated values clipped to 0 """
    trunc = np.maximum(_as_array(truncate(u, m, kind)), 0.0)
    return _as_output(trunc ** s, u)


def consumption_derivative(u: ArrayLike, m: float, s: float, kind: str = 'cap') -> ArrayLike:
    """ s * T(u)^(s-1) * T'(u), zero wherever T(u) <= 0 """
    trunc = np.atleast_1d(_as_array(truncate(u, m, kind)))
    slope = np.atleast_1d(_as_array(truncate_derivative(u, m, kind)))
    positive = trunc > 0.0
    result = np.zeros_like(trunc)
    result[positive] = s * trunc[positive] ** (s - 1.0) * slope[positive]
    return _as_output(result.reshape(np.shape(u)), u)

# Energy primitives


def gm_prime(r: ArrayLike, params: ModelParams) -> ArrayLike:
    """ Derivative of the truncated primitive

    ln(T(r)) for s = 1, T(r)^(s-1) / (s-1) for s > 1, with the cap truncation.

    :param ndarray r:
        Positive values (non-negative when s > 1)
    :param ModelParams params:
        The model parameters
    :returns:
        g_m'(r)
    """
    values = _as_array(r)
    trunc = np.minimum(values, params.m)
    if params.s == 1.0:
        if np.any(values <= 0):
            raise DomainError(f'gm_prime with s=1 needs r > 0, got min(r)={np.min(values)}')
        return _as_output(np.log(trunc), r)
    if np.any(values < 0):
        raise DomainError(f'gm_prime needs r >= 0, got min(r)={np.min(values)}')
    return _as_output(trunc ** (params.s - 1.0) / (params.s - 1.0), r)


def _primitive_below_cap(r: np.ndarray, s: float) -> np.ndarray:
    if s == 1.0:
        return special.xlogy(r, r) - r
    return r ** s / (s * (s - 1.0))


def gm_primitive(r: ArrayLike, params: ModelParams) -> ArrayLike:
    """ Truncated energy primitive g_m(r), integral of g_m' from 0 to r

    Closed form below m, continued linearly above m with slope g_m'(m).

    :param ndarray r:
        Non-negative values
    :param ModelParams params:
        The model parameters
    :returns:
        g_m(r)
    """
    values = _as_array(r)
    if np.any(values < 0):
        raise DomainError(f'gm_primitive needs r >= 0, got min(r)={np.min(values)}')
    m, s = params.m, params.s
    below = _primitive_below_cap(np.minimum(values, m), s)
    slope_at_m = np.log(m) if s == 1.0 else m ** (s - 1.0) / (s - 1.0)
    result = below + slope_at_m * np.maximum(values - m, 0.0)
    return _as_output(result, r)


def g_energy_density(u: ArrayLike, s: float) -> ArrayLike:
    """ (u+1) ln(u+1) - u for s = 1, u^s / (s(s-1)) for s > 1 """
    values = _as_array(u)
    if np.any(values < 0):
        raise DomainError(f'g_energy_density needs u >= 0, got min(u)={np.min(values)}')
    if s == 1.0:
        result = (values + 1.0) * np.log1p(values) - values
    else:
        result = values ** s / (s * (s - 1.0))
    return _as_output(result, u)


def energy_E(u: Field, z: Field, s: float) -> float:
    """ s/4 times the integral of g(u) plus half the squared gradient norm of z

    :param Field u:
        Cell density, non-negative up to round-off
    :param Field z:
        The shifted chemical variable
    :param float s:
        Consumption power
    :returns:
        The energy value
    """
    if np.any(u.values < -NEGATIVE_U_TOL):
        raise DomainError(f'energy_E needs u >= 0, got min(u)={np.min(u.values)}')
    density = u.with_values(g_energy_density(np.maximum(u.values, 0.0), s))
    return 0.25 * s * integrate(density) + 0.5 * face_norm_squared(grad_faces(z))
