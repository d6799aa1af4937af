""" Exceptions raised by the chemotax toolkit

Every error carries the exit status the command line tool reports for it and
can be rendered as a machine readable dictionary.

Classes:

* :py:class:`ChemotaxError`: Base class for all toolkit errors
* :py:class:`ConfigError`: One or more invalid configuration fields
* :py:class:`DomainError`: Inputs outside the domain of an operation
* :py:class:`SolverError`: A numerical solve failed
* :py:class:`LinearSolverError`: A linear system did not reach tolerance
* :py:class:`NonConvergenceError`: The Picard iteration did not converge
* :py:class:`NumericFailureError`: NaN or Inf appeared in a solve
* :py:class:`StabilityError`: The control violates the step size guard
* :py:class:`InvariantViolation`: A bound, mass or budget check failed after a run

"""

# Imports
from typing import Any, Dict, List, Optional

# Classes


class ChemotaxError(Exception):
    """ Base class for toolkit errors """

    exit_code = 1

    def details(self) -> Dict[str, Any]:
        """ Extra fields to include in the error report """
        return {}

    def to_dict(self) -> Dict[str, Any]:
        """ Convert the error to a JSON serializable dictionary

        :returns:
            A dictionary with the error class, message, exit code and details
        """
        report = {
            'error': type(self).__name__,
            'message': str(self),
            'exit_code': self.exit_code,
        }
        report.update(self.details())
        return report


class ConfigError(ChemotaxError, ValueError):
    """ Invalid configuration, collecting every problem found

    :param list[str] errors:
        Messages, each prefixed with the dotted path of the offending field
    """

    exit_code = 2

    def __init__(self, errors: List[str]):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__('; '.join(self.errors))

    def details(self) -> Dict[str, Any]:
        return {'errors': self.errors}


class DomainError(ChemotaxError, ValueError):
    """ Input data outside the domain of an operation """

    exit_code = 2


class SolverError(ChemotaxError, RuntimeError):
    """ Base class for numerical failures """

    exit_code = 3


class LinearSolverError(SolverError):
    """ A linear solve failed to reach its tolerance

    :param str message:
        Description of the failure
    :param float residual:
        The final residual norm of the solve
    """

    def __init__(self, message: str, residual: float = float('nan')):
        super().__init__(message)
        self.residual = residual

    def details(self) -> Dict[str, Any]:
        return {'residual': self.residual}


class NonConvergenceError(SolverError):
    """ The nonlinear iteration hit its iteration limit

    :param str message:
        Description of the failure
    :param list[float] residual_history:
        The residual after every iteration
    """

    def __init__(self, message: str, residual_history: List[float]):
        super().__init__(message)
        self.residual_history = list(residual_history)

    def details(self) -> Dict[str, Any]:
        return {'residual_history': self.residual_history}


class NumericFailureError(SolverError):
    """ A solve produced NaN or Inf values """


class StabilityError(SolverError):
    """ The control is too large for the time step

    :param str message:
        Description of the failure
    :param float suggested_k:
        A time step that satisfies the guard for this control
    """

    def __init__(self, message: str, suggested_k: Optional[float] = None):
        super().__init__(message)
        self.suggested_k = suggested_k

    def details(self) -> Dict[str, Any]:
        return {'suggested_k': self.suggested_k}


class InvariantViolation(ChemotaxError, RuntimeError):
    """ A bound, conservation law or budget failed beyond tolerance

    :param str message:
        Description of the failure
    :param str check:
        Short name of the invariant that failed
    """

    exit_code = 4

    def __init__(self, message: str, check: str = ''):
        super().__init__(message)
        self.check = check

    def details(self) -> Dict[str, Any]:
        return {'check': self.check}
