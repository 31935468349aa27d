"""
File: errors.py
Description:
    Exception hierarchy for the CHNS finite element solver. Every error carries a default message and may be
    extended by the caller with additional information.
"""
from typing import Optional

from inspyre_toolbox.exceptional import CustomRootException


class CHNSError(CustomRootException):
    """
    Base class for all solver errors.

    Class Attributes:
        default_message (str): Read-Only. The default message for the error.
    """
    default_message = 'An error occurred in the CHNS solver!'

    def __init__(self, message: Optional[str] = None, skip_print: bool = False) -> None:
        """
        Initializes the error.

        Parameters:
            message (Optional[str]):
                Additional information to append to the default message.

            skip_print (bool):
                Passed through to `CustomRootException`.
        """
        if message is not None:
            self.default_message = f"{self.default_message}\n\n  Additional information from caller:\n    {message}"

        super().__init__(message=self.default_message, skip_print=skip_print)


class MeshError(CHNSError, ValueError):
    """
    Raised when a mesh cannot be built from the given inputs.
    """
    default_message = 'Invalid mesh construction request!'


class SpaceMismatchError(CHNSError, ValueError):
    """
    Raised when fields or spaces that must share a mesh (or a kind) do not.
    """
    default_message = 'Function spaces do not match!'


class DimensionMismatchError(CHNSError, ValueError):
    """
    Raised when a matrix and a right-hand side (or a constraint) disagree in size.
    """
    default_message = 'Linear system dimensions do not match!'


class SingularSystemError(CHNSError):
    """
    Raised when a sparse factorization meets a zero pivot.

    Attributes:
        pivot (Optional[int]):
            Index (in the original column numbering) of the offending pivot, when it could be located.
    """
    default_message = 'Linear system is singular!'

    def __init__(self, message: Optional[str] = None, pivot: Optional[int] = None, skip_print: bool = False):
        self.pivot = pivot
        if pivot is not None:
            self.default_message = f'Linear system is singular at pivot {pivot}!'

        super().__init__(message=message, skip_print=skip_print)


class NotPositiveDefiniteError(CHNSError):
    """
    Raised when a symmetric factorization breaks down on a non-positive pivot.

    Attributes:
        pivot (Optional[int]):
            Index of the first non-positive pivot (original numbering).
    """
    default_message = 'Matrix is not symmetric positive definite!'

    def __init__(self, message: Optional[str] = None, pivot: Optional[int] = None, skip_print: bool = False):
        self.pivot = pivot
        if pivot is not None:
            self.default_message = f'Matrix is not symmetric positive definite (breakdown at pivot {pivot})!'

        super().__init__(message=message, skip_print=skip_print)


class NotMeanZeroError(CHNSError, ValueError):
    """
    Raised when an operation defined on mean-zero functions receives a field with nonzero mean.
    """
    default_message = 'Field does not have zero mean!'


class MissingDataError(CHNSError, ValueError):
    """
    Raised when required input data (exact fields, run history) was not supplied.
    """
    default_message = 'Required data is missing!'


class InvalidParameterError(CHNSError, ValueError):
    """
    Raised when a physical or numerical parameter is out of range.
    """
    default_message = 'Invalid parameter value!'


class NewtonConvergenceError(CHNSError):
    """
    Raised when the Newton iteration of a time step fails to reach its tolerance.

    Attributes:
        report (StepReport):
            The report of the rejected step.
    """
    default_message = 'Newton iteration did not converge; step rejected!'

    def __init__(self, message: Optional[str] = None, report=None, skip_print: bool = False):
        self.report = report
        super().__init__(message=message, skip_print=skip_print)


class UnknownSolutionError(CHNSError, KeyError):
    """
    Raised when a manufactured solution name is not registered.
    """
    default_message = 'No manufactured solution registered under that name!'

    def __init__(self, message: Optional[str] = None, name: Optional[str] = None, skip_print: bool = False):
        if name is not None:
            self.default_message = f"'{name}' is not a registered manufactured solution!"

        super().__init__(message=message, skip_print=skip_print)


class ConfigError(CHNSError, ValueError):
    """
    Raised when a run configuration is invalid.

    Attributes:
        key_path (Optional[str]):
            Dotted path of the offending key (e.g. 'params.epsilon').
    """
    default_message = 'Invalid run configuration!'

    def __init__(self, message: Optional[str] = None, key_path: Optional[str] = None, skip_print: bool = False):
        self.key_path = key_path
        if key_path is not None:
            self.default_message = f"Invalid run configuration at '{key_path}'!"

        super().__init__(message=message, skip_print=skip_print)


class InvariantViolationError(CHNSError):
    """
    Raised when a run breaks a conservation or energy invariant it must hold.
    """
    default_message = 'A solver invariant was violated!'


class GronwallInputError(CHNSError, ValueError):
    """
    Raised when a discrete Gronwall check receives invalid sequences or constants.
    """
    default_message = 'Invalid discrete Gronwall input!'


class SimulationNotRunningError(CHNSError):
    """
    Raised when a method is called on a Simulation that is not running, but should be to perform the action.
    """
    default_message = 'The simulation is not running, can not perform action on a non-running instance!'


class VtkFormatError(CHNSError, ValueError):
    """
    Raised when a VTK legacy file does not match the layout it declares.
    """
    default_message = 'Malformed VTK legacy file!'


__all__ = [
    'CHNSError',
    'ConfigError',
    'DimensionMismatchError',
    'GronwallInputError',
    'InvalidParameterError',
    'InvariantViolationError',
    'MeshError',
    'MissingDataError',
    'NewtonConvergenceError',
    'NotMeanZeroError',
    'NotPositiveDefiniteError',
    'SimulationNotRunningError',
    'SingularSystemError',
    'SpaceMismatchError',
    'UnknownSolutionError',
    'VtkFormatError',
]
