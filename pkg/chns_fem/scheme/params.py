"""
Physical and numerical parameters of a run.
"""
from dataclasses import dataclass

import numpy as np

from chns_fem.errors import InvalidParameterError


def _positive(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
        raise InvalidParameterError(f'{name} must be a real number, got {value!r}')

    if not np.isfinite(value) or value <= 0:
        raise InvalidParameterError(f'{name} must be strictly positive, got {value!r}')

    return float(value)


@dataclass(frozen=True)
class PhysParams:
    """
    Dimensionless model parameters.

    Attributes:
        epsilon (float):
            Interface width.

        eta (float):
            Viscosity, 1/Re.

        gamma (float):
            Capillary coefficient, 1/We*.
    """
    epsilon: float = 0.1
    eta:     float = 1.0
    gamma:   float = 1.0

    def __post_init__(self):
        for name in ('epsilon', 'eta', 'gamma'):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))


@dataclass(frozen=True)
class TimeGrid:
    """
    Uniform partition 0 = t_0 < ... < t_M = T with step `tau`.
    """
    tau:   float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, 'tau', _positive('tau', self.tau))

        if isinstance(self.steps, bool) or not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise InvalidParameterError(f'steps must be a positive integer, got {self.steps!r}')

    @property
    def final_time(self) -> float:
        return self.steps * self.tau

    def time(self, m: float) -> float:
        """
        t_m = m·τ (half-integer `m` gives the midpoint times).
        """
        return m * self.tau

    @classmethod
    def to_time(cls, tau: float, final_time: float) -> 'TimeGrid':
        """
        The grid of step `tau` reaching `final_time` (rounded to the nearest whole step count).
        """
        return cls(tau=tau, steps=max(1, int(round(final_time / tau))))


@dataclass(frozen=True)
class NewtonSettings:
    """
    Attributes:
        tol (float):
            Tolerance on the scaled residual ‖R‖∞ / max(1, ‖b‖∞).

        max_iters (int):
            Iterations allowed before the step is rejected.

        max_backtracks (int):
            Step halvings allowed per iteration when the residual grows.
    """
    tol:            float = 1e-11
    max_iters:      int   = 30
    max_backtracks: int   = 10

    def __post_init__(self):
        object.__setattr__(self, 'tol', _positive('tol', self.tol))

        for name in ('max_iters', 'max_backtracks'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
                raise InvalidParameterError(f'{name} must be a non-negative integer, got {value!r}')

        if self.max_iters < 1:
            raise InvalidParameterError('max_iters must be at least 1')


__all__ = [
    'NewtonSettings',
    'PhysParams',
    'TimeGrid',
]
