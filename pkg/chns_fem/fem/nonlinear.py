"""
Pointwise nonlinearities of the convex-split double-well term.

Each kernel maps (a, b) = (new, old) phase values to the value of the implicit nonlinear term and its derivative
with respect to `a`.
"""
from enum import Enum

import numpy as np


def chi(a, b):
    """
    χ(a, b) = ½(a² + b²) · (a + b)/2, the two-level average of the cubic term.

    Examples:
        >>> chi(1.0, 1.0)
        1.0
        >>> chi(1.0, -1.0)
        0.0
    """
    return 0.5 * (a * a + b * b) * (0.5 * (a + b))


def chi_derivative(a, b):
    """
    ∂χ/∂a = ½(2a·(a + b)/2 + (a² + b²)/2).
    """
    return 0.5 * (a * (a + b) + 0.5 * (a * a + b * b))


def cube(a, b):
    return a * a * a


def cube_derivative(a, b):
    return 3.0 * a * a + 0.0 * b


class Splitting(Enum):
    """
    Which implicit convex term a time step uses.

    CHI:
        Second-order two-level average χ(φ^{m+1}, φ^m).

    CUBE:
        First-order fully implicit (φ^{m+1})³.
    """
    CHI  = 'chi'
    CUBE = 'cube'

    def evaluate(self, a: np.ndarray, b: np.ndarray):
        """
        Returns:
            tuple:
                (value, derivative with respect to `a`)
        """
        if self is Splitting.CHI:
            return chi(a, b), chi_derivative(a, b)

        return cube(a, b), cube_derivative(a, b)


__all__ = [
    'Splitting',
    'chi',
    'chi_derivative',
    'cube',
    'cube_derivative',
]
