"""
Symmetric quadrature on the reference triangle.

Points are barycentric coordinates; weights are normalized to sum to 1, so that
    ∫_K f ≈ |K| · Σ_q w_q f(x_q).
"""
from dataclasses import dataclass
from math import factorial

import numpy as np


@dataclass(frozen=True, eq=False)
class Quadrature:
    """
    A quadrature rule on the reference triangle.

    Attributes:
        points (np.ndarray):
            Barycentric coordinates, shape (nq, 3).

        weights (np.ndarray):
            Weights summing to 1, shape (nq,).

        degree (int):
            Highest total polynomial degree integrated exactly.
    """
    points:  np.ndarray
    weights: np.ndarray
    degree:  int

    @property
    def num_points(self) -> int:
        return len(self.weights)


def _orbit_3(a: float, b: float):
    return [(a, b, b), (b, a, b), (b, b, a)]


def _orbit_6(a: float, b: float, c: float):
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def degree_six_rule() -> Quadrature:
    """
    The 12-point degree-6 rule with positive weights and interior points.
    """
    orbits = [
        (0.050844906370206816921, _orbit_3(0.87382197101699554332, 0.063089014491502228340)),
        (0.11678627572637936603,  _orbit_3(0.50142650965817915742, 0.24928674517091042129)),
        (0.082851075618373575194, _orbit_6(0.63650249912139864723, 0.31035245103378440542,
                                           0.053145049844816947353)),
    ]

    points, weights = [], []
    for weight, members in orbits:
        for member in members:
            points.append(member)
            weights.append(weight)

    weights = np.array(weights)
    return Quadrature(points=np.array(points), weights=weights / weights.sum(), degree=6)


DEFAULT_QUADRATURE = degree_six_rule()


def barycentric_monomial_integral(i: int, j: int, k: int) -> float:
    """
    Exact normalized integral of λ0^i λ1^j λ2^k over a triangle (divided by its area).

        (1/|K|) ∫_K λ0^i λ1^j λ2^k = 2 · i! j! k! / (i + j + k + 2)!
    """
    return 2.0 * factorial(i) * factorial(j) * factorial(k) / factorial(i + j + k + 2)


__all__ = [
    'DEFAULT_QUADRATURE',
    'Quadrature',
    'barycentric_monomial_integral',
    'degree_six_rule',
]
