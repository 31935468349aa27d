"""
File: solutions.py
Description:
    Closed-form manufactured solutions of the CHNS system on the unit square, together with the forcing that makes
    them exact:

        f_φ = ∂tφ + u·∇φ − εΔμ
        f_u = ∂tu − ηΔu + (u·∇)u + ∇p − γμ∇φ
        μ   = (1/ε)(φ³ − φ) − εΔφ

    All callables take (x, y, t) with `x`, `y` arrays of any matching shape; vector quantities are returned as
    pairs of arrays.
"""
# Standard library imports
from abc import ABC, abstractmethod
from typing import Callable, Dict, Tuple, Type

# Third-party imports
import numpy as np

# Package imports
from chns_fem.errors import UnknownSolutionError
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.projections import ScalarField, VectorField
from chns_fem.scheme import Forcing, InitialData, PhysParams


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('mms.solutions')

PI = np.pi


class ManufacturedSolution(ABC):
    """
    A smooth exact solution with all derivatives needed to build the forcing and the error norms.

    Subclasses provide φ, the stream of derivatives of φ and u, and p; μ and the forcings are derived here.

    Parameters:
        params (PhysParams):
            The parameters the forcing is built for.
    """
    name = None

    def __init__(self, params: PhysParams = None):
        self.__params = params or PhysParams()

    @property
    def params(self) -> PhysParams:
        return self.__params

    # phase field
    @abstractmethod
    def phi(self, x, y, t): ...

    @abstractmethod
    def phi_grad(self, x, y, t): ...

    @abstractmethod
    def phi_t(self, x, y, t): ...

    @abstractmethod
    def phi_lap(self, x, y, t): ...

    @abstractmethod
    def phi_lap_grad(self, x, y, t):
        """
        ∇Δφ.
        """

    @abstractmethod
    def phi_bilap(self, x, y, t):
        """
        Δ²φ.
        """

    # velocity
    @abstractmethod
    def u(self, x, y, t): ...

    @abstractmethod
    def u_grad(self, x, y, t):
        """
        ((∂x u1, ∂y u1), (∂x u2, ∂y u2)).
        """

    @abstractmethod
    def u_t(self, x, y, t): ...

    @abstractmethod
    def u_lap(self, x, y, t): ...

    # pressure
    @abstractmethod
    def p(self, x, y, t): ...

    @abstractmethod
    def p_grad(self, x, y, t): ...

    def u_div(self, x, y, t):
        (u1x, _), (_, u2y) = self.u_grad(x, y, t)
        return u1x + u2y

    def mu(self, x, y, t):
        eps = self.__params.epsilon
        phi = self.phi(x, y, t)
        return (phi ** 3 - phi) / eps - eps * self.phi_lap(x, y, t)

    def mu_grad(self, x, y, t):
        eps = self.__params.epsilon
        phi = self.phi(x, y, t)
        gx, gy = self.phi_grad(x, y, t)
        lx, ly = self.phi_lap_grad(x, y, t)
        g = (3.0 * phi ** 2 - 1.0) / eps
        return g * gx - eps * lx, g * gy - eps * ly

    def mu_lap(self, x, y, t):
        """
        Δμ = (6φ/ε)|∇φ|² + ((3φ² − 1)/ε)Δφ − εΔ²φ.
        """
        eps = self.__params.epsilon
        phi = self.phi(x, y, t)
        gx, gy = self.phi_grad(x, y, t)
        return (6.0 * phi / eps * (gx ** 2 + gy ** 2)
                + (3.0 * phi ** 2 - 1.0) / eps * self.phi_lap(x, y, t)
                - eps * self.phi_bilap(x, y, t))

    def f_phi(self, x, y, t):
        u1, u2 = self.u(x, y, t)
        gx, gy = self.phi_grad(x, y, t)
        return self.phi_t(x, y, t) + u1 * gx + u2 * gy - self.__params.epsilon * self.mu_lap(x, y, t)

    def f_u(self, x, y, t):
        prm = self.__params
        u1, u2 = self.u(x, y, t)
        (u1x, u1y), (u2x, u2y) = self.u_grad(x, y, t)
        ut1, ut2 = self.u_t(x, y, t)
        l1, l2 = self.u_lap(x, y, t)
        px, py = self.p_grad(x, y, t)
        gx, gy = self.phi_grad(x, y, t)
        mu = self.mu(x, y, t)

        f1 = ut1 - prm.eta * l1 + u1 * u1x + u2 * u1y + px - prm.gamma * mu * gx
        f2 = ut2 - prm.eta * l2 + u1 * u2x + u2 * u2y + py - prm.gamma * mu * gy

        return f1, f2

    def phase_field(self, t: float) -> ScalarField:
        return ScalarField(value=_at(self.phi, t), gradient=_at(self.phi_grad, t))

    def mu_field(self, t: float) -> ScalarField:
        return ScalarField(value=_at(self.mu, t), gradient=_at(self.mu_grad, t))

    def pressure_field(self, t: float) -> ScalarField:
        return ScalarField(value=_at(self.p, t), gradient=_at(self.p_grad, t))

    def velocity_field(self, t: float) -> VectorField:
        return VectorField(value=_at(self.u, t), gradient=_at(self.u_grad, t), divergence=_at(self.u_div, t))

    def forcing(self) -> Forcing:
        return Forcing(phi=self.f_phi, u=self.f_u)

    def initial_data(self, tau: float) -> InitialData:
        """
        Exact fields at t = 0 and t = τ, ready for exact-mode initialization.
        """
        return InitialData(
            phi0=self.phase_field(0.0),
            u0=self.velocity_field(0.0),
            p0=self.pressure_field(0.0),
            phi_tau=self.phase_field(tau),
            u_tau=self.velocity_field(tau),
            p_tau=self.pressure_field(tau),
        )

    def __repr__(self):
        return f'{type(self).__name__}(name={self.name!r}, {self.__params})'


def _at(func: Callable, t: float) -> Callable:
    return lambda x, y: func(x, y, t)


def _zeros(x):
    return 0.0 * np.asarray(x, dtype=float)


class TrigonometricSolution(ManufacturedSolution):
    """
    φ = cos(πx)cos(πy)cos t,  u = curl(sin²(πx)sin²(πy)sin t),  p = sin(πx)cos(πy)sin t.

    φ and μ have vanishing normal derivatives, u vanishes on the boundary and p has zero mean.
    """
    name = 'default'

    def phi(self, x, y, t):
        return np.cos(PI * x) * np.cos(PI * y) * np.cos(t)

    def phi_grad(self, x, y, t):
        c = np.cos(t)
        return (-PI * np.sin(PI * x) * np.cos(PI * y) * c,
                -PI * np.cos(PI * x) * np.sin(PI * y) * c)

    def phi_t(self, x, y, t):
        return -np.cos(PI * x) * np.cos(PI * y) * np.sin(t)

    def phi_lap(self, x, y, t):
        return -2.0 * PI ** 2 * self.phi(x, y, t)

    def phi_lap_grad(self, x, y, t):
        gx, gy = self.phi_grad(x, y, t)
        return -2.0 * PI ** 2 * gx, -2.0 * PI ** 2 * gy

    def phi_bilap(self, x, y, t):
        return 4.0 * PI ** 4 * self.phi(x, y, t)

    def u(self, x, y, t):
        s = np.sin(t)
        return (0.5 * PI * (1.0 - np.cos(2 * PI * x)) * np.sin(2 * PI * y) * s,
                -0.5 * PI * np.sin(2 * PI * x) * (1.0 - np.cos(2 * PI * y)) * s)

    def u_grad(self, x, y, t):
        s = np.sin(t)
        s2x, c2x = np.sin(2 * PI * x), np.cos(2 * PI * x)
        s2y, c2y = np.sin(2 * PI * y), np.cos(2 * PI * y)
        k = PI ** 2 * s
        return ((k * s2x * s2y, k * (1.0 - c2x) * c2y),
                (-k * c2x * (1.0 - c2y), -k * s2x * s2y))

    def u_t(self, x, y, t):
        c = np.cos(t)
        return (0.5 * PI * (1.0 - np.cos(2 * PI * x)) * np.sin(2 * PI * y) * c,
                -0.5 * PI * np.sin(2 * PI * x) * (1.0 - np.cos(2 * PI * y)) * c)

    def u_lap(self, x, y, t):
        k = 2.0 * PI ** 3 * np.sin(t)
        return (k * np.sin(2 * PI * y) * (2.0 * np.cos(2 * PI * x) - 1.0),
                -k * np.sin(2 * PI * x) * (2.0 * np.cos(2 * PI * y) - 1.0))

    def p(self, x, y, t):
        return np.sin(PI * x) * np.cos(PI * y) * np.sin(t)

    def p_grad(self, x, y, t):
        s = np.sin(t)
        return (PI * np.cos(PI * x) * np.cos(PI * y) * s,
                -PI * np.sin(PI * x) * np.sin(PI * y) * s)


class EquilibriumSolution(ManufacturedSolution):
    """
    The pure phase φ ≡ 1 at rest: μ = 0, u = 0, p = 0 and no forcing. Every discrete space represents it exactly.
    """
    name = 'equilibrium'

    def phi(self, x, y, t):
        return _zeros(x) + 1.0

    def phi_grad(self, x, y, t):
        return _zeros(x), _zeros(x)

    def phi_t(self, x, y, t):
        return _zeros(x)

    def phi_lap(self, x, y, t):
        return _zeros(x)

    def phi_lap_grad(self, x, y, t):
        return _zeros(x), _zeros(x)

    def phi_bilap(self, x, y, t):
        return _zeros(x)

    def u(self, x, y, t):
        return _zeros(x), _zeros(x)

    def u_grad(self, x, y, t):
        return (_zeros(x), _zeros(x)), (_zeros(x), _zeros(x))

    def u_t(self, x, y, t):
        return _zeros(x), _zeros(x)

    def u_lap(self, x, y, t):
        return _zeros(x), _zeros(x)

    def p(self, x, y, t):
        return _zeros(x)

    def p_grad(self, x, y, t):
        return _zeros(x), _zeros(x)


SOLUTIONS: Dict[str, Type[ManufacturedSolution]] = {
    cls.name: cls for cls in (TrigonometricSolution, EquilibriumSolution)
}


def registered_solutions() -> Tuple[str, ...]:
    return tuple(sorted(SOLUTIONS))


def builtin_solution(name: str, params: PhysParams = None) -> ManufacturedSolution:
    """
    Look up a registered manufactured solution.

    Parameters:
        name (str):
            'default' or 'equilibrium'.

        params (PhysParams):
            Parameters the μ and forcing expressions are built for (defaults to `PhysParams()`).

    Raises:
        UnknownSolutionError:
            If `name` is not registered.
    """
    try:
        cls = SOLUTIONS[name]
    except KeyError:
        raise UnknownSolutionError(
            f'{name!r} is not one of {", ".join(registered_solutions())}', name=name
        ) from None

    MOD_LOGGER.get_child('builtin_solution').debug(f'Building manufactured solution {name!r}')

    return cls(params)


__all__ = [
    'EquilibriumSolution',
    'ManufacturedSolution',
    'SOLUTIONS',
    'TrigonometricSolution',
    'builtin_solution',
    'registered_solutions',
]
