"""
File: projections.py
Description:
    The discretisation context shared by the stepper and diagnostics, and the projection operators built on it:
    Ritz projection, Stokes projection, discrete Laplacian Δ_h, the inverse Neumann Laplacian T_h and the
    discrete negative norm ‖·‖_{−1,h}.
"""
# Standard library imports
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Tuple, Union

# Third-party imports
import numpy as np
import scipy.sparse as sp

# Inspyre-Softworks imports
from inspy_logger import Loggable

# Package imports
from chns_fem.errors import InvalidParameterError, NotMeanZeroError, SpaceMismatchError
from chns_fem.fem import (
    FieldVector,
    FunctionSpace,
    assemble_divergence,
    assemble_gradient_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    integrate,
    p1_mean_zero_space,
    p1_space,
    p2_vector_space,
)
from chns_fem.linear_solver import LinearSystem, MeanConstraint, solve_direct, solve_spd
from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER
from chns_fem.mesh import Mesh


# -- END IMPORTS --

MOD_LOGGER = PARENT_LOGGER.get_child('projections')

MEAN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class ScalarField:
    """
    An analytic scalar field with its gradient, both callables of (x, y).
    """
    value:    Callable
    gradient: Callable


@dataclass(frozen=True)
class VectorField:
    """
    An analytic vector field of (x, y).

    Attributes:
        value (Callable):
            Returns (u1, u2).

        gradient (Callable):
            Returns ((∂x u1, ∂y u1), (∂x u2, ∂y u2)).

        divergence (Callable):
            Returns ∇·u.
    """
    value:      Callable
    gradient:   Callable
    divergence: Callable


def zero_scalar_field() -> ScalarField:
    return ScalarField(value=lambda x, y: 0.0 * x, gradient=lambda x, y: (0.0 * x, 0.0 * x))


def constant_scalar_field(c: float) -> ScalarField:
    return ScalarField(value=lambda x, y: c + 0.0 * x, gradient=lambda x, y: (0.0 * x, 0.0 * x))


def zero_vector_field() -> VectorField:
    return VectorField(
        value=lambda x, y: (0.0 * x, 0.0 * x),
        gradient=lambda x, y: ((0.0 * x, 0.0 * x), (0.0 * x, 0.0 * x)),
        divergence=lambda x, y: 0.0 * x,
    )


class ProjectionContext(Loggable):
    """
    The finite element spaces of one mesh together with their (lazily assembled, cached) constant matrices.

    Parameters:
        mesh (Mesh):
            The triangulation.

        eta (float):
            Viscosity used by the Stokes projection.

    Properties:
        phase_space:     P1, holds φ and μ.
        velocity_space:  P2 vector with homogeneous Dirichlet DOFs.
        pressure_space:  P1 mean-zero.
    """
    def __init__(self, mesh: Mesh, eta: float = 1.0):
        super().__init__(MOD_LOGGER)

        if not isinstance(mesh, Mesh):
            raise TypeError(f'mesh must be of type `Mesh`, not {type(mesh)}')

        self.__mesh        = mesh
        self.__fingerprint = mesh.fingerprint
        self.__eta         = None

        self.eta = eta

        self.__phase_space    = p1_space(mesh)
        self.__velocity_space = p2_vector_space(mesh)
        self.__pressure_space = p1_mean_zero_space(mesh)

        self.class_logger.debug(f'Context for {mesh!r}: {self.unknown_count} scheme unknowns')

    @property
    def eta(self) -> float:
        return self.__eta

    @eta.setter
    def eta(self, new):
        if isinstance(new, bool) or not isinstance(new, (int, float)):
            raise TypeError(f'eta must be of type `float`, not {type(new)}')

        if not new > 0:
            raise InvalidParameterError(f'eta must be positive, got {new!r}')

        self.__eta = float(new)

    @property
    def mesh(self) -> Mesh:
        return self.__mesh

    @property
    def fingerprint(self) -> str:
        return self.__fingerprint

    @property
    def phase_space(self) -> FunctionSpace:
        return self.__phase_space

    @property
    def velocity_space(self) -> FunctionSpace:
        return self.__velocity_space

    @property
    def pressure_space(self) -> FunctionSpace:
        return self.__pressure_space

    @property
    def unknown_count(self) -> int:
        """
        Size of the bordered Newton system: φ, μ, free velocity, pressure and two multipliers.
        """
        return 3 * self.__phase_space.dof_count + len(self.__velocity_space.free_dofs) + 2

    def check_fingerprint(self):
        """
        Raises:
            SpaceMismatchError:
                If the mesh changed underneath the cached matrices.
        """
        if self.__mesh.fingerprint != self.__fingerprint:
            raise SpaceMismatchError('cached matrices no longer match the mesh')

    def require_phase(self, field: FieldVector, what: str = 'field'):
        if not field.space.is_p1 or not field.space.same_mesh(self.__phase_space):
            raise SpaceMismatchError(f'{what} must be a P1 field on the context mesh, got {field!r}')

    def require_velocity(self, field: FieldVector, what: str = 'field'):
        if not field.space.is_vector or not field.space.same_mesh(self.__velocity_space):
            raise SpaceMismatchError(f'{what} must be a velocity field on the context mesh, got {field!r}')

    @cached_property
    def mass(self) -> sp.csr_matrix:
        return assemble_mass(self.__phase_space)

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        return assemble_stiffness(self.__phase_space)

    @cached_property
    def velocity_mass(self) -> sp.csr_matrix:
        return assemble_mass(self.__velocity_space)

    @cached_property
    def velocity_stiffness(self) -> sp.csr_matrix:
        return assemble_stiffness(self.__velocity_space)

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        return assemble_divergence(self.__velocity_space, self.__pressure_space)

    @cached_property
    def mass_vector(self) -> np.ndarray:
        """
        (1, ψ_i) for every P1 basis function.
        """
        return np.asarray(self.mass.sum(axis=1)).reshape(-1)

    @property
    def free_velocity_dofs(self) -> np.ndarray:
        return self.__velocity_space.free_dofs

    @cached_property
    def velocity_mass_free(self) -> sp.csr_matrix:
        free = self.free_velocity_dofs
        return self.velocity_mass[free][:, free].tocsr()

    @cached_property
    def velocity_stiffness_free(self) -> sp.csr_matrix:
        free = self.free_velocity_dofs
        return self.velocity_stiffness[free][:, free].tocsr()

    @cached_property
    def divergence_free(self) -> sp.csr_matrix:
        return self.divergence[:, self.free_velocity_dofs].tocsr()

    def expand_velocity(self, free_values: np.ndarray) -> FieldVector:
        coeffs = np.zeros(self.__velocity_space.dof_count)
        coeffs[self.free_velocity_dofs] = free_values
        return FieldVector(self.__velocity_space, coeffs)

    def mass_of(self, field: FieldVector) -> float:
        """
        (φ, 1) for a P1 field.
        """
        self.require_phase(field)
        return float(self.mass_vector @ field.coeffs)


def ritz_project(phi_exact: ScalarField, ctx: ProjectionContext) -> FieldVector:
    """
    Ritz projection R_hφ ∈ S_h:

        a(R_hφ, ξ) = (∇φ, ∇ξ)  for every ξ,    (R_hφ, 1) = (φ, 1).

    The right-hand side is integrated against the analytic gradient; the mean is enforced by a bordering
    multiplier.

    Parameters:
        phi_exact (ScalarField):
            The analytic field and its gradient.

        ctx (ProjectionContext):
            Discretisation context.

    Returns:
        FieldVector:
            The projection, in the phase space.
    """
    space  = ctx.phase_space
    rhs    = assemble_gradient_load(space, phi_exact.gradient)
    target = integrate(space, phi_exact.value)

    system = LinearSystem(ctx.stiffness, rhs, constraints=(MeanConstraint(ctx.mass_vector, target),))
    coeffs = solve_direct(system)

    MOD_LOGGER.get_child('ritz_project').debug(f'Ritz projection with mean {target / ctx.mesh.area:.3e}')

    return FieldVector(space, coeffs)


def _stokes_loads(u_exact: VectorField, p_exact: ScalarField, ctx: ProjectionContext
                  ) -> Tuple[np.ndarray, np.ndarray, float]:
    vel  = ctx.velocity_space
    pres = ctx.pressure_space
    eta  = ctx.eta
    p    = p_exact.value

    def traction(x, y):
        (u1x, u1y), (u2x, u2y) = u_exact.gradient(x, y)
        pv = p(x, y)
        return (eta * u1x - pv, eta * u1y), (eta * u2x, eta * u2y - pv)

    rhs_u = assemble_gradient_load(vel, traction)
    rhs_p = -assemble_load(pres, u_exact.divergence)

    return rhs_u, rhs_p, integrate(pres, p)


def _discrete_stokes_loads(u_h: FieldVector, p_h: FieldVector, ctx: ProjectionContext
                           ) -> Tuple[np.ndarray, np.ndarray, float]:
    ctx.require_velocity(u_h, 'u')
    ctx.require_phase(p_h, 'p')

    rhs_u = ctx.eta * (ctx.velocity_stiffness @ u_h.coeffs) - ctx.divergence.T @ p_h.coeffs
    rhs_p = -(ctx.divergence @ u_h.coeffs)

    return rhs_u, rhs_p, ctx.mass_of(p_h)


def stokes_project(u_exact: Union[VectorField, FieldVector], p_exact: Union[ScalarField, FieldVector],
                   ctx: ProjectionContext) -> Tuple[FieldVector, FieldVector]:
    """
    Stokes projection (P_h u, P_h p) ∈ X_h × S̊_h:

        η a(P_h u − u, v) − c(v, P_h p − p) = 0,    c(P_h u − u, q) = 0.

    Parameters:
        u_exact (Union[VectorField, FieldVector]):
            An analytic velocity, or a P2 velocity already on the context mesh.

        p_exact (Union[ScalarField, FieldVector]):
            An analytic pressure, or a P1 pressure on the context mesh. Must be the same kind as `u_exact`.

        ctx (ProjectionContext):
            Discretisation context.

    Returns:
        tuple:
            (velocity, pressure) FieldVectors.

    Raises:
        SingularSystemError:
            If the discrete saddle system is singular.

        SpaceMismatchError:
            If discrete inputs live on another mesh or in the wrong space.
    """
    pres = ctx.pressure_space
    eta  = ctx.eta
    free = ctx.free_velocity_dofs

    if isinstance(u_exact, FieldVector) and isinstance(p_exact, FieldVector):
        rhs_u, rhs_p, target = _discrete_stokes_loads(u_exact, p_exact, ctx)
    elif isinstance(u_exact, VectorField) and isinstance(p_exact, ScalarField):
        rhs_u, rhs_p, target = _stokes_loads(u_exact, p_exact, ctx)
    else:
        raise TypeError(f'u and p must both be analytic fields or both be FieldVectors, '
                        f'not {type(u_exact)} and {type(p_exact)}')

    rhs_u = rhs_u[free]

    c_free = ctx.divergence_free
    matrix = sp.bmat([
        [eta * ctx.velocity_stiffness_free, -c_free.T],
        [-c_free,                           None],
    ], format='csr')

    nf      = len(free)
    weights = np.concatenate([np.zeros(nf), ctx.mass_vector])

    system   = LinearSystem(matrix, np.concatenate([rhs_u, rhs_p]),
                            constraints=(MeanConstraint(weights, target),))
    solution = solve_direct(system)

    velocity = ctx.expand_velocity(solution[:nf])
    pressure = FieldVector(pres, solution[nf:])

    return velocity, pressure


def discrete_laplacian(v: FieldVector, ctx: ProjectionContext) -> FieldVector:
    """
    Δ_h v ∈ S̊_h defined by (Δ_h v, ξ) = −a(v, ξ) for every ξ ∈ S_h.

    The result has zero mean since a(v, 1) = 0.
    """
    ctx.require_phase(v, 'v')
    coeffs = solve_spd(LinearSystem(ctx.mass, -(ctx.stiffness @ v.coeffs)))

    return FieldVector(ctx.pressure_space, coeffs)


def _require_mean_zero(v: FieldVector, ctx: ProjectionContext, tol: float):
    mean  = ctx.mass_of(v) / ctx.mesh.area
    scale = max(1.0, float(np.abs(v.coeffs).max(initial=0.0)))
    if abs(mean) > tol * scale:
        raise NotMeanZeroError(f'mean value {mean!r} exceeds {tol * scale!r}')


def inverse_laplacian(v: FieldVector, ctx: ProjectionContext, tol: float = MEAN_ZERO_TOL) -> FieldVector:
    """
    T_h v ∈ S̊_h defined by a(T_h v, ξ) = (v, ξ) for every ξ ∈ S_h.

    Raises:
        NotMeanZeroError:
            If `v` does not have zero mean.
    """
    ctx.require_phase(v, 'v')
    _require_mean_zero(v, ctx, tol)

    rhs    = ctx.mass @ v.coeffs
    system = LinearSystem(ctx.stiffness, rhs, constraints=(MeanConstraint(ctx.mass_vector, 0.0),))

    return FieldVector(ctx.pressure_space, solve_spd(system))


def minus_one_norm(v: FieldVector, ctx: ProjectionContext, tol: float = MEAN_ZERO_TOL) -> float:
    """
    ‖v‖_{−1,h} = sqrt((T_h v, v)) for mean-zero `v`.

    Raises:
        NotMeanZeroError:
            If `v` does not have zero mean (it is never projected silently).
    """
    t_v   = inverse_laplacian(v, ctx, tol)
    value = float(t_v.coeffs @ (ctx.mass @ v.coeffs))

    return float(np.sqrt(max(value, 0.0)))


__all__ = [
    'ProjectionContext',
    'ScalarField',
    'VectorField',
    'constant_scalar_field',
    'discrete_laplacian',
    'inverse_laplacian',
    'minus_one_norm',
    'ritz_project',
    'stokes_project',
    'zero_scalar_field',
    'zero_vector_field',
]
